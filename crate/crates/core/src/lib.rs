//! Simulation and analysis toolkit for a Kerr-cat-qubit quantum repeater.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catqubit;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod pulse;
pub mod pulseopt;
pub mod qcore;
pub mod repeater;
pub mod transducer;

pub use error::{Error, Result};
pub use qcore::{
    annihilation, cat_state, coherent_state, creation, number, parity_expectation, partial_trace,
    state_fidelity, tensor, CMatrix, CVector, Parity, QOperator, QState, StateKind, Tensor, C64,
};
