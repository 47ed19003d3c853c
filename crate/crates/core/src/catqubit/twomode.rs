//! Two-cavity gates: the beamsplitter-type `G` gate and the seven-stage CNOT.
//!
//! Single-cavity stages act on a two-cavity state as exact product channels:
//! the driven cavity and the idling (stabilized) cavity each evolve under
//! their own Liouvillian, `e^{(𝓛₁ + 𝓛₂)t} = e^{𝓛₁t} e^{𝓛₂t}`. Only `G`
//! couples the cavities; its constant Hamiltonian is propagated on the joint
//! space by a Chebyshev expansion of `e^{𝓛t}`.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    angle_label, cat_basis, g_gate_time, ideal_cnot, ideal_g, loss_ops, x_gate_time, z_gate_time,
    CatQubitParams, GateOutcome, ModeOps,
};
use crate::dynamics::{evolve_constant, liouvillian, CollapseOp, ConstantOptions};
use crate::error::{Error, Result};
use crate::qcore::{state_fidelity, CMatrix, CVector, QOperator, QState, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoModeOptions {
    /// Fock truncation per cavity on the joint space.
    pub dim: usize,
}

impl Default for TwoModeOptions {
    fn default() -> Self {
        Self { dim: 14 }
    }
}

/// Logical two-qubit inputs: the computational basis, `|+0⟩` and `|+i,1⟩`.
pub fn two_qubit_inputs() -> Vec<[C64; 4]> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    let z = C64::default();
    vec![
        [r(1.0), z, z, z],
        [z, r(1.0), z, z],
        [z, z, r(1.0), z],
        [z, z, z, r(1.0)],
        [r(s), z, r(s), z],
        [z, r(s), z, C64::new(0.0, s)],
    ]
}

struct Joint {
    dim: usize,
    basis: Vec<CVector>,
    ops: ModeOps,
    collapse1: Vec<CollapseOp>,
}

impl Joint {
    fn new(params: &CatQubitParams, dim: usize) -> Result<Self> {
        let single = cat_basis(params.alpha, dim)?;
        let mut basis = Vec::with_capacity(4);
        for b1 in &single {
            for b2 in &single {
                basis.push(b1.kronecker(b2));
            }
        }
        let ops = ModeOps::new(dim)?;
        let collapse1 = loss_ops(params, &ops.a)?;
        Ok(Self {
            dim,
            basis,
            ops,
            collapse1,
        })
    }

    fn encode(&self, c: &[C64]) -> CVector {
        super::encode(c, &self.basis)
    }

    fn manifold_population(&self, rho: &CMatrix) -> f64 {
        self.basis.iter().map(|b| b.dotc(&(rho * b)).re).sum()
    }

    fn channel(&self, h: &QOperator, t: f64) -> Result<CMatrix> {
        Ok((liouvillian(h, &self.collapse1)? * C64::new(t, 0.0)).exp())
    }
}

/// Applies a single-cavity superoperator `s` (column-stacked) to cavity `mode`
/// of a two-cavity density matrix with per-cavity dimension `d`.
fn apply_channel(s: &CMatrix, rho: &CMatrix, d: usize, mode: usize) -> CMatrix {
    let mut out = CMatrix::zeros(d * d, d * d);
    let mut block = CVector::zeros(d * d);
    let idx = |fixed: usize, k: usize| {
        if mode == 0 {
            k * d + fixed
        } else {
            fixed * d + k
        }
    };
    for fj in 0..d {
        for fi in 0..d {
            for l in 0..d {
                for k in 0..d {
                    block[k + l * d] = rho[(idx(fi, k), idx(fj, l))];
                }
            }
            let mapped = s * &block;
            for l in 0..d {
                for k in 0..d {
                    out[(idx(fi, k), idx(fj, l))] = mapped[k + l * d];
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
enum Stage {
    X { mode: usize, theta: f64 },
    Z { mode: usize, theta: f64 },
    G { theta: f64 },
}

struct Plan {
    stages: Vec<Stage>,
    e_x: f64,
    e_c: f64,
}

enum Prepared {
    Local {
        channels: [CMatrix; 2],
    },
    Coupled {
        h: QOperator,
        t: f64,
        collapse: Vec<CollapseOp>,
    },
}

fn stage_duration(params: &CatQubitParams, plan: &Plan, st: Stage) -> f64 {
    match st {
        Stage::X { theta, .. } => x_gate_time(params.alpha, theta, plan.e_x),
        Stage::Z { theta, .. } => z_gate_time(params.kerr, theta),
        Stage::G { theta } => g_gate_time(params.alpha, theta, plan.e_c),
    }
}

#[cfg(test)]
fn stage_ideal(st: Stage) -> CMatrix {
    use super::{ideal_x, ideal_z};
    let id = CMatrix::identity(2, 2);
    let place = |u: CMatrix, mode: usize| {
        if mode == 0 {
            u.kronecker(&id)
        } else {
            id.kronecker(&u)
        }
    };
    match st {
        Stage::X { mode, theta } => place(ideal_x(theta), mode),
        Stage::Z { mode, theta } => place(ideal_z(theta), mode),
        Stage::G { theta } => ideal_g(theta),
    }
}

fn prepare(params: &CatQubitParams, joint: &Joint, plan: &Plan, st: Stage) -> Result<Prepared> {
    let t = stage_duration(params, plan, st);
    let ops = &joint.ops;
    let idle = ops.stabilized(params);
    let local = |gate_h: QOperator, mode: usize| -> Result<Prepared> {
        let g = joint.channel(&gate_h, t)?;
        let i = joint.channel(&idle, t)?;
        Ok(Prepared::Local {
            channels: if mode == 0 { [g, i] } else { [i, g] },
        })
    };
    match st {
        Stage::X { mode, theta } => {
            let h = &idle + &(&(&ops.a + &ops.ad) * (plan.e_x * theta.signum()));
            local(h, mode)
        }
        Stage::Z { mode, .. } => local(&ops.n2 * -params.kerr, mode),
        Stage::G { theta } => {
            let dims = [joint.dim, joint.dim];
            let a1 = ops.a.embed(0, &dims)?;
            let a2 = ops.a.embed(1, &dims)?;
            let h = &(&idle.embed(0, &dims)? + &idle.embed(1, &dims)?)
                + &(&(&(&a1.dagger() * &a2) + &(&a1 * &a2.dagger())) * (plan.e_c * theta.signum()));
            let mut collapse = Vec::new();
            if params.kappa > 0.0 {
                collapse.push(CollapseOp::new(a1, params.kappa)?);
                collapse.push(CollapseOp::new(a2, params.kappa)?);
            }
            Ok(Prepared::Coupled { h, t, collapse })
        }
    }
}

fn run_plan(
    params: &CatQubitParams,
    plan: &Plan,
    name: String,
    ideal: &CMatrix,
    opts: &TwoModeOptions,
) -> Result<GateOutcome> {
    params.validate()?;
    let joint = Joint::new(params, opts.dim)?;
    let prepared: Vec<Prepared> = plan
        .stages
        .iter()
        .map(|&st| prepare(params, &joint, plan, st))
        .collect::<Result<_>>()?;
    let duration: f64 = plan
        .stages
        .iter()
        .map(|&st| stage_duration(params, plan, st))
        .sum();
    let d = opts.dim;
    let dims = vec![d, d];
    let cheb = ConstantOptions::default();
    let runs = two_qubit_inputs()
        .par_iter()
        .map(|c| {
            let psi = joint.encode(c);
            let mut rho = &psi * psi.adjoint();
            for p in &prepared {
                rho = match p {
                    Prepared::Local { channels } => {
                        let r1 = apply_channel(&channels[0], &rho, d, 0);
                        apply_channel(&channels[1], &r1, d, 1)
                    }
                    Prepared::Coupled { h, t, collapse } => {
                        let state = QState::mixed_unchecked(dims.clone(), rho)?;
                        evolve_constant(h, collapse, &state, *t, &cheb)?.density_matrix()
                    }
                };
            }
            let ideal_c = ideal * CVector::from_column_slice(c);
            let target = QState::normalized(dims.clone(), joint.encode(ideal_c.as_slice()))?;
            let leak = 1.0 - joint.manifold_population(&rho);
            let f = state_fidelity(&QState::mixed_unchecked(dims.clone(), rho)?, &target)?;
            Ok((f, leak))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GateOutcome::from_runs(name, duration, runs))
}

/// `G_θ` from the cavity-cavity coupling `ℰ_c(a₁†a₂ + a₁a₂†)` with both
/// cavities stabilized. At θ = π/2 it takes `π/(8α²ℰ_c)`.
pub fn gate_g(
    params: &CatQubitParams,
    theta: f64,
    e_c: f64,
    opts: &TwoModeOptions,
) -> Result<GateOutcome> {
    if !(e_c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "E_c must be positive, got {e_c}"
        )));
    }
    let plan = Plan {
        stages: vec![Stage::G { theta }],
        e_x: 1.0,
        e_c,
    };
    run_plan(
        params,
        &plan,
        format!("G_{}", angle_label(theta)),
        &ideal_g(theta),
        opts,
    )
}

/// The CNOT sequence `X²_{π/2} X¹_{−π/2} Z¹_{π/2} G_{π/2} X¹_{−π/2} Z¹_{−π/2} X¹_{π/2}`,
/// applied right to left. Cavity 1 is the control.
pub fn cnot(
    params: &CatQubitParams,
    e_x: f64,
    e_c: f64,
    opts: &TwoModeOptions,
) -> Result<GateOutcome> {
    if !(e_x > 0.0) || !(e_c > 0.0) {
        return Err(Error::InvalidArgument(
            "E_x and E_c must be positive".into(),
        ));
    }
    let plan = Plan {
        stages: cnot_stages(),
        e_x,
        e_c,
    };
    run_plan(params, &plan, "CNOT".into(), &ideal_cnot(), opts)
}

fn cnot_stages() -> Vec<Stage> {
    let h = FRAC_PI_2;
    vec![
        Stage::X { mode: 0, theta: h },
        Stage::Z { mode: 0, theta: -h },
        Stage::X { mode: 0, theta: -h },
        Stage::G { theta: h },
        Stage::Z { mode: 0, theta: h },
        Stage::X { mode: 0, theta: -h },
        Stage::X { mode: 1, theta: h },
    ]
}

/// Total CNOT duration, the sum of its stage durations.
pub fn cnot_duration(params: &CatQubitParams, e_x: f64, e_c: f64) -> f64 {
    let plan = Plan {
        stages: cnot_stages(),
        e_x,
        e_c,
    };
    plan.stages
        .iter()
        .map(|&st| stage_duration(params, &plan, st))
        .sum()
}

#[cfg(test)]
pub(super) fn sequence_unitary() -> CMatrix {
    cnot_stages()
        .into_iter()
        .fold(CMatrix::identity(4, 4), |u, st| stage_ideal(st) * u)
}

#[cfg(test)]
pub(super) fn apply_channel_for_test(s: &CMatrix, rho: &CMatrix, d: usize, mode: usize) -> CMatrix {
    apply_channel(s, rho, d, mode)
}
