//! Per-operation fidelities and durations feeding the link and swap budgets.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::StoragePolicy;
use crate::catqubit::{
    adiabatic_drive_pulse, cnot, cnot_duration, drive_gate, gate_x, gate_z, undrive_gate,
    x_gate_time, z_gate_time, CatQubitParams, DriveRatios, TwoModeOptions,
};
use crate::error::{Error, Result};
use crate::pulse::ADIABATIC_DURATION_FACTOR;
use crate::pulseopt::{evaluate_pulse, grape_optimize, GrapeOptions, GrapeProblem, DEFAULT_KT};
use crate::transducer::TransducerParams;

pub const OP_DRIVE: &str = "drive";
pub const OP_UNDRIVE: &str = "undrive";
pub const OP_X_HALF: &str = "x_half";
pub const OP_X_PI: &str = "x_pi";
pub const OP_Z_HALF: &str = "z_half";
pub const OP_Z_PI: &str = "z_pi";
pub const OP_CNOT: &str = "cnot";
pub const OP_TRANSDUCTION: &str = "transduction";

/// Operations for one elementary link, both nodes, both protocol steps.
/// Storage outside the cat basis adds four undrive/drive pairs.
pub fn link_inventory(policy: &StoragePolicy) -> Vec<(&'static str, u32)> {
    let extra = if policy.interconverts() { 4 } else { 0 };
    vec![
        (OP_DRIVE, 6 + extra),
        (OP_X_HALF, 2),
        (OP_CNOT, 4),
        (OP_UNDRIVE, 4 + extra),
        (OP_TRANSDUCTION, 4),
        (OP_X_PI, 2),
    ]
}

/// One swap: `CNOT` and `H = Z_{π/2} X_{π/2} Z_{π/2}` at the sender, `X_π`
/// then `Z_π` at the receiver.
pub fn swap_inventory() -> Vec<(&'static str, u32)> {
    vec![
        (OP_CNOT, 1),
        (OP_Z_HALF, 2),
        (OP_X_HALF, 1),
        (OP_X_PI, 1),
        (OP_Z_PI, 1),
    ]
}

/// How drive and undrive are realized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveMethod {
    /// GRAPE-optimized pulses of duration `0.5/K` on a `dim`-level cavity;
    /// fidelity of `|0⟩ ↔ |C⁺⟩`.
    Grape { options: GrapeOptions, dim: usize },
    /// Closed-form pulse with rise time `k_tau/K`; fidelity averaged over the
    /// cardinal inputs.
    Adiabatic { k_tau: f64 },
}

impl Default for DriveMethod {
    fn default() -> Self {
        Self::Grape {
            options: GrapeOptions::default(),
            dim: 30,
        }
    }
}

impl DriveMethod {
    pub fn duration(&self, kerr: f64) -> f64 {
        match self {
            Self::Grape { .. } => DEFAULT_KT / kerr,
            Self::Adiabatic { k_tau } => ADIABATIC_DURATION_FACTOR * k_tau / kerr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetOptions {
    pub ratios: DriveRatios,
    pub drive: DriveMethod,
    pub two_mode: TwoModeOptions,
    pub transduction_fidelity: f64,
    /// Duration of one transduction, s.
    pub transduction_time: f64,
}

impl BudgetOptions {
    /// Defaults for a given `K/κ`: drive ratios of that row, GRAPE drive,
    /// transduction fidelity 0.9995 taking the spin transfer time.
    pub fn for_kerr_ratio(k_over_kappa: f64) -> Self {
        Self {
            ratios: DriveRatios::for_kerr_ratio(k_over_kappa),
            drive: DriveMethod::default(),
            two_mode: TwoModeOptions::default(),
            transduction_fidelity: 0.9995,
            transduction_time: TransducerParams::default().transfer_time(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OperationBudget {
    pub fidelities: BTreeMap<String, f64>,
    /// Seconds.
    pub durations: BTreeMap<String, f64>,
}

impl OperationBudget {
    /// Every operation with the same fidelity and duration.
    pub fn uniform(fidelity: f64, duration: f64) -> Self {
        let ops = [
            OP_DRIVE,
            OP_UNDRIVE,
            OP_X_HALF,
            OP_X_PI,
            OP_Z_HALF,
            OP_Z_PI,
            OP_CNOT,
            OP_TRANSDUCTION,
        ];
        Self {
            fidelities: ops.iter().map(|k| (k.to_string(), fidelity)).collect(),
            durations: ops.iter().map(|k| (k.to_string(), duration)).collect(),
        }
    }

    /// `T_o`: the link inventory split evenly over the two nodes, which work
    /// in parallel; operations at one node run back to back.
    pub fn local_time(&self, policy: &StoragePolicy) -> Result<f64> {
        link_inventory(policy)
            .iter()
            .try_fold(0.0, |acc, &(op, count)| {
                let d = self
                    .durations
                    .get(op)
                    .ok_or_else(|| Error::MissingFidelity(format!("{op} (duration)")))?;
                Ok(acc + 0.5 * count as f64 * d)
            })
    }
}

/// Durations of every budget operation, without simulation.
pub fn operation_durations(
    params: &CatQubitParams,
    opts: &BudgetOptions,
) -> Result<BTreeMap<String, f64>> {
    params.validate()?;
    let (e_x, e_c) = (opts.ratios.e_x(params), opts.ratios.e_c(params));
    let drive = opts.drive.duration(params.kerr);
    Ok([
        (OP_DRIVE, drive),
        (OP_UNDRIVE, drive),
        (OP_X_HALF, x_gate_time(params.alpha, FRAC_PI_2, e_x)),
        (OP_X_PI, x_gate_time(params.alpha, PI, e_x)),
        (OP_Z_HALF, z_gate_time(params.kerr, FRAC_PI_2)),
        (OP_Z_PI, z_gate_time(params.kerr, PI)),
        (OP_CNOT, cnot_duration(params, e_x, e_c)),
        (OP_TRANSDUCTION, opts.transduction_time),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect())
}

/// Simulates every operation at `(K, κ)` and collects fidelities and durations.
pub fn operation_budget(params: &CatQubitParams, opts: &BudgetOptions) -> Result<OperationBudget> {
    if !(0.0..=1.0).contains(&opts.transduction_fidelity) {
        return Err(Error::InvalidArgument(format!(
            "transduction fidelity must be in [0, 1], got {}",
            opts.transduction_fidelity
        )));
    }
    let durations = operation_durations(params, opts)?;
    let (e_x, e_c) = (opts.ratios.e_x(params), opts.ratios.e_c(params));
    let (f_drive, f_undrive) = match opts.drive {
        DriveMethod::Grape { options, dim } => {
            let lossless = params.with_kappa(0.0).with_dim(dim);
            let dp = GrapeProblem::drive(lossless)?;
            let up = GrapeProblem::undrive(lossless)?;
            let d = grape_optimize(&dp, &options)?;
            let u = grape_optimize(&up, &options)?;
            (
                evaluate_pulse(&dp, &d.schedule, params.kappa)?,
                evaluate_pulse(&up, &u.schedule, params.kappa)?,
            )
        }
        DriveMethod::Adiabatic { k_tau } => {
            let pulse = adiabatic_drive_pulse(params, k_tau / params.kerr)?;
            (
                drive_gate(params, &pulse)?.fidelity,
                undrive_gate(params, &pulse)?.fidelity,
            )
        }
    };
    let fidelities = [
        (OP_DRIVE, f_drive),
        (OP_UNDRIVE, f_undrive),
        (OP_X_HALF, gate_x(params, FRAC_PI_2, e_x)?.fidelity),
        (OP_X_PI, gate_x(params, PI, e_x)?.fidelity),
        (OP_Z_HALF, gate_z(params, FRAC_PI_2)?.fidelity),
        (OP_Z_PI, gate_z(params, PI)?.fidelity),
        (OP_CNOT, cnot(params, e_x, e_c, &opts.two_mode)?.fidelity),
        (OP_TRANSDUCTION, opts.transduction_fidelity),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Ok(OperationBudget {
        fidelities,
        durations,
    })
}
