//! Kerr-cat qubit: driving between Fock and cat encodings, logical gates,
//! the CNOT sequence, gate reports and the heralded link-protocol verifier.

mod link;
mod report;
mod twomode;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use link::{
    simulate_link_protocol, DetectorKind, HeraldedOutcome, LinkProtocol, LinkProtocolResult,
};
pub use report::{
    gate_report, write_gate_report_csv, DriveRatios, GateReportOptions, GateReportRow,
};
pub use twomode::{cnot, cnot_duration, gate_g, two_qubit_inputs, TwoModeOptions};

use crate::dynamics::{evolve, CollapseOp, EvolveOptions, TimeDependentHamiltonian};
use crate::error::{Error, Result};
use crate::pulse::PulseSchedule;
use crate::qcore::{
    annihilation, cat_state, state_fidelity, CMatrix, CVector, Parity, QOperator, QState, C64,
};

/// Population allowed in the two highest Fock levels before a run is rejected.
pub const EDGE_POPULATION_LIMIT: f64 = 1e-6;
/// Leakage out of the cat manifold above which a gate report is flagged.
pub const LEAKAGE_FLAG: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatQubitParams {
    /// Kerr rate `K` in rad/s.
    pub kerr: f64,
    /// Single-photon loss rate `κ` in 1/s.
    pub kappa: f64,
    pub alpha: f64,
    /// Fock truncation per cavity.
    pub dim: usize,
}

impl CatQubitParams {
    pub fn new(kerr: f64, kappa: f64, alpha: f64, dim: usize) -> Result<Self> {
        let p = Self {
            kerr,
            kappa,
            alpha,
            dim,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kerr > 0.0) || !self.kerr.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "K must be positive, got {}",
                self.kerr
            )));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kappa must be >= 0, got {}",
                self.kappa
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.dim < 4 {
            return Err(Error::InvalidArgument(format!(
                "truncation {} too small",
                self.dim
            )));
        }
        Ok(())
    }

    /// Two-photon drive amplitude `ℰ_p⁰ = K α²` that stabilizes `|±α⟩`.
    pub fn ep0(&self) -> f64 {
        self.kerr * self.alpha * self.alpha
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }
}

/// Single-cavity operators reused across gate constructions.
pub(crate) struct ModeOps {
    pub a: QOperator,
    pub ad: QOperator,
    /// `a†² a²`
    pub kerr: QOperator,
    /// `a†² + a²`
    pub sq: QOperator,
    /// `i(a†² − a²)`
    pub sq_perp: QOperator,
    /// `(a†a)²`
    pub n2: QOperator,
}

impl ModeOps {
    pub fn new(dim: usize) -> Result<Self> {
        let a = annihilation(dim)?;
        let ad = a.dagger();
        let a2 = &a * &a;
        let ad2 = &ad * &ad;
        let n = &ad * &a;
        Ok(Self {
            kerr: &ad2 * &a2,
            sq: &ad2 + &a2,
            sq_perp: &(&ad2 - &a2) * C64::new(0.0, 1.0),
            n2: &n * &n,
            a,
            ad,
        })
    }

    /// `−K a†²a² + ℰ_p⁰(a†² + a²)`
    pub fn stabilized(&self, params: &CatQubitParams) -> QOperator {
        &(&self.kerr * -params.kerr) + &(&self.sq * params.ep0())
    }
}

/// `[|C_α⁺⟩, |C_α⁻⟩]`, the logical `|0̄⟩` and `|1̄⟩`.
pub fn cat_basis(alpha: f64, dim: usize) -> Result<[CVector; 2]> {
    let even = cat_state(C64::new(alpha, 0.0), Parity::Even, dim)?;
    let odd = cat_state(C64::new(alpha, 0.0), Parity::Odd, dim)?;
    Ok([even.ket().unwrap().clone(), odd.ket().unwrap().clone()])
}

pub fn fock_basis(dim: usize) -> [CVector; 2] {
    let mut zero = CVector::zeros(dim);
    let mut one = CVector::zeros(dim);
    zero[0] = C64::new(1.0, 0.0);
    one[1] = C64::new(1.0, 0.0);
    [zero, one]
}

pub fn encode(c: &[C64], basis: &[CVector]) -> CVector {
    basis
        .iter()
        .zip(c)
        .fold(CVector::zeros(basis[0].len()), |acc, (b, ci)| acc + b * *ci)
}

/// The six cardinal qubit states `|0⟩, |1⟩, |±⟩, |±i⟩` as amplitude pairs.
pub fn cardinal_states() -> Vec<[C64; 2]> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    vec![
        [r(1.0), r(0.0)],
        [r(0.0), r(1.0)],
        [r(s), r(s)],
        [r(s), r(-s)],
        [r(s), C64::new(0.0, s)],
        [r(s), C64::new(0.0, -s)],
    ]
}

/// `exp(−iθX/2)`
pub fn ideal_x(theta: f64) -> CMatrix {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, 0.0),
            C64::new(0.0, -s),
            C64::new(0.0, -s),
            C64::new(c, 0.0),
        ],
    )
}

/// `diag(1, e^{iθ})`
pub fn ideal_z(theta: f64) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(1.0, 0.0),
            C64::default(),
            C64::default(),
            C64::from_polar(1.0, theta),
        ],
    )
}

/// `exp(−iθ X⊗X/2)`; at θ = π/2 maps `|0̄0̄⟩` to `((1+i)|0̄0̄⟩ + (1−i)|1̄1̄⟩)/2` up to a global phase.
pub fn ideal_g(theta: f64) -> CMatrix {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut m = CMatrix::zeros(4, 4);
    for i in 0..4 {
        m[(i, i)] = C64::new(c, 0.0);
        m[(i, 3 - i)] = C64::new(0.0, -s);
    }
    m
}

pub fn ideal_cnot() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        m[(i, j)] = C64::new(1.0, 0.0);
    }
    m
}

pub(crate) fn loss_ops(params: &CatQubitParams, a: &QOperator) -> Result<Vec<CollapseOp>> {
    if params.kappa > 0.0 {
        Ok(vec![CollapseOp::new(a.clone(), params.kappa)?])
    } else {
        Ok(Vec::new())
    }
}

/// `ℰ_p(t) = ℰ_p⁰(1 − e^{−(t/τ)⁴})` on `[0, 1.3τ]`.
pub fn adiabatic_drive_pulse(params: &CatQubitParams, tau: f64) -> Result<PulseSchedule> {
    PulseSchedule::adiabatic(params.ep0(), tau)
}

/// `−K a†²a² + ℰ_p(t)(a†² + a²) + ℰ_p⊥(t) i(a†² − a²)` over the pulse duration.
pub fn kerr_cat_hamiltonian(
    params: &CatQubitParams,
    pulse: &PulseSchedule,
) -> Result<TimeDependentHamiltonian> {
    let ops = ModeOps::new(params.dim)?;
    let (cp, cq) = pulse.coefficients();
    TimeDependentHamiltonian::new(&ops.kerr * -params.kerr, (0.0, pulse.duration()))?
        .with_drive(ops.sq, cp)?
        .with_drive(ops.sq_perp, cq)
}

#[derive(Clone, Debug)]
pub struct MapOutcome {
    pub state: QState,
    pub target: QState,
    pub fidelity: f64,
    pub parity: f64,
    /// Largest population seen in the two highest Fock levels.
    pub edge_population: f64,
    pub duration: f64,
}

fn edge_projector(dim: usize) -> Result<QOperator> {
    crate::qcore::diagonal(dim, |n| if n + 2 >= dim { 1.0 } else { 0.0 })
}

fn run_map(
    params: &CatQubitParams,
    pulse: &PulseSchedule,
    input: &QState,
    target: CVector,
) -> Result<MapOutcome> {
    params.validate()?;
    let h = kerr_cat_hamiltonian(params, pulse)?;
    let a = annihilation(params.dim)?;
    let opts = EvolveOptions::default()
        .samples(41)
        .final_only()
        .observe("edge", edge_projector(params.dim)?)
        .observe("parity", crate::qcore::parity(params.dim)?);
    let traj = evolve(&h, &loss_ops(params, &a)?, input, &opts)?;
    let edge = traj
        .expectation("edge")
        .unwrap()
        .iter()
        .copied()
        .fold(0.0, f64::max);
    if edge > EDGE_POPULATION_LIMIT {
        return Err(Error::TruncationOverflow { population: edge });
    }
    let target = QState::normalized(vec![params.dim], target)?;
    let fidelity = state_fidelity(&traj.final_state, &target)?;
    Ok(MapOutcome {
        parity: *traj.expectation("parity").unwrap().last().unwrap(),
        state: traj.final_state,
        target,
        fidelity,
        edge_population: edge,
        duration: pulse.duration(),
    })
}

/// Maps a state in `span{|0⟩, |1⟩}` to the same superposition of `|C_α^±⟩`
/// by evolving under the driven Kerr Hamiltonian with single-photon loss.
pub fn drive(params: &CatQubitParams, pulse: &PulseSchedule, input: &QState) -> Result<MapOutcome> {
    let psi = input
        .ket()
        .filter(|_| input.dims() == [params.dim])
        .ok_or_else(|| {
            Error::InvalidArgument("drive input must be a pure single-cavity state".into())
        })?;
    let rest: f64 = psi.iter().skip(2).map(|z| z.norm_sqr()).sum();
    if rest > 1e-12 {
        return Err(Error::InvalidArgument(
            "drive input must lie in span{|0>, |1>}".into(),
        ));
    }
    let basis = cat_basis(params.alpha, params.dim)?;
    run_map(params, pulse, input, encode(&[psi[0], psi[1]], &basis))
}

/// Runs the time-reversed drive pulse, mapping `|C_α^±⟩` back to `|0⟩, |1⟩`.
/// `pulse` is the forward drive pulse. The target is the Fock image of the
/// input's projection onto the cat manifold.
pub fn undrive(
    params: &CatQubitParams,
    pulse: &PulseSchedule,
    input: &QState,
) -> Result<MapOutcome> {
    let psi = input
        .ket()
        .filter(|_| input.dims() == [params.dim])
        .ok_or_else(|| {
            Error::InvalidArgument("undrive input must be a pure single-cavity state".into())
        })?;
    let basis = cat_basis(params.alpha, params.dim)?;
    let c = [basis[0].dotc(psi), basis[1].dotc(psi)];
    // Imperfectly driven states are accepted; the target is their projection.
    if c[0].norm_sqr() + c[1].norm_sqr() < 0.9 {
        return Err(Error::InvalidArgument(
            "undrive input must lie in the cat manifold".into(),
        ));
    }
    run_map(
        params,
        &pulse.reversed(),
        input,
        encode(&c, &fock_basis(params.dim)),
    )
}

/// Outcome of a logical gate simulated on the cardinal input states.
#[derive(Clone, Debug)]
pub struct GateOutcome {
    pub name: String,
    pub duration: f64,
    /// State fidelity per input, in the order of the input list.
    pub fidelities: Vec<f64>,
    /// Mean of `fidelities`.
    pub fidelity: f64,
    /// Largest population outside the logical cat manifold.
    pub leakage: f64,
    pub leakage_flagged: bool,
}

impl GateOutcome {
    pub(crate) fn from_runs(name: String, duration: f64, runs: Vec<(f64, f64)>) -> Self {
        let fidelities: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let leakage = runs.iter().map(|r| r.1).fold(0.0, f64::max);
        Self {
            name,
            duration,
            fidelity: fidelities.iter().sum::<f64>() / fidelities.len() as f64,
            fidelities,
            leakage,
            leakage_flagged: leakage > LEAKAGE_FLAG,
        }
    }

    pub fn row(&self, params: &CatQubitParams) -> GateReportRow {
        GateReportRow {
            operation: self.name.clone(),
            kerr: params.kerr,
            kappa: params.kappa,
            duration_s: self.duration,
            duration_kt: self.duration * params.kerr,
            fidelity: self.fidelity,
        }
    }
}

fn manifold_population(rho: &CMatrix, basis: &[CVector; 2]) -> f64 {
    basis.iter().map(|b| b.dotc(&(rho * b)).re).sum()
}

fn single_mode_gate(
    params: &CatQubitParams,
    name: String,
    h: QOperator,
    duration: f64,
    ideal: &CMatrix,
) -> Result<GateOutcome> {
    params.validate()?;
    let basis = cat_basis(params.alpha, params.dim)?;
    let a = annihilation(params.dim)?;
    let collapse = loss_ops(params, &a)?;
    let th = TimeDependentHamiltonian::new(h, (0.0, duration))?;
    let runs = cardinal_states()
        .par_iter()
        .map(|c| {
            let input = QState::pure(vec![params.dim], encode(c, &basis))?;
            let out = nalgebra::DVector::from_column_slice(c);
            let ideal_c = ideal * out;
            let target = QState::normalized(vec![params.dim], encode(ideal_c.as_slice(), &basis))?;
            let traj = evolve(
                &th,
                &collapse,
                &input,
                &EvolveOptions::default().final_only(),
            )?;
            let f = state_fidelity(&traj.final_state, &target)?;
            let leak = 1.0 - manifold_population(&traj.final_state.density_matrix(), &basis);
            Ok((f, leak))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GateOutcome::from_runs(name, duration, runs))
}

/// Duration of `X_θ` at drive `ℰ_x`: `|θ| / (4|α|ℰ_x)`, i.e. `π/(8|α|ℰ_x)` for `X_{π/2}`.
pub fn x_gate_time(alpha: f64, theta: f64, e_x: f64) -> f64 {
    theta.abs() / (4.0 * alpha.abs() * e_x)
}

/// Duration of `Z_θ`: `(θ mod 2π)/K`; `Z_{π/2}` takes `π/(2K)`.
pub fn z_gate_time(kerr: f64, theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI) / kerr
}

/// Duration of `G_θ` at coupling `ℰ_c`: `|θ|/(4α²ℰ_c)`.
pub fn g_gate_time(alpha: f64, theta: f64, e_c: f64) -> f64 {
    theta.abs() / (4.0 * alpha * alpha * e_c)
}

pub(crate) fn angle_label(theta: f64) -> String {
    let q = theta / (PI / 2.0);
    if (q - q.round()).abs() < 1e-9 {
        match q.round() as i64 {
            0 => "0".into(),
            1 => "pi/2".into(),
            -1 => "-pi/2".into(),
            2 => "pi".into(),
            -2 => "-pi".into(),
            k => format!("{}pi/2", k),
        }
    } else {
        format!("{theta:.6}")
    }
}

/// `X_θ` by a single-photon drive `ℰ_x(a + a†)` on top of the stabilizing
/// two-photon drive. Negative angles flip the sign of the drive.
pub fn gate_x(params: &CatQubitParams, theta: f64, e_x: f64) -> Result<GateOutcome> {
    if !(e_x > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "E_x must be positive, got {e_x}"
        )));
    }
    let ops = ModeOps::new(params.dim)?;
    let drive = &(&ops.a + &ops.ad) * (e_x * theta.signum());
    let h = &ops.stabilized(params) + &drive;
    single_mode_gate(
        params,
        format!("X_{}", angle_label(theta)),
        h,
        x_gate_time(params.alpha, theta, e_x),
        &ideal_x(theta),
    )
}

/// `Z_θ` by free Kerr evolution `−K(a†a)²` with the two-photon drive off.
/// Clean only for multiples of π/2.
pub fn gate_z(params: &CatQubitParams, theta: f64) -> Result<GateOutcome> {
    let ops = ModeOps::new(params.dim)?;
    let h = &ops.n2 * -params.kerr;
    single_mode_gate(
        params,
        format!("Z_{}", angle_label(theta)),
        h,
        z_gate_time(params.kerr, theta),
        &ideal_z(theta),
    )
}

fn map_gate(params: &CatQubitParams, pulse: &PulseSchedule, forward: bool) -> Result<GateOutcome> {
    let cats = cat_basis(params.alpha, params.dim)?;
    let focks = fock_basis(params.dim);
    let (from, to) = if forward {
        (&focks, &cats)
    } else {
        (&cats, &focks)
    };
    let runs = cardinal_states()
        .par_iter()
        .map(|c| {
            let input = QState::normalized(vec![params.dim], encode(c, from))?;
            let out = if forward {
                drive(params, pulse, &input)?
            } else {
                undrive(params, pulse, &input)?
            };
            let leak = 1.0 - manifold_population(&out.state.density_matrix(), to);
            Ok((out.fidelity, leak))
        })
        .collect::<Result<Vec<_>>>()?;
    let name = if forward { "drive" } else { "undrive" };
    Ok(GateOutcome::from_runs(name.into(), pulse.duration(), runs))
}

/// Drive averaged over the six cardinal Fock-encoded inputs.
pub fn drive_gate(params: &CatQubitParams, pulse: &PulseSchedule) -> Result<GateOutcome> {
    map_gate(params, pulse, true)
}

/// Undrive averaged over the six cardinal cat-encoded inputs.
pub fn undrive_gate(params: &CatQubitParams, pulse: &PulseSchedule) -> Result<GateOutcome> {
    map_gate(params, pulse, false)
}

#[cfg(test)]
mod tests;
