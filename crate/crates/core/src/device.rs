//! Effective cavity parameters inherited from a dispersively coupled
//! superconducting qubit: self-Kerr, inverse-Purcell loss and the cat
//! coherence decay rate.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catqubit::{cat_basis, CatQubitParams, ModeOps};
use crate::dynamics::{
    evolve, fit_exponential_decay, CollapseOp, EvolveOptions, TimeDependentHamiltonian,
};
use crate::error::{Error, Result};
use crate::qcore::{QState, C64};

/// Largest `g/|Δ|` accepted as dispersive.
pub const DISPERSIVE_LIMIT: f64 = 0.3;
/// Minimum overlap of a dressed state with its bare label.
pub const LABEL_OVERLAP_MIN: f64 = 0.8;
/// Relative fit residual above which a `κ_eff` fit is flagged.
pub const KAPPA_EFF_RESIDUAL_FLAG: f64 = 0.05;

/// Cavity and qubit levels used by default when diagonalizing.
pub const DEFAULT_CAVITY_LEVELS: usize = 12;
pub const DEFAULT_QUBIT_LEVELS: usize = 5;
/// Highest consecutive-level spacing index used in the Kerr fit.
const FIT_SPACINGS: usize = 5;

/// Cavity coupled to a weakly anharmonic qubit,
/// `ω_c a†a + ω_q b†b − K_q b†²b² + g(a†b + ab†)`, plus the bare loss rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub omega_c: f64,
    pub omega_q: f64,
    pub k_q: f64,
    pub g: f64,
    pub kappa_c: f64,
    pub gamma: f64,
}

impl DeviceParams {
    pub fn delta(&self) -> f64 {
        self.omega_q - self.omega_c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_c >= 0.0) || !(self.gamma >= 0.0) || !(self.k_q >= 0.0) || !(self.g >= 0.0)
        {
            return Err(Error::InvalidArgument(
                "device rates and couplings must be >= 0".into(),
            ));
        }
        let d = self.delta();
        if d == 0.0 || self.g / d.abs() >= DISPERSIVE_LIMIT {
            return Err(Error::DispersiveRegime(format!(
                "g/|Δ| = {} (limit {DISPERSIVE_LIMIT})",
                self.g / d.abs()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KerrEstimate {
    /// `K` in `−K a†²a²`, rad/s.
    pub kerr: f64,
    /// RMS deviation of the level spacings from the linear fit, rad/s.
    pub residual: f64,
}

impl KerrEstimate {
    /// Residual relative to `K`; infinite when `K = 0` and the fit is not exact.
    pub fn relative_residual(&self) -> f64 {
        if self.residual == 0.0 {
            0.0
        } else {
            self.residual / self.kerr.abs()
        }
    }
}

/// Self-Kerr of the dressed cavity from the spectrum of the coupled system.
///
/// The Hamiltonian conserves `a†a + b†b`, so each excitation sector is
/// diagonalized on its own in the frame rotating at `ω_c` (only `Δ` enters).
/// Dressed states are labeled by the overlap-maximizing assignment to bare
/// states within the sector, then the spacings
/// `ω_{|i+1,0⟩} − ω_{|i,0⟩} = const − 2K i`, `i = 0..4`, are fitted.
pub fn dispersive_kerr(
    params: &DeviceParams,
    cavity_levels: usize,
    qubit_levels: usize,
) -> Result<KerrEstimate> {
    params.validate()?;
    if cavity_levels < FIT_SPACINGS + 3 || qubit_levels < 2 {
        return Err(Error::InvalidArgument(format!(
            "need >= {} cavity and >= 2 qubit levels, got {cavity_levels} and {qubit_levels}",
            FIT_SPACINGS + 3
        )));
    }
    let delta = params.delta();
    let mut energies = Vec::with_capacity(FIT_SPACINGS + 1);
    for n in 0..=FIT_SPACINGS {
        // Bare basis |n − j, j⟩ with j qubit excitations.
        let basis: Vec<(usize, usize)> = (0..qubit_levels.min(n + 1))
            .map(|j| (n - j, j))
            .filter(|&(i, _)| i < cavity_levels)
            .collect();
        let d = basis.len();
        let mut h = DMatrix::<f64>::zeros(d, d);
        for (r, &(_, j)) in basis.iter().enumerate() {
            let jf = j as f64;
            h[(r, r)] = delta * jf - params.k_q * jf * (jf - 1.0);
            if r + 1 < d {
                // a†b: |i, j⟩ → |i+1, j−1⟩ with √(i+1)√j; basis[r+1] has j+1.
                let (i1, j1) = basis[r + 1];
                let v = params.g * ((i1 + 1) as f64).sqrt() * (j1 as f64).sqrt();
                h[(r, r + 1)] = v;
                h[(r + 1, r)] = v;
            }
        }
        let eig = h.symmetric_eigen();
        let overlaps = DMatrix::from_fn(d, d, |bare, dressed| {
            eig.eigenvectors[(bare, dressed)].powi(2)
        });
        let assignment = best_assignment(&overlaps);
        // basis[0] is |n, 0⟩.
        let k = assignment[0];
        if overlaps[(0, k)] < LABEL_OVERLAP_MIN {
            return Err(Error::DispersiveRegime(format!(
                "dressed |{n},0⟩ has overlap {:.3} with its bare state",
                overlaps[(0, k)]
            )));
        }
        energies.push(eig.eigenvalues[k]);
    }
    let spacings: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
    let (slope, intercept) = linear_fit(&spacings);
    let residual = (spacings
        .iter()
        .enumerate()
        .map(|(i, s)| (s - (intercept + slope * i as f64)).powi(2))
        .sum::<f64>()
        / spacings.len() as f64)
        .sqrt();
    Ok(KerrEstimate {
        kerr: -slope / 2.0,
        residual,
    })
}

fn linear_fit(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 - mx) * (v - my))
        .sum();
    let sxx: f64 = (0..y.len()).map(|i| (i as f64 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Row-to-column assignment maximizing the summed weight, by exhaustive
/// search. Excitation sectors hold at most a handful of states.
fn best_assignment(w: &DMatrix<f64>) -> Vec<usize> {
    fn search(
        w: &DMatrix<f64>,
        row: usize,
        used: &mut [bool],
        cur: &mut Vec<usize>,
        score: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if row == w.nrows() {
            if score > best.0 {
                *best = (score, cur.clone());
            }
            return;
        }
        for c in 0..w.ncols() {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                search(w, row + 1, used, cur, score + w[(row, c)], best);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    search(
        w,
        0,
        &mut vec![false; w.ncols()],
        &mut Vec::new(),
        0.0,
        &mut best,
    );
    best.1
}

/// `κ ≈ (1 − (g/Δ)²) κ_c + (g/Δ)² γ`.
pub fn purcell_kappa(kappa_c: f64, gamma: f64, g: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::InvalidArgument("detuning must be nonzero".into()));
    }
    let r2 = (g / delta).powi(2);
    Ok((1.0 - r2) * kappa_c + r2 * gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaEff {
    pub kappa_eff: f64,
    pub relative_residual: f64,
    /// Fit residual above [`KAPPA_EFF_RESIDUAL_FLAG`].
    pub flagged: bool,
}

/// `K/κ` at which `κ_eff/κ` is simulated; above it the ratio no longer
/// depends on `K`.
pub const KAPPA_EFF_REFERENCE_RATIO: f64 = 1e3;

/// Decay rate of the cat coherence under the stabilizing drive with loss.
///
/// Starts from `(|C⁺⟩ + i|C⁻⟩)/√2`, tracks `2|⟨C⁺|ρ|C⁻⟩|` over the time in
/// which it falls by about 20% at `2κα²`, and fits an exponential. For
/// `K/κ` above [`KAPPA_EFF_REFERENCE_RATIO`] the ratio `κ_eff/κ` is computed
/// at the reference ratio.
pub fn kappa_eff(params: &CatQubitParams) -> Result<KappaEff> {
    params.validate()?;
    if params.kappa == 0.0 {
        return Ok(KappaEff {
            kappa_eff: 0.0,
            relative_residual: 0.0,
            flagged: false,
        });
    }
    let ratio = params.kerr / params.kappa;
    let sim = if ratio > KAPPA_EFF_REFERENCE_RATIO {
        params.with_kappa(params.kerr / KAPPA_EFF_REFERENCE_RATIO)
    } else {
        *params
    };
    let [cp, cm] = cat_basis(sim.alpha, sim.dim)?;
    let psi = (&cp + &cm * C64::new(0.0, 1.0)) / C64::new(SQRT_2, 0.0);
    let rho0 = QState::normalized(vec![sim.dim], psi)?;
    let ops = ModeOps::new(sim.dim)?;
    let t = 0.2 / (2.0 * sim.kappa * sim.alpha * sim.alpha);
    let h = TimeDependentHamiltonian::new(ops.stabilized(&sim), (0.0, t))?;
    let collapse = [CollapseOp::new(ops.a.clone(), sim.kappa)?];
    let traj = evolve(
        &h,
        &collapse,
        &rho0,
        &EvolveOptions::default()
            .samples(40)
            .rel_tol(1e-9)
            .abs_tol(1e-11),
    )?;
    let coherence: Vec<f64> = traj
        .states
        .iter()
        .map(|s| 2.0 * cp.dotc(&(s.density_matrix() * &cm)).norm())
        .collect();
    let fit = fit_exponential_decay(&traj.times, &coherence)?;
    Ok(KappaEff {
        kappa_eff: fit.rate / sim.kappa * params.kappa,
        relative_residual: fit.relative_residual,
        flagged: fit.relative_residual > KAPPA_EFF_RESIDUAL_FLAG,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceTableOptions {
    pub cavity_levels: usize,
    pub qubit_levels: usize,
    pub alpha: f64,
    /// Largest relative change in `K` allowed when both truncations grow by 2.
    pub convergence_tol: f64,
}

impl Default for DeviceTableOptions {
    fn default() -> Self {
        Self {
            cavity_levels: DEFAULT_CAVITY_LEVELS,
            qubit_levels: DEFAULT_QUBIT_LEVELS,
            alpha: SQRT_2,
            convergence_tol: 5e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceRow {
    pub kappa_c: f64,
    pub gamma: f64,
    pub g: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
    #[serde(rename = "K_q")]
    pub k_q: f64,
    #[serde(rename = "K")]
    pub kerr: f64,
    pub kappa: f64,
    pub kappa_eff: f64,
}

impl DeviceRow {
    pub fn kerr_ratio(&self) -> f64 {
        self.kerr / self.kappa
    }
}

/// One row per input: inherited `K`, inverse-Purcell `κ` and `κ_eff`.
pub fn device_table(inputs: &[DeviceParams], opts: &DeviceTableOptions) -> Result<Vec<DeviceRow>> {
    inputs
        .par_iter()
        .map(|p| {
            let k = dispersive_kerr(p, opts.cavity_levels, opts.qubit_levels)?;
            let k2 = dispersive_kerr(p, opts.cavity_levels + 2, opts.qubit_levels + 2)?;
            if (k2.kerr - k.kerr).abs() > opts.convergence_tol * k.kerr.abs() {
                return Err(Error::NotConverged {
                    what: "dispersive Kerr truncation",
                    detail: format!("K = {} vs {} at +2 levels", k.kerr, k2.kerr),
                });
            }
            let kappa = purcell_kappa(p.kappa_c, p.gamma, p.g, p.delta())?;
            let cat = CatQubitParams::new(k.kerr, kappa, opts.alpha, 20)?;
            let keff = kappa_eff(&cat)?;
            Ok(DeviceRow {
                kappa_c: p.kappa_c,
                gamma: p.gamma,
                g: p.g,
                delta: p.delta(),
                k_q: p.k_q,
                kerr: k.kerr,
                kappa,
                kappa_eff: keff.kappa_eff,
            })
        })
        .collect()
}

pub fn write_device_table_csv<W: Write>(w: W, rows: &[DeviceRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Sweep over cited hardware ranges: bare cavity `κ_c = 2π × 0.32 Hz` at
/// `2π × 5 GHz`, `Δ = 2π × 1.5 GHz`, `K_q = 2π × {100, 150} MHz`,
/// `g/Δ ∈ {0.05, 0.1, 0.2}` and qubit `γ = 2π × {1 kHz, 100 Hz, 30 Hz}`.
pub fn default_device_inputs() -> Vec<DeviceParams> {
    let tp = 2.0 * PI;
    let delta = tp * 1.5e9;
    let mut out = Vec::new();
    for gamma in [1e3, 100.0, 30.0] {
        for ratio in [0.05, 0.1, 0.2] {
            for k_q in [100e6, 150e6] {
                out.push(DeviceParams {
                    omega_c: tp * 5e9,
                    omega_q: tp * 5e9 + delta,
                    k_q: tp * k_q,
                    g: delta * ratio,
                    kappa_c: tp * 0.32,
                    gamma: tp * gamma,
                });
            }
        }
    }
    out
}
