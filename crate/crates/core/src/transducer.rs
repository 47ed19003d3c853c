//! Microwave-to-spin transfer in the single-excitation subspace of a cavity
//! coupled to an inhomogeneously broadened spin ensemble, and the overall
//! transduction efficiency budget.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, CollapseOp, EvolveOptions, TimeDependentHamiltonian};
use crate::error::{Error, Result};
use crate::qcore::{CMatrix, QOperator, QState, C64};

/// Largest change in η, absolute, accepted when the bin count is doubled.
pub const CONVERGENCE_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lineshape {
    #[default]
    Lorentzian,
    Gaussian,
}

/// How `delta_ns` sets the line: as its half width or its full width at half
/// maximum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WidthConvention {
    #[default]
    Hwhm,
    Fwhm,
}

/// Rates in rad/s or 1/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransducerParams {
    /// Ensemble-enhanced coupling `g'√N`.
    pub g_ens: f64,
    /// Inhomogeneous broadening of the spin transition.
    pub delta_ns: f64,
    pub width_convention: WidthConvention,
    pub lineshape: Lineshape,
    pub gamma1: f64,
    /// Pure-dephasing rate of each spin bin.
    pub gamma2: f64,
    pub kappa_mw: f64,
    /// Odd number of equally spaced detuning bins.
    pub n_bins: usize,
    /// Half-span of the detuning grid in units of the FWHM.
    pub span_fwhm: f64,
    pub echo_efficiency: f64,
    pub coupling_efficiency: f64,
}

impl Default for TransducerParams {
    /// `g'√N = 2π × 34 MHz`, `Δ_ns = 2π × 10 MHz`, `γ₂ = 2π × 100 kHz`,
    /// `γ₁ = 2π × 160 Hz`, `κ = 2π × 10 Hz`.
    fn default() -> Self {
        let tp = 2.0 * PI;
        Self {
            g_ens: tp * 34e6,
            delta_ns: tp * 10e6,
            width_convention: WidthConvention::Hwhm,
            lineshape: Lineshape::Lorentzian,
            gamma1: tp * 160.0,
            gamma2: tp * 100e3,
            kappa_mw: tp * 10.0,
            n_bins: 201,
            span_fwhm: 10.0,
            echo_efficiency: 0.9,
            coupling_efficiency: 0.9,
        }
    }
}

impl TransducerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_ens > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "g_ens must be > 0, got {}",
                self.g_ens
            )));
        }
        if self.n_bins < 51 || self.n_bins.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "n_bins must be odd and >= 51, got {}",
                self.n_bins
            )));
        }
        for (name, v) in [
            ("delta_ns", self.delta_ns),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("kappa_mw", self.kappa_mw),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if !(self.span_fwhm > 0.0) {
            return Err(Error::InvalidArgument("span_fwhm must be > 0".into()));
        }
        for (name, v) in [
            ("echo_efficiency", self.echo_efficiency),
            ("coupling_efficiency", self.coupling_efficiency),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn fwhm(&self) -> f64 {
        match self.width_convention {
            WidthConvention::Hwhm => 2.0 * self.delta_ns,
            WidthConvention::Fwhm => self.delta_ns,
        }
    }

    /// Swap time `T_S = π/(2g'√N)`.
    pub fn transfer_time(&self) -> f64 {
        PI / (2.0 * self.g_ens)
    }

    /// Bin detunings and couplings `g_j = g'√N √w_j` with `Σ w_j = 1`.
    pub fn bins(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_bins;
        let fwhm = self.fwhm();
        if fwhm == 0.0 {
            return (vec![0.0; n], vec![self.g_ens / (n as f64).sqrt(); n]);
        }
        let half = self.span_fwhm * fwhm;
        let det: Vec<f64> = (0..n)
            .map(|k| -half + 2.0 * half * k as f64 / (n - 1) as f64)
            .collect();
        let w: Vec<f64> = det
            .iter()
            .map(|d| match self.lineshape {
                Lineshape::Lorentzian => 1.0 / (1.0 + (2.0 * d / fwhm).powi(2)),
                Lineshape::Gaussian => {
                    let sigma = fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
                    (-d * d / (2.0 * sigma * sigma)).exp()
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        let g = w.iter().map(|x| self.g_ens * (x / total).sqrt()).collect();
        (det, g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    /// Spin population at `T_S`.
    pub eta: f64,
    pub cavity: f64,
    /// Population in the loss sink.
    pub lost: f64,
    pub time: f64,
    pub n_bins: usize,
}

/// Evolves the single excitation from the cavity for `T_S` at the given bin
/// count. Levels: cavity, `n_bins` spin bins, then a sink that collects
/// cavity decay `κ` and spin decay `γ₁`; `γ₂` dephases each bin.
pub fn transfer_dynamics(params: &TransducerParams) -> Result<TransferResult> {
    params.validate()?;
    let n = params.n_bins;
    let dim = n + 2;
    let sink = n + 1;
    let (det, g) = params.bins();
    let mut hm = CMatrix::zeros(dim, dim);
    for j in 0..n {
        hm[(0, j + 1)] = C64::new(g[j], 0.0);
        hm[(j + 1, 0)] = C64::new(g[j], 0.0);
        hm[(j + 1, j + 1)] = C64::new(det[j], 0.0);
    }
    let h = QOperator::hermitian(vec![dim], hm)?;
    let one = C64::new(1.0, 0.0);
    let dims = vec![dim];
    let mut collapse = vec![CollapseOp::sparse(
        dims.clone(),
        vec![(sink, 0, one)],
        params.kappa_mw,
    )?];
    for j in 1..=n {
        collapse.push(CollapseOp::sparse(
            dims.clone(),
            vec![(sink, j, one)],
            params.gamma1,
        )?);
        collapse.push(CollapseOp::sparse(
            dims.clone(),
            vec![(j, j, one)],
            params.gamma2,
        )?);
    }
    let t = params.transfer_time();
    let th = TimeDependentHamiltonian::new(h, (0.0, t))?;
    let rho0 = QState::fock(dim, 0)?;
    let opts = EvolveOptions::default()
        .rel_tol(1e-9)
        .abs_tol(1e-12)
        .final_only();
    let rho = evolve(&th, &collapse, &rho0, &opts)?
        .final_state
        .density_matrix();
    let pop = |k: usize| rho[(k, k)].re;
    Ok(TransferResult {
        eta: (1..=n).map(pop).sum(),
        cavity: pop(0),
        lost: pop(sink),
        time: t,
        n_bins: n,
    })
}

/// Spin transfer efficiency with a discretization check: the run is repeated
/// with `2 n_bins − 1` bins (same span, half the spacing) and must agree to
/// [`CONVERGENCE_TOL`].
pub fn spin_transfer_efficiency(params: &TransducerParams) -> Result<TransferResult> {
    let fine = TransducerParams {
        n_bins: 2 * params.n_bins - 1,
        ..*params
    };
    let (coarse, refined) = rayon::join(|| transfer_dynamics(params), || transfer_dynamics(&fine));
    let (coarse, refined) = (coarse?, refined?);
    if (coarse.eta - refined.eta).abs() > CONVERGENCE_TOL {
        return Err(Error::NotConverged {
            what: "spin-bin discretization",
            detail: format!(
                "eta = {} at {} bins vs {} at {} bins",
                coarse.eta, coarse.n_bins, refined.eta, refined.n_bins
            ),
        });
    }
    Ok(coarse)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransductionBudget {
    pub eta_transfer: f64,
    pub echo_efficiency: f64,
    pub coupling_efficiency: f64,
    /// Overall efficiency `p`.
    pub p: f64,
}

impl TransductionBudget {
    pub fn from_factors(
        eta_transfer: f64,
        echo_efficiency: f64,
        coupling_efficiency: f64,
    ) -> Result<Self> {
        for v in [eta_transfer, echo_efficiency, coupling_efficiency] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "efficiency factors must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(Self {
            eta_transfer,
            echo_efficiency,
            coupling_efficiency,
            p: eta_transfer * echo_efficiency * coupling_efficiency,
        })
    }
}

/// `p = η_transfer × echo × coupling`.
pub fn transduction_budget(params: &TransducerParams) -> Result<TransductionBudget> {
    let eta = spin_transfer_efficiency(params)?.eta;
    TransductionBudget::from_factors(eta, params.echo_efficiency, params.coupling_efficiency)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    GEns,
    DeltaNs,
    Gamma1,
    Gamma2,
    KappaMw,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::GEns => "g_ens",
            Self::DeltaNs => "delta_ns",
            Self::Gamma1 => "gamma1",
            Self::Gamma2 => "gamma2",
            Self::KappaMw => "kappa_mw",
        }
    }

    fn set(self, p: &mut TransducerParams, v: f64) {
        match self {
            Self::GEns => p.g_ens = v,
            Self::DeltaNs => p.delta_ns = v,
            Self::Gamma1 => p.gamma1 = v,
            Self::Gamma2 => p.gamma2 = v,
            Self::KappaMw => p.kappa_mw = v,
        }
    }
}

/// `(value, η)` for each value of one parameter, others fixed. Points run in
/// parallel; each carries the discretization check.
pub fn transfer_sweep(
    base: &TransducerParams,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<(f64, f64)>> {
    values
        .par_iter()
        .map(|&v| {
            let mut p = *base;
            param.set(&mut p, v);
            Ok((v, spin_transfer_efficiency(&p)?.eta))
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(w: W, param: SweepParam, points: &[(f64, f64)]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([param.name(), "eta"])?;
    for (v, eta) in points {
        wr.write_record([format!("{v:e}"), format!("{eta}")])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quick() -> TransducerParams {
        TransducerParams {
            n_bins: 51,
            ..TransducerParams::default()
        }
    }

    #[test]
    fn resonant_lossless_swap_is_complete() {
        let p = TransducerParams {
            delta_ns: 0.0,
            gamma1: 0.0,
            gamma2: 0.0,
            kappa_mw: 0.0,
            ..quick()
        };
        let r = transfer_dynamics(&p).unwrap();
        assert_abs_diff_eq!(r.eta, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn bins_are_normalized_and_symmetric() {
        for shape in [Lineshape::Lorentzian, Lineshape::Gaussian] {
            let p = TransducerParams {
                lineshape: shape,
                ..quick()
            };
            let (det, g) = p.bins();
            let total: f64 = g.iter().map(|x| x * x).sum();
            assert_abs_diff_eq!(total, p.g_ens * p.g_ens, epsilon = 1e-9 * total);
            assert_abs_diff_eq!(det[0], -det[50], epsilon = 1e-6);
            assert_eq!(det[25], 0.0);
            assert_abs_diff_eq!(det[50], 10.0 * p.fwhm(), epsilon = 1e-6);
        }
    }

    #[test]
    fn population_is_conserved() {
        let p = TransducerParams {
            gamma1: 2.0 * PI * 1e5,
            kappa_mw: 2.0 * PI * 3e6,
            ..quick()
        };
        let r = transfer_dynamics(&p).unwrap();
        assert!(r.lost > 1e-3);
        assert_abs_diff_eq!(r.eta + r.cavity + r.lost, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn efficiency_falls_with_broadening() {
        let etas: Vec<f64> = [5e6, 10e6, 20e6]
            .iter()
            .map(|d| {
                transfer_dynamics(&TransducerParams {
                    delta_ns: 2.0 * PI * d,
                    ..quick()
                })
                .unwrap()
                .eta
            })
            .collect();
        assert!(etas[0] > etas[1] && etas[1] > etas[2], "{etas:?}");
    }

    #[test]
    fn depends_only_on_rate_ratios() {
        let p = quick();
        let s = 3.7;
        let scaled = TransducerParams {
            g_ens: p.g_ens * s,
            delta_ns: p.delta_ns * s,
            gamma1: p.gamma1 * s,
            gamma2: p.gamma2 * s,
            kappa_mw: p.kappa_mw * s,
            ..p
        };
        let a = transfer_dynamics(&p).unwrap().eta;
        let b = transfer_dynamics(&scaled).unwrap().eta;
        assert_abs_diff_eq!(a, b, epsilon = 1e-7);
    }

    #[test]
    fn budget_is_a_product() {
        let b = TransductionBudget::from_factors(0.9904, 0.90, 0.95).unwrap();
        assert_abs_diff_eq!(b.p, 0.8468, epsilon = 1e-4);
        assert_eq!(
            TransductionBudget::from_factors(1.0, 1.0, 1.0).unwrap().p,
            1.0
        );
        assert!(TransductionBudget::from_factors(1.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(transfer_dynamics(&TransducerParams {
            n_bins: 52,
            ..quick()
        })
        .is_err());
        assert!(transfer_dynamics(&TransducerParams {
            n_bins: 49,
            ..quick()
        })
        .is_err());
        assert!(transfer_dynamics(&TransducerParams {
            g_ens: 0.0,
            ..quick()
        })
        .is_err());
        assert!(transfer_dynamics(&TransducerParams {
            echo_efficiency: 1.5,
            ..quick()
        })
        .is_err());
    }

    #[test]
    fn sweep_csv() {
        let pts = transfer_sweep(&quick(), SweepParam::Gamma2, &[0.0, 2.0 * PI * 1e5]).unwrap();
        assert!(pts[0].1 > pts[1].1);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, SweepParam::Gamma2, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "gamma2,eta");
        assert_eq!(text.lines().count(), 3);
    }
}
