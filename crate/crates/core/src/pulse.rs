//! Two-photon drive envelopes `ℰ_p(t)` and `ℰ_p⊥(t)`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Coefficient, PiecewiseConstant};
use crate::error::{Error, Result};
use crate::qcore::C64;

/// Pulse amplitudes in rad/s over `[0, duration]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseSchedule {
    /// `ℰ_p(t) = ℰ_p⁰ (1 − e^{−(t/τ)⁴})` on `[0, 1.3τ]`, or its time reverse.
    Adiabatic {
        amplitude: f64,
        tau: f64,
        reversed: bool,
    },
    /// Piecewise-constant in-phase and quadrature amplitudes.
    Piecewise {
        edges: Vec<f64>,
        e_p: Vec<f64>,
        e_p_perp: Vec<f64>,
    },
}

/// Ratio of the adiabatic pulse duration to its rise time τ.
pub const ADIABATIC_DURATION_FACTOR: f64 = 1.3;

impl PulseSchedule {
    pub fn adiabatic(amplitude: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "adiabatic pulse needs tau > 0, got {tau}"
            )));
        }
        Ok(Self::Adiabatic {
            amplitude,
            tau,
            reversed: false,
        })
    }

    pub fn piecewise(edges: Vec<f64>, e_p: Vec<f64>, e_p_perp: Vec<f64>) -> Result<Self> {
        if e_p.len() != e_p_perp.len() {
            return Err(Error::InvalidArgument("quadrature lengths differ".into()));
        }
        if edges.first().copied() != Some(0.0) {
            return Err(Error::InvalidArgument(
                "piecewise pulse must start at t = 0".into(),
            ));
        }
        // Validates edge ordering and counts.
        PiecewiseConstant::new(
            edges.clone(),
            e_p.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )?;
        Ok(Self::Piecewise {
            edges,
            e_p,
            e_p_perp,
        })
    }

    /// Equal segments on `[0, duration]`.
    pub fn uniform(duration: f64, e_p: Vec<f64>, e_p_perp: Vec<f64>) -> Result<Self> {
        let n = e_p.len();
        if n == 0 || !(duration > 0.0) {
            return Err(Error::InvalidArgument(
                "uniform pulse needs segments and a positive duration".into(),
            ));
        }
        let edges = (0..=n).map(|k| duration * k as f64 / n as f64).collect();
        Self::piecewise(edges, e_p, e_p_perp)
    }

    pub fn duration(&self) -> f64 {
        match self {
            Self::Adiabatic { tau, .. } => ADIABATIC_DURATION_FACTOR * tau,
            Self::Piecewise { edges, .. } => *edges.last().unwrap(),
        }
    }

    pub fn e_p(&self, t: f64) -> f64 {
        match self {
            Self::Adiabatic {
                amplitude,
                tau,
                reversed,
            } => {
                let s = if *reversed { self.duration() - t } else { t };
                amplitude * (1.0 - (-(s / tau).powi(4)).exp())
            }
            Self::Piecewise { edges, e_p, .. } => e_p[segment(edges, t)],
        }
    }

    pub fn e_p_perp(&self, t: f64) -> f64 {
        match self {
            Self::Adiabatic { .. } => 0.0,
            Self::Piecewise {
                edges, e_p_perp, ..
            } => e_p_perp[segment(edges, t)],
        }
    }

    /// `ℰ(T − t)`.
    pub fn reversed(&self) -> Self {
        match self {
            Self::Adiabatic {
                amplitude,
                tau,
                reversed,
            } => Self::Adiabatic {
                amplitude: *amplitude,
                tau: *tau,
                reversed: !reversed,
            },
            Self::Piecewise {
                edges,
                e_p,
                e_p_perp,
            } => {
                let total = *edges.last().unwrap();
                Self::Piecewise {
                    edges: edges.iter().rev().map(|e| total - e).collect(),
                    e_p: e_p.iter().rev().copied().collect(),
                    e_p_perp: e_p_perp.iter().rev().copied().collect(),
                }
            }
        }
    }

    /// Piecewise-constant version with `n` equal segments, sampled at segment
    /// midpoints.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "resample needs at least one segment".into(),
            ));
        }
        let total = self.duration();
        let mid = |k: usize| total * (k as f64 + 0.5) / n as f64;
        Self::uniform(
            total,
            (0..n).map(|k| self.e_p(mid(k))).collect(),
            (0..n).map(|k| self.e_p_perp(mid(k))).collect(),
        )
    }

    /// Coefficients for the `(a†² + a²)` and `i(a†² − a²)` control terms.
    pub fn coefficients(&self) -> (Coefficient, Coefficient) {
        match self {
            Self::Adiabatic { .. } => {
                let p = self.clone();
                (
                    Coefficient::function(move |t| C64::new(p.e_p(t), 0.0)),
                    Coefficient::real(0.0),
                )
            }
            Self::Piecewise {
                edges,
                e_p,
                e_p_perp,
            } => {
                let mk = |v: &[f64]| {
                    Coefficient::Piecewise(
                        PiecewiseConstant::new(
                            edges.clone(),
                            v.iter().map(|&x| C64::new(x, 0.0)).collect(),
                        )
                        .expect("validated at construction"),
                    )
                };
                (mk(e_p), mk(e_p_perp))
            }
        }
    }

    pub fn max_amplitude(&self) -> f64 {
        match self {
            Self::Adiabatic { amplitude, .. } => amplitude.abs(),
            Self::Piecewise { e_p, e_p_perp, .. } => e_p
                .iter()
                .chain(e_p_perp)
                .fold(0.0f64, |m, x| m.max(x.abs())),
        }
    }

    /// CSV rows `(t_start, t_end, E_p, E_p_perp)`. Closed-form pulses are
    /// written as `samples` midpoint-sampled segments.
    pub fn write_csv<W: Write>(&self, w: W, samples: usize) -> Result<()> {
        let pw = match self {
            Self::Piecewise { .. } => self.clone(),
            Self::Adiabatic { .. } => self.resample(samples)?,
        };
        let Self::Piecewise {
            edges,
            e_p,
            e_p_perp,
        } = &pw
        else {
            unreachable!()
        };
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t_start", "t_end", "E_p", "E_p_perp"])?;
        for k in 0..e_p.len() {
            wr.write_record([
                format!("{:e}", edges[k]),
                format!("{:e}", edges[k + 1]),
                format!("{:e}", e_p[k]),
                format!("{:e}", e_p_perp[k]),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn segment(edges: &[f64], t: f64) -> usize {
    edges[1..edges.len() - 1].partition_point(|&e| e <= t)
}
