//! Gate tables: one row per operation with duration and fidelity.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    adiabatic_drive_pulse, cnot, drive_gate, gate_g, gate_x, gate_z, undrive_gate, CatQubitParams,
    TwoModeOptions,
};
use crate::error::Result;

/// Gate drive strengths as fractions of the stabilizing drive:
/// `ℰ_x = ℰ_p⁰/x` and `ℰ_c = ℰ_p⁰/c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveRatios {
    pub x: f64,
    pub c: f64,
}

impl DriveRatios {
    /// Ratios used at `K/κ` of 10³, 10⁴ and 10⁵; other values take the
    /// nearest of the three on a log scale.
    pub fn for_kerr_ratio(k_over_kappa: f64) -> Self {
        let l = k_over_kappa.log10();
        if l < 3.5 {
            Self { x: 10.0, c: 15.0 }
        } else if l < 4.5 {
            Self { x: 20.0, c: 25.0 }
        } else {
            Self { x: 45.0, c: 55.0 }
        }
    }

    pub fn e_x(&self, params: &CatQubitParams) -> f64 {
        params.ep0() / self.x
    }

    pub fn e_c(&self, params: &CatQubitParams) -> f64 {
        params.ep0() / self.c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReportOptions {
    /// Rise time of the adiabatic drive pulse in units of `1/K`.
    pub drive_k_tau: f64,
    pub two_mode: TwoModeOptions,
}

impl Default for GateReportOptions {
    fn default() -> Self {
        Self {
            drive_k_tau: 5.0,
            two_mode: TwoModeOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReportRow {
    pub operation: String,
    #[serde(rename = "K")]
    pub kerr: f64,
    pub kappa: f64,
    pub duration_s: f64,
    #[serde(rename = "duration_Kt")]
    pub duration_kt: f64,
    pub fidelity: f64,
}

/// Drive, undrive, `X_{π/2}`, `Z_{π/2}`, `G_{π/2}` and CNOT for one `(K, κ)` pair.
pub fn gate_report(
    params: &CatQubitParams,
    ratios: DriveRatios,
    opts: &GateReportOptions,
) -> Result<Vec<GateReportRow>> {
    params.validate()?;
    let pulse = adiabatic_drive_pulse(params, opts.drive_k_tau / params.kerr)?;
    let (e_x, e_c) = (ratios.e_x(params), ratios.e_c(params));
    let outcomes = [
        drive_gate(params, &pulse)?,
        undrive_gate(params, &pulse)?,
        gate_x(params, FRAC_PI_2, e_x)?,
        gate_z(params, FRAC_PI_2)?,
        gate_g(params, FRAC_PI_2, e_c, &opts.two_mode)?,
        cnot(params, e_x, e_c, &opts.two_mode)?,
    ];
    Ok(outcomes.iter().map(|o| o.row(params)).collect())
}

/// CSV with columns `operation, K, kappa, duration_s, duration_Kt, fidelity`.
pub fn write_gate_report_csv<W: Write>(rows: &[GateReportRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record([
        "operation",
        "K",
        "kappa",
        "duration_s",
        "duration_Kt",
        "fidelity",
    ])?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
