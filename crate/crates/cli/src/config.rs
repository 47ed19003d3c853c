//! Run configuration. Frequencies are ordinary frequencies in Hz and are
//! converted to angular rates (×2π) before they reach the library.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;

use anyhow::{bail, Context, Result};
use catrep_core::catqubit::{CatQubitParams, DriveRatios, TwoModeOptions};
use catrep_core::device::{default_device_inputs, DeviceParams, DeviceTableOptions};
use catrep_core::pulseopt::{GrapeOptions, GrapeProblem};
use catrep_core::repeater::{
    BudgetOptions, ChainParams, DirectParams, DlczParams, DriveMethod, Figure6Options, LinkParams,
    P0Reading, PolicyChoice, ReParams, StoragePolicy, DEFAULT_KERR_ROWS,
};
use catrep_core::transducer::{Lineshape, SweepParam, TransducerParams, WidthConvention};
use serde::{Deserialize, Serialize};

const TP: f64 = 2.0 * PI;

/// Angular frequency to Hz, rounded to 12 significant digits so defaults print cleanly.
fn hz(omega: f64) -> f64 {
    format!("{:.11e}", omega / TP).parse().unwrap_or(omega / TP)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub device: DeviceSection,
    pub catqubit: CatQubitSection,
    pub grape: GrapeSection,
    pub transducer: TransducerSection,
    pub link: LinkSection,
    pub chain: ChainSection,
    pub comparators: ComparatorSection,
    pub output: OutputSection,
}

/// Cavity and ancilla unit, for `device`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceSection {
    /// Fock levels of the cavity in the Kerr fit (default 12).
    pub cavity_levels: usize,
    /// Levels of the ancilla (default 5).
    pub qubit_levels: usize,
    /// Cat amplitude used for `κ_eff` (default √2).
    pub alpha: f64,
    /// Allowed relative change of `K` at two more levels (default 5e-3).
    pub convergence_tol: f64,
    /// Defaults to the built-in sweep of 18 units.
    pub rows: Vec<DeviceRowConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceRowConfig {
    pub omega_c_hz: f64,
    pub omega_q_hz: f64,
    #[serde(rename = "K_q_hz")]
    pub k_q_hz: f64,
    pub g_hz: f64,
    pub kappa_c_hz: f64,
    pub gamma_hz: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        let d = DeviceTableOptions::default();
        let rows = default_device_inputs()
            .into_iter()
            .map(|p| DeviceRowConfig {
                omega_c_hz: hz(p.omega_c),
                omega_q_hz: hz(p.omega_q),
                k_q_hz: hz(p.k_q),
                g_hz: hz(p.g),
                kappa_c_hz: hz(p.kappa_c),
                gamma_hz: hz(p.gamma),
            })
            .collect();
        Self {
            cavity_levels: d.cavity_levels,
            qubit_levels: d.qubit_levels,
            alpha: d.alpha,
            convergence_tol: d.convergence_tol,
            rows,
        }
    }
}

/// Cat-qubit rows shared by `gates` and `rates`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatQubitSection {
    /// Default √2.
    pub alpha: f64,
    /// Fock truncation of one cavity (default 20).
    pub dim: usize,
    /// Truncation per cavity for two-cavity gates (default 14).
    pub two_mode_dim: usize,
    /// `"grape"` (default) or `"adiabatic"` drive in the rate budget.
    pub drive: DriveKind,
    /// Adiabatic rise time `Kτ` (default 5).
    #[serde(rename = "K_tau")]
    pub k_tau: f64,
    /// Default 0.9995.
    pub transduction_fidelity: f64,
    /// Defaults to `K/κ = 1e3, 1e4, 1e5`.
    pub rows: Vec<KerrRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveKind {
    Grape,
    Adiabatic,
}

/// `κ = K / K_over_kappa`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KerrRow {
    #[serde(rename = "K_over_kappa")]
    pub k_over_kappa: f64,
    #[serde(rename = "K_hz")]
    pub k_hz: f64,
}

impl KerrRow {
    pub fn label(&self) -> String {
        format!("K/kappa={:e}", self.k_over_kappa)
    }
}

impl Default for CatQubitSection {
    fn default() -> Self {
        Self {
            alpha: SQRT_2,
            dim: 20,
            two_mode_dim: TwoModeOptions::default().dim,
            drive: DriveKind::Grape,
            k_tau: 5.0,
            transduction_fidelity: 0.9995,
            rows: DEFAULT_KERR_ROWS
                .iter()
                .map(|&(r, k)| KerrRow {
                    k_over_kappa: r,
                    k_hz: hz(k),
                })
                .collect(),
        }
    }
}

/// Drive and undrive pulse optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrapeSection {
    /// Loss at which the optimized pulses are evaluated (default 1e3).
    #[serde(rename = "K_over_kappa")]
    pub k_over_kappa: f64,
    /// Default 30.
    pub dim: usize,
    /// Default 64.
    pub segments: usize,
    /// Pulse duration in units of `1/K` (default 0.5).
    #[serde(rename = "Kt")]
    pub kt: f64,
    /// Amplitude bound in units of `ℰ_p⁰` (default 5).
    pub bound_factor: f64,
    /// Default 1000.
    pub iters: usize,
    /// Default 1e-7.
    pub tol: f64,
    /// Default 0.
    pub restarts: usize,
    /// Default 0.1.
    pub perturbation: f64,
    /// Default 0.
    pub seed: u64,
}

impl Default for GrapeSection {
    fn default() -> Self {
        let g = GrapeOptions::default();
        Self {
            k_over_kappa: 1e3,
            dim: 30,
            segments: catrep_core::pulseopt::DEFAULT_SEGMENTS,
            kt: catrep_core::pulseopt::DEFAULT_KT,
            bound_factor: catrep_core::pulseopt::DEFAULT_BOUND_FACTOR,
            iters: g.max_iters,
            tol: g.convergence_tol,
            restarts: g.restarts,
            perturbation: g.perturbation,
            seed: g.seed,
        }
    }
}

/// Spin-ensemble transfer stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransducerSection {
    /// Collective coupling `g'√N` (default 34 MHz).
    pub g_ens_hz: f64,
    /// Inhomogeneous width (default 10 MHz).
    pub delta_ns_hz: f64,
    /// `"hwhm"` (default) or `"fwhm"`.
    pub width: WidthConvention,
    /// `"lorentzian"` (default) or `"gaussian"`.
    pub lineshape: Lineshape,
    /// Default 160 Hz.
    pub gamma1_hz: f64,
    /// Default 100 kHz.
    pub gamma2_hz: f64,
    /// Microwave cavity loss (default 10 Hz).
    pub kappa_hz: f64,
    /// Odd bin count (default 201).
    pub n_bins: usize,
    /// Half-span of the grid in FWHM (default 10).
    pub span_fwhm: f64,
    /// Default 0.9.
    pub echo_efficiency: f64,
    /// Default 0.9.
    pub coupling_efficiency: f64,
    /// Optional one-parameter sweep.
    pub sweep: Option<SweepConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values_hz: Vec<f64>,
}

impl Default for TransducerSection {
    fn default() -> Self {
        let t = TransducerParams::default();
        Self {
            g_ens_hz: hz(t.g_ens),
            delta_ns_hz: hz(t.delta_ns),
            width: t.width_convention,
            lineshape: t.lineshape,
            gamma1_hz: hz(t.gamma1),
            gamma2_hz: hz(t.gamma2),
            kappa_hz: hz(t.kappa_mw),
            n_bins: t.n_bins,
            span_fwhm: t.span_fwhm,
            echo_efficiency: t.echo_efficiency,
            coupling_efficiency: t.coupling_efficiency,
            sweep: None,
        }
    }
}

/// Elementary link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    /// Default 22.
    #[serde(rename = "L_att_km")]
    pub l_att_km: f64,
    /// Transduction efficiency (default 0.8).
    pub p: f64,
    /// Optical efficiency (default 0.9).
    pub eta_o: f64,
    /// Fiber light speed (default 2e5).
    pub c_km_s: f64,
    /// `"as_printed"` (default) or `"per_round"`.
    pub p0_reading: P0Reading,
    /// Link length for `mc` (default 50).
    #[serde(rename = "L0_km")]
    pub l0_km: f64,
    /// Local operation time for `mc` (default 0).
    #[serde(rename = "T_o_s")]
    pub t_o_s: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let l = LinkParams::default();
        Self {
            l_att_km: l.l_att_km,
            p: l.p,
            eta_o: l.eta_o,
            c_km_s: l.c_fiber,
            p0_reading: l.p0_reading,
            l0_km: l.l0_km,
            t_o_s: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageKind {
    Best,
    Cat,
    Fock,
    Transfer,
}

/// Repeater chain and scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    /// Nesting levels to evaluate (default 1, 2, 3).
    pub n: Vec<u32>,
    /// Multiplexing levels (default 1, 200).
    pub m: Vec<u32>,
    /// Default 0.9.
    pub swap_success: f64,
    /// `"best"` (default), `"cat"`, `"fock"` or `"transfer"`.
    pub storage: StorageKind,
    /// Long-lived memory lifetime (default 10).
    pub transfer_lifetime_s: f64,
    /// Fixed distances for `rates`; empty means at each crossover.
    pub distances_km: Vec<f64>,
    /// Crossover search bracket (default 50 to 1500).
    pub crossover_lo_km: f64,
    pub crossover_hi_km: f64,
    /// Nesting levels checked by `mc` (default 0 to 3).
    pub mc_n: Vec<u32>,
    /// Default 100000.
    pub trials: usize,
    /// Default 7.
    pub seed: u64,
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            n: vec![1, 2, 3],
            m: vec![1, 200],
            swap_success: 0.9,
            storage: StorageKind::Best,
            transfer_lifetime_s: 10.0,
            distances_km: Vec::new(),
            crossover_lo_km: 50.0,
            crossover_hi_km: 1500.0,
            mc_n: vec![0, 1, 2, 3],
            trials: 100_000,
            seed: 7,
        }
    }
}

/// Direct transmission and the two reference repeaters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparatorSection {
    /// Default 1e9.
    pub source_rate_hz: f64,
    /// Extra detector factor on the direct rate (default none).
    pub detector_efficiency: Option<f64>,
    /// Default 0.01.
    pub dlcz_p_gen: f64,
    /// Default 0.9.
    pub dlcz_eta_memory: f64,
    /// Default 0.9.
    pub dlcz_eta_detection: f64,
    /// Default 0.
    #[serde(rename = "dlcz_T_o_s")]
    pub dlcz_t_o_s: f64,
    /// Default 0.75.
    pub dlcz_fidelity_ceiling: f64,
    /// Default 0.8.
    pub re_p: f64,
    /// Default 0.9.
    pub re_eta_o: f64,
    /// Default 0.9.
    pub re_swap_success: f64,
    /// Default 1e-4.
    #[serde(rename = "re_T_o_s")]
    pub re_t_o_s: f64,
    /// Default 0.8.
    pub re_fidelity_ceiling: f64,
}

impl Default for ComparatorSection {
    fn default() -> Self {
        let d = DirectParams::default();
        let dl = DlczParams::default();
        let re = ReParams::default();
        Self {
            source_rate_hz: d.source_rate,
            detector_efficiency: d.detector_efficiency,
            dlcz_p_gen: dl.p_gen,
            dlcz_eta_memory: dl.eta_memory,
            dlcz_eta_detection: dl.eta_detection,
            dlcz_t_o_s: dl.t_o,
            dlcz_fidelity_ceiling: dl.fidelity_ceiling,
            re_p: re.p,
            re_eta_o: re.eta_o,
            re_swap_success: re.swap_success,
            re_t_o_s: re.t_o,
            re_fidelity_ceiling: re.fidelity_ceiling,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Tables and rate curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// `"csv"` (default) or `"json"`.
    pub format: Format,
    /// Curve nesting level (default 3).
    pub curve_n: u32,
    /// Curve multiplexing levels (default 1 and 200).
    pub curve_m: [u32; 2],
    /// Default 100.
    #[serde(rename = "curve_L_min_km")]
    pub curve_l_min_km: f64,
    /// Default 1000.
    #[serde(rename = "curve_L_max_km")]
    pub curve_l_max_km: f64,
    /// Default 91.
    pub curve_points: usize,
    /// Row of `catqubit.rows` used for curves (default 1e5).
    #[serde(rename = "curve_K_over_kappa")]
    pub curve_k_over_kappa: f64,
    /// Storage policy of the curves (default `"fock"`).
    pub curve_storage: StorageKind,
}

impl Default for OutputSection {
    fn default() -> Self {
        let f = Figure6Options::default();
        Self {
            format: Format::Csv,
            curve_n: f.n,
            curve_m: f.m,
            curve_l_min_km: f.l_min_km,
            curve_l_max_km: f.l_max_km,
            curve_points: f.points,
            curve_k_over_kappa: 1e5,
            curve_storage: StorageKind::Fock,
        }
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        bail!("{name} must lie in [0, 1], got {v}");
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        bail!("{name} must be positive and finite, got {v}");
    }
    Ok(())
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        bail!("{name} must be non-negative and finite, got {v}");
    }
    Ok(())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks every section; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let d = &self.device;
        if d.cavity_levels < 3 || d.qubit_levels < 2 {
            bail!("device.cavity_levels must be >= 3 and device.qubit_levels >= 2");
        }
        positive("device.alpha", d.alpha)?;
        positive("device.convergence_tol", d.convergence_tol)?;
        for (i, r) in d.rows.iter().enumerate() {
            for (k, v) in [
                ("omega_c_hz", r.omega_c_hz),
                ("omega_q_hz", r.omega_q_hz),
                ("kappa_c_hz", r.kappa_c_hz),
                ("gamma_hz", r.gamma_hz),
            ] {
                non_negative(&format!("device.rows[{i}].{k}"), v)?;
            }
            non_negative(&format!("device.rows[{i}].g_hz"), r.g_hz)?;
            non_negative(&format!("device.rows[{i}].K_q_hz"), r.k_q_hz)?;
        }

        let c = &self.catqubit;
        positive("catqubit.alpha", c.alpha)?;
        if c.dim < 4 || c.two_mode_dim < 4 {
            bail!("catqubit.dim and catqubit.two_mode_dim must be >= 4");
        }
        positive("catqubit.K_tau", c.k_tau)?;
        unit("catqubit.transduction_fidelity", c.transduction_fidelity)?;
        if c.rows.is_empty() {
            bail!("catqubit.rows must not be empty");
        }
        for (i, r) in c.rows.iter().enumerate() {
            positive(&format!("catqubit.rows[{i}].K_hz"), r.k_hz)?;
            positive(&format!("catqubit.rows[{i}].K_over_kappa"), r.k_over_kappa)?;
        }

        let g = &self.grape;
        positive("grape.K_over_kappa", g.k_over_kappa)?;
        positive("grape.Kt", g.kt)?;
        positive("grape.bound_factor", g.bound_factor)?;
        positive("grape.tol", g.tol)?;
        non_negative("grape.perturbation", g.perturbation)?;
        if g.segments < 4 {
            bail!("grape.segments must be >= 4, got {}", g.segments);
        }
        if g.dim < 4 {
            bail!("grape.dim must be >= 4, got {}", g.dim);
        }

        self.transducer_params()
            .validate()
            .context("in [transducer]")?;
        if let Some(s) = &self.transducer.sweep {
            if s.values_hz.is_empty() {
                bail!("transducer.sweep.values_hz must not be empty");
            }
            for (i, v) in s.values_hz.iter().enumerate() {
                non_negative(&format!("transducer.sweep.values_hz[{i}]"), *v)?;
            }
        }

        let l = &self.link;
        positive("link.L_att_km", l.l_att_km)?;
        unit("link.p", l.p)?;
        unit("link.eta_o", l.eta_o)?;
        positive("link.c_km_s", l.c_km_s)?;
        non_negative("link.L0_km", l.l0_km)?;
        non_negative("link.T_o_s", l.t_o_s)?;

        let ch = &self.chain;
        if ch.n.is_empty() || ch.m.is_empty() {
            bail!("chain.n and chain.m must not be empty");
        }
        if ch.m.contains(&0) {
            bail!("chain.m entries must be >= 1");
        }
        if ch.n.iter().chain(&ch.mc_n).any(|&n| n > 10) {
            bail!("chain.n and chain.mc_n entries must be <= 10");
        }
        if !(ch.swap_success > 0.0 && ch.swap_success <= 1.0) {
            bail!(
                "chain.swap_success must lie in (0, 1], got {}",
                ch.swap_success
            );
        }
        positive("chain.transfer_lifetime_s", ch.transfer_lifetime_s)?;
        for (i, v) in ch.distances_km.iter().enumerate() {
            positive(&format!("chain.distances_km[{i}]"), *v)?;
        }
        positive("chain.crossover_lo_km", ch.crossover_lo_km)?;
        if !(ch.crossover_hi_km > ch.crossover_lo_km) {
            bail!("chain.crossover_hi_km must exceed chain.crossover_lo_km");
        }
        if ch.trials < catrep_core::repeater::MIN_TRIALS {
            bail!(
                "chain.trials must be >= {}, got {}",
                catrep_core::repeater::MIN_TRIALS,
                ch.trials
            );
        }

        let cp = &self.comparators;
        positive("comparators.source_rate_hz", cp.source_rate_hz)?;
        if let Some(e) = cp.detector_efficiency {
            unit("comparators.detector_efficiency", e)?;
        }
        for (k, v) in [
            ("dlcz_p_gen", cp.dlcz_p_gen),
            ("dlcz_eta_memory", cp.dlcz_eta_memory),
            ("dlcz_eta_detection", cp.dlcz_eta_detection),
            ("dlcz_fidelity_ceiling", cp.dlcz_fidelity_ceiling),
            ("re_p", cp.re_p),
            ("re_eta_o", cp.re_eta_o),
            ("re_swap_success", cp.re_swap_success),
            ("re_fidelity_ceiling", cp.re_fidelity_ceiling),
        ] {
            unit(&format!("comparators.{k}"), v)?;
        }
        non_negative("comparators.dlcz_T_o_s", cp.dlcz_t_o_s)?;
        non_negative("comparators.re_T_o_s", cp.re_t_o_s)?;

        let o = &self.output;
        if o.curve_points < 2 {
            bail!("output.curve_points must be >= 2");
        }
        positive("output.curve_L_min_km", o.curve_l_min_km)?;
        if !(o.curve_l_max_km > o.curve_l_min_km) {
            bail!("output.curve_L_max_km must exceed output.curve_L_min_km");
        }
        if o.curve_m.contains(&0) {
            bail!("output.curve_m entries must be >= 1");
        }
        if o.curve_storage == StorageKind::Best {
            bail!("output.curve_storage must be a single policy, not \"best\"");
        }
        self.curve_row()?;
        Ok(())
    }

    pub fn cat_params(&self, row: &KerrRow) -> Result<CatQubitParams> {
        let k = TP * row.k_hz;
        Ok(CatQubitParams::new(
            k,
            k / row.k_over_kappa,
            self.catqubit.alpha,
            self.catqubit.dim,
        )?)
    }

    pub fn budget_options(&self, row: &KerrRow) -> BudgetOptions {
        let c = &self.catqubit;
        let g = &self.grape;
        let drive = match c.drive {
            DriveKind::Grape => DriveMethod::Grape {
                options: self.grape_options(),
                dim: g.dim,
            },
            DriveKind::Adiabatic => DriveMethod::Adiabatic { k_tau: c.k_tau },
        };
        BudgetOptions {
            drive,
            two_mode: TwoModeOptions {
                dim: c.two_mode_dim,
            },
            transduction_fidelity: c.transduction_fidelity,
            ..BudgetOptions::for_kerr_ratio(row.k_over_kappa)
        }
    }

    pub fn ratios(&self, row: &KerrRow) -> DriveRatios {
        DriveRatios::for_kerr_ratio(row.k_over_kappa)
    }

    pub fn grape_options(&self) -> GrapeOptions {
        let g = &self.grape;
        GrapeOptions {
            max_iters: g.iters,
            convergence_tol: g.tol,
            restarts: g.restarts,
            perturbation: g.perturbation,
            seed: g.seed,
            ..GrapeOptions::default()
        }
    }

    /// Drive and undrive problems on a lossless cavity with `K = 1`.
    pub fn grape_problems(&self) -> Result<[GrapeProblem; 2]> {
        let g = &self.grape;
        let params = CatQubitParams::new(1.0, 0.0, self.catqubit.alpha, g.dim)?;
        let bound = g.bound_factor * params.ep0();
        let base = GrapeProblem::drive(params)?;
        let (vac, cat) = (base.initial, base.target);
        let drive = GrapeProblem::new(params, vac.clone(), cat.clone(), g.kt, g.segments, bound)?;
        let undrive = GrapeProblem::new(params, cat, vac, g.kt, g.segments, bound)?;
        let guess = undrive.guess.reversed();
        Ok([drive, undrive.with_guess(guess)])
    }

    pub fn device_inputs(&self) -> Vec<DeviceParams> {
        self.device
            .rows
            .iter()
            .map(|r| DeviceParams {
                omega_c: TP * r.omega_c_hz,
                omega_q: TP * r.omega_q_hz,
                k_q: TP * r.k_q_hz,
                g: TP * r.g_hz,
                kappa_c: TP * r.kappa_c_hz,
                gamma: TP * r.gamma_hz,
            })
            .collect()
    }

    pub fn device_options(&self) -> DeviceTableOptions {
        let d = &self.device;
        DeviceTableOptions {
            cavity_levels: d.cavity_levels,
            qubit_levels: d.qubit_levels,
            alpha: d.alpha,
            convergence_tol: d.convergence_tol,
        }
    }

    pub fn transducer_params(&self) -> TransducerParams {
        let t = &self.transducer;
        TransducerParams {
            g_ens: TP * t.g_ens_hz,
            delta_ns: TP * t.delta_ns_hz,
            width_convention: t.width,
            lineshape: t.lineshape,
            gamma1: TP * t.gamma1_hz,
            gamma2: TP * t.gamma2_hz,
            kappa_mw: TP * t.kappa_hz,
            n_bins: t.n_bins,
            span_fwhm: t.span_fwhm,
            echo_efficiency: t.echo_efficiency,
            coupling_efficiency: t.coupling_efficiency,
        }
    }

    /// Link template; `L0_km` and `T_o_s` are the values used by `mc`.
    pub fn link(&self) -> LinkParams {
        let l = &self.link;
        LinkParams {
            l0_km: l.l0_km,
            l_att_km: l.l_att_km,
            p: l.p,
            eta_o: l.eta_o,
            t_o: l.t_o_s,
            c_fiber: l.c_km_s,
            p0_reading: l.p0_reading,
        }
    }

    pub fn chain(&self, n: u32, m: u32, storage: StoragePolicy) -> ChainParams {
        ChainParams {
            n,
            m,
            swap_success: self.chain.swap_success,
            storage,
        }
    }

    pub fn policy(&self, kind: StorageKind) -> PolicyChoice {
        let transfer = StoragePolicy::Transfer {
            lifetime: self.chain.transfer_lifetime_s,
        };
        let fixed = |policy| PolicyChoice::Fixed { policy };
        match kind {
            StorageKind::Best => PolicyChoice::Best {
                candidates: vec![StoragePolicy::Cat, StoragePolicy::Fock, transfer],
            },
            StorageKind::Cat => fixed(StoragePolicy::Cat),
            StorageKind::Fock => fixed(StoragePolicy::Fock),
            StorageKind::Transfer => fixed(transfer),
        }
    }

    pub fn policies(&self) -> Vec<StoragePolicy> {
        match self.policy(self.chain.storage) {
            PolicyChoice::Fixed { policy } => vec![policy],
            PolicyChoice::Best { candidates } => candidates,
        }
    }

    pub fn direct(&self) -> DirectParams {
        DirectParams {
            source_rate: self.comparators.source_rate_hz,
            l_att_km: self.link.l_att_km,
            detector_efficiency: self.comparators.detector_efficiency,
        }
    }

    pub fn dlcz(&self) -> DlczParams {
        let c = &self.comparators;
        DlczParams {
            p_gen: c.dlcz_p_gen,
            eta_memory: c.dlcz_eta_memory,
            eta_detection: c.dlcz_eta_detection,
            t_o: c.dlcz_t_o_s,
            fidelity_ceiling: c.dlcz_fidelity_ceiling,
        }
    }

    pub fn re(&self) -> ReParams {
        let c = &self.comparators;
        ReParams {
            p: c.re_p,
            eta_o: c.re_eta_o,
            swap_success: c.re_swap_success,
            t_o: c.re_t_o_s,
            fidelity_ceiling: c.re_fidelity_ceiling,
        }
    }

    pub fn curve_row(&self) -> Result<KerrRow> {
        let want = self.output.curve_k_over_kappa;
        self.catqubit
            .rows
            .iter()
            .find(|r| r.k_over_kappa == want)
            .copied()
            .with_context(|| {
                format!("output.curve_K_over_kappa = {want:e} matches no catqubit.rows entry")
            })
    }

    pub fn figure6_options(&self) -> Figure6Options {
        let o = &self.output;
        let storage = match self.policy(o.curve_storage) {
            PolicyChoice::Fixed { policy } => policy,
            PolicyChoice::Best { .. } => StoragePolicy::Fock,
        };
        Figure6Options {
            n: o.curve_n,
            m: o.curve_m,
            l_min_km: o.curve_l_min_km,
            l_max_km: o.curve_l_max_km,
            points: o.curve_points,
            storage,
            dlcz: self.dlcz(),
            re: self.re(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        assert_eq!(RunConfig::parse("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::parse("[link]\nL_att = 22.0\n").unwrap_err();
        assert!(format!("{err:#}").contains("L_att"), "{err:#}");
        assert!(RunConfig::parse("[nonsense]\n").is_err());
    }

    #[test]
    fn missing_row_key_is_named() {
        let err = RunConfig::parse("[[catqubit.rows]]\nK_over_kappa = 1e3\n").unwrap_err();
        assert!(format!("{err:#}").contains("K_hz"), "{err:#}");
    }

    #[test]
    fn out_of_range_values_name_the_key() {
        let cfg = RunConfig::parse("[link]\np = 1.5\n").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("link.p"));
        let cfg = RunConfig::parse("[chain]\ntrials = 10\n").unwrap();
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("chain.trials"));
        let cfg = RunConfig::parse("[output]\ncurve_K_over_kappa = 7.0\n").unwrap();
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("curve_K_over_kappa"));
    }

    #[test]
    fn frequencies_become_angular() {
        let cfg = RunConfig::default();
        let p = cfg.cat_params(&cfg.catqubit.rows[2]).unwrap();
        assert!((p.kerr - DEFAULT_KERR_ROWS[2].1).abs() < 1e-6);
        assert!((p.kerr / p.kappa - 1e5).abs() < 1e-6);
        assert_eq!(cfg.transducer_params(), TransducerParams::default());
        assert_eq!(cfg.device_inputs().len(), 18);
        assert_eq!(
            cfg.link(),
            LinkParams {
                t_o: 0.0,
                ..LinkParams::default()
            }
        );
    }
}
