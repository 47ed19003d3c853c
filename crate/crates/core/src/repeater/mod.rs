//! Entanglement-distribution rates and fidelities for nested repeater
//! chains, the direct-transmission and ensemble/single-ion comparators, and
//! crossover solving.

mod budget;
mod montecarlo;
mod pipeline;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use budget::{
    link_inventory, operation_budget, operation_durations, swap_inventory, BudgetOptions,
    DriveMethod, OperationBudget, OP_CNOT, OP_DRIVE, OP_TRANSDUCTION, OP_UNDRIVE, OP_X_HALF,
    OP_X_PI, OP_Z_HALF, OP_Z_PI,
};
pub use montecarlo::{monte_carlo_time, MonteCarloEstimate, MIN_TRIALS};
pub use pipeline::{
    figure6_curves, scenario_table, write_curves_csv, write_reports_csv, CurvePoint, Distance,
    Figure6Options, Pipeline, PolicyChoice, Scenario, StorageRates, DEFAULT_KERR_ROWS,
};

use crate::error::{Error, Result};

/// Speed of light in fiber, km/s.
pub const C_FIBER_KM_S: f64 = 2e5;
pub const DEFAULT_L_ATT_KM: f64 = 22.0;
/// Entangled-photon source rate for direct transmission, 1/s.
pub const DEFAULT_SOURCE_RATE: f64 = 1e9;
/// Swap waiting factor per nesting level.
pub const WAIT_FACTOR: f64 = 1.5;
/// Stopping width of the crossover bisection, km.
pub const CROSSOVER_TOL_KM: f64 = 1e-6;

/// How the emission and detection factors enter `P₀`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum P0Reading {
    /// `½ η_t p η_o²`.
    #[default]
    AsPrinted,
    /// `½ η_t (p η_o)²`: emission counted once per protocol round.
    PerRound,
}

/// One elementary link. Lengths in km, times in s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub l0_km: f64,
    pub l_att_km: f64,
    /// Emission (transduction) probability into the fiber mode.
    pub p: f64,
    /// Single-photon detection efficiency.
    pub eta_o: f64,
    /// Local-operation time per attempt at one node.
    pub t_o: f64,
    pub c_fiber: f64,
    pub p0_reading: P0Reading,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            l0_km: 50.0,
            l_att_km: DEFAULT_L_ATT_KM,
            p: 0.8,
            eta_o: 0.9,
            t_o: 0.0,
            c_fiber: C_FIBER_KM_S,
            p0_reading: P0Reading::AsPrinted,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        check_probability("p", self.p)?;
        check_probability("eta_o", self.eta_o)?;
        if !(self.l0_km >= 0.0) || !self.l0_km.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "L0 must be >= 0 km, got {}",
                self.l0_km
            )));
        }
        if !(self.l_att_km > 0.0) || !(self.c_fiber > 0.0) {
            return Err(Error::InvalidArgument(
                "attenuation length and fiber light speed must be positive".into(),
            ));
        }
        if !(self.t_o >= 0.0) || !self.t_o.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "T_o must be >= 0 s, got {}",
                self.t_o
            )));
        }
        Ok(())
    }

    /// Fiber transmission `η_t = e^{−L0/L_att}`.
    pub fn transmission(&self) -> f64 {
        (-self.l0_km / self.l_att_km).exp()
    }

    /// Success probability of one elementary-link attempt.
    pub fn p0(&self) -> f64 {
        let eta_t = self.transmission();
        match self.p0_reading {
            P0Reading::AsPrinted => 0.5 * eta_t * self.p * self.eta_o * self.eta_o,
            P0Reading::PerRound => 0.5 * eta_t * (self.p * self.eta_o).powi(2),
        }
    }

    /// Duration of one attempt, `L0/c + T_o`.
    pub fn attempt_time(&self) -> f64 {
        self.l0_km / self.c_fiber + self.t_o
    }
}

/// Where stationary qubits wait for neighbouring links.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoragePolicy {
    /// Kept as cats; decoheres at `κ_eff`.
    Cat,
    /// Undriven to Fock states in the same cavity; decays at `κ`.
    Fock,
    /// Undriven and moved to a separate cavity with the given lifetime (s).
    Transfer { lifetime: f64 },
}

impl StoragePolicy {
    /// Transfer to a 10 s cavity.
    pub const LONG_LIVED: Self = Self::Transfer { lifetime: 10.0 };

    /// Whether storage adds undrive/drive pairs to the link inventory.
    pub fn interconverts(&self) -> bool {
        !matches!(self, Self::Cat)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Transfer { lifetime } if !(*lifetime > 0.0) => Err(Error::InvalidArgument(
                format!("storage lifetime must be positive, got {lifetime}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for StoragePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Cat => write!(f, "cat"),
            Self::Fock => write!(f, "fock"),
            Self::Transfer { lifetime } => write!(f, "transfer({lifetime} s)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    /// Nesting level; the chain has `2ⁿ` elementary links.
    pub n: u32,
    /// Number of independent channel sets.
    pub m: u32,
    /// Swap success probability `P_i = η_m²`, the same at every level.
    pub swap_success: f64,
    pub storage: StoragePolicy,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            n: 3,
            m: 1,
            swap_success: 0.9,
            storage: StoragePolicy::Fock,
        }
    }
}

impl ChainParams {
    /// Swap probability from the QND readout efficiency `η_m`.
    pub fn from_eta_m(n: u32, m: u32, eta_m: f64, storage: StoragePolicy) -> Self {
        Self {
            n,
            m,
            swap_success: eta_m * eta_m,
            storage,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("multiplexing m must be >= 1".into()));
        }
        if !(self.swap_success > 0.0 && self.swap_success <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "swap success must be in (0, 1], got {}",
                self.swap_success
            )));
        }
        self.storage.validate()
    }

    pub fn links(&self) -> u64 {
        1u64 << self.n
    }
}

fn check_probability(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be in [0, 1], got {x}"
        )))
    }
}

/// `(3/2)ⁿ t_attempt / (P₀ P_swapⁿ)`.
pub fn waiting_time(n: u32, attempt_time: f64, p0: f64, swap_success: f64) -> f64 {
    WAIT_FACTOR.powi(n as i32) * attempt_time / (p0 * swap_success.powi(n as i32))
}

/// `⟨T⟩ = (3/2)ⁿ (L0/c + T_o) / (P₀ P₁ ⋯ P_n)` for one channel set.
pub fn mean_time(chain: &ChainParams, link: &LinkParams) -> f64 {
    waiting_time(chain.n, link.attempt_time(), link.p0(), chain.swap_success)
}

/// `m / ⟨T⟩`.
pub fn distribution_rate(chain: &ChainParams, link: &LinkParams) -> f64 {
    chain.m as f64 / mean_time(chain, link)
}

/// Coherence left after storing for `t` seconds under `policy`.
pub fn residual_coherence(policy: &StoragePolicy, rates: &StorageRates, t: f64) -> f64 {
    let rate = match policy {
        StoragePolicy::Cat => rates.kappa_eff,
        StoragePolicy::Fock => rates.kappa,
        StoragePolicy::Transfer { lifetime } => 1.0 / lifetime,
    };
    (-rate * t).exp()
}

/// Product of per-operation fidelities over an inventory.
fn inventory_product(
    fidelities: &std::collections::BTreeMap<String, f64>,
    inventory: &[(&str, u32)],
) -> Result<f64> {
    inventory.iter().try_fold(1.0, |acc, &(op, count)| {
        let f = fidelities
            .get(op)
            .ok_or_else(|| Error::MissingFidelity(op.to_string()))?;
        Ok(acc * f.powi(count as i32))
    })
}

/// Fidelity of one elementary link from per-operation fidelities.
pub fn elementary_fidelity(
    fidelities: &std::collections::BTreeMap<String, f64>,
    policy: &StoragePolicy,
) -> Result<f64> {
    inventory_product(fidelities, &link_inventory(policy))
}

/// Fidelity of one swap: CNOT and Hadamard at the sender, an X and a Z
/// rotation at the receiver. The Hadamard is built as `Z_{π/2} X_{π/2} Z_{π/2}`.
pub fn swap_fidelity(fidelities: &std::collections::BTreeMap<String, f64>) -> Result<f64> {
    inventory_product(fidelities, &swap_inventory())
}

/// `F_tot = F_elem^l F_swap^{l−1} C_R` with `l = 2ⁿ`.
pub fn final_fidelity(f_elem: f64, f_swap: f64, n: u32, c_r: f64) -> f64 {
    let l = 2f64.powi(n as i32);
    f_elem.powf(l) * f_swap.powf(l - 1.0) * c_r
}

/// `source_rate · e^{−L/L_att}`.
pub fn direct_transmission_rate(l_km: f64, source_rate: f64, l_att_km: f64) -> f64 {
    source_rate * (-l_km / l_att_km).exp()
}

/// Direct transmission of photon pairs through the full distance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectParams {
    pub source_rate: f64,
    pub l_att_km: f64,
    /// Weight by `η_o²` for the two detectors.
    pub detector_efficiency: Option<f64>,
}

impl Default for DirectParams {
    fn default() -> Self {
        Self {
            source_rate: DEFAULT_SOURCE_RATE,
            l_att_km: DEFAULT_L_ATT_KM,
            detector_efficiency: None,
        }
    }
}

impl DirectParams {
    pub fn rate(&self, l_km: f64) -> f64 {
        let eta = self.detector_efficiency.map_or(1.0, |e| e * e);
        eta * direct_transmission_rate(l_km, self.source_rate, self.l_att_km)
    }
}

/// Simplified ensemble-memory comparator: single-photon generation,
/// linear-optics swaps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlczParams {
    pub p_gen: f64,
    pub eta_memory: f64,
    pub eta_detection: f64,
    pub t_o: f64,
    pub fidelity_ceiling: f64,
}

impl Default for DlczParams {
    fn default() -> Self {
        Self {
            p_gen: 0.01,
            eta_memory: 0.9,
            eta_detection: 0.9,
            t_o: 0.0,
            fidelity_ceiling: 0.75,
        }
    }
}

impl DlczParams {
    /// `P₀ = p_gen η_t η_mem η_d`.
    pub fn p0(&self, l0_km: f64, l_att_km: f64) -> f64 {
        self.p_gen * (-l0_km / l_att_km).exp() * self.eta_memory * self.eta_detection
    }

    /// `P_i = ½ (η_mem η_d)²`: two retrievals and detections, at most ½.
    pub fn swap_success(&self) -> f64 {
        0.5 * (self.eta_memory * self.eta_detection).powi(2)
    }
}

/// Single rare-earth-ion comparator: the cat link model with its own
/// operation time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReParams {
    pub p: f64,
    pub eta_o: f64,
    pub swap_success: f64,
    pub t_o: f64,
    pub fidelity_ceiling: f64,
}

impl Default for ReParams {
    fn default() -> Self {
        Self {
            p: 0.8,
            eta_o: 0.9,
            swap_success: 0.9,
            t_o: 1e-4,
            fidelity_ceiling: 0.80,
        }
    }
}

/// Rate and fidelity summary for one scheme at one distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFidelityReport {
    pub scheme: String,
    pub label: String,
    pub distance_km: f64,
    pub n: u32,
    pub m: u32,
    pub storage: String,
    #[serde(rename = "P0")]
    pub p0: f64,
    /// `⟨T⟩` for one channel set, s.
    pub mean_time: f64,
    pub rate: f64,
    /// Storage time entering `C_R`, s.
    pub wait_time: Option<f64>,
    #[serde(rename = "C_R")]
    pub c_r: Option<f64>,
    #[serde(rename = "F_elem")]
    pub f_elem: Option<f64>,
    #[serde(rename = "F_swap")]
    pub f_swap: Option<f64>,
    #[serde(rename = "F_tot")]
    pub f_tot: Option<f64>,
    pub fidelity_ceiling: Option<f64>,
    pub direct_rate: f64,
    /// Whether the scheme beats direct transmission at this distance.
    pub beats_direct: bool,
}

#[allow(clippy::too_many_arguments)]
fn comparator_report(
    scheme: &str,
    l_km: f64,
    n: u32,
    m: u32,
    link: LinkParams,
    p0: f64,
    swap: f64,
    ceiling: f64,
    direct: &DirectParams,
) -> RateFidelityReport {
    let mean_time = waiting_time(n, link.attempt_time(), p0, swap);
    let rate = m as f64 / mean_time;
    let direct_rate = direct.rate(l_km);
    RateFidelityReport {
        scheme: scheme.into(),
        label: String::new(),
        distance_km: l_km,
        n,
        m,
        storage: String::new(),
        p0,
        mean_time,
        rate,
        wait_time: None,
        c_r: None,
        f_elem: None,
        f_swap: None,
        f_tot: None,
        fidelity_ceiling: Some(ceiling),
        direct_rate,
        beats_direct: rate > direct_rate,
    }
}

/// Ensemble comparator over total distance `l_km`.
pub fn dlcz_rate(
    l_km: f64,
    n: u32,
    m: u32,
    params: &DlczParams,
    l_att_km: f64,
    direct: &DirectParams,
) -> RateFidelityReport {
    let l0 = l_km / 2f64.powi(n as i32);
    let link = LinkParams {
        l0_km: l0,
        l_att_km,
        t_o: params.t_o,
        ..LinkParams::default()
    };
    let p0 = params.p0(l0, l_att_km);
    comparator_report(
        "dlcz (simplified)",
        l_km,
        n,
        m,
        link,
        p0,
        params.swap_success(),
        params.fidelity_ceiling,
        direct,
    )
}

/// Single-ion comparator over total distance `l_km`.
pub fn re_rate(
    l_km: f64,
    n: u32,
    m: u32,
    params: &ReParams,
    l_att_km: f64,
    direct: &DirectParams,
) -> RateFidelityReport {
    let l0 = l_km / 2f64.powi(n as i32);
    let link = LinkParams {
        l0_km: l0,
        l_att_km,
        p: params.p,
        eta_o: params.eta_o,
        t_o: params.t_o,
        ..LinkParams::default()
    };
    comparator_report(
        "re",
        l_km,
        n,
        m,
        link,
        link.p0(),
        params.swap_success,
        params.fidelity_ceiling,
        direct,
    )
}

/// Distance where `scheme_rate` and `reference_rate` cross, by bisection on
/// the log-ratio inside `bracket` (km).
pub fn crossover<F, G>(scheme_rate: F, reference_rate: G, bracket: (f64, f64)) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bad bracket [{lo}, {hi}]")));
    }
    let diff = |l: f64| scheme_rate(l).ln() - reference_rate(l).ln();
    let (f_lo, f_hi) = (diff(lo), diff(hi));
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::InvalidArgument(
            "rates must be positive and finite at the bracket ends".into(),
        ));
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let s_lo = f_lo.signum();
    while hi - lo > CROSSOVER_TOL_KM {
        let mid = 0.5 * (lo + hi);
        let f = diff(mid);
        if f == 0.0 {
            return Ok(mid);
        }
        if f.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
