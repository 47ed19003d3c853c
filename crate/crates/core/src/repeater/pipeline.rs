//! Full rate/fidelity evaluation of the cat-qubit chain: operation budget,
//! link model, storage and crossover search, plus scenario tables and
//! rate-versus-distance curves.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    crossover, dlcz_rate, elementary_fidelity, final_fidelity, mean_time, re_rate,
    residual_coherence, swap_fidelity, BudgetOptions, ChainParams, DirectParams, DlczParams,
    LinkParams, OperationBudget, RateFidelityReport, ReParams, StoragePolicy,
};
use crate::catqubit::CatQubitParams;
use crate::device::kappa_eff;
use crate::error::Result;

/// `(K/κ, K in rad/s)` for the three reference rows.
pub const DEFAULT_KERR_ROWS: [(f64, f64); 3] = [
    (1e3, 2.0 * PI * 25.86e3),
    (1e4, 2.0 * PI * 500e3),
    (1e5, 2.0 * PI * 600e3),
];

/// Decoherence rates of a storage cavity, 1/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StorageRates {
    pub kappa: f64,
    /// Dephasing of the cat encoding.
    pub kappa_eff: f64,
}

impl StorageRates {
    /// `κ_eff = 2κα²`.
    pub fn analytic(kappa: f64, alpha: f64) -> Self {
        Self {
            kappa,
            kappa_eff: 2.0 * kappa * alpha * alpha,
        }
    }

    /// `κ_eff` fitted from a simulated coherence decay.
    pub fn simulated(params: &CatQubitParams) -> Result<Self> {
        Ok(Self {
            kappa: params.kappa,
            kappa_eff: kappa_eff(params)?.kappa_eff,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub label: String,
    pub budget: OperationBudget,
    pub storage: StorageRates,
    /// Link template; `l0_km` and `t_o` are set per evaluation.
    pub link: LinkParams,
    pub swap_success: f64,
    pub direct: DirectParams,
}

impl Pipeline {
    pub fn new(label: impl Into<String>, budget: OperationBudget, storage: StorageRates) -> Self {
        Self {
            label: label.into(),
            budget,
            storage,
            link: LinkParams::default(),
            swap_success: 0.9,
            direct: DirectParams::default(),
        }
    }

    /// Simulated budget and `κ_eff` at `params`.
    pub fn simulate(
        label: impl Into<String>,
        params: &CatQubitParams,
        opts: &BudgetOptions,
    ) -> Result<Self> {
        let budget = super::operation_budget(params, opts)?;
        Ok(Self::new(label, budget, StorageRates::simulated(params)?))
    }

    /// Durations only, for rates and crossovers. Fidelity queries fail with
    /// a missing-fidelity error.
    pub fn rates_only(
        label: impl Into<String>,
        params: &CatQubitParams,
        opts: &BudgetOptions,
    ) -> Result<Self> {
        let durations = super::operation_durations(params, opts)?;
        let budget = OperationBudget {
            fidelities: Default::default(),
            durations,
        };
        Ok(Self::new(
            label,
            budget,
            StorageRates::analytic(params.kappa, params.alpha),
        ))
    }

    pub fn chain(&self, n: u32, m: u32, storage: StoragePolicy) -> ChainParams {
        ChainParams {
            n,
            m,
            swap_success: self.swap_success,
            storage,
        }
    }

    /// Elementary link for total distance `l_km`, with `T_o` from the budget.
    pub fn link_for(&self, l_km: f64, chain: &ChainParams) -> Result<LinkParams> {
        let link = LinkParams {
            l0_km: l_km / chain.links() as f64,
            t_o: self.budget.local_time(&chain.storage)?,
            ..self.link
        };
        link.validate()?;
        Ok(link)
    }

    pub fn rate(&self, l_km: f64, chain: &ChainParams) -> Result<f64> {
        chain.validate()?;
        Ok(chain.m as f64 / mean_time(chain, &self.link_for(l_km, chain)?))
    }

    /// Storage time before the chain completes: one attempt for a single
    /// link, otherwise the mean time between successes `⟨T⟩/m`.
    pub fn wait_time(&self, chain: &ChainParams, link: &LinkParams) -> f64 {
        if chain.n == 0 {
            link.attempt_time()
        } else {
            mean_time(chain, link) / chain.m as f64
        }
    }

    pub fn evaluate(&self, l_km: f64, chain: &ChainParams) -> Result<RateFidelityReport> {
        chain.validate()?;
        let link = self.link_for(l_km, chain)?;
        let t = mean_time(chain, &link);
        let rate = chain.m as f64 / t;
        let wait = self.wait_time(chain, &link);
        let c_r = residual_coherence(&chain.storage, &self.storage, wait);
        let f_elem = elementary_fidelity(&self.budget.fidelities, &chain.storage)?;
        let f_swap = swap_fidelity(&self.budget.fidelities)?;
        let direct_rate = self.direct.rate(l_km);
        Ok(RateFidelityReport {
            scheme: "cat".into(),
            label: self.label.clone(),
            distance_km: l_km,
            n: chain.n,
            m: chain.m,
            storage: chain.storage.to_string(),
            p0: link.p0(),
            mean_time: t,
            rate,
            wait_time: Some(wait),
            c_r: Some(c_r),
            f_elem: Some(f_elem),
            f_swap: (chain.n > 0).then_some(f_swap),
            f_tot: Some(final_fidelity(f_elem, f_swap, chain.n, c_r)),
            fidelity_ceiling: None,
            direct_rate,
            beats_direct: rate > direct_rate,
        })
    }

    /// Distance where the chain starts to beat direct transmission.
    pub fn crossover(&self, chain: &ChainParams, bracket: (f64, f64)) -> Result<f64> {
        chain.validate()?;
        let template = self.link_for(bracket.0, chain)?;
        let links = chain.links() as f64;
        let scheme = |l: f64| {
            let link = LinkParams {
                l0_km: l / links,
                ..template
            };
            chain.m as f64 / mean_time(chain, &link)
        };
        crossover(scheme, |l| self.direct.rate(l), bracket)
    }

    pub fn evaluate_scenario(&self, scenario: &Scenario) -> Result<RateFidelityReport> {
        let candidates = match &scenario.policy {
            PolicyChoice::Fixed { policy } => vec![*policy],
            PolicyChoice::Best { candidates } => candidates.clone(),
        };
        let mut best: Option<RateFidelityReport> = None;
        for policy in candidates {
            let chain = self.chain(scenario.n, scenario.m, policy);
            let l = match scenario.distance {
                Distance::Fixed { km } => km,
                Distance::Crossover { lo_km, hi_km } => self.crossover(&chain, (lo_km, hi_km))?,
            };
            let mut r = self.evaluate(l, &chain)?;
            r.label = format!("{} {}", self.label, scenario.label)
                .trim()
                .to_string();
            if best.as_ref().is_none_or(|b| r.f_tot > b.f_tot) {
                best = Some(r);
            }
        }
        best.ok_or_else(|| {
            crate::error::Error::InvalidArgument("scenario has no storage policy".into())
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distance {
    Fixed {
        km: f64,
    },
    /// At the crossover with direct transmission, searched in `[lo_km, hi_km]`.
    Crossover {
        lo_km: f64,
        hi_km: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyChoice {
    Fixed {
        policy: StoragePolicy,
    },
    /// The candidate with the highest final fidelity.
    Best {
        candidates: Vec<StoragePolicy>,
    },
}

impl Default for PolicyChoice {
    fn default() -> Self {
        Self::Best {
            candidates: vec![
                StoragePolicy::Cat,
                StoragePolicy::Fock,
                StoragePolicy::LONG_LIVED,
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub n: u32,
    pub m: u32,
    pub distance: Distance,
    pub policy: PolicyChoice,
}

/// Every scenario on every pipeline, pipeline-major.
pub fn scenario_table(
    pipelines: &[Pipeline],
    scenarios: &[Scenario],
) -> Result<Vec<RateFidelityReport>> {
    let jobs: Vec<(&Pipeline, &Scenario)> = pipelines
        .iter()
        .flat_map(|p| scenarios.iter().map(move |s| (p, s)))
        .collect();
    jobs.par_iter()
        .map(|(p, s)| p.evaluate_scenario(s))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Figure6Options {
    pub n: u32,
    /// Unmultiplexed and multiplexed channel counts.
    pub m: [u32; 2],
    pub l_min_km: f64,
    pub l_max_km: f64,
    pub points: usize,
    pub storage: StoragePolicy,
    pub dlcz: DlczParams,
    pub re: ReParams,
}

impl Default for Figure6Options {
    fn default() -> Self {
        Self {
            n: 3,
            m: [1, 200],
            l_min_km: 100.0,
            l_max_km: 1000.0,
            points: 91,
            storage: StoragePolicy::Fock,
            dlcz: DlczParams::default(),
            re: ReParams::default(),
        }
    }
}

/// Rates (1/s) of every scheme at one distance; pairs are indexed like
/// [`Figure6Options::m`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub l_km: f64,
    pub direct: f64,
    pub cat: [f64; 2],
    pub re: [f64; 2],
    pub dlcz: [f64; 2],
}

pub fn figure6_curves(pipeline: &Pipeline, opts: &Figure6Options) -> Result<Vec<CurvePoint>> {
    if opts.points < 2 || !(opts.l_max_km > opts.l_min_km) || !(opts.l_min_km > 0.0) {
        return Err(crate::error::Error::InvalidArgument(
            "curve needs >= 2 points on a positive range".into(),
        ));
    }
    let l_att = pipeline.link.l_att_km;
    let step = (opts.l_max_km - opts.l_min_km) / (opts.points - 1) as f64;
    (0..opts.points)
        .map(|k| {
            let l = opts.l_min_km + step * k as f64;
            let mut p = CurvePoint {
                l_km: l,
                direct: pipeline.direct.rate(l),
                cat: [0.0; 2],
                re: [0.0; 2],
                dlcz: [0.0; 2],
            };
            for (j, &m) in opts.m.iter().enumerate() {
                p.cat[j] = pipeline.rate(l, &pipeline.chain(opts.n, m, opts.storage))?;
                p.re[j] = re_rate(l, opts.n, m, &opts.re, l_att, &pipeline.direct).rate;
                p.dlcz[j] = dlcz_rate(l, opts.n, m, &opts.dlcz, l_att, &pipeline.direct).rate;
            }
            Ok(p)
        })
        .collect()
}

/// Columns `L_km, rate_direct`, then cat, RE and DLCZ rates per `m`.
pub fn write_curves_csv<W: Write>(points: &[CurvePoint], m: [u32; 2], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["L_km".to_string(), "rate_direct".to_string()];
    for scheme in ["cat", "re", "dlcz"] {
        header.extend(m.iter().map(|m| format!("rate_{scheme}_m{m}")));
    }
    wr.write_record(&header)?;
    for p in points {
        let mut rec = vec![p.l_km, p.direct];
        rec.extend(p.cat);
        rec.extend(p.re);
        rec.extend(p.dlcz);
        wr.write_record(rec.iter().map(|x| format!("{x:e}")))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_reports_csv<W: Write>(reports: &[RateFidelityReport], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in reports {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}
