//! One function per subcommand. Each computes everything in memory and
//! returns the tables to write plus a JSON summary.

use std::f64::consts::PI;

use anyhow::{Context, Result};
use catrep_core::catqubit::{
    gate_report, write_gate_report_csv, GateReportOptions, TwoModeOptions,
};
use catrep_core::device::{device_table, write_device_table_csv};
use catrep_core::pulseopt::{evaluate_pulse, grape_fidelity, grape_optimize};
use catrep_core::repeater::{
    dlcz_rate, figure6_curves, mean_time, monte_carlo_time, re_rate, write_curves_csv,
    write_reports_csv, Distance, Pipeline, RateFidelityReport, Scenario,
};
use catrep_core::transducer::{
    spin_transfer_efficiency, transduction_budget, transfer_sweep, write_sweep_csv,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

/// One output table in both encodings.
pub struct Table {
    pub stem: String,
    csv: Vec<u8>,
    json: Value,
}

impl Table {
    fn new<T: Serialize>(
        stem: &str,
        rows: &T,
        write_csv: impl FnOnce(&mut Vec<u8>) -> catrep_core::Result<()>,
    ) -> Result<Self> {
        let mut csv = Vec::new();
        write_csv(&mut csv).with_context(|| format!("writing {stem} table"))?;
        Ok(Self {
            stem: stem.into(),
            csv,
            json: serde_json::to_value(rows)?,
        })
    }

    /// CSV rows serialized from `rows` with a header from the field names.
    fn serialized<T: Serialize>(stem: &str, rows: &[T]) -> Result<Self> {
        Self::new(stem, &rows, |w| {
            let mut wr = csv::Writer::from_writer(w);
            for r in rows {
                wr.serialize(r)?;
            }
            wr.flush()?;
            Ok(())
        })
    }

    pub fn file_name(&self, format: Format) -> String {
        match format {
            Format::Csv => format!("{}.csv", self.stem),
            Format::Json => format!("{}.json", self.stem),
        }
    }

    pub fn bytes(&self, format: Format) -> Result<Vec<u8>> {
        Ok(match format {
            Format::Csv => self.csv.clone(),
            Format::Json => {
                let mut b = serde_json::to_vec_pretty(&self.json)?;
                b.push(b'\n');
                b
            }
        })
    }
}

pub struct Output {
    pub tables: Vec<Table>,
    pub summary: Value,
}

pub fn gates(cfg: &RunConfig) -> Result<Output> {
    let opts = GateReportOptions {
        drive_k_tau: cfg.catqubit.k_tau,
        two_mode: TwoModeOptions {
            dim: cfg.catqubit.two_mode_dim,
        },
    };
    let per_row: Vec<_> = cfg
        .catqubit
        .rows
        .par_iter()
        .map(|row| {
            let params = cfg.cat_params(row)?;
            gate_report(&params, cfg.ratios(row), &opts)
                .with_context(|| format!("gate report for {}", row.label()))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<_> = per_row.into_iter().flatten().collect();
    let summary = json!({ "rows": rows.len() });
    let table = Table::new("gates", &rows, |w| write_gate_report_csv(&rows, w))?;
    Ok(Output {
        tables: vec![table],
        summary,
    })
}

#[derive(Serialize)]
struct GrapeSummary {
    pulse: &'static str,
    lossless_fidelity: f64,
    initial_fidelity: f64,
    lossy_fidelity: f64,
    iterations: usize,
    converged: bool,
}

pub fn grape(cfg: &RunConfig) -> Result<Output> {
    let problems = cfg.grape_problems()?;
    let kappa = 1.0 / cfg.grape.k_over_kappa;
    let mut tables = Vec::new();
    let mut summary = Vec::new();
    for (name, problem) in ["drive", "undrive"].into_iter().zip(&problems) {
        let r = grape_optimize(problem, &cfg.grape_options())
            .with_context(|| format!("optimizing {name} pulse"))?;
        let initial = grape_fidelity(problem, &problem.initial_controls())?;
        let lossy = evaluate_pulse(problem, &r.schedule, kappa)?;
        summary.push(GrapeSummary {
            pulse: name,
            lossless_fidelity: r.fidelity,
            initial_fidelity: initial,
            lossy_fidelity: lossy,
            iterations: r.iterations,
            converged: r.converged,
        });
        let schedule = r.schedule.clone();
        tables.push(Table::new(&format!("{name}_pulse"), &schedule, |w| {
            schedule.write_csv(w, problem.n_segments)
        })?);
        let trace: Vec<_> = r
            .trace
            .iter()
            .enumerate()
            .map(|(i, f)| json!({ "iteration": i, "fidelity": f }))
            .collect();
        tables.push(Table::new(&format!("{name}_trace"), &trace, |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["iteration", "fidelity"])?;
            for (i, f) in r.trace.iter().enumerate() {
                wr.write_record([i.to_string(), f.to_string()])?;
            }
            wr.flush()?;
            Ok(())
        })?);
    }
    tables.push(Table::serialized("grape_summary", &summary)?);
    Ok(Output {
        tables,
        summary: serde_json::to_value(&summary)?,
    })
}

pub fn device(cfg: &RunConfig) -> Result<Output> {
    let rows = device_table(&cfg.device_inputs(), &cfg.device_options()).context("device table")?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.kerr_ratio()).collect();
    let summary = json!({
        "rows": rows.len(),
        "min_K_over_kappa": ratios.iter().copied().fold(f64::INFINITY, f64::min),
        "max_K_over_kappa": ratios.iter().copied().fold(0.0, f64::max),
    });
    let table = Table::new("device", &rows, |w| write_device_table_csv(w, &rows))?;
    Ok(Output {
        tables: vec![table],
        summary,
    })
}

#[derive(Serialize)]
struct TransduceRow {
    eta_transfer: f64,
    cavity: f64,
    lost: f64,
    transfer_time_s: f64,
    n_bins: usize,
    echo_efficiency: f64,
    coupling_efficiency: f64,
    p: f64,
}

pub fn transduce(cfg: &RunConfig) -> Result<Output> {
    let params = cfg.transducer_params();
    let transfer = spin_transfer_efficiency(&params).context("spin transfer")?;
    let budget = transduction_budget(&params)?;
    let row = TransduceRow {
        eta_transfer: transfer.eta,
        cavity: transfer.cavity,
        lost: transfer.lost,
        transfer_time_s: transfer.time,
        n_bins: transfer.n_bins,
        echo_efficiency: budget.echo_efficiency,
        coupling_efficiency: budget.coupling_efficiency,
        p: budget.p,
    };
    let mut tables = vec![Table::serialized("transduce", std::slice::from_ref(&row))?];
    if let Some(s) = &cfg.transducer.sweep {
        let values: Vec<f64> = s.values_hz.iter().map(|v| 2.0 * PI * v).collect();
        let points = transfer_sweep(&params, s.param, &values).context("transfer sweep")?;
        let hz: Vec<(f64, f64)> = points
            .iter()
            .map(|&(v, eta)| (v / (2.0 * PI), eta))
            .collect();
        tables.push(Table::new("sweep", &hz, |w| {
            write_sweep_csv(w, s.param, &hz)
        })?);
    }
    Ok(Output {
        tables,
        summary: serde_json::to_value(&row)?,
    })
}

fn comparator_rows(cfg: &RunConfig, r: &RateFidelityReport) -> [RateFidelityReport; 2] {
    let (l_att, direct) = (cfg.link.l_att_km, cfg.direct());
    [
        dlcz_rate(r.distance_km, r.n, r.m, &cfg.dlcz(), l_att, &direct),
        re_rate(r.distance_km, r.n, r.m, &cfg.re(), l_att, &direct),
    ]
}

fn pipeline_template(cfg: &RunConfig, mut p: Pipeline) -> Pipeline {
    p.link = cfg.link();
    p.swap_success = cfg.chain.swap_success;
    p.direct = cfg.direct();
    p
}

pub fn rates(cfg: &RunConfig, with_curves: bool) -> Result<Output> {
    let pipelines: Vec<Pipeline> = cfg
        .catqubit
        .rows
        .par_iter()
        .map(|row| {
            let p =
                Pipeline::simulate(row.label(), &cfg.cat_params(row)?, &cfg.budget_options(row))
                    .with_context(|| format!("operation budget for {}", row.label()))?;
            Ok(pipeline_template(cfg, p))
        })
        .collect::<Result<_>>()?;
    let distances: Vec<Distance> = if cfg.chain.distances_km.is_empty() {
        vec![Distance::Crossover {
            lo_km: cfg.chain.crossover_lo_km,
            hi_km: cfg.chain.crossover_hi_km,
        }]
    } else {
        cfg.chain
            .distances_km
            .iter()
            .map(|&km| Distance::Fixed { km })
            .collect()
    };
    let mut scenarios = Vec::new();
    for &n in &cfg.chain.n {
        for &m in &cfg.chain.m {
            for d in &distances {
                scenarios.push(Scenario {
                    label: format!("n{n} m{m}"),
                    n,
                    m,
                    distance: *d,
                    policy: cfg.policy(cfg.chain.storage),
                });
            }
        }
    }
    let jobs: Vec<(&Pipeline, &Scenario)> = pipelines
        .iter()
        .flat_map(|p| scenarios.iter().map(move |s| (p, s)))
        .collect();
    let reports: Vec<RateFidelityReport> = jobs
        .par_iter()
        .map(|(p, s)| {
            p.evaluate_scenario(s)
                .with_context(|| format!("{} {}", p.label, s.label))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flat_map(|r| {
            let [d, re] = comparator_rows(cfg, &r);
            [r, d, re]
        })
        .collect();
    let budgets: Vec<_> = pipelines
        .iter()
        .map(|p| json!({ "label": p.label, "budget": p.budget, "storage": p.storage }))
        .collect();
    let mut tables = vec![Table::new("rates", &reports, |w| {
        write_reports_csv(&reports, w)
    })?];
    tables.push(Table::new("budget", &budgets, |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["label", "operation", "fidelity", "duration_s"])?;
        for p in &pipelines {
            for (op, f) in &p.budget.fidelities {
                let d = p.budget.durations.get(op).copied().unwrap_or(f64::NAN);
                wr.write_record([p.label.clone(), op.clone(), f.to_string(), format!("{d:e}")])?;
            }
        }
        wr.flush()?;
        Ok(())
    })?);
    if with_curves {
        tables.push(curves_table(cfg)?);
    }
    Ok(Output {
        tables,
        summary: json!({ "reports": reports.len(), "pipelines": budgets }),
    })
}

fn rates_only(cfg: &RunConfig, row: &crate::config::KerrRow) -> Result<Pipeline> {
    let p = Pipeline::rates_only(row.label(), &cfg.cat_params(row)?, &cfg.budget_options(row))?;
    Ok(pipeline_template(cfg, p))
}

#[derive(Serialize)]
struct CrossoverRow {
    label: String,
    #[serde(rename = "K_over_kappa")]
    k_over_kappa: f64,
    n: u32,
    m: u32,
    storage: String,
    #[serde(rename = "T_o_s")]
    t_o_s: f64,
    /// Empty when the rates do not cross inside the bracket.
    crossover_km: Option<f64>,
    rate: Option<f64>,
}

pub fn crossover(cfg: &RunConfig) -> Result<Output> {
    let mut rows = Vec::new();
    let bracket = (cfg.chain.crossover_lo_km, cfg.chain.crossover_hi_km);
    for row in &cfg.catqubit.rows {
        let p = rates_only(cfg, row)?;
        for &n in &cfg.chain.n {
            for &m in &cfg.chain.m {
                for policy in cfg.policies() {
                    let chain = p.chain(n, m, policy);
                    let l = match p.crossover(&chain, bracket) {
                        Ok(l) => Some(l),
                        Err(catrep_core::Error::NoSignChange { .. }) => None,
                        Err(e) => return Err(e).with_context(|| format!("{} n{n} m{m}", p.label)),
                    };
                    rows.push(CrossoverRow {
                        label: p.label.clone(),
                        k_over_kappa: row.k_over_kappa,
                        n,
                        m,
                        storage: policy.to_string(),
                        t_o_s: p.budget.local_time(&policy)?,
                        crossover_km: l,
                        rate: l.map(|l| p.direct.rate(l)),
                    });
                }
            }
        }
    }
    let found = rows.iter().filter(|r| r.crossover_km.is_some()).count();
    let summary = json!({ "rows": rows.len(), "crossings_found": found });
    Ok(Output {
        tables: vec![Table::serialized("crossover", &rows)?],
        summary,
    })
}

#[derive(Serialize)]
struct McRow {
    n: u32,
    #[serde(rename = "P0")]
    p0: f64,
    closed_form_s: f64,
    mc_mean_s: f64,
    mc_std_error_s: f64,
    trials: usize,
    seed: u64,
    rel_diff: f64,
}

pub fn mc(cfg: &RunConfig) -> Result<Output> {
    let link = cfg.link();
    let policy = cfg.policies()[0];
    let rows: Vec<McRow> = cfg
        .chain
        .mc_n
        .iter()
        .map(|&n| {
            let chain = cfg.chain(n, 1, policy);
            let est = monte_carlo_time(&chain, &link, cfg.chain.trials, cfg.chain.seed)?;
            let closed = mean_time(&chain, &link);
            Ok(McRow {
                n,
                p0: link.p0(),
                closed_form_s: closed,
                mc_mean_s: est.mean,
                mc_std_error_s: est.std_error,
                trials: est.trials,
                seed: cfg.chain.seed,
                rel_diff: closed / est.mean - 1.0,
            })
        })
        .collect::<Result<_>>()?;
    let summary = serde_json::to_value(&rows)?;
    Ok(Output {
        tables: vec![Table::serialized("mc", &rows)?],
        summary,
    })
}

fn curves_table(cfg: &RunConfig) -> Result<Table> {
    let p = rates_only(cfg, &cfg.curve_row()?)?;
    let opts = cfg.figure6_options();
    let points = figure6_curves(&p, &opts).context("rate curves")?;
    Table::new("figure6", &points, |w| write_curves_csv(&points, opts.m, w))
}

pub fn figure6(cfg: &RunConfig) -> Result<Output> {
    let table = curves_table(cfg)?;
    let o = &cfg.output;
    let mut curves = vec!["direct".to_string()];
    for scheme in ["cat", "re", "dlcz"] {
        curves.extend(o.curve_m.iter().map(|m| format!("{scheme} m{m}")));
    }
    let summary = json!({ "points": o.curve_points, "curves": curves, "n": o.curve_n });
    Ok(Output {
        tables: vec![table],
        summary,
    })
}
