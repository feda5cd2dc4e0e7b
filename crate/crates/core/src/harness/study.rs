//! Sweeps over the population size and log-log rate fits.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nash::{default_family, deviate_major_batch, deviate_minor_batch, nash_gap, GapReport, ResponderK, Target};
use crate::population::{
    control_energy, empirical_costs, simulate_population, state_average_gap_with_se, strategy_gap,
    SimulationConfig,
};
use crate::rng::derive_seed;

use super::Solved;

/// Seed tag of the convergence study.
pub const STUDY_TAG: &str = "study";
/// Seed tag of the deviation study.
pub const GAP_TAG: &str = "gap";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub avg_gap_sq: f64,
    pub se_avg_gap_sq: f64,
    pub cost_gap_major: f64,
    pub se_cost_gap_major: f64,
    pub cost_gap_minor: f64,
    pub se_cost_gap_minor: f64,
    pub strategy_gap: f64,
    pub se_strategy_gap: f64,
    pub control_energy: f64,
    pub se_control_energy: f64,
    #[serde(rename = "J0_emp")]
    pub j0_emp: f64,
    #[serde(rename = "J0_bar")]
    pub j0_bar: f64,
    #[serde(rename = "Ji_emp_mean")]
    pub ji_emp_mean: f64,
    #[serde(rename = "Ji_bar")]
    pub ji_bar: f64,
    #[serde(rename = "Ji_twin_mean")]
    pub ji_twin_mean: f64,
    pub se_ji_twin: f64,
    pub status: String,
}

impl ConvergenceRow {
    fn failed(n: usize, n_paths: usize, seed: u64, err: &Error) -> Self {
        let nan = f64::NAN;
        ConvergenceRow {
            n,
            n_paths,
            seed,
            avg_gap_sq: nan,
            se_avg_gap_sq: nan,
            cost_gap_major: nan,
            se_cost_gap_major: nan,
            cost_gap_minor: nan,
            se_cost_gap_minor: nan,
            strategy_gap: nan,
            se_strategy_gap: nan,
            control_energy: nan,
            se_control_energy: nan,
            j0_emp: nan,
            j0_bar: nan,
            ji_emp_mean: nan,
            ji_bar: nan,
            ji_twin_mean: nan,
            se_ji_twin: nan,
            status: format!("{}: {err}", err.kind()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn value(&self, column: &str) -> Option<f64> {
        Some(match column {
            "avg_gap_sq" => self.avg_gap_sq,
            "cost_gap_major" => self.cost_gap_major,
            "cost_gap_minor" => self.cost_gap_minor,
            "strategy_gap" => self.strategy_gap,
            "control_energy" => self.control_energy,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

fn check_n_list(n_list: &[usize]) -> Result<()> {
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("N list {n_list:?} must be positive and strictly increasing")));
    }
    Ok(())
}

/// One row per N; each row uses the seed `derive_seed(seed, "study", N, 0)`. Rows whose
/// simulation fails carry the error in `status`.
pub fn run_convergence_study(
    solved: &Solved,
    n_list: &[usize],
    n_paths: usize,
    seed: u64,
    workers: usize,
    overflow_cap: f64,
) -> Result<ConvergenceTable> {
    check_n_list(n_list)?;
    let s = solved;
    let rows = n_list
        .iter()
        .map(|&n| {
            let row_seed = derive_seed(seed, STUDY_TAG, n as u64, 0);
            let mut cfg = SimulationConfig::new(n, n_paths, row_seed).with_workers(workers);
            cfg.overflow_cap = overflow_cap;
            let run = || -> Result<ConvergenceRow> {
                let sample = simulate_population(&s.params, &s.riccati, &s.nce, &cfg)?;
                let costs = empirical_costs(&sample, &s.params, &s.riccati, &s.nce)?;
                let (avg_gap_sq, se_avg_gap_sq) = state_average_gap_with_se(&sample, &s.nce);
                let (sg, se_sg) = strategy_gap(&sample);
                let (ce, se_ce) = control_energy(&sample);
                Ok(ConvergenceRow {
                    n,
                    n_paths,
                    seed: row_seed,
                    avg_gap_sq,
                    se_avg_gap_sq,
                    cost_gap_major: costs.gap_major,
                    se_cost_gap_major: costs.se_j0,
                    cost_gap_minor: costs.gap_minor,
                    se_cost_gap_minor: costs.se_ji_mean,
                    strategy_gap: sg,
                    se_strategy_gap: se_sg,
                    control_energy: ce,
                    se_control_energy: se_ce,
                    j0_emp: costs.j0_emp,
                    j0_bar: costs.j0_bar,
                    ji_emp_mean: costs.ji_emp_mean,
                    ji_bar: costs.ji_bar,
                    ji_twin_mean: costs.ji_twin_mean,
                    se_ji_twin: costs.se_ji_twin,
                    status: "ok".into(),
                })
            };
            run().unwrap_or_else(|e| ConvergenceRow::failed(n, n_paths, row_seed, &e))
        })
        .collect();
    Ok(ConvergenceTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `ln value` on `ln N`.
pub fn fit_loglog(ns: &[f64], values: &[f64]) -> Result<LogLogFit> {
    if ns.len() != values.len() || ns.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", ns.len().min(values.len()))));
    }
    if let Some(v) = values.iter().chain(ns).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Fit(format!("nonpositive or non-finite value {v}")));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all N equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LogLogFit { slope, intercept, r2 })
}

pub fn fit_loglog_slope(table: &ConvergenceTable, column: &str) -> Result<LogLogFit> {
    let mut ns = Vec::new();
    let mut vals = Vec::new();
    for row in table.rows.iter().filter(|r| r.is_ok()) {
        let v = row
            .value(column)
            .ok_or_else(|| Error::Fit(format!("unknown column {column}")))?;
        ns.push(row.n as f64);
        vals.push(v);
    }
    fit_loglog(&ns, &vals)
}

/// Gap reports for the major and one minor at a given N.
#[derive(Debug, Clone, PartialEq)]
pub struct NashRow {
    pub n: usize,
    pub seed: u64,
    pub major: GapReport,
    pub minor: GapReport,
}

/// Runs the documented deviation family for both targets at each N. The seed of a
/// row is `derive_seed(seed, "gap", N, target)` with target 0 for the major and
/// `1 + i` for minor `i`, shared by the base run and every deviation of that target.
#[allow(clippy::too_many_arguments)]
pub fn run_nash_study(
    solved: &Solved,
    n_list: &[usize],
    n_paths: usize,
    seed: u64,
    workers: usize,
    responder_k: ResponderK,
    player: usize,
    overflow_cap: f64,
) -> Result<Vec<NashRow>> {
    check_n_list(n_list)?;
    let s = solved;
    let horizon = s.grid.horizon();
    n_list
        .iter()
        .map(|&n| {
            let cfg = |id: u64| {
                let mut c = SimulationConfig::new(n, n_paths, derive_seed(seed, GAP_TAG, n as u64, id)).with_workers(workers);
                c.overflow_cap = overflow_cap;
                c
            };
            let major_cfg = cfg(0);
            let major = deviate_major_batch(
                &s.params,
                &s.riccati,
                &s.nce,
                &default_family(Target::Major, horizon),
                &major_cfg,
                responder_k,
            )?;
            let minor = deviate_minor_batch(
                &s.params,
                &s.riccati,
                &s.nce,
                &default_family(Target::Minor(player), horizon),
                &cfg(1 + player as u64),
            )?;
            Ok(NashRow {
                n,
                seed: major_cfg.seed,
                major: nash_gap(major),
                minor: nash_gap(minor),
            })
        })
        .collect()
}
