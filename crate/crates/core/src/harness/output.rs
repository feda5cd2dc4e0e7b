//! CSV and JSON artifacts. Headers are fixed; rows follow grid or N order.
//!
//! | file | header |
//! |---|---|
//! | riccati.csv | t, P |
//! | nce.csv | t, x0_hat, xbar, k, p0, p, q, u0 |
//! | moments.csv | t, mu, v |
//! | costs.csv | N, n_paths, seed, J0_emp, J0_bar, Ji_emp_mean, Ji_bar, gap_major, gap_minor, avg_gap_sq, se_J0, se_Ji, se_avg_gap_sq |
//! | gap.csv | target, kind, theta, window, N, n_paths, J_base, J_dev, delta, se, epsilon_hat, mean_field_gap, responder_square, error |
//! | convergence.csv | see [`ConvergenceRow`] |
//! | paths.csv | path, player, t, x |

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::moments::MomentTrajectory;
use crate::nash::GapReport;
use crate::nce::NceSolution;
use crate::population::{CostReport, PopulationSample};
use crate::riccati::RiccatiSolution;

use super::study::{ConvergenceRow, ConvergenceTable};

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

pub fn write_riccati_csv(path: &Path, riccati: &RiccatiSolution) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "P"])?;
    for (t, p) in riccati.grid().nodes().iter().zip(riccati.values()) {
        w.serialize((t, p))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_nce_csv(path: &Path, nce: &NceSolution, u0: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "x0_hat", "xbar", "k", "p0", "p", "q", "u0"])?;
    for (j, t) in nce.grid.nodes().iter().enumerate() {
        w.serialize((t, nce.x0_hat[j], nce.xbar[j], nce.k[j], nce.p0[j], nce.p[j], nce.q[j], u0[j]))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_moments_csv(path: &Path, moments: &MomentTrajectory) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "mu", "v"])?;
    for (j, t) in moments.grid.nodes().iter().enumerate() {
        w.serialize((t, moments.mu[j], moments.v[j]))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(rename = "J0_emp")]
    pub j0_emp: f64,
    #[serde(rename = "J0_bar")]
    pub j0_bar: f64,
    #[serde(rename = "Ji_emp_mean")]
    pub ji_emp_mean: f64,
    #[serde(rename = "Ji_bar")]
    pub ji_bar: f64,
    pub gap_major: f64,
    pub gap_minor: f64,
    pub avg_gap_sq: f64,
    #[serde(rename = "se_J0")]
    pub se_j0: f64,
    #[serde(rename = "se_Ji")]
    pub se_ji: f64,
    pub se_avg_gap_sq: f64,
}

impl CostRow {
    pub fn new(n_paths: usize, seed: u64, n: usize, costs: &CostReport, gap: (f64, f64)) -> Self {
        CostRow {
            n,
            n_paths,
            seed,
            j0_emp: costs.j0_emp,
            j0_bar: costs.j0_bar,
            ji_emp_mean: costs.ji_emp_mean,
            ji_bar: costs.ji_bar,
            gap_major: costs.gap_major,
            gap_minor: costs.gap_minor,
            avg_gap_sq: gap.0,
            se_j0: costs.se_j0,
            se_ji: costs.se_ji_mean,
            se_avg_gap_sq: gap.1,
        }
    }

    pub fn from_convergence(row: &ConvergenceRow) -> Self {
        CostRow {
            n: row.n,
            n_paths: row.n_paths,
            seed: row.seed,
            j0_emp: row.j0_emp,
            j0_bar: row.j0_bar,
            ji_emp_mean: row.ji_emp_mean,
            ji_bar: row.ji_bar,
            gap_major: row.cost_gap_major,
            gap_minor: row.cost_gap_minor,
            avg_gap_sq: row.avg_gap_sq,
            se_j0: row.se_cost_gap_major,
            se_ji: row.se_cost_gap_minor,
            se_avg_gap_sq: row.se_avg_gap_sq,
        }
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_costs_csv(path: &Path, rows: &[CostRow]) -> Result<()> {
    write_rows(path, rows)
}

pub fn write_convergence_csv(path: &Path, table: &ConvergenceTable) -> Result<()> {
    write_rows(path, &table.rows)
}

#[derive(Serialize)]
struct GapCsvRow<'a> {
    target: &'a str,
    kind: &'a str,
    theta: f64,
    window: &'a str,
    #[serde(rename = "N")]
    n: usize,
    n_paths: usize,
    #[serde(rename = "J_base")]
    j_base: f64,
    #[serde(rename = "J_dev")]
    j_dev: f64,
    delta: f64,
    se: f64,
    epsilon_hat: f64,
    mean_field_gap: f64,
    responder_square: f64,
    error: &'a str,
}

pub fn write_gap_csv(path: &Path, reports: &[&GapReport]) -> Result<()> {
    let mut w = writer(path)?;
    for rep in reports {
        for e in &rep.entries {
            w.serialize(GapCsvRow {
                target: &e.target,
                kind: e.kind,
                theta: e.theta,
                window: &e.window,
                n: e.n,
                n_paths: e.n_paths,
                j_base: e.j_base,
                j_dev: e.j_dev,
                delta: e.delta,
                se: e.se,
                epsilon_hat: rep.epsilon_hat,
                mean_field_gap: e.mean_field_gap,
                responder_square: e.responder_square,
                error: e.error.as_deref().unwrap_or(""),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Long format; requires retained trajectories.
pub fn write_paths_csv(path: &Path, sample: &PopulationSample) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["path", "player", "t", "x"])?;
    for p in 0..sample.n_paths {
        let Some(states) = sample.minor_states(p) else { continue };
        for (i, traj) in states.iter().enumerate() {
            for (t, x) in sample.grid.nodes().iter().zip(traj) {
                w.serialize((p, i, t, x))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline. NaN and infinities become `null`.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
