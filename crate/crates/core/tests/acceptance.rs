//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use mfg_lqg::harness::study::{fit_loglog_slope, run_convergence_study, run_nash_study, ConvergenceTable};
use mfg_lqg::harness::{solve_model, Diagnostics, Solved};
use mfg_lqg::model::{build_time_grid, validate_params, ModelParams};
use mfg_lqg::nash::{limiting_stationarity, ResponderK};
use mfg_lqg::population::{empirical_costs, simulate_population, SimulationConfig, DEFAULT_OVERFLOW_CAP};
use mfg_lqg::riccati::solve_riccati;

const SEED: u64 = 42;
const N_PATHS: usize = 400;
const STUDY_NS: [usize; 4] = [8, 32, 128, 512];
const NASH_NS: [usize; 3] = [16, 64, 256];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit, format!("runtime {s:.2}s (limit {limit}s)"))
}

fn ratio(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn riccati_error(m: usize) -> f64 {
    let p = ModelParams::default();
    let v = validate_params(&p).unwrap();
    let g = build_time_grid(p.horizon, m).unwrap();
    let r = solve_riccati(&v, &g).unwrap();
    (0..=m)
        .map(|j| (r.at(j) - common::riccati_closed_form(&p, g.t(j))).abs())
        .fold(0.0, f64::max)
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let err = riccati_error(2000);
    let (fast, rt) = within(start.elapsed(), 1.0);
    let r1 = riccati_error(10) / riccati_error(20);
    let r2 = riccati_error(20) / riccati_error(40);
    outcome(
        err <= 1e-8 && r1 >= 12.0 && r2 >= 12.0 && fast,
        format!("max node error {err:.2e} at M=2000; refinement ratios {r1:.2} (10->20), {r2:.2} (20->40); {rt}"),
    )
}

fn criterion2() -> Outcome {
    let start = Instant::now();
    let s = solve_model(&ModelParams::default(), 2000).unwrap();
    let d = Diagnostics::of(&s).unwrap();
    let (fast, rt) = within(start.elapsed(), 5.0);
    let fine = common::nce_collocation(&ModelParams::default(), 8000);
    let mut err = 0.0f64;
    for j in 0..=2000 {
        for c in 0..6 {
            err = err.max((s.nce.component(c)[j] - fine[4 * j][c]).abs());
        }
    }
    outcome(
        err <= 1e-6 && d.nce_boundary_residual <= 1e-10 && d.condition_number < 1e10 && fast,
        format!(
            "shooting vs collocation {err:.2e}; boundary residual {:.2e}; condition number {:.3e}; {rt}",
            d.nce_boundary_residual, d.condition_number
        ),
    )
}

fn criterion3(d: &Diagnostics, elapsed: Duration) -> Outcome {
    let (fast, rt) = within(elapsed, 5.0);
    outcome(
        d.consistency_xbar < 1e-6 && d.consistency_k < 1e-6 && d.mu_xbar < 1e-10 && fast,
        format!(
            "re-integration xbar {:.2e}, k {:.2e}; mu vs xbar {:.2e}; {rt}",
            d.consistency_xbar, d.consistency_k, d.mu_xbar
        ),
    )
}

fn criterion4() -> Outcome {
    let start = Instant::now();
    let s = solve_model(&ModelParams { d: 0.0, ..ModelParams::default() }, 2000).unwrap();
    let cfg = SimulationConfig::new(50, 400, SEED);
    let sample = simulate_population(&s.params, &s.riccati, &s.nce, &cfg).unwrap();
    let xs: Vec<f64> = sample.paths.iter().flat_map(|p| p.terminal.iter().copied()).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let se_mean = (var / n).sqrt();
    let se_var = ((m4 - var * var) / n).sqrt();
    let m = s.grid.steps();
    let (mu, v) = (s.moments.mu[m], s.moments.v[m]);
    let costs = empirical_costs(&sample, &s.params, &s.riccati, &s.nce).unwrap();
    let (fast, rt) = within(start.elapsed(), 60.0);
    let ok_mean = (mean - mu).abs() < 3.0 * se_mean;
    let ok_var = (var - v).abs() < 3.0 * se_var;
    let ok_cost = (costs.ji_twin_mean - costs.ji_bar).abs() < 3.0 * costs.se_ji_twin;
    outcome(
        ok_mean && ok_var && ok_cost && fast && xs.len() >= 20_000,
        format!(
            "{} player-paths; mean {mean:.5} vs {mu:.5} (se {se_mean:.1e}); variance {var:.5} vs {v:.5} (se {se_var:.1e}); \
             minor cost {:.5} vs {:.5} (se {:.1e}); {rt}",
            xs.len(),
            costs.ji_twin_mean,
            costs.ji_bar,
            costs.se_ji_twin
        ),
    )
}

fn criterion5(table: &ConvergenceTable, elapsed: Duration) -> Outcome {
    let fit = fit_loglog_slope(table, "avg_gap_sq").unwrap();
    let p = ModelParams { a: 0.0, b: 0.0, d: 0.0, alpha: 0.0, ..ModelParams::default() };
    let noise = solve_model(&p, 2000).unwrap();
    let start = Instant::now();
    let level = run_convergence_study(&noise, &STUDY_NS, N_PATHS, SEED, 0, DEFAULT_OVERFLOW_CAP).unwrap();
    let (fast, rt) = within(elapsed + start.elapsed(), 300.0);
    let mut ok_level = true;
    let mut z = Vec::new();
    for row in &level.rows {
        let expected = (p.x_var + p.sigma * p.sigma * p.horizon) / row.n as f64;
        let score = (row.avg_gap_sq - expected) / row.se_avg_gap_sq;
        ok_level &= score.abs() < 3.0;
        z.push(format!("{score:+.2}"));
    }
    outcome(
        (-1.3..=-0.7).contains(&fit.slope) && ok_level && fast,
        format!("slope {:.3} (r2 {:.3}); pure-noise level z-scores [{}]; {rt}", fit.slope, fit.r2, z.join(", ")),
    )
}

fn criterion6(table: &ConvergenceTable) -> Outcome {
    let scaled = |f: fn(&mfg_lqg::harness::study::ConvergenceRow) -> f64| -> Vec<f64> {
        table.rows.iter().map(|r| f(r) * (r.n as f64).sqrt()).collect()
    };
    let major = scaled(|r| r.cost_gap_major);
    let minor = scaled(|r| r.cost_gap_minor);
    let (rm, rn) = (ratio(&major), ratio(&minor));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(", ");
    outcome(
        rm < 4.0 && rn < 4.0,
        format!("major gap*sqrt(N) [{}] ratio {rm:.1}; minor gap*sqrt(N) [{}] ratio {rn:.2}", fmt(&major), fmt(&minor)),
    )
}

fn envelope(eps: &[f64]) -> (bool, String) {
    let scaled: Vec<f64> = eps.iter().zip(NASH_NS).map(|(e, n)| e * (n as f64).sqrt()).collect();
    let zeros = scaled.iter().filter(|v| **v == 0.0).count();
    if zeros == scaled.len() {
        (true, "eps_hat = 0 at every N (degenerate envelope)".into())
    } else if zeros > 0 {
        (false, format!("eps_hat*sqrt(N) {scaled:?} mixes zero and positive values"))
    } else {
        let r = ratio(&scaled);
        (r < 4.0, format!("eps_hat*sqrt(N) {scaled:?} ratio {r:.2}"))
    }
}

fn criterion7(s: &Solved) -> Outcome {
    let start = Instant::now();
    let rows = run_nash_study(s, &NASH_NS, N_PATHS, SEED, 0, ResponderK::Recomputed, 0, DEFAULT_OVERFLOW_CAP).unwrap();
    let (fast, rt) = within(start.elapsed(), 300.0);
    let mut pass = fast;
    let mut notes = Vec::new();
    for (name, pick) in [("major", 0usize), ("minor", 1usize)] {
        let reports: Vec<_> = rows.iter().map(|r| if pick == 0 { &r.major } else { &r.minor }).collect();
        let family = reports[0].entries.iter().filter(|e| e.theta != 0.0).count();
        let nulls_exact = reports.iter().flat_map(|r| &r.entries).filter(|e| e.theta == 0.0).all(|e| e.delta == 0.0);
        let errors = reports.iter().flat_map(|r| &r.entries).filter(|e| !e.is_ok()).count();
        let last = reports.last().unwrap();
        let suboptimal: Vec<_> = last.entries.iter().filter(|e| e.theta == -1.0 || e.theta == 0.5).collect();
        let detected = suboptimal.iter().filter(|e| e.delta > 2.0 * e.se).count();
        let eps: Vec<f64> = reports.iter().map(|r| r.epsilon_hat).collect();
        let (ok_env, env) = envelope(&eps);
        pass &= family >= 6 && nulls_exact && errors == 0 && detected == suboptimal.len() && ok_env;
        notes.push(format!(
            "{name}: {family} deviations, null delta exact {nulls_exact}, {detected}/{} suboptimal detected at N=256, {env}",
            suboptimal.len()
        ));
    }
    outcome(pass, format!("{}; {rt}", notes.join("; ")))
}

fn criterion8() -> Outcome {
    let start = Instant::now();
    let s = solve_model(&ModelParams::default(), 8000).unwrap();
    let rows = limiting_stationarity(&s.params, &s.riccati, &s.nce, &[0.1, -0.1, 0.2, -0.2]).unwrap();
    let (fast, rt) = within(start.elapsed(), 10.0);
    let min_increase = rows.iter().map(|r| r.increase).fold(f64::MAX, f64::min);
    let mut odd = 0.0f64;
    for r in &rows {
        let mirror = rows
            .iter()
            .find(|o| o.target == r.target && o.direction == r.direction && o.theta == -r.theta)
            .unwrap();
        odd = odd.max((r.increase - mirror.increase).abs());
    }
    let cases = rows.len();
    outcome(
        min_increase >= 0.0 && odd <= 1e-8 && cases == 2 * 4 * 4 && fast,
        format!("{cases} cases at M=8000; min increase {min_increase:.3e}; max odd part {odd:.2e}; {rt}"),
    )
}

fn study_outputs(workers: usize, dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_mfg-lqg"))
        .args(["--out", dir.to_str().unwrap(), "--workers", &workers.to_string(), "study"])
        .status()
        .unwrap();
    assert!(status.code().is_some_and(|c| c <= 1), "study exited with {status}");
    ["convergence.csv", "costs.csv"]
        .iter()
        .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
        .collect()
}

fn criterion9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let a = study_outputs(1, &tmp.path().join("a"));
    let b = study_outputs(1, &tmp.path().join("b"));
    let c = study_outputs(8, &tmp.path().join("c"));
    let same_run = a == b;
    let same_workers = a == c;
    outcome(
        same_run && same_workers,
        format!("repeat run identical {same_run}; 1 vs 8 workers identical {same_workers}"),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |i: usize, o: Outcome| {
        all &= o.pass;
        println!("criterion {i}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };

    report(1, criterion1());
    report(2, criterion2());

    let start = Instant::now();
    let solved = solve_model(&ModelParams::default(), 2000).unwrap();
    let diag = Diagnostics::of(&solved).unwrap();
    report(3, criterion3(&diag, start.elapsed()));

    report(4, criterion4());

    let start = Instant::now();
    let table = run_convergence_study(&solved, &STUDY_NS, N_PATHS, SEED, 0, DEFAULT_OVERFLOW_CAP).unwrap();
    report(5, criterion5(&table, start.elapsed()));
    report(6, criterion6(&table));
    report(7, criterion7(&solved));
    report(8, criterion8());
    report(9, criterion9());

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
