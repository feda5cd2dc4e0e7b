use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mfg_lqg::harness::config::{load_config, RunConfig};
use mfg_lqg::harness::output::{
    write_convergence_csv, write_costs_csv, write_gap_csv, write_json, write_moments_csv, write_nce_csv,
    write_paths_csv, write_riccati_csv, CostRow,
};
use mfg_lqg::harness::study::{fit_loglog_slope, run_convergence_study, run_nash_study, STUDY_TAG};
use mfg_lqg::harness::{solve_model, Diagnostics, Solved};
use mfg_lqg::nash::{default_family, deviate_major_batch, deviate_minor_batch, nash_gap, GapReport, Target};
use mfg_lqg::population::{empirical_costs, simulate_population, state_average_gap_with_se, SimulationConfig};
use mfg_lqg::rng::derive_seed;
use mfg_lqg::{Error, Result};

/// Largest `N * n_paths` for which `simulate --retain` writes paths.csv.
const PATHS_CSV_LIMIT: usize = 1000;

#[derive(Parser)]
#[command(name = "mfg-lqg", version, about = "Major-minor mean-field LQG game solver")]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model parameters.
    Validate,
    /// Solve the Riccati equation.
    Riccati,
    /// Solve the consistency system and check residuals.
    Nce,
    /// Simulate one population and compare costs with the limiting values.
    Simulate {
        #[arg(long = "N", alias = "n")]
        n: usize,
        #[arg(long)]
        paths: usize,
        /// Also write paths.csv (small runs only).
        #[arg(long)]
        retain: bool,
    },
    /// Deviation study over the documented family.
    Gap {
        #[arg(long, value_enum, default_value = "both")]
        family: Family,
        /// Population sizes; defaults to the configured nash_N_list.
        #[arg(long = "Ns", alias = "ns", value_delimiter = ',')]
        ns: Option<Vec<usize>>,
    },
    /// Convergence table across N with rate fits.
    Study {
        /// Population sizes; defaults to the configured N_list.
        #[arg(long = "Ns", alias = "ns", value_delimiter = ',')]
        ns: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    Major,
    Minor,
    Both,
}

struct Run {
    config: RunConfig,
    out: PathBuf,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn seed(&self) -> u64 {
        self.config.study.seed
    }

    fn summary(&self, command: &str, solved: Option<(&Solved, &Diagnostics)>, extra: Value, failures: &[String]) -> Value {
        let mut v = json!({
            "command": command,
            "params": self.config.model,
            "grid": { "M": self.config.grid.steps, "T": self.config.model.horizon },
            "seed": self.seed(),
            "n_paths": self.config.study.n_paths,
            "responder_k": self.config.study.responder_k,
            "tolerances": self.config.checks,
            "passed": failures.is_empty(),
            "failed_checks": failures,
        });
        if let Some((_, d)) = solved {
            v["diagnostics"] = json!(d);
        }
        if let Value::Object(extra) = extra {
            v.as_object_mut().unwrap().extend(extra);
        }
        v
    }
}

fn deterministic(run: &Run) -> Result<(Solved, Diagnostics, Vec<String>)> {
    let solved = solve_model(&run.config.model, run.config.grid.steps)?;
    let diag = Diagnostics::of(&solved)?;
    let failures = diag.failures(&run.config.checks).into_iter().map(String::from).collect();
    Ok((solved, diag, failures))
}

fn sim_config(run: &Run, n: usize, paths: usize, seed: u64) -> SimulationConfig {
    let mut c = SimulationConfig::new(n, paths, seed).with_workers(run.config.study.workers);
    c.overflow_cap = run.config.study.overflow_cap;
    c
}

fn execute(cli: &Cli) -> Result<bool> {
    let mut config = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.study.seed = s;
    }
    if let Some(w) = cli.workers {
        config.study.workers = w;
    }
    let run = Run {
        config,
        out: cli.out.clone(),
    };

    if let Command::Validate = cli.command {
        let violations = run.config.model.violations();
        for v in &violations {
            eprintln!("{}", json!({ "error": { "kind": "invalid_params", "message": v } }));
        }
        std::fs::create_dir_all(&run.out)?;
        let summary = run.summary("validate", None, json!({ "violations": violations }), &violations);
        write_json(&run.path("summary.json"), &summary)?;
        return Ok(violations.is_empty());
    }

    let (solved, diag, mut failures) = deterministic(&run)?;
    std::fs::create_dir_all(&run.out)?;
    let s = &solved;
    let extra = match &cli.command {
        Command::Validate => unreachable!(),
        Command::Riccati => {
            write_riccati_csv(&run.path("riccati.csv"), &s.riccati)?;
            json!({})
        }
        Command::Nce => {
            write_riccati_csv(&run.path("riccati.csv"), &s.riccati)?;
            write_nce_csv(&run.path("nce.csv"), &s.nce, &s.nce.major_control(&s.params))?;
            write_moments_csv(&run.path("moments.csv"), &s.moments)?;
            json!({})
        }
        Command::Simulate { n, paths, retain } => {
            let seed = derive_seed(run.seed(), "simulate", *n as u64, 0);
            let mut cfg = sim_config(&run, *n, *paths, seed);
            let write_paths = *retain && n * paths <= PATHS_CSV_LIMIT;
            cfg.retain_paths = write_paths;
            let sample = simulate_population(&s.params, &s.riccati, &s.nce, &cfg)?;
            let costs = empirical_costs(&sample, &s.params, &s.riccati, &s.nce)?;
            let gap = state_average_gap_with_se(&sample, &s.nce);
            write_costs_csv(&run.path("costs.csv"), &[CostRow::new(*paths, seed, *n, &costs, gap)])?;
            if write_paths {
                write_paths_csv(&run.path("paths.csv"), &sample)?;
            }
            json!({ "simulate": { "N": n, "seed": seed, "paths_csv": write_paths, "Ji_twin_mean": costs.ji_twin_mean, "se_Ji_twin": costs.se_ji_twin } })
        }
        Command::Gap { family, ns } => {
            let study = &run.config.study;
            let ns = ns.clone().unwrap_or_else(|| study.nash_n_list.clone());
            let reports: Vec<(usize, Option<GapReport>, Option<GapReport>)> = if *family == Family::Both {
                run_nash_study(
                    s,
                    &ns,
                    study.n_paths,
                    run.seed(),
                    study.workers,
                    study.responder_k,
                    study.gap_player,
                    study.overflow_cap,
                )?
                .into_iter()
                .map(|r| (r.n, Some(r.major), Some(r.minor)))
                .collect()
            } else {
                ns.iter()
                    .map(|&n| -> Result<_> {
                        let h = s.grid.horizon();
                        Ok(if *family == Family::Major {
                            let cfg = sim_config(&run, n, study.n_paths, derive_seed(run.seed(), "gap", n as u64, 0));
                            let e = deviate_major_batch(&s.params, &s.riccati, &s.nce, &default_family(Target::Major, h), &cfg, study.responder_k)?;
                            (n, Some(nash_gap(e)), None)
                        } else {
                            let i = study.gap_player;
                            let cfg = sim_config(&run, n, study.n_paths, derive_seed(run.seed(), "gap", n as u64, 1 + i as u64));
                            let e = deviate_minor_batch(&s.params, &s.riccati, &s.nce, &default_family(Target::Minor(i), h), &cfg)?;
                            (n, None, Some(nash_gap(e)))
                        })
                    })
                    .collect::<Result<_>>()?
            };
            let all: Vec<&GapReport> = reports.iter().flat_map(|(_, a, b)| a.iter().chain(b.iter())).collect();
            write_gap_csv(&run.path("gap.csv"), &all)?;
            for rep in &all {
                for e in &rep.entries {
                    if let Some(err) = &e.error {
                        failures.push(format!("{} {} theta={}: {err}", e.target, e.kind, e.theta));
                    } else if e.theta == 0.0 && e.delta != 0.0 {
                        failures.push(format!("{} null deviation delta {}", e.target, e.delta));
                    }
                }
            }
            let eps: Vec<Value> = reports
                .iter()
                .map(|(n, a, b)| {
                    json!({
                        "N": n,
                        "epsilon_hat_major": a.as_ref().map(|r| r.epsilon_hat),
                        "epsilon_hat_minor": b.as_ref().map(|r| r.epsilon_hat),
                    })
                })
                .collect();
            json!({ "gap": eps })
        }
        Command::Study { ns } => {
            let study = &run.config.study;
            let ns = ns.clone().unwrap_or_else(|| study.n_list.clone());
            let table = run_convergence_study(s, &ns, study.n_paths, run.seed(), study.workers, study.overflow_cap)?;
            write_convergence_csv(&run.path("convergence.csv"), &table)?;
            let cost_rows: Vec<CostRow> = table.rows.iter().map(CostRow::from_convergence).collect();
            write_costs_csv(&run.path("costs.csv"), &cost_rows)?;
            for row in table.rows.iter().filter(|r| !r.is_ok()) {
                failures.push(format!("N={}: {}", row.n, row.status));
            }
            let mut fits = serde_json::Map::new();
            for column in ["avg_gap_sq", "cost_gap_major", "cost_gap_minor", "strategy_gap"] {
                let v = match fit_loglog_slope(&table, column) {
                    Ok(f) => json!(f),
                    Err(e) => json!({ "error": e.to_string() }),
                };
                fits.insert(column.into(), v);
            }
            json!({ "study": { "seed_tag": STUDY_TAG, "N": ns, "fits": fits } })
        }
    };
    let summary = run.summary(command_name(&cli.command), Some((s, &diag)), extra, &failures);
    write_json(&run.path("summary.json"), &summary)?;
    for f in &failures {
        eprintln!("{}", json!({ "error": { "kind": "check_failed", "message": f } }));
    }
    Ok(failures.is_empty())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate => "validate",
        Command::Riccati => "riccati",
        Command::Nce => "nce",
        Command::Simulate { .. } => "simulate",
        Command::Gap { .. } => "gap",
        Command::Study { .. } => "study",
    }
}

fn report_error(e: &Error, out: &Path) {
    let record = json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
    eprintln!("{record}");
    if std::fs::create_dir_all(out).is_ok() {
        let _ = write_json(&out.join("error.json"), &record);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            report_error(&e, &cli.out);
            ExitCode::from(2)
        }
    }
}
