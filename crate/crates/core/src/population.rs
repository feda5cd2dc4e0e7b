//! Monte Carlo simulation of the finite population under the decentralized
//! strategies.
//!
//! Each minor evolves by an Euler-Maruyama step
//!
//! ```text
//! x_{j+1} = x_j + h [A x_j + B u_j + D avg_j + alpha x0_j] + c_j + sigma sqrt(h) zeta_j
//! ```
//!
//! where `avg_j` is the same-step state average and `c_j` is a deterministic anchor
//! correction: with `r` the mean-field path the responders were built against,
//! `c_j = (r_{j+1} - r_j) - h f_j(r_j)`, `f_j` being the noise-free closed-loop drift
//! evaluated on the mean field. The correction is the local defect of explicit Euler
//! along `r`, so a noise-free population reproduces `r` exactly and the scheme stays
//! first order for the fluctuations.

use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{TimeGrid, ValidatedParams};
use crate::moments::{limiting_cost_major, limiting_cost_minor, solve_moments};
use crate::nce::NceSolution;
use crate::ode::mean_and_se;
use crate::riccati::RiccatiSolution;
use crate::rng::player_stream;
use rand::Rng;

pub const DEFAULT_OVERFLOW_CAP: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_players: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Size of the worker pool; 0 uses the rayon default.
    pub workers: usize,
    /// Keep every minor trajectory (memory `N * (M + 1) * n_paths`).
    pub retain_paths: bool,
    pub overflow_cap: f64,
    /// Noise stream attached to each player; identity when `None`.
    pub player_streams: Option<Vec<u64>>,
}

impl SimulationConfig {
    pub fn new(n_players: usize, n_paths: usize, seed: u64) -> Self {
        SimulationConfig {
            n_players,
            n_paths,
            seed,
            workers: 0,
            retain_paths: false,
            overflow_cap: DEFAULT_OVERFLOW_CAP,
            player_streams: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn retaining_paths(mut self) -> Self {
        self.retain_paths = true;
        self
    }

    fn check(&self) -> Result<()> {
        if self.n_players == 0 || self.n_paths == 0 {
            return Err(Error::InvalidParams(vec!["N and n_paths must be >= 1".into()]));
        }
        if let Some(s) = &self.player_streams {
            if s.len() != self.n_players {
                return Err(Error::InvalidParams(vec![format!(
                    "{} player streams for N = {}",
                    s.len(),
                    self.n_players
                )]));
            }
        }
        Ok(())
    }

    fn stream(&self, player: usize) -> u64 {
        self.player_streams.as_ref().map_or(player as u64, |s| s[player])
    }
}

/// Perturbation of one minor's feedback: `u' = (1 + scale) u + offset(t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FeedbackPerturbation {
    pub player: usize,
    pub scale: f64,
    pub offset: Vec<f64>,
}

/// Everything a batch of paths needs, sampled at the grid nodes.
#[derive(Debug, Clone)]
pub(crate) struct Scenario {
    pub grid: TimeGrid,
    pub p: Vec<f64>,
    /// Offset function used by every equilibrium feedback.
    pub k: Vec<f64>,
    pub major: Vec<f64>,
    pub major_control: Vec<f64>,
    /// Mean field the strategies are built against; anchors the scheme and drives the twins.
    pub reference: Vec<f64>,
    pub deviant: Option<FeedbackPerturbation>,
    pub twins: bool,
}

impl Scenario {
    /// The equilibrium population: major on the NCE path, responders with the NCE offset.
    pub fn equilibrium(riccati: &RiccatiSolution, nce: &NceSolution, params: &ValidatedParams) -> Self {
        Scenario {
            grid: nce.grid.clone(),
            p: riccati.values().to_vec(),
            k: nce.k.clone(),
            major: nce.x0_hat.clone(),
            major_control: nce.major_control(params),
            reference: nce.xbar.clone(),
            deviant: None,
            twins: true,
        }
    }

    fn anchors(&self, params: &ValidatedParams) -> Vec<f64> {
        let g = params.minor_control_factor();
        let h = self.grid.step();
        let r = &self.reference;
        (0..self.grid.steps())
            .map(|j| {
                let f = (params.a - g * self.p[j] + params.d) * r[j] - g * self.k[j] + params.alpha * self.major[j];
                (r[j + 1] - r[j]) - h * f
            })
            .collect()
    }

    pub fn run(&self, params: &ValidatedParams, config: &SimulationConfig) -> Result<Vec<PathRecord>> {
        config.check()?;
        if let Some(d) = &self.deviant {
            if d.player >= config.n_players {
                return Err(Error::InvalidDeviation(format!(
                    "player {} out of range for N = {}",
                    d.player, config.n_players
                )));
            }
        }
        let anchors = self.anchors(params);
        let job = |path: usize| simulate_path(self, params, config, &anchors, path);
        let run_all = || (0..config.n_paths).into_par_iter().map(job).collect::<Vec<_>>();
        let results = if config.workers == 0 {
            run_all()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?
                .install(run_all)
        };
        results.into_iter().collect()
    }
}

/// Per-path statistics; costs use the trapezoid rule on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub state_average: Vec<f64>,
    /// Average of `x_k(t_j)^2` over the non-deviating players.
    pub responder_square: Vec<f64>,
    pub minor_costs: Vec<f64>,
    pub major_cost: f64,
    /// Costs of the limiting twins (empty when twins are off).
    pub twin_costs: Vec<f64>,
    /// Player average of `sup_t (u_i - ubar_i)^2` against the twins.
    pub strategy_gap: f64,
    /// Player average of `int u_i^2 dt`.
    pub control_energy: f64,
    pub terminal: Vec<f64>,
    /// `states[i][j]`, only when paths are retained.
    pub states: Option<Vec<Vec<f64>>>,
}

fn simulate_path(
    sc: &Scenario,
    params: &ValidatedParams,
    config: &SimulationConfig,
    anchors: &[f64],
    path: usize,
) -> Result<PathRecord> {
    let n = config.n_players;
    let grid = &sc.grid;
    let m = grid.steps();
    let h = grid.step();
    let noise = params.sigma * h.sqrt();
    let br = params.b / params.r;
    let init_sd = params.x_var.sqrt();

    let mut rngs: Vec<_> = (0..n).map(|i| player_stream(config.seed, path, config.stream(i))).collect();
    let mut x: Vec<f64> = rngs
        .iter_mut()
        .map(|rng| params.x_mean + init_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut twin: Vec<f64> = if sc.twins { x.clone() } else { Vec::new() };

    let mut states = config.retain_paths.then(|| {
        x.iter()
            .map(|&v| {
                let mut s = Vec::with_capacity(m + 1);
                s.push(v);
                s
            })
            .collect::<Vec<_>>()
    });
    let mut state_average = Vec::with_capacity(m + 1);
    let mut responder_square = Vec::with_capacity(m + 1);
    let mut minor_costs = vec![0.0; n];
    let mut twin_costs = vec![0.0; twin.len()];
    let mut energy = vec![0.0; n];
    let mut sup_gap = vec![0.0f64; twin.len()];
    let mut major_cost = 0.0;
    let mut u = vec![0.0; n];

    for j in 0..=m {
        let avg = x.iter().sum::<f64>() / n as f64;
        state_average.push(avg);
        let deviant = sc.deviant.as_ref().map(|d| d.player);
        let (sq, count) = x
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != deviant)
            .fold((0.0, 0usize), |(s, c), (_, v)| (s + v * v, c + 1));
        responder_square.push(if count > 0 { sq / count as f64 } else { 0.0 });
        let w = if j == 0 || j == m { 0.5 * h } else { h };
        let (pj, kj, r) = (sc.p[j], sc.k[j], sc.reference[j]);

        for (i, ui) in u.iter_mut().enumerate() {
            let eq = -br * (pj * x[i] + kj);
            *ui = match &sc.deviant {
                Some(d) if d.player == i => (1.0 + d.scale) * eq + d.offset[j],
                _ => eq,
            };
        }
        let dev0 = sc.major[j] - avg;
        major_cost += w * (params.q0 * dev0 * dev0 + params.r0 * sc.major_control[j].powi(2));
        for i in 0..n {
            let dev = x[i] - avg;
            minor_costs[i] += w * (params.q * dev * dev + params.r * u[i] * u[i]);
            energy[i] += w * u[i] * u[i];
        }
        for (i, &y) in twin.iter().enumerate() {
            let ub = -br * (pj * y + kj);
            let dev = y - r;
            twin_costs[i] += w * (params.q * dev * dev + params.r * ub * ub);
            sup_gap[i] = sup_gap[i].max((u[i] - ub).powi(2));
        }
        if j == m {
            break;
        }

        let common = params.d * avg + params.alpha * sc.major[j];
        let twin_common = params.d * r + params.alpha * sc.major[j];
        for i in 0..n {
            let z: f64 = rngs[i].sample(StandardNormal);
            let kick = anchors[j] + noise * z;
            x[i] += h * (params.a * x[i] + params.b * u[i] + common) + kick;
            if let Some(y) = twin.get_mut(i) {
                let ub = -br * (pj * *y + kj);
                *y += h * (params.a * *y + params.b * ub + twin_common) + kick;
            }
            let worst = x[i].abs().max(twin.get(i).map_or(0.0, |y| y.abs()));
            if !worst.is_finite() || worst > config.overflow_cap {
                return Err(Error::SimulationOverflow {
                    path,
                    node: j + 1,
                    value: worst,
                    cap: config.overflow_cap,
                });
            }
        }
        if let Some(s) = states.as_mut() {
            for (traj, &v) in s.iter_mut().zip(&x) {
                traj.push(v);
            }
        }
    }

    let terminal_weight = |v: f64| params.h * v * v;
    for i in 0..n {
        minor_costs[i] = 0.5 * (minor_costs[i] + terminal_weight(x[i]));
    }
    for (c, &y) in twin_costs.iter_mut().zip(&twin) {
        *c = 0.5 * (*c + terminal_weight(y));
    }
    major_cost = 0.5 * (major_cost + params.h0 * sc.major[0] * sc.major[0]);

    let strategy_gap = if sup_gap.is_empty() {
        0.0
    } else {
        sup_gap.iter().sum::<f64>() / sup_gap.len() as f64
    };
    Ok(PathRecord {
        state_average,
        responder_square,
        minor_costs,
        major_cost,
        twin_costs,
        strategy_gap,
        control_energy: energy.iter().sum::<f64>() / n as f64,
        terminal: x,
        states,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSample {
    pub n_players: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub grid: TimeGrid,
    /// Deterministic major path, identical to the NCE `x0_hat`.
    pub major_state: Vec<f64>,
    pub paths: Vec<PathRecord>,
}

impl PopulationSample {
    pub fn state_average(&self, path: usize) -> &[f64] {
        &self.paths[path].state_average
    }

    /// `x_i(t_j)` on one path, if trajectories were retained.
    pub fn minor_states(&self, path: usize) -> Option<&[Vec<f64>]> {
        self.paths[path].states.as_deref()
    }
}

pub fn simulate_population(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    config: &SimulationConfig,
) -> Result<PopulationSample> {
    nce.grid.ensure_same(riccati.grid(), "NCE vs Riccati")?;
    let scenario = Scenario::equilibrium(riccati, nce, params);
    let paths = scenario.run(params, config)?;
    Ok(PopulationSample {
        n_players: config.n_players,
        n_paths: config.n_paths,
        seed: config.seed,
        grid: nce.grid.clone(),
        major_state: nce.x0_hat.clone(),
        paths,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub j0_emp: f64,
    pub se_j0: f64,
    /// Per-player path averages.
    pub ji_emp: Vec<f64>,
    pub se_ji: Vec<f64>,
    pub ji_emp_mean: f64,
    pub se_ji_mean: f64,
    /// Monte Carlo estimate of the limiting minor cost from the twins.
    pub ji_twin_mean: f64,
    pub se_ji_twin: f64,
    pub j0_bar: f64,
    pub ji_bar: f64,
    pub gap_major: f64,
    pub gap_minor: f64,
}

pub fn empirical_costs(
    sample: &PopulationSample,
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
) -> Result<CostReport> {
    let moments = solve_moments(params, riccati, nce)?;
    let j0_bar = limiting_cost_major(params, nce);
    let ji_bar = limiting_cost_minor(params, riccati, nce, &moments);

    let major: Vec<f64> = sample.paths.iter().map(|p| p.major_cost).collect();
    let (j0_emp, se_j0) = mean_and_se(&major);
    let n = sample.n_players;
    let (ji_emp, se_ji): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| {
            let c: Vec<f64> = sample.paths.iter().map(|p| p.minor_costs[i]).collect();
            mean_and_se(&c)
        })
        .unzip();
    let per_path: Vec<f64> = sample
        .paths
        .iter()
        .map(|p| p.minor_costs.iter().sum::<f64>() / n as f64)
        .collect();
    let (ji_emp_mean, se_ji_mean) = mean_and_se(&per_path);
    let twin_path: Vec<f64> = sample
        .paths
        .iter()
        .filter(|p| !p.twin_costs.is_empty())
        .map(|p| p.twin_costs.iter().sum::<f64>() / p.twin_costs.len() as f64)
        .collect();
    let (ji_twin_mean, se_ji_twin) = mean_and_se(&twin_path);
    Ok(CostReport {
        j0_emp,
        se_j0,
        ji_emp,
        se_ji,
        ji_emp_mean,
        se_ji_mean,
        ji_twin_mean,
        se_ji_twin,
        j0_bar,
        ji_bar,
        gap_major: (j0_emp - j0_bar).abs(),
        gap_minor: (ji_emp_mean - ji_bar).abs(),
    })
}

/// `max_j` of the path average of `(avg(t_j) - target(t_j))^2`, with its standard
/// error at the maximizing node.
pub fn mean_square_gap(paths: &[PathRecord], target: &[f64]) -> (f64, f64) {
    let nodes = target.len();
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut column = Vec::with_capacity(paths.len());
    for (j, &tj) in target.iter().enumerate().take(nodes) {
        column.clear();
        column.extend(paths.iter().map(|p| (p.state_average[j] - tj).powi(2)));
        let (mean, se) = mean_and_se(&column);
        if mean > best.0 {
            best = (mean, se);
        }
    }
    best
}

/// `sup_t` of the path-averaged squared distance between the state average and the
/// mean field.
pub fn state_average_gap(sample: &PopulationSample, nce: &NceSolution) -> f64 {
    state_average_gap_with_se(sample, nce).0
}

pub fn state_average_gap_with_se(sample: &PopulationSample, nce: &NceSolution) -> (f64, f64) {
    mean_square_gap(&sample.paths, &nce.xbar)
}

/// Player- and path-averaged `int u_i^2 dt`.
pub fn control_energy(sample: &PopulationSample) -> (f64, f64) {
    let e: Vec<f64> = sample.paths.iter().map(|p| p.control_energy).collect();
    mean_and_se(&e)
}

/// Player- and path-averaged `sup_t (u_i - ubar_i)^2` against the limiting twins.
pub fn strategy_gap(sample: &PopulationSample) -> (f64, f64) {
    let e: Vec<f64> = sample.paths.iter().map(|p| p.strategy_gap).collect();
    mean_and_se(&e)
}
