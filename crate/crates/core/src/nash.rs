//! Unilateral deviations and the empirical equilibrium gap.
//!
//! A deviation perturbs either the major control (a deterministic function of time)
//! or one minor's feedback. Base and deviated runs share every noise stream, so the
//! paired per-path difference carries little Monte Carlo noise and the null deviation
//! reproduces the base bit for bit.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ValidatedParams;
use crate::moments::{limiting_cost_minor_affine, major_cost, solve_moments_affine, AffineFeedback};
use crate::nce::{solve_mean_field_response, NceSolution};
use crate::ode::{mean_and_se, rk4_scalar_linear, HalfSampled, Sweep};
use crate::population::{mean_square_gap, FeedbackPerturbation, PathRecord, Scenario, SimulationConfig};
use crate::riccati::RiccatiSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Major,
    Minor(usize),
}

impl Target {
    pub fn label(&self) -> String {
        match self {
            Target::Major => "major".into(),
            Target::Minor(i) => format!("minor{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationKind {
    /// `u' = (1 + theta) u`.
    FeedbackScale,
    /// `u' = u + theta` on the window.
    ConstantOffset,
    /// `u' = u + theta sin^2(pi (t - t_a) / (t_b - t_a))` on the window.
    Pulse,
}

impl DeviationKind {
    pub fn label(&self) -> &'static str {
        match self {
            DeviationKind::FeedbackScale => "feedback-scale",
            DeviationKind::ConstantOffset => "constant-offset",
            DeviationKind::Pulse => "pulse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationSpec {
    pub target: Target,
    pub kind: DeviationKind,
    pub theta: f64,
    /// Defaults to `[0, T]`.
    pub window: Option<(f64, f64)>,
}

/// How responders treat the offset `k` when the major deviates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponderK {
    /// Offset re-solved against the deviated major path.
    #[default]
    Recomputed,
    /// Equilibrium offset kept.
    Frozen,
}

impl DeviationSpec {
    pub fn null(target: Target) -> Self {
        DeviationSpec {
            target,
            kind: DeviationKind::ConstantOffset,
            theta: 0.0,
            window: None,
        }
    }

    pub fn is_null(&self) -> bool {
        self.theta == 0.0
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::InvalidDeviation("theta must be finite".into()));
        }
        if let Some((a, b)) = self.window {
            if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= horizon) {
                return Err(Error::InvalidDeviation(format!(
                    "window ({a}, {b}) must satisfy 0 <= t_a < t_b <= T = {horizon}"
                )));
            }
        }
        Ok(())
    }

    fn window_or(&self, horizon: f64) -> (f64, f64) {
        self.window.unwrap_or((0.0, horizon))
    }

    /// `(scale, additive)` so that `u' = (1 + scale) u + additive` at time `t`.
    pub fn shift_at(&self, t: f64, horizon: f64) -> (f64, f64) {
        let (a, b) = self.window_or(horizon);
        let inside = t >= a && t <= b;
        match self.kind {
            DeviationKind::FeedbackScale => (self.theta, 0.0),
            DeviationKind::ConstantOffset => (0.0, if inside { self.theta } else { 0.0 }),
            DeviationKind::Pulse => {
                let s = if inside {
                    (std::f64::consts::PI * (t - a) / (b - a)).sin().powi(2)
                } else {
                    0.0
                };
                (0.0, self.theta * s)
            }
        }
    }

    pub fn window_label(&self, horizon: f64) -> String {
        let (a, b) = self.window_or(horizon);
        format!("{a}:{b}")
    }
}

/// The documented test family: the null deviation plus seven perturbations covering
/// scaling, offsets and a smooth pulse.
pub fn default_family(target: Target, horizon: f64) -> Vec<DeviationSpec> {
    use DeviationKind::*;
    let t = horizon;
    let spec = |kind, theta, window| DeviationSpec { target, kind, theta, window };
    vec![
        DeviationSpec::null(target),
        spec(FeedbackScale, -1.0, None),
        spec(FeedbackScale, -0.2, None),
        spec(FeedbackScale, 0.2, None),
        spec(ConstantOffset, 0.5, None),
        spec(ConstantOffset, -0.5, None),
        spec(ConstantOffset, 0.5, Some((0.0, 0.5 * t))),
        spec(Pulse, 1.0, Some((0.25 * t, 0.75 * t))),
    ]
}

/// Major path and population response for a deterministic major control.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorResponse {
    pub u0: Vec<f64>,
    pub l0: Vec<f64>,
    pub xbar: Vec<f64>,
    pub k: Vec<f64>,
}

/// Integrates `l0' = A0 l0 + B0 u0` backward from `l0(T) = xi`, then the response of
/// the mean field and offset.
pub fn major_response(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    u0: &HalfSampled,
    responder_k: ResponderK,
) -> Result<MajorResponse> {
    let grid = &nce.grid;
    grid.ensure_same(riccati.grid(), "NCE vs Riccati")?;
    let a0 = HalfSampled::constant(grid, params.a0);
    let force = u0.map(|u| params.b0 * u);
    let l0 = rk4_scalar_linear(grid, &a0, &force, params.xi, Sweep::Backward);
    let l0_half = HalfSampled::from_nodes(&l0);
    let (xbar, k) = match responder_k {
        ResponderK::Recomputed => {
            let r = solve_mean_field_response(params, riccati, &l0_half)?;
            (r.xbar, r.k)
        }
        ResponderK::Frozen => {
            let g = params.minor_control_factor();
            let abar = riccati.half_sampled().map(|p| params.a + params.d - g * p);
            let f = HalfSampled::from_nodes(&nce.k).zip_with(&l0_half, |k, l| -g * k + params.alpha * l);
            (rk4_scalar_linear(grid, &abar, &f, params.x_mean, Sweep::Forward), nce.k.clone())
        }
    };
    Ok(MajorResponse {
        u0: u0.node_values(),
        l0,
        xbar,
        k,
    })
}

fn equilibrium_major_control(params: &ValidatedParams, nce: &NceSolution) -> HalfSampled {
    HalfSampled::from_nodes(&nce.major_control(params))
}

/// Major control for a deviation, on half-steps.
pub fn deviated_major_control(params: &ValidatedParams, nce: &NceSolution, dev: &DeviationSpec) -> HalfSampled {
    let base = equilibrium_major_control(params, nce);
    let grid = &nce.grid;
    let values = (0..=2 * grid.steps())
        .map(|s| {
            let (scale, add) = dev.shift_at(grid.half_time(s), grid.horizon());
            (1.0 + scale) * base.half(s) + add
        })
        .collect();
    HalfSampled::from_half_values(values)
}

/// Limiting major cost of a deterministic control, with the population responding
/// through the mean-field equations.
pub fn limiting_major_cost_of(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    u0: &HalfSampled,
) -> Result<f64> {
    let r = major_response(params, riccati, nce, u0, ResponderK::Recomputed)?;
    Ok(major_cost(params, &nce.grid, &r.l0, &r.xbar, &r.u0))
}

/// Limiting minor cost when the equilibrium feedback is shifted by `delta(t)`.
pub fn limiting_minor_cost_shifted(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    delta: &HalfSampled,
) -> f64 {
    let law = AffineFeedback::equilibrium(params, riccati, nce).shifted(delta);
    let mo = solve_moments_affine(
        params,
        &nce.grid,
        &law,
        &HalfSampled::from_nodes(&nce.xbar),
        &HalfSampled::from_nodes(&nce.x0_hat),
    );
    limiting_cost_minor_affine(params, &mo, &law, &nce.xbar)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEntry {
    pub target: String,
    pub kind: &'static str,
    pub theta: f64,
    pub window: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub n_paths: usize,
    #[serde(rename = "J_base")]
    pub j_base: f64,
    #[serde(rename = "J_dev")]
    pub j_dev: f64,
    pub delta: f64,
    pub se: f64,
    /// `sup_t` path average of the squared distance from the state average to the
    /// mean field the responders were built against.
    pub mean_field_gap: f64,
    /// `sup_t` path average of the responders' mean square state.
    pub responder_square: f64,
    pub error: Option<String>,
}

impl GapEntry {
    fn failed(spec: &DeviationSpec, horizon: f64, config: &SimulationConfig, err: &Error) -> Self {
        GapEntry {
            target: spec.target.label(),
            kind: spec.kind.label(),
            theta: spec.theta,
            window: spec.window_label(horizon),
            n: config.n_players,
            n_paths: config.n_paths,
            j_base: f64::NAN,
            j_dev: f64::NAN,
            delta: f64::NAN,
            se: f64::NAN,
            mean_field_gap: f64::NAN,
            responder_square: f64::NAN,
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn paired(
    spec: &DeviationSpec,
    horizon: f64,
    config: &SimulationConfig,
    base: &[f64],
    dev: &[PathRecord],
    cost: impl Fn(&PathRecord) -> f64,
    reference: &[f64],
) -> GapEntry {
    let devc: Vec<f64> = dev.iter().map(&cost).collect();
    let diff: Vec<f64> = devc.iter().zip(base).map(|(d, b)| d - b).collect();
    let (j_base, _) = mean_and_se(base);
    let (j_dev, _) = mean_and_se(&devc);
    let (delta, se) = mean_and_se(&diff);
    let responder_square = (0..reference.len())
        .map(|j| dev.iter().map(|p| p.responder_square[j]).sum::<f64>() / dev.len() as f64)
        .fold(0.0, f64::max);
    GapEntry {
        target: spec.target.label(),
        kind: spec.kind.label(),
        theta: spec.theta,
        window: spec.window_label(horizon),
        n: config.n_players,
        n_paths: config.n_paths,
        j_base,
        j_dev,
        delta,
        se,
        mean_field_gap: mean_square_gap(dev, reference).0,
        responder_square,
        error: None,
    }
}

fn major_scenario(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    dev: &DeviationSpec,
    responder_k: ResponderK,
) -> Result<Scenario> {
    let u0 = deviated_major_control(params, nce, dev);
    let r = major_response(params, riccati, nce, &u0, responder_k)?;
    Ok(Scenario {
        grid: nce.grid.clone(),
        p: riccati.values().to_vec(),
        k: r.k,
        major: r.l0,
        major_control: r.u0,
        reference: r.xbar,
        deviant: None,
        twins: false,
    })
}

/// Major deviations against a shared null-deviation base.
pub fn deviate_major_batch(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    devs: &[DeviationSpec],
    config: &SimulationConfig,
    responder_k: ResponderK,
) -> Result<Vec<GapEntry>> {
    let horizon = nce.grid.horizon();
    let base_sc = major_scenario(params, riccati, nce, &DeviationSpec::null(Target::Major), responder_k)?;
    let base: Vec<f64> = base_sc.run(params, config)?.iter().map(|p| p.major_cost).collect();
    Ok(devs
        .iter()
        .map(|spec| {
            let run = || -> Result<GapEntry> {
                if spec.target != Target::Major {
                    return Err(Error::InvalidDeviation("expected a major deviation".into()));
                }
                spec.validate(horizon)?;
                let sc = major_scenario(params, riccati, nce, spec, responder_k)?;
                let recs = sc.run(params, config)?;
                Ok(paired(spec, horizon, config, &base, &recs, |p| p.major_cost, &sc.reference))
            };
            run().unwrap_or_else(|e| GapEntry::failed(spec, horizon, config, &e))
        })
        .collect())
}

pub fn deviate_major(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    dev: &DeviationSpec,
    config: &SimulationConfig,
    responder_k: ResponderK,
) -> Result<GapEntry> {
    Ok(deviate_major_batch(params, riccati, nce, std::slice::from_ref(dev), config, responder_k)?.remove(0))
}

fn minor_scenario(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    dev: &DeviationSpec,
    player: usize,
) -> Scenario {
    let mut sc = Scenario::equilibrium(riccati, nce, params);
    sc.twins = false;
    let grid = &nce.grid;
    let (scale, _) = dev.shift_at(0.0, grid.horizon());
    let offset = grid.nodes().iter().map(|&t| dev.shift_at(t, grid.horizon()).1).collect();
    sc.deviant = Some(FeedbackPerturbation { player, scale, offset });
    sc
}

/// Deviations of one minor; the other players keep the equilibrium feedback.
pub fn deviate_minor_batch(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    devs: &[DeviationSpec],
    config: &SimulationConfig,
) -> Result<Vec<GapEntry>> {
    nce.grid.ensure_same(riccati.grid(), "NCE vs Riccati")?;
    let horizon = nce.grid.horizon();
    let players: Vec<usize> = devs
        .iter()
        .filter_map(|d| match d.target {
            Target::Minor(i) => Some(i),
            Target::Major => None,
        })
        .collect();
    let mut bases: Vec<(usize, Vec<f64>)> = Vec::new();
    for &i in &players {
        if i >= config.n_players || bases.iter().any(|(p, _)| *p == i) {
            continue;
        }
        let sc = minor_scenario(params, riccati, nce, &DeviationSpec::null(Target::Minor(i)), i);
        bases.push((i, sc.run(params, config)?.iter().map(|p| p.minor_costs[i]).collect()));
    }
    Ok(devs
        .iter()
        .map(|spec| {
            let run = || -> Result<GapEntry> {
                let Target::Minor(i) = spec.target else {
                    return Err(Error::InvalidDeviation("expected a minor deviation".into()));
                };
                if i >= config.n_players {
                    return Err(Error::InvalidDeviation(format!(
                        "player {i} out of range for N = {}",
                        config.n_players
                    )));
                }
                spec.validate(horizon)?;
                let base = &bases.iter().find(|(p, _)| *p == i).unwrap().1;
                let sc = minor_scenario(params, riccati, nce, spec, i);
                let recs = sc.run(params, config)?;
                Ok(paired(spec, horizon, config, base, &recs, |p| p.minor_costs[i], &nce.xbar))
            };
            run().unwrap_or_else(|e| GapEntry::failed(spec, horizon, config, &e))
        })
        .collect())
}

pub fn deviate_minor(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    dev: &DeviationSpec,
    config: &SimulationConfig,
) -> Result<GapEntry> {
    Ok(deviate_minor_batch(params, riccati, nce, std::slice::from_ref(dev), config)?.remove(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub entries: Vec<GapEntry>,
    pub epsilon_hat: f64,
}

/// `epsilon_hat = max(0, max(-delta))` over the successful entries.
pub fn nash_gap(entries: Vec<GapEntry>) -> GapReport {
    let epsilon_hat = entries
        .iter()
        .filter(|e| e.is_ok())
        .map(|e| -e.delta)
        .fold(0.0, f64::max)
        + 0.0;
    GapReport { entries, epsilon_hat }
}

/// Deterministic perturbation directions used by the limiting optimality check.
pub fn stationarity_directions(horizon: f64) -> Vec<(&'static str, Box<dyn Fn(f64) -> f64>)> {
    use std::f64::consts::PI;
    vec![
        ("constant", Box::new(|_| 1.0)),
        ("ramp", Box::new(move |t| t / horizon)),
        ("sine", Box::new(move |t| (PI * t / horizon).sin())),
        ("cosine", Box::new(move |t| (2.0 * PI * t / horizon).cos())),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityRow {
    pub target: &'static str,
    pub direction: &'static str,
    pub theta: f64,
    /// `J(u + theta du) - J(u)` in the limiting problem.
    pub increase: f64,
}

/// Cost increase of the limiting major and minor problems along each direction.
pub fn limiting_stationarity(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    thetas: &[f64],
) -> Result<Vec<StationarityRow>> {
    let grid = &nce.grid;
    let u0 = equilibrium_major_control(params, nce);
    let major0 = limiting_major_cost_of(params, riccati, nce, &u0)?;
    let zero = HalfSampled::constant(grid, 0.0);
    let minor0 = limiting_minor_cost_shifted(params, riccati, nce, &zero);
    let mut rows = Vec::new();
    for (name, f) in stationarity_directions(grid.horizon()) {
        let du = HalfSampled::from_fn(grid, f);
        for &theta in thetas {
            let shifted = u0.zip_with(&du, |u, d| u + theta * d);
            rows.push(StationarityRow {
                target: "major",
                direction: name,
                theta,
                increase: limiting_major_cost_of(params, riccati, nce, &shifted)? - major0,
            });
            let delta = du.map(|d| theta * d);
            rows.push(StationarityRow {
                target: "minor",
                direction: name,
                theta,
                increase: limiting_minor_cost_shifted(params, riccati, nce, &delta) - minor0,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_time_grid, validate_params, ModelParams};
    use crate::moments::{limiting_cost_major, limiting_cost_minor, solve_moments};
    use crate::nce::solve_nce;
    use crate::riccati::solve_riccati;

    fn solved(p: ModelParams, m: usize) -> (ValidatedParams, RiccatiSolution, NceSolution) {
        let v = validate_params(&p).unwrap();
        let g = build_time_grid(p.horizon, m).unwrap();
        let r = solve_riccati(&v, &g).unwrap();
        let (_, n) = solve_nce(&v, &r).unwrap();
        (v, r, n)
    }

    #[test]
    fn epsilon_hat_definition() {
        let mk = |delta: f64| GapEntry {
            target: "minor0".into(),
            kind: "pulse",
            theta: 1.0,
            window: String::new(),
            n: 1,
            n_paths: 1,
            j_base: 0.0,
            j_dev: 0.0,
            delta,
            se: 0.0,
            mean_field_gap: 0.0,
            responder_square: 0.0,
            error: None,
        };
        assert_eq!(nash_gap(vec![mk(0.3), mk(-0.02), mk(1.1)]).epsilon_hat, 0.02);
        assert_eq!(nash_gap(vec![mk(0.3), mk(1.1)]).epsilon_hat, 0.0);
    }

    #[test]
    fn windows_are_checked() {
        let mut d = DeviationSpec::null(Target::Major);
        d.window = Some((0.5, 1.5));
        assert!(d.validate(1.0).is_err());
        d.window = Some((0.5, 0.2));
        assert!(d.validate(1.0).is_err());
        d.window = Some((0.0, 1.0));
        assert!(d.validate(1.0).is_ok());
    }

    #[test]
    fn zero_offset_is_identity() {
        let d = DeviationSpec::null(Target::Minor(0));
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(d.shift_at(t, 1.0), (0.0, 0.0));
        }
    }

    #[test]
    fn null_major_response_reproduces_nce() {
        let (v, r, n) = solved(ModelParams::default(), 2000);
        let u0 = equilibrium_major_control(&v, &n);
        for mode in [ResponderK::Recomputed, ResponderK::Frozen] {
            let resp = major_response(&v, &r, &n, &u0, mode).unwrap();
            let dev = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(dev(&resp.l0, &n.x0_hat) < 1e-9);
            assert!(dev(&resp.xbar, &n.xbar) < 1e-9);
            assert!(dev(&resp.k, &n.k) < 1e-9);
        }
        let j = limiting_major_cost_of(&v, &r, &n, &u0).unwrap();
        assert!((j - limiting_cost_major(&v, &n)).abs() < 1e-9);
    }

    #[test]
    fn zero_shift_reproduces_limiting_minor_cost() {
        let (v, r, n) = solved(ModelParams::default(), 500);
        let mo = solve_moments(&v, &r, &n).unwrap();
        let zero = HalfSampled::constant(&n.grid, 0.0);
        assert_eq!(limiting_minor_cost_shifted(&v, &r, &n, &zero), limiting_cost_minor(&v, &r, &n, &mo));
    }

    #[test]
    fn null_deviations_give_exact_zero() {
        let (v, r, n) = solved(ModelParams::default(), 200);
        let cfg = SimulationConfig::new(8, 20, 4);
        let e = deviate_major(&v, &r, &n, &DeviationSpec::null(Target::Major), &cfg, ResponderK::Recomputed).unwrap();
        assert_eq!(e.delta, 0.0);
        let e = deviate_minor(&v, &r, &n, &DeviationSpec::null(Target::Minor(2)), &cfg).unwrap();
        assert_eq!(e.delta, 0.0);
        assert_eq!(e.se, 0.0);
    }

    #[test]
    fn bad_player_is_reported_per_entry() {
        let (v, r, n) = solved(ModelParams::default(), 100);
        let cfg = SimulationConfig::new(4, 5, 4);
        let devs = [DeviationSpec::null(Target::Minor(0)), DeviationSpec::null(Target::Minor(9))];
        let out = deviate_minor_batch(&v, &r, &n, &devs, &cfg).unwrap();
        assert!(out[0].is_ok());
        assert!(!out[1].is_ok());
    }

    #[test]
    fn limiting_problems_are_locally_optimal() {
        let (v, r, n) = solved(ModelParams::default(), 1000);
        let rows = limiting_stationarity(&v, &r, &n, &[0.1, -0.1]).unwrap();
        assert!(rows.iter().all(|row| row.increase > 0.0));
    }
}
