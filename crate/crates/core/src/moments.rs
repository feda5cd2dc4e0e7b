//! Exact Gaussian moments of the limiting minor system and the limiting costs.
//!
//! Under an affine feedback `u = G(t) x + c(t)` the limiting minor state
//! `dx = [A x + B u + D xbar + alpha x0_hat] dt + sigma dW` stays Gaussian with
//!
//! ```text
//! mu' = (A + B G) mu + B c + D xbar + alpha x0_hat,   mu(0) = x_mean
//! v'  = 2 (A + B G) v + sigma^2,                       v(0)  = x_var
//! ```
//!
//! so every quadratic cost is a deterministic quadrature.

use crate::error::Result;
use crate::model::{TimeGrid, ValidatedParams};
use crate::nce::NceSolution;
use crate::ode::{rk4_scalar_linear, trapezoid, HalfSampled, Sweep};
use crate::riccati::RiccatiSolution;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    pub grid: TimeGrid,
    pub mu: Vec<f64>,
    pub v: Vec<f64>,
}

/// Minor control law `u = gain(t) x + offset(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFeedback {
    pub gain: HalfSampled,
    pub offset: HalfSampled,
}

impl AffineFeedback {
    /// Decentralized law `u = -B R^{-1} (P x + k)`.
    pub fn equilibrium(params: &ValidatedParams, riccati: &RiccatiSolution, nce: &NceSolution) -> Self {
        let br = params.b / params.r;
        AffineFeedback {
            gain: riccati.half_sampled().map(|p| -br * p),
            offset: HalfSampled::from_nodes(&nce.k).map(|k| -br * k),
        }
    }

    /// Same law with a deterministic additive perturbation of the control.
    pub fn shifted(&self, delta: &HalfSampled) -> Self {
        AffineFeedback {
            gain: self.gain.clone(),
            offset: self.offset.zip_with(delta, |c, d| c + d),
        }
    }
}

/// Moments under an arbitrary affine feedback with the given mean field and major path.
pub fn solve_moments_affine(
    params: &ValidatedParams,
    grid: &TimeGrid,
    law: &AffineFeedback,
    xbar: &HalfSampled,
    major: &HalfSampled,
) -> MomentTrajectory {
    let closed = law.gain.map(|g| params.a + params.b * g);
    let mean_force = law
        .offset
        .zip_with(xbar, |c, xb| params.b * c + params.d * xb)
        .zip_with(major, |f, x0| f + params.alpha * x0);
    let mu = rk4_scalar_linear(grid, &closed, &mean_force, params.x_mean, Sweep::Forward);
    let var_rate = closed.map(|a| 2.0 * a);
    let noise = HalfSampled::constant(grid, params.sigma * params.sigma);
    let v = rk4_scalar_linear(grid, &var_rate, &noise, params.x_var, Sweep::Forward);
    MomentTrajectory {
        grid: grid.clone(),
        mu,
        v,
    }
}

pub fn solve_moments(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
) -> Result<MomentTrajectory> {
    nce.grid.ensure_same(riccati.grid(), "NCE vs Riccati")?;
    let law = AffineFeedback::equilibrium(params, riccati, nce);
    Ok(solve_moments_affine(
        params,
        &nce.grid,
        &law,
        &HalfSampled::from_nodes(&nce.xbar),
        &HalfSampled::from_nodes(&nce.x0_hat),
    ))
}

/// `1/2 E{ int [Q (x - xbar)^2 + R u^2] dt + H x(T)^2 }` from the Gaussian moments,
/// trapezoid in time.
pub fn limiting_cost_minor_affine(
    params: &ValidatedParams,
    moments: &MomentTrajectory,
    law: &AffineFeedback,
    xbar: &[f64],
) -> f64 {
    let grid = &moments.grid;
    let integrand: Vec<f64> = (0..grid.len())
        .map(|j| {
            let (mu, v) = (moments.mu[j], moments.v[j]);
            let (g, c) = (law.gain.node(j), law.offset.node(j));
            let dev = mu - xbar[j];
            let u_mean = g * mu + c;
            params.q * (dev * dev + v) + params.r * (u_mean * u_mean + g * g * v)
        })
        .collect();
    let m = grid.steps();
    0.5 * trapezoid(grid, &integrand) + 0.5 * params.h * (moments.mu[m].powi(2) + moments.v[m])
}

/// Limiting minor cost under the decentralized feedback.
pub fn limiting_cost_minor(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    nce: &NceSolution,
    moments: &MomentTrajectory,
) -> f64 {
    let law = AffineFeedback::equilibrium(params, riccati, nce);
    limiting_cost_minor_affine(params, moments, &law, &nce.xbar)
}

/// `1/2 { int [Q0 (x0 - xbar)^2 + R0 u0^2] dt + H0 x0(0)^2 }` for deterministic paths.
pub fn major_cost(params: &ValidatedParams, grid: &TimeGrid, x0: &[f64], xbar: &[f64], u0: &[f64]) -> f64 {
    let integrand: Vec<f64> = (0..grid.len())
        .map(|j| {
            let dev = x0[j] - xbar[j];
            params.q0 * dev * dev + params.r0 * u0[j] * u0[j]
        })
        .collect();
    0.5 * trapezoid(grid, &integrand) + 0.5 * params.h0 * x0[0] * x0[0]
}

pub fn limiting_cost_major(params: &ValidatedParams, nce: &NceSolution) -> f64 {
    major_cost(params, &nce.grid, &nce.x0_hat, &nce.xbar, &nce.major_control(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_time_grid, validate_params, ModelParams};
    use crate::nce::solve_nce;
    use crate::riccati::solve_riccati;

    fn solved(p: ModelParams, m: usize) -> (ValidatedParams, RiccatiSolution, NceSolution, MomentTrajectory) {
        let v = validate_params(&p).unwrap();
        let g = build_time_grid(p.horizon, m).unwrap();
        let r = solve_riccati(&v, &g).unwrap();
        let (_, n) = solve_nce(&v, &r).unwrap();
        let mo = solve_moments(&v, &r, &n).unwrap();
        (v, r, n, mo)
    }

    #[test]
    fn no_noise_no_spread() {
        let (_, _, _, mo) = solved(ModelParams { sigma: 0.0, x_var: 0.0, ..ModelParams::default() }, 200);
        assert!(mo.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pure_noise_variance_is_t() {
        let p = ModelParams { a: 0.0, b: 0.0, sigma: 1.0, x_var: 0.0, ..ModelParams::default() };
        let (_, _, _, mo) = solved(p, 100);
        for (j, &t) in mo.grid.nodes().iter().enumerate() {
            assert!((mo.v[j] - t).abs() < 1e-13);
        }
        assert!((mo.v[100] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mean_reproduces_mean_field() {
        for p in [
            ModelParams::default(),
            ModelParams { d: -0.8, alpha: 1.2, a: -0.4, ..ModelParams::default() },
            ModelParams { x_var: 0.0, sigma: 0.0, xi: -2.0, ..ModelParams::default() },
        ] {
            let (_, _, n, mo) = solved(p, 2000);
            let dev = mo.mu.iter().zip(&n.xbar).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-10, "deviation {dev}");
            assert_eq!(mo.mu[0], p.x_mean);
            assert_eq!(mo.v[0], p.x_var);
        }
    }

    #[test]
    fn zero_weights_zero_cost() {
        let p = ModelParams { q: 0.0, h: 0.0, ..ModelParams::default() };
        let (v, r, n, mo) = solved(p, 200);
        assert!(r.values().iter().all(|&x| x == 0.0));
        // k is driven only by Q - DP and -alpha P x0, both zero here.
        assert!(n.k.iter().all(|&x| x.abs() < 1e-15));
        assert!(limiting_cost_minor(&v, &r, &n, &mo).abs() < 1e-20);
    }

    #[test]
    fn uncontrolled_brownian_cost() {
        let p = ModelParams {
            a: 0.0,
            b: 0.0,
            d: 0.0,
            alpha: 0.0,
            q: 1.0,
            r: 1.0,
            h: 1.0,
            sigma: 1.0,
            x_mean: 0.0,
            x_var: 0.0,
            xi: 0.0,
            horizon: 1.0,
            ..ModelParams::default()
        };
        let (v, r, n, mo) = solved(p, 2000);
        // trapezoid integrates t exactly
        assert!((limiting_cost_minor(&v, &r, &n, &mo) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn major_cost_zero_data_and_decoupled() {
        let (v, _, n, _) = solved(ModelParams { xi: 0.0, x_mean: 0.0, ..ModelParams::default() }, 200);
        assert_eq!(limiting_cost_major(&v, &n), 0.0);
        let p = ModelParams { q0: 0.0, h0: 0.0, alpha: 0.0, d: 0.0, ..ModelParams::default() };
        let (v, _, n, _) = solved(p, 200);
        assert!(limiting_cost_major(&v, &n).abs() < 1e-20);
    }

    #[test]
    fn variance_nondecreasing_for_expanding_closed_loop() {
        // A large enough that A - gP stays >= 0 with small H, Q.
        let p = ModelParams { a: 2.0, q: 0.0, h: 0.05, ..ModelParams::default() };
        let (v, r, _, mo) = solved(p, 400);
        assert!(r.values().iter().all(|&pp| v.a - v.minor_control_factor() * pp >= 0.0));
        assert!(mo.v.windows(2).all(|w| w[1] >= w[0]));
    }
}
