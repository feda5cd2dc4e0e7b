//! Backward scalar Riccati equation of the minor players,
//!
//! ```text
//! P'(t) + 2 A P(t) - B^2 R^{-1} P(t)^2 + Q = 0,   P(T) = H,
//! ```
//!
//! which decouples the minor adjoint as `p_i = P x_i + k`.

use crate::error::{Error, Result};
use crate::model::{TimeGrid, ValidatedParams};
use crate::ode::{central_differences, HalfSampled};

/// Default `|P|` cap above which integration is reported as a Riccati escape.
pub const DEFAULT_ESCAPE_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    grid: TimeGrid,
    values: Vec<f64>,
    /// Minor-coefficient snapshot used for the derivative and midpoint evaluation.
    a: f64,
    gain: f64,
    q: f64,
}

fn rhs(p: f64, a: f64, gain: f64, q: f64) -> f64 {
    -2.0 * a * p + gain * p * p - q
}

impl RiccatiSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// `P(t_j)` for every node.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, j: usize) -> f64 {
        self.values[j]
    }

    /// `dP/dt` at node `j`, taken from the equation itself.
    pub fn derivative(&self, j: usize) -> f64 {
        rhs(self.values[j], self.a, self.gain, self.q)
    }

    /// Minor noise loading on the adjoint, `beta_i(t) = sigma P(t)`.
    pub fn beta(&self, params: &ValidatedParams) -> Vec<f64> {
        self.values.iter().map(|p| params.sigma * p).collect()
    }

    /// `P` on half-steps. Midpoints use cubic Hermite interpolation with the exact
    /// derivative from the equation.
    pub fn half_sampled(&self) -> HalfSampled {
        let h = self.grid.step();
        let m = self.grid.steps();
        let mut out = Vec::with_capacity(2 * m + 1);
        for j in 0..m {
            let (p0, p1) = (self.values[j], self.values[j + 1]);
            out.push(p0);
            out.push(0.5 * (p0 + p1) + h / 8.0 * (self.derivative(j) - self.derivative(j + 1)));
        }
        out.push(self.values[m]);
        HalfSampled::from_half_values(out)
    }

    /// A priori bound from the comparison solution with the quadratic term dropped:
    /// `P(t) <= (H + Q T) exp(2 max(A, 0) T)`.
    pub fn upper_bound(params: &ValidatedParams) -> f64 {
        (params.h + params.q * params.horizon) * (2.0 * params.a.max(0.0) * params.horizon).exp()
    }

    /// Solution with node `j` replaced, for defect-injection checks.
    pub fn with_node(&self, j: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.values[j] = value;
        out
    }

    /// Zero-valued placeholder on a grid (used for degenerate-data checks).
    pub(crate) fn from_values(grid: &TimeGrid, params: &ValidatedParams, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len());
        RiccatiSolution {
            grid: grid.clone(),
            values,
            a: params.a,
            gain: params.minor_control_factor(),
            q: params.q,
        }
    }
}

pub fn solve_riccati(params: &ValidatedParams, grid: &TimeGrid) -> Result<RiccatiSolution> {
    solve_riccati_with_cap(params, grid, DEFAULT_ESCAPE_CAP)
}

/// Classical RK4, backward from `P(T) = H`.
pub fn solve_riccati_with_cap(
    params: &ValidatedParams,
    grid: &TimeGrid,
    cap: f64,
) -> Result<RiccatiSolution> {
    if (grid.horizon() - params.horizon).abs() > 1e-12 * params.horizon {
        return Err(Error::GridMismatch(format!(
            "grid horizon {} differs from T = {}",
            grid.horizon(),
            params.horizon
        )));
    }
    let (a, gain, q) = (params.a, params.minor_control_factor(), params.q);
    let f = |p: f64| rhs(p, a, gain, q);
    let m = grid.steps();
    let h = -grid.step();
    let mut values = vec![0.0; m + 1];
    values[m] = params.h;
    for j in (1..=m).rev() {
        let p = values[j];
        let k1 = f(p);
        let k2 = f(p + 0.5 * h * k1);
        let k3 = f(p + 0.5 * h * k2);
        let k4 = f(p + h * k3);
        let next = p + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() || next.abs() > cap {
            return Err(Error::RiccatiEscape {
                t: grid.t(j - 1),
                value: next.abs(),
                cap,
            });
        }
        values[j - 1] = next;
    }
    Ok(RiccatiSolution::from_values(grid, params, values))
}

/// `max_j |P' + 2AP - B^2 R^{-1} P^2 + Q|` over interior nodes, with `P'` from
/// central differences.
pub fn riccati_residual(sol: &RiccatiSolution, params: &ValidatedParams) -> f64 {
    let gain = params.minor_control_factor();
    central_differences(&sol.grid, &sol.values)
        .iter()
        .enumerate()
        .map(|(i, dp)| {
            let p = sol.values[i + 1];
            (dp + 2.0 * params.a * p - gain * p * p + params.q).abs()
        })
        .fold(0.0, f64::max)
}
