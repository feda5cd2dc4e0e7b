//! Problem data for the scalar major-minor LQG game and the shared time grid.
//!
//! Major dynamics (backward, terminal value `xi`):
//!
//! ```text
//! dx0 = [A0 x0 + B0 u0 + C0 z0] dt + z0 dW0,   x0(T) = xi
//! ```
//!
//! Minor dynamics, coupled through the state average x^(N) and the major state:
//!
//! ```text
//! dxi = [A xi + B ui + D x^(N) + alpha x0] dt + sigma dWi,   xi(0) ~ N(x_mean, x_var)
//! ```
//!
//! Costs weight `(x0 - x^(N))^2`, `u0^2` and `x0(0)^2` for the major (Q0, R0, H0), and
//! `(xi - x^(N))^2`, `ui^2` and `xi(T)^2` for each minor (Q, R, H).

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All coefficients of the game. Field names in serialized form follow the usual
/// symbols (`A0`, `B0`, ..., `T`, `xi`).
/// Missing fields take their `Default` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "B0")]
    pub b0: f64,
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub alpha: f64,
    pub sigma: f64,
    #[serde(rename = "Q0")]
    pub q0: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "H0")]
    pub h0: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub xi: f64,
    pub x_mean: f64,
    pub x_var: f64,
}

impl Default for ModelParams {
    /// Coupled reference configuration shipped with the CLI.
    fn default() -> Self {
        ModelParams {
            a0: 0.2,
            b0: 1.0,
            c0: 0.5,
            a: 0.3,
            b: 1.0,
            d: 0.4,
            alpha: 0.6,
            sigma: 0.5,
            q0: 2.0,
            r0: 1.0,
            h0: 0.5,
            q: 1.0,
            r: 1.0,
            h: 0.5,
            horizon: 1.0,
            xi: 1.5,
            x_mean: 0.5,
            x_var: 0.25,
        }
    }
}

impl ModelParams {
    /// Every violated standing condition, by name. Empty means valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fields = [
            ("A0", self.a0),
            ("B0", self.b0),
            ("C0", self.c0),
            ("A", self.a),
            ("B", self.b),
            ("D", self.d),
            ("alpha", self.alpha),
            ("sigma", self.sigma),
            ("Q0", self.q0),
            ("R0", self.r0),
            ("H0", self.h0),
            ("Q", self.q),
            ("R", self.r),
            ("H", self.h),
            ("T", self.horizon),
            ("xi", self.xi),
            ("x_mean", self.x_mean),
            ("x_var", self.x_var),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                out.push(format!("{name} must be finite"));
            }
        }
        // NaN fails every comparison below on purpose: it is already reported above.
        if !(self.q0 >= 0.0) {
            out.push("Q0 must be >= 0".into());
        }
        if !(self.r0 > 0.0) {
            out.push("R0 must be > 0".into());
        }
        if !(self.h0 >= 0.0) {
            out.push("H0 must be >= 0".into());
        }
        if !(self.q >= 0.0) {
            out.push("Q must be >= 0".into());
        }
        if !(self.r > 0.0) {
            out.push("R must be > 0".into());
        }
        if !(self.h >= 0.0) {
            out.push("H must be >= 0".into());
        }
        if self.b0 == 0.0 {
            out.push(
                "B0 must be nonzero (unique solvability of the consistency system requires B0 != 0)"
                    .into(),
            );
        }
        if !(self.horizon > 0.0) {
            out.push("T must be > 0".into());
        }
        if !(self.x_var >= 0.0) {
            out.push("x_var must be >= 0".into());
        }
        out
    }
}

/// Parameters that passed [`validate_params`]. Only constructible through validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedParams(ModelParams);

impl Deref for ValidatedParams {
    type Target = ModelParams;
    fn deref(&self) -> &ModelParams {
        &self.0
    }
}

impl ValidatedParams {
    pub fn into_inner(self) -> ModelParams {
        self.0
    }

    /// `B^2 / R`, the control-effort factor of the minor closed loop.
    pub fn minor_control_factor(&self) -> f64 {
        self.b * self.b / self.r
    }

    /// `B0^2 / R0`.
    pub fn major_control_factor(&self) -> f64 {
        self.b0 * self.b0 / self.r0
    }
}

pub fn validate_params(params: &ModelParams) -> Result<ValidatedParams> {
    let violations = params.violations();
    if violations.is_empty() {
        Ok(ValidatedParams(*params))
    } else {
        Err(Error::InvalidParams(violations))
    }
}

/// Uniform grid `t_j = j T / M`, `j = 0..=M`.
///
/// Solvers that need values between nodes use half-step indices `s = 0..=2M`
/// with `t = s h / 2`; even `s` are nodes, odd `s` are step midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `M`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn t(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Time at half-step index `s`.
    pub fn half_time(&self, s: usize) -> f64 {
        if s % 2 == 0 {
            self.nodes[s / 2]
        } else {
            self.nodes[s / 2] + 0.5 * self.step()
        }
    }

    /// Whether `other` covers the same horizon with the same number of steps.
    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.steps == other.steps && self.horizon == other.horizon
    }

    pub fn ensure_same(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: (T = {}, M = {}) vs (T = {}, M = {})",
                self.horizon, self.steps, other.horizon, other.steps
            )))
        }
    }
}

pub fn build_time_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidGrid(format!("T must be finite and > 0, got {horizon}")));
    }
    if steps < 2 {
        return Err(Error::InvalidGrid(format!("M must be >= 2, got {steps}")));
    }
    let mut nodes: Vec<f64> = (0..=steps)
        .map(|j| j as f64 * horizon / steps as f64)
        .collect();
    nodes[steps] = horizon;
    Ok(TimeGrid {
        horizon,
        steps,
        nodes,
    })
}
