//! Configuration, studies across N, and file output.

pub mod config;
pub mod output;
pub mod study;

use serde::{Deserialize, Serialize};

use crate::bvp::{LinearBvpSystem, SINGULAR_CONDITION};
use crate::error::Result;
use crate::model::{build_time_grid, validate_params, ModelParams, TimeGrid, ValidatedParams};
use crate::moments::{limiting_cost_major, limiting_cost_minor, solve_moments, MomentTrajectory};
use crate::nce::{consistency_check, nce_residual, solve_nce, NceSolution};
use crate::riccati::{riccati_residual, solve_riccati, RiccatiSolution};

/// Every deterministic artifact of one parameter set on one grid.
#[derive(Debug, Clone)]
pub struct Solved {
    pub params: ValidatedParams,
    pub grid: TimeGrid,
    pub riccati: RiccatiSolution,
    pub system: LinearBvpSystem,
    pub nce: NceSolution,
    pub moments: MomentTrajectory,
}

pub fn solve_model(params: &ModelParams, steps: usize) -> Result<Solved> {
    let params = validate_params(params)?;
    let grid = build_time_grid(params.horizon, steps)?;
    let riccati = solve_riccati(&params, &grid)?;
    let (system, nce) = solve_nce(&params, &riccati)?;
    let moments = solve_moments(&params, &riccati, &nce)?;
    Ok(Solved {
        params,
        grid,
        riccati,
        system,
        nce,
        moments,
    })
}

/// Pass thresholds for the deterministic checks. The residuals use central
/// differences, so their thresholds scale with `h^2` when the grid is coarsened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub riccati_residual: f64,
    pub nce_equation_residual: f64,
    pub nce_boundary_residual: f64,
    pub condition_number: f64,
    pub consistency: f64,
    pub mu_xbar: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            riccati_residual: 1e-6,
            nce_equation_residual: 1e-6,
            nce_boundary_residual: 1e-10,
            condition_number: SINGULAR_CONDITION,
            consistency: 1e-6,
            mu_xbar: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub riccati_residual: f64,
    pub nce_equation_residual: f64,
    pub nce_boundary_residual: f64,
    pub condition_number: f64,
    pub consistency_xbar: f64,
    pub consistency_k: f64,
    pub mu_xbar: f64,
    #[serde(rename = "J0_bar")]
    pub j0_bar: f64,
    #[serde(rename = "Ji_bar")]
    pub ji_bar: f64,
}

impl Diagnostics {
    pub fn of(solved: &Solved) -> Result<Self> {
        let s = solved;
        let res = nce_residual(&s.nce, &s.system)?;
        let cons = consistency_check(&s.nce, &s.params, &s.riccati)?;
        let mu_xbar = s
            .moments
            .mu
            .iter()
            .zip(&s.nce.xbar)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        Ok(Diagnostics {
            riccati_residual: riccati_residual(&s.riccati, &s.params),
            nce_equation_residual: res.max_equation(),
            nce_boundary_residual: res.max_boundary(),
            condition_number: s.nce.condition_number,
            consistency_xbar: cons.xbar,
            consistency_k: cons.k,
            mu_xbar,
            j0_bar: limiting_cost_major(&s.params, &s.nce),
            ji_bar: limiting_cost_minor(&s.params, &s.riccati, &s.nce, &s.moments),
        })
    }

    /// Names of the checks that fail.
    pub fn failures(&self, tol: &Tolerances) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut check = |ok: bool, name| {
            if !ok {
                out.push(name)
            }
        };
        check(self.riccati_residual <= tol.riccati_residual, "riccati_residual");
        check(self.nce_equation_residual <= tol.nce_equation_residual, "nce_equation_residual");
        check(self.nce_boundary_residual <= tol.nce_boundary_residual, "nce_boundary_residual");
        check(self.condition_number < tol.condition_number, "condition_number");
        check(self.consistency_xbar < tol.consistency, "consistency_xbar");
        check(self.consistency_k < tol.consistency, "consistency_k");
        check(self.mu_xbar < tol.mu_xbar, "mu_xbar");
        out
    }
}
