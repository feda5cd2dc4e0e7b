//! The six-dimensional consistency (NCE) system for deterministic terminal data.
//!
//! With a deterministic `xi` every martingale integrand vanishes and the system is the
//! linear two-point problem, for state `Y = (x0_hat, xbar, k, p0, p, q)`:
//!
//! ```text
//! x0_hat' = A0 x0_hat - B0^2/R0 p0
//! xbar'   = (A + D - gP) xbar - g k + alpha x0_hat
//! k'      = (-A + gP) k + (Q - DP) xbar - alpha P x0_hat
//! p0'     = -A0 p0 - Q0 (x0_hat - xbar) - alpha p + alpha P q
//! p'      = -(A + D - gP) p + Q0 (x0_hat - xbar) - (Q - DP) q
//! q'      = (A - gP) q + g p
//!
//! x0_hat(T) = xi, xbar(0) = x_mean, k(T) = 0, p0(0) = -H0 x0_hat(0), p(T) = 0, q(0) = 0
//! ```
//!
//! with `g = B^2/R` and `P` the Riccati solution.

use nalgebra::{DMatrix, DVector};

use crate::bvp::{bvp_residual, solve_bvp, BvpSolution, LinearBvpSystem, ResidualReport};
use crate::error::{Error, Result};
use crate::model::{TimeGrid, ValidatedParams};
use crate::ode::{rk4_scalar_linear, HalfSampled, Sweep};
use crate::riccati::RiccatiSolution;

pub const X0: usize = 0;
pub const XBAR: usize = 1;
pub const K: usize = 2;
pub const P0: usize = 3;
pub const P: usize = 4;
pub const Q: usize = 5;

pub const COMPONENT_NAMES: [&str; 6] = ["x0_hat", "xbar", "k", "p0", "p", "q"];

/// Coefficients of the auxiliary mean-field dynamics at one value of `P`:
///
/// ```text
/// xbar' = abar xbar + bbar x0 + cbar k,    k' = atilde k + btilde xbar + ctilde x0
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxCoefficients {
    pub abar: f64,
    pub bbar: f64,
    pub cbar: f64,
    pub atilde: f64,
    pub btilde: f64,
    pub ctilde: f64,
}

impl AuxCoefficients {
    pub fn at(params: &ValidatedParams, p: f64) -> Self {
        let g = params.minor_control_factor();
        AuxCoefficients {
            abar: params.a + params.d - g * p,
            bbar: params.alpha,
            cbar: -g,
            atilde: -params.a + g * p,
            btilde: params.q - params.d * p,
            ctilde: -params.alpha * p,
        }
    }
}

/// Major Hamiltonian system written through the auxiliary coefficients (state
/// equations for `(x0, xbar, k)` and their adjoints `(p0, p, q)`).
pub fn hamiltonian_drift(params: &ValidatedParams, c: &AuxCoefficients) -> DMatrix<f64> {
    let g0 = params.major_control_factor();
    let q0 = params.q0;
    #[rustfmt::skip]
    let rows = [
        params.a0, 0.0,      0.0,      -g0,         0.0,      0.0,
        c.bbar,    c.abar,   c.cbar,   0.0,         0.0,      0.0,
        c.ctilde,  c.btilde, c.atilde, 0.0,         0.0,      0.0,
        -q0,       q0,       0.0,      -params.a0,  -c.bbar,  -c.ctilde,
        q0,        -q0,      0.0,      0.0,         -c.abar,  -c.btilde,
        0.0,       0.0,      0.0,      0.0,         -c.cbar,  -c.atilde,
    ];
    DMatrix::from_row_slice(6, 6, &rows)
}

/// Drift of the consistency system at a given `P`, transcribed row by row.
pub fn nce_drift(params: &ValidatedParams, p: f64) -> DMatrix<f64> {
    let g = params.minor_control_factor();
    let g0 = params.major_control_factor();
    let (a, d, alpha, q, q0, a0) = (params.a, params.d, params.alpha, params.q, params.q0, params.a0);
    let abar = a + d - g * p;
    #[rustfmt::skip]
    let rows = [
        a0,          0.0,          0.0,        -g0,  0.0,    0.0,
        alpha,       abar,         -g,         0.0,  0.0,    0.0,
        -alpha * p,  q - d * p,    -a + g * p, 0.0,  0.0,    0.0,
        -q0,         q0,           0.0,        -a0,  -alpha, alpha * p,
        q0,          -q0,          0.0,        0.0,  -abar,  -(q - d * p),
        0.0,         0.0,          0.0,        0.0,  g,      a - g * p,
    ];
    DMatrix::from_row_slice(6, 6, &rows)
}

/// Boundary rows in the order
/// `(x0_hat(T), xbar(0), k(T), p0(0) + H0 x0_hat(0), p(T), q(0))`.
pub fn nce_boundary(params: &ValidatedParams) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let mut l_init = DMatrix::zeros(6, 6);
    let mut l_term = DMatrix::zeros(6, 6);
    l_term[(0, X0)] = 1.0;
    l_init[(1, XBAR)] = 1.0;
    l_term[(2, K)] = 1.0;
    l_init[(3, P0)] = 1.0;
    l_init[(3, X0)] = params.h0;
    l_term[(4, P)] = 1.0;
    l_init[(5, Q)] = 1.0;
    let rhs = DVector::from_vec(vec![params.xi, params.x_mean, 0.0, 0.0, 0.0, 0.0]);
    (l_init, l_term, rhs)
}

pub fn assemble_nce(params: &ValidatedParams, riccati: &RiccatiSolution) -> Result<LinearBvpSystem> {
    let grid = riccati.grid().clone();
    if (grid.horizon() - params.horizon).abs() > 1e-12 * params.horizon {
        return Err(Error::GridMismatch(format!(
            "Riccati grid horizon {} differs from T = {}",
            grid.horizon(),
            params.horizon
        )));
    }
    let p_half = riccati.half_sampled();
    let drift = p_half.half_values().iter().map(|&p| nce_drift(params, p)).collect();
    let forcing = vec![DVector::zeros(6); 2 * grid.steps() + 1];
    let (l_init, l_term, rhs) = nce_boundary(params);
    LinearBvpSystem::new(grid, drift, forcing, l_init, l_term, rhs)
}

/// The six consistency trajectories plus the (identically zero) martingale integrands.
#[derive(Debug, Clone, PartialEq)]
pub struct NceSolution {
    pub grid: TimeGrid,
    pub x0_hat: Vec<f64>,
    pub xbar: Vec<f64>,
    pub k: Vec<f64>,
    pub p0: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub z0: Vec<f64>,
    pub beta0: Vec<f64>,
    pub beta_bar: Vec<f64>,
    pub condition_number: f64,
}

impl NceSolution {
    pub fn from_bvp(sol: BvpSolution) -> Self {
        assert_eq!(sol.dim(), 6);
        let grid = sol.grid().clone();
        let cond = sol.condition_number();
        let zeros = vec![0.0; grid.len()];
        let mut it = sol.into_components().into_iter();
        let mut next = || it.next().unwrap();
        NceSolution {
            x0_hat: next(),
            xbar: next(),
            k: next(),
            p0: next(),
            p: next(),
            q: next(),
            z0: zeros.clone(),
            beta0: zeros.clone(),
            beta_bar: zeros,
            grid,
            condition_number: cond,
        }
    }

    pub fn component(&self, i: usize) -> &[f64] {
        match i {
            X0 => &self.x0_hat,
            XBAR => &self.xbar,
            K => &self.k,
            P0 => &self.p0,
            P => &self.p,
            Q => &self.q,
            _ => panic!("component index {i} out of range"),
        }
    }

    pub fn component_mut(&mut self, i: usize) -> &mut Vec<f64> {
        match i {
            X0 => &mut self.x0_hat,
            XBAR => &mut self.xbar,
            K => &mut self.k,
            P0 => &mut self.p0,
            P => &mut self.p,
            Q => &mut self.q,
            _ => panic!("component index {i} out of range"),
        }
    }

    pub fn to_bvp(&self) -> BvpSolution {
        BvpSolution::from_components(
            self.grid.clone(),
            (0..6).map(|i| self.component(i).to_vec()).collect(),
            self.condition_number,
        )
    }

    /// Decentralized major control `u0(t) = -B0 R0^{-1} p0(t)`.
    pub fn major_control(&self, params: &ValidatedParams) -> Vec<f64> {
        self.p0.iter().map(|p0| -params.b0 / params.r0 * p0 + 0.0).collect()
    }

    /// Offset `-B R^{-1} k(t)` of the minor feedback `u = -B R^{-1} (P x + k)`.
    pub fn feedback_offset(&self, params: &ValidatedParams) -> Vec<f64> {
        self.k.iter().map(|k| -params.b / params.r * k + 0.0).collect()
    }
}

pub fn solve_nce(params: &ValidatedParams, riccati: &RiccatiSolution) -> Result<(LinearBvpSystem, NceSolution)> {
    let system = assemble_nce(params, riccati)?;
    let sol = solve_bvp(&system)?;
    Ok((system, NceSolution::from_bvp(sol)))
}

pub fn nce_residual(sol: &NceSolution, system: &LinearBvpSystem) -> Result<ResidualReport> {
    bvp_residual(&sol.to_bvp(), system)
}

/// A-posteriori consistency discrepancies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Consistency {
    /// `max_j |xbar_reint - xbar|` after forward re-integration of the mean-field ODE.
    pub xbar: f64,
    /// `max_j |k_reint - k|` after backward re-integration of the linear offset equation.
    pub k: f64,
}

/// Re-integrates the aggregate ODE forward from `x_mean` using the solution's `x0_hat`
/// and `k`, and the offset equation backward from `k(T) = 0` using its `xbar` and
/// `x0_hat`; both must reproduce the stored trajectories.
pub fn consistency_check(
    sol: &NceSolution,
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
) -> Result<Consistency> {
    sol.grid.ensure_same(riccati.grid(), "NCE vs Riccati")?;
    let grid = &sol.grid;
    let g = params.minor_control_factor();
    let p = riccati.half_sampled();
    let x0 = HalfSampled::from_nodes(&sol.x0_hat);
    let k = HalfSampled::from_nodes(&sol.k);
    let xbar = HalfSampled::from_nodes(&sol.xbar);

    let abar = p.map(|p| params.a + params.d - g * p);
    let xbar_force = k.zip_with(&x0, |k, x0| -g * k + params.alpha * x0);
    let xbar_re = rk4_scalar_linear(grid, &abar, &xbar_force, params.x_mean, Sweep::Forward);

    let atilde = p.map(|p| -params.a + g * p);
    let btilde_xbar = p.zip_with(&xbar, |p, xb| (params.q - params.d * p) * xb);
    let k_force = btilde_xbar.zip_with(&p.zip_with(&x0, |p, x0| -params.alpha * p * x0), |a, b| a + b);
    let k_re = rk4_scalar_linear(grid, &atilde, &k_force, 0.0, Sweep::Backward);

    let max_dev = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(Consistency {
        xbar: max_dev(&xbar_re, &sol.xbar),
        k: max_dev(&k_re, &sol.k),
    })
}

/// Mean-field response `(xbar, k)` of the population to a given major path `l0`:
///
/// ```text
/// xbar' = (A + D - gP) xbar - g k + alpha l0,   xbar(0) = x_mean
/// k'    = (-A + gP) k + (Q - DP) xbar - alpha P l0,   k(T) = 0
/// ```
///
/// Components are ordered `(xbar, k)`.
pub fn assemble_mean_field_response(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    major: &HalfSampled,
) -> Result<LinearBvpSystem> {
    let grid = riccati.grid().clone();
    if major.steps() != grid.steps() {
        return Err(Error::GridMismatch("major path vs Riccati grid".into()));
    }
    let p_half = riccati.half_sampled();
    let mut drift = Vec::with_capacity(2 * grid.steps() + 1);
    let mut forcing = Vec::with_capacity(2 * grid.steps() + 1);
    for (s, &p) in p_half.half_values().iter().enumerate() {
        let c = AuxCoefficients::at(params, p);
        drift.push(DMatrix::from_row_slice(2, 2, &[c.abar, c.cbar, c.btilde, c.atilde]));
        let l0 = major.half(s);
        forcing.push(DVector::from_vec(vec![c.bbar * l0, c.ctilde * l0]));
    }
    let l_init = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let l_term = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let rhs = DVector::from_vec(vec![params.x_mean, 0.0]);
    LinearBvpSystem::new(grid, drift, forcing, l_init, l_term, rhs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldResponse {
    pub xbar: Vec<f64>,
    pub k: Vec<f64>,
    pub condition_number: f64,
}

pub fn solve_mean_field_response(
    params: &ValidatedParams,
    riccati: &RiccatiSolution,
    major: &HalfSampled,
) -> Result<MeanFieldResponse> {
    let system = assemble_mean_field_response(params, riccati, major)?;
    let sol = solve_bvp(&system)?;
    let cond = sol.condition_number();
    let mut comps = sol.into_components().into_iter();
    Ok(MeanFieldResponse {
        xbar: comps.next().unwrap(),
        k: comps.next().unwrap(),
        condition_number: cond,
    })
}
