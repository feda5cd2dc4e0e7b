//! Linear two-point boundary-value problems
//!
//! ```text
//! Y'(t) = F(t) Y(t) + g(t),   L_init Y(0) + L_term Y(T) = c
//! ```
//!
//! solved by fundamental-matrix shooting: one RK4 sweep of `[Phi | y_p]` from
//! `Phi(0) = basis`, `y_p(0) = 0`, then a `dim x dim` boundary-matching solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::TimeGrid;

/// Boundary-matching condition numbers above this are reported as singular.
pub const SINGULAR_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct LinearBvpSystem {
    grid: TimeGrid,
    dim: usize,
    /// `F` at half-step indices `0..=2M`.
    drift: Vec<DMatrix<f64>>,
    /// `g` at half-step indices `0..=2M`.
    forcing: Vec<DVector<f64>>,
    l_init: DMatrix<f64>,
    l_term: DMatrix<f64>,
    rhs: DVector<f64>,
}

impl LinearBvpSystem {
    pub fn new(
        grid: TimeGrid,
        drift: Vec<DMatrix<f64>>,
        forcing: Vec<DVector<f64>>,
        l_init: DMatrix<f64>,
        l_term: DMatrix<f64>,
        rhs: DVector<f64>,
    ) -> Result<Self> {
        let dim = rhs.len();
        let halves = 2 * grid.steps() + 1;
        if drift.len() != halves || forcing.len() != halves {
            return Err(Error::InvalidSystem(format!(
                "expected {halves} half-step samples, got drift {} / forcing {}",
                drift.len(),
                forcing.len()
            )));
        }
        if drift.iter().any(|f| f.shape() != (dim, dim)) || forcing.iter().any(|g| g.len() != dim) {
            return Err(Error::InvalidSystem("coefficient dimension mismatch".into()));
        }
        if l_init.shape() != (dim, dim) || l_term.shape() != (dim, dim) {
            return Err(Error::InvalidSystem("boundary operator must be dim x dim".into()));
        }
        if drift.iter().any(|f| f.iter().any(|v| !v.is_finite()))
            || forcing.iter().any(|g| g.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidSystem("non-finite drift or forcing entry".into()));
        }
        let mut stacked = DMatrix::zeros(dim, 2 * dim);
        stacked.view_mut((0, 0), (dim, dim)).copy_from(&l_init);
        stacked.view_mut((0, dim), (dim, dim)).copy_from(&l_term);
        let rank = stacked.rank(1e-12 * stacked.norm().max(1.0));
        if rank != dim {
            return Err(Error::InvalidSystem(format!(
                "boundary operator has {rank} independent rows, need {dim}"
            )));
        }
        Ok(LinearBvpSystem {
            grid,
            dim,
            drift,
            forcing,
            l_init,
            l_term,
            rhs,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift_half(&self, s: usize) -> &DMatrix<f64> {
        &self.drift[s]
    }

    pub fn drift_at_node(&self, j: usize) -> &DMatrix<f64> {
        &self.drift[2 * j]
    }

    pub fn forcing_half(&self, s: usize) -> &DVector<f64> {
        &self.forcing[s]
    }

    pub fn forcing_at_node(&self, j: usize) -> &DVector<f64> {
        &self.forcing[2 * j]
    }

    pub fn l_init(&self) -> &DMatrix<f64> {
        &self.l_init
    }

    pub fn l_term(&self) -> &DMatrix<f64> {
        &self.l_term
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    /// Copy with a different boundary vector `c`.
    pub fn with_rhs(&self, rhs: DVector<f64>) -> Self {
        assert_eq!(rhs.len(), self.dim);
        LinearBvpSystem {
            rhs,
            ..self.clone()
        }
    }

    /// `F(t_j) y + g(t_j)`.
    pub fn eval_node(&self, j: usize, y: &DVector<f64>) -> DVector<f64> {
        self.drift_at_node(j) * y + self.forcing_at_node(j)
    }
}

/// Node-wise solution, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    grid: TimeGrid,
    components: Vec<Vec<f64>>,
    condition_number: f64,
}

impl BvpSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.components
    }

    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn state(&self, j: usize) -> DVector<f64> {
        DVector::from_iterator(self.components.len(), self.components.iter().map(|c| c[j]))
    }

    pub fn from_components(grid: TimeGrid, components: Vec<Vec<f64>>, condition_number: f64) -> Self {
        assert!(components.iter().all(|c| c.len() == grid.len()));
        BvpSolution {
            grid,
            components,
            condition_number,
        }
    }
}

/// Interior residuals and boundary defects of a node-wise solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Per equation: `max_j |(Y_{j+1} - Y_{j-1}) / 2h - F_j Y_j - g_j|` over interior nodes.
    pub equation: Vec<f64>,
    /// Per boundary row: `(L_init Y_0 + L_term Y_M - c)_r`.
    pub boundary: Vec<f64>,
}

impl ResidualReport {
    pub fn max_equation(&self) -> f64 {
        self.equation.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_boundary(&self) -> f64 {
        self.boundary.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

pub fn solve_bvp(system: &LinearBvpSystem) -> Result<BvpSolution> {
    solve_bvp_with_basis(system, &DMatrix::identity(system.dim, system.dim))
}

/// Shooting with an arbitrary invertible initial basis `Phi(0)`.
pub fn solve_bvp_with_basis(system: &LinearBvpSystem, basis: &DMatrix<f64>) -> Result<BvpSolution> {
    let n = system.dim;
    if basis.shape() != (n, n) {
        return Err(Error::InvalidSystem("basis must be dim x dim".into()));
    }
    let grid = &system.grid;
    let m = grid.steps();
    let h = grid.step();

    // Columns 0..n: fundamental matrix; column n: particular solution.
    let mut z = DMatrix::zeros(n, n + 1);
    z.view_mut((0, 0), (n, n)).copy_from(basis);
    let rate = |s: usize, z: &DMatrix<f64>| {
        let mut dz = &system.drift[s] * z;
        let mut last = dz.column_mut(n);
        last += &system.forcing[s];
        dz
    };
    let mut history = Vec::with_capacity(m + 1);
    history.push(z.clone());
    for j in 0..m {
        let (s0, s1, s2) = (2 * j, 2 * j + 1, 2 * j + 2);
        let k1 = rate(s0, &z);
        let k2 = rate(s1, &(&z + &k1 * (0.5 * h)));
        let k3 = rate(s1, &(&z + &k2 * (0.5 * h)));
        let k4 = rate(s2, &(&z + &k3 * h));
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NceUnstable(format!(
                "non-finite fundamental matrix at t = {}",
                grid.t(j + 1)
            )));
        }
        history.push(z.clone());
    }

    let phi0 = history[0].columns(0, n);
    let phit = history[m].columns(0, n);
    let yp0 = history[0].column(n);
    let ypt = history[m].column(n);
    let matching = &system.l_init * phi0 + &system.l_term * phit;
    let target = &system.rhs - &system.l_init * yp0 - &system.l_term * ypt;

    let sv = matching.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(Error::NceSingular {
            condition,
            threshold: SINGULAR_CONDITION,
        });
    }
    let coeffs = matching
        .lu()
        .solve(&target)
        .ok_or(Error::NceSingular {
            condition,
            threshold: SINGULAR_CONDITION,
        })?;

    let mut components = vec![vec![0.0; m + 1]; n];
    for (j, zj) in history.iter().enumerate() {
        let y = zj.columns(0, n) * &coeffs + zj.column(n);
        for (i, comp) in components.iter_mut().enumerate() {
            comp[j] = y[i];
        }
    }
    if components.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NceUnstable("non-finite superposed solution".into()));
    }
    Ok(BvpSolution {
        grid: grid.clone(),
        components,
        condition_number: condition,
    })
}

pub fn bvp_residual(sol: &BvpSolution, system: &LinearBvpSystem) -> Result<ResidualReport> {
    sol.grid.ensure_same(&system.grid, "solution vs system")?;
    let n = system.dim;
    if sol.dim() != n {
        return Err(Error::InvalidSystem("solution dimension mismatch".into()));
    }
    let m = sol.grid.steps();
    let h2 = 2.0 * sol.grid.step();
    let mut equation = vec![0.0f64; n];
    for j in 1..m {
        let rate = system.eval_node(j, &sol.state(j));
        for (i, eq) in equation.iter_mut().enumerate() {
            let c = &sol.components[i];
            let fd = (c[j + 1] - c[j - 1]) / h2;
            *eq = eq.max((fd - rate[i]).abs());
        }
    }
    let defect = &system.l_init * sol.state(0) + &system.l_term * sol.state(m) - &system.rhs;
    Ok(ResidualReport {
        equation,
        boundary: defect.iter().copied().collect(),
    })
}
