//! Fixed-step numerics shared by every module: half-step sampling of coefficient
//! functions, classical RK4 for linear scalar equations, and trapezoid quadrature.

use crate::model::TimeGrid;

/// A function sampled at the half-step indices `s = 0..=2M` of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSampled {
    values: Vec<f64>,
}

impl HalfSampled {
    /// Wraps `2M + 1` half-step values.
    pub fn from_half_values(values: Vec<f64>) -> Self {
        assert!(values.len() >= 5 && values.len() % 2 == 1, "need 2M+1 samples, M >= 2");
        HalfSampled { values }
    }

    /// Node values are kept; midpoints come from local cubic interpolation.
    pub fn from_nodes(nodes: &[f64]) -> Self {
        let mids = midpoints(nodes);
        let mut values = Vec::with_capacity(2 * nodes.len() - 1);
        for (j, &v) in nodes.iter().enumerate() {
            values.push(v);
            if j < mids.len() {
                values.push(mids[j]);
            }
        }
        HalfSampled { values }
    }

    /// Samples `f(t)` directly.
    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=2 * grid.steps()).map(|s| f(grid.half_time(s))).collect();
        HalfSampled { values }
    }

    pub fn constant(grid: &TimeGrid, c: f64) -> Self {
        HalfSampled {
            values: vec![c; 2 * grid.steps() + 1],
        }
    }

    pub fn half(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn node(&self, j: usize) -> f64 {
        self.values[2 * j]
    }

    pub fn half_values(&self) -> &[f64] {
        &self.values
    }

    pub fn steps(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    pub fn node_values(&self) -> Vec<f64> {
        self.values.iter().step_by(2).copied().collect()
    }

    /// Pointwise combination of two samplings on the same grid.
    pub fn zip_with(&self, other: &HalfSampled, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        HalfSampled {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        HalfSampled {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Values at `t_j + h/2` for `j = 0..M` by four-point Lagrange interpolation
/// (three-point when `M = 2`). Local error is `O(h^4)`, matching RK4.
pub fn midpoints(nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len() - 1;
    assert!(m >= 2, "need at least two steps");
    let v = nodes;
    if m == 2 {
        return vec![
            (3.0 * v[0] + 6.0 * v[1] - v[2]) / 8.0,
            (-v[0] + 6.0 * v[1] + 3.0 * v[2]) / 8.0,
        ];
    }
    (0..m)
        .map(|j| {
            if j == 0 {
                (5.0 * v[0] + 15.0 * v[1] - 5.0 * v[2] + v[3]) / 16.0
            } else if j == m - 1 {
                (v[m - 3] - 5.0 * v[m - 2] + 15.0 * v[m - 1] + 5.0 * v[m]) / 16.0
            } else {
                (-v[j - 1] + 9.0 * v[j] + 9.0 * v[j + 1] - v[j + 2]) / 16.0
            }
        })
        .collect()
}

/// Trapezoid rule over the grid nodes.
pub fn trapezoid(grid: &TimeGrid, values: &[f64]) -> f64 {
    debug_assert_eq!(values.len(), grid.len());
    let h = grid.step();
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (0.5 * (values[0] + values[n - 1]) + inner)
}

/// Direction of a one-step integration sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// From `t_0 = 0` with the given initial value.
    Forward,
    /// From `t_M = T` with the given terminal value.
    Backward,
}

/// RK4 for `y' = a(t) y + b(t)` with coefficients on half-steps.
pub fn rk4_scalar_linear(
    grid: &TimeGrid,
    a: &HalfSampled,
    b: &HalfSampled,
    start: f64,
    sweep: Sweep,
) -> Vec<f64> {
    let m = grid.steps();
    assert_eq!(a.steps(), m);
    assert_eq!(b.steps(), m);
    let f = |s: usize, y: f64| a.half(s) * y + b.half(s);
    let mut out = vec![0.0; m + 1];
    match sweep {
        Sweep::Forward => {
            let h = grid.step();
            out[0] = start;
            for j in 0..m {
                let (s0, s1, s2) = (2 * j, 2 * j + 1, 2 * j + 2);
                let y = out[j];
                let k1 = f(s0, y);
                let k2 = f(s1, y + 0.5 * h * k1);
                let k3 = f(s1, y + 0.5 * h * k2);
                let k4 = f(s2, y + h * k3);
                out[j + 1] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        Sweep::Backward => {
            let h = -grid.step();
            out[m] = start;
            for j in (1..=m).rev() {
                let (s0, s1, s2) = (2 * j, 2 * j - 1, 2 * j - 2);
                let y = out[j];
                let k1 = f(s0, y);
                let k2 = f(s1, y + 0.5 * h * k1);
                let k3 = f(s1, y + 0.5 * h * k2);
                let k4 = f(s2, y + h * k3);
                out[j - 1] = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
    }
    out
}

/// Central-difference derivative at interior nodes `1..M`; entry `j - 1` holds node `j`.
pub fn central_differences(grid: &TimeGrid, values: &[f64]) -> Vec<f64> {
    let h2 = 2.0 * grid.step();
    values.windows(3).map(|w| (w[2] - w[0]) / h2).collect()
}

/// Pairwise summation in index order; deterministic for a given slice.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Mean and standard error of the mean (zero spread when fewer than two samples).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
