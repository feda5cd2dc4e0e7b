//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use mfg_lqg::model::ModelParams;

/// `P(t)` for constant coefficients via the linear system `X' = A X - g Y`,
/// `Y' = -Q X - A Y`, `(X, Y)(T) = (1, H)`, `P = Y / X`.
pub fn riccati_closed_form(p: &ModelParams, t: f64) -> f64 {
    let g = p.b * p.b / p.r;
    let gamma = (p.a * p.a + g * p.q).sqrt();
    let s = p.horizon - t;
    let (ch, sh) = if gamma > 0.0 {
        ((gamma * s).cosh(), (gamma * s).sinh() / gamma)
    } else {
        (1.0, s)
    };
    let x = ch - sh * (p.a - g * p.h);
    let y = ch * p.h - sh * (-p.q - p.a * p.h);
    y / x
}

/// Band matrix with lower/upper bandwidths `kl`, `ku`, stored row-wise with room for
/// the fill-in of partial pivoting.
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = kl + ku + kl + 1;
        Banded { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        // column offset relative to i - kl
        let off = j + self.kl - i;
        assert!(off < self.width, "entry ({i}, {j}) outside band");
        i * self.width + off
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j >= i + self.width - self.kl {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    /// Gaussian elimination with partial pivoting restricted to the band.
    pub fn solve(mut self, mut b: Vec<f64>) -> Vec<f64> {
        let n = self.n;
        let upper = self.ku + self.kl;
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let piv = (k..=last)
                .max_by(|&i, &j| self.get(i, k).abs().partial_cmp(&self.get(j, k).abs()).unwrap())
                .unwrap();
            assert!(self.get(piv, k) != 0.0, "singular band matrix");
            let cmax = (k + upper).min(n - 1);
            if piv != k {
                for j in k..=cmax {
                    let (a, c) = (self.get(k, j), self.get(piv, j));
                    self.set(k, j, c);
                    self.set(piv, j, a);
                }
                b.swap(k, piv);
            }
            let d = self.get(k, k);
            for i in k + 1..=last {
                let f = self.get(i, k) / d;
                if f == 0.0 {
                    continue;
                }
                for j in k..=cmax {
                    let v = self.get(k, j);
                    if v != 0.0 {
                        self.add(i, j, -f * v);
                    }
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let cmax = (k + upper).min(n - 1);
            let s: f64 = (k + 1..=cmax).map(|j| self.get(k, j) * x[j]).sum();
            x[k] = (b[k] - s) / self.get(k, k);
        }
        x
    }
}

/// Consistency-system drift in state order `(x0, xbar, k, p0, p, q)`.
pub fn nce_matrix(p: &ModelParams, pr: f64) -> [[f64; 6]; 6] {
    let g = p.b * p.b / p.r;
    let g0 = p.b0 * p.b0 / p.r0;
    let abar = p.a + p.d - g * pr;
    [
        [p.a0, 0.0, 0.0, -g0, 0.0, 0.0],
        [p.alpha, abar, -g, 0.0, 0.0, 0.0],
        [-p.alpha * pr, p.q - p.d * pr, -p.a + g * pr, 0.0, 0.0, 0.0],
        [-p.q0, p.q0, 0.0, -p.a0, -p.alpha, p.alpha * pr],
        [p.q0, -p.q0, 0.0, 0.0, -abar, -(p.q - p.d * pr)],
        [0.0, 0.0, 0.0, 0.0, g, p.a - g * pr],
    ]
}

/// Trapezoid collocation of the consistency system on `m` uniform steps with the
/// closed-form Riccati solution. Returns the state at every node.
pub fn nce_collocation(p: &ModelParams, m: usize) -> Vec<[f64; 6]> {
    let h = p.horizon / m as f64;
    let n = 6 * (m + 1);
    let mut a = Banded::new(n, 8, 8);
    let mut rhs = vec![0.0; n];
    // initial conditions: xbar(0), p0(0) + H0 x0(0), q(0)
    a.set(0, 1, 1.0);
    rhs[0] = p.x_mean;
    a.set(1, 3, 1.0);
    a.set(1, 0, p.h0);
    a.set(2, 5, 1.0);
    for j in 0..m {
        let f0 = nce_matrix(p, riccati_closed_form(p, j as f64 * h));
        let f1 = nce_matrix(p, riccati_closed_form(p, (j + 1) as f64 * h));
        for i in 0..6 {
            let row = 3 + 6 * j + i;
            for c in 0..6 {
                let delta = if i == c { 1.0 } else { 0.0 };
                a.add(row, 6 * j + c, -delta - 0.5 * h * f0[i][c]);
                a.add(row, 6 * (j + 1) + c, delta - 0.5 * h * f1[i][c]);
            }
        }
    }
    // terminal conditions: x0(T), k(T), p(T)
    let last = 6 * m;
    a.set(n - 3, last, 1.0);
    rhs[n - 3] = p.xi;
    a.set(n - 2, last + 2, 1.0);
    a.set(n - 1, last + 4, 1.0);
    let y = a.solve(rhs);
    (0..=m)
        .map(|j| std::array::from_fn(|c| y[6 * j + c]))
        .collect()
}

/// Trapezoid rule on uniform nodes.
pub fn trapezoid(h: f64, v: &[f64]) -> f64 {
    let n = v.len();
    h * (0.5 * (v[0] + v[n - 1]) + v[1..n - 1].iter().sum::<f64>())
}
