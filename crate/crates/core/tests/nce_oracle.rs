mod common;

use mfg_lqg::model::{build_time_grid, validate_params, ModelParams};
use mfg_lqg::nce::{nce_residual, solve_nce};
use mfg_lqg::riccati::solve_riccati;

fn max_node_error(p: ModelParams, m: usize) -> f64 {
    let v = validate_params(&p).unwrap();
    let g = build_time_grid(p.horizon, m).unwrap();
    let r = solve_riccati(&v, &g).unwrap();
    let (_, sol) = solve_nce(&v, &r).unwrap();
    let fine = common::nce_collocation(&p, 4 * m);
    let mut err = 0.0f64;
    for j in 0..=m {
        for c in 0..6 {
            err = err.max((sol.component(c)[j] - fine[4 * j][c]).abs());
        }
    }
    err
}

#[test]
fn shooting_matches_collocation_default() {
    let e = max_node_error(ModelParams::default(), 2000);
    assert!(e < 1e-6, "max node error {e}");
}

#[test]
fn shooting_matches_collocation_other_regimes() {
    for p in [
        ModelParams { d: -0.7, alpha: -1.1, a: -0.5, a0: -0.3, ..ModelParams::default() },
        ModelParams { q0: 5.0, h0: 2.0, r: 0.5, horizon: 2.0, ..ModelParams::default() },
    ] {
        let e = max_node_error(p, 2000);
        assert!(e < 1e-6, "max node error {e} for {p:?}");
    }
}

#[test]
fn collocation_oracle_is_second_order() {
    let p = ModelParams::default();
    let reference = common::nce_collocation(&p, 6400);
    let err = |m: usize| {
        let y = common::nce_collocation(&p, m);
        let stride = 6400 / m;
        (0..=m)
            .flat_map(|j| (0..6).map(move |c| (j, c)))
            .map(|(j, c)| (y[j][c] - reference[stride * j][c]).abs())
            .fold(0.0, f64::max)
    };
    let ratio = err(100) / err(200);
    assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
}

#[test]
fn boundary_conditions_hold_exactly() {
    let p = ModelParams::default();
    let v = validate_params(&p).unwrap();
    let g = build_time_grid(1.0, 2000).unwrap();
    let r = solve_riccati(&v, &g).unwrap();
    let (sys, sol) = solve_nce(&v, &r).unwrap();
    let res = nce_residual(&sol, &sys).unwrap();
    assert!(res.max_boundary() <= 1e-10);
    assert!((sol.p0[0] + p.h0 * sol.x0_hat[0]).abs() <= 1e-10);
    assert!((sol.x0_hat[2000] - p.xi).abs() <= 1e-10);
    assert!(sol.condition_number < 1e10);
}
