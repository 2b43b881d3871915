mod common;

use std::sync::Arc;

use common::{chain_value, Linear};
use nalgebra::DMatrix;
use peer_ocp::algebra::{ell_operator, hankel_deviation, pascal, vandermonde};
use peer_ocp::catalog::{load_triplet, triplet_names};
use peer_ocp::ivp::{forward_sweep, NewtonOptions};
use peer_ocp::optimize::{minimize_box, Eval, OptimizeConfig, ROUNDOFF};
use peer_ocp::trajectory::{ControlLayout, Controls, Grid};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn matrix(q: usize, r: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(q, r, |i, j| v[(i * r + j) % v.len()])
}

fn hankel(q: usize, r: usize, diag: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(q, r, |i, j| diag[(i + j) % diag.len()])
}

proptest! {
    #[test]
    fn ell_image_has_zero_corner(q in 1usize..6, r in 1usize..6, v in prop::collection::vec(-10.0f64..10.0, 36)) {
        let l = ell_operator(&matrix(q, r, &v));
        prop_assert_eq!(l[(0, 0)], 0.0);
    }

    #[test]
    fn pascal_congruence_and_ell_keep_hankel_form(
        q in 1usize..6,
        r in 1usize..6,
        d in prop::collection::vec(-1.0f64..1.0, 11),
    ) {
        let x = hankel(q, r, &d);
        prop_assert!(hankel_deviation(&x) == 0.0);
        let congruent = pascal(q).transpose() * &x * pascal(r);
        let scale = 1.0 + congruent.amax();
        prop_assert!(hankel_deviation(&congruent) <= 1e-12 * scale);
        prop_assert!(hankel_deviation(&ell_operator(&x)) <= 1e-12 * (1.0 + x.amax()));
    }

    #[test]
    fn weighted_vandermonde_gram_is_hankel(
        mut nodes in prop::collection::vec(-1.0f64..2.0, 4),
        k in prop::collection::vec(-2.0f64..2.0, 4),
        q in 1usize..5,
        r in 1usize..5,
    ) {
        nodes.sort_by(f64::total_cmp);
        let kd = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(k));
        let g = vandermonde(&nodes, q).transpose() * kd * vandermonde(&nodes, r);
        prop_assert!(hankel_deviation(&g) <= 1e-12 * (1.0 + g.amax()));
    }

    #[test]
    fn forward_sweep_reproduces_random_polynomials(
        coeffs in prop::collection::vec(-2.0f64..2.0, 4),
        steps in 3usize..9,
        which in 0usize..3,
    ) {
        let t = load_triplet(triplet_names()[which]).unwrap();
        let r = t.order().0;
        let y0 = coeffs[..r].to_vec();
        let prob = Linear::chain(r, y0.clone(), vec![0.0; r], 1.0);
        let grid = Grid::new(steps, 1.0).unwrap();
        let u = Controls::zeros(Arc::new(ControlLayout::new(&t, &grid, 0)));
        let y = forward_sweep(&prob, &t, &grid, &u, &NewtonOptions::default()).unwrap();
        for n in 0..steps {
            for (i, &c) in t.nodes().iter().enumerate() {
                let s = grid.stage_time(n, c);
                for comp in 0..r {
                    let exact = chain_value(&y0, comp, s);
                    prop_assert!((y.stage(n, i)[comp] - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
                }
            }
        }
    }
}

/// `½ xᵀ(MᵀM + εI)x + bᵀx` with value, gradient and Hessian diagonal.
struct Qp {
    h: DMatrix<f64>,
    b: Vec<f64>,
}

impl Qp {
    fn random(rng: &mut StdRng, n: usize) -> Self {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let h = m.transpose() * &m + DMatrix::identity(n, n) * 0.05;
        Self { h, b: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect() }
    }

    fn eval(&self, x: &[f64]) -> Eval {
        let n = x.len();
        let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| self.h[(i, j)] * x[j]).sum::<f64>() + self.b[i]).collect();
        let value = (0..n).map(|i| 0.5 * (g[i] - self.b[i]) * x[i] + self.b[i] * x[i]).sum();
        Eval { value, grad: g, hessian_diag: Some((0..n).map(|i| self.h[(i, i)]).collect()) }
    }
}

#[test]
fn optimizer_stays_feasible_and_descends_on_random_box_qps() {
    let mut rng = StdRng::seed_from_u64(20240531);
    for case in 0..25 {
        let n = rng.random_range(2..12);
        let qp = Qp::random(&mut rng, n);
        let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..-0.1)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.2..2.0)).collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut feasible = true;
        let cfg = OptimizeConfig { memory: 1 + case % 8, precondition: case % 2 == 0, ..OptimizeConfig::default() };
        let res = minimize_box(
            |x: &[f64]| -> Result<Eval, ()> {
                feasible &= x.iter().zip(&lo).zip(&hi).all(|((v, l), h)| l <= v && v <= h);
                Ok(qp.eval(x))
            },
            &x0,
            &lo,
            &hi,
            &cfg,
        )
        .unwrap();
        assert!(feasible, "case {case}: infeasible evaluation point");
        assert!(res.converged, "case {case}: {}", res.message);
        for w in res.history.windows(2) {
            let allowance = ROUNDOFF * (1.0 + w[0].cost.abs());
            assert!(w[1].cost <= w[0].cost + allowance, "case {case}: cost rose from {} to {}", w[0].cost, w[1].cost);
        }
        // KKT check of the projected gradient
        let g = qp.eval(&res.x).grad;
        for i in 0..n {
            let step = (res.x[i] - g[i]).clamp(lo[i], hi[i]) - res.x[i];
            assert!(step.abs() <= cfg.grad_tol, "case {case} component {i}");
        }
    }
}

#[test]
fn unconstrained_optimum_has_small_raw_gradient() {
    let mut rng = StdRng::seed_from_u64(7);
    let qp = Qp::random(&mut rng, 6);
    let inf = vec![f64::INFINITY; 6];
    let neg: Vec<f64> = inf.iter().map(|v| -v).collect();
    let cfg = OptimizeConfig::default();
    let res = minimize_box(|x: &[f64]| -> Result<Eval, ()> { Ok(qp.eval(x)) }, &[0.0; 6], &neg, &inf, &cfg).unwrap();
    let g = qp.eval(&res.x).grad;
    assert!(g.iter().all(|v| v.abs() <= cfg.grad_tol), "{g:?}");
}
