mod common;

use std::sync::Arc;

use common::{chain_value, factorial, Linear};
use nalgebra::{DMatrix, DVector};
use peer_ocp::catalog::{load_triplet, triplet_names, StepRole};
use peer_ocp::ivp::{adjoint_sweep, forward_sweep, NewtonOptions};
use peer_ocp::problem::ControlProblem;
use peer_ocp::problems::heat::HeatProblem;
use peer_ocp::problems::quadratic::{optimal_adjoint, optimal_control, optimal_state, QuadraticProblem};
use peer_ocp::trajectory::{ControlLayout, Controls, Grid, StageArray};

fn no_controls(t: &peer_ocp::catalog::PeerTriplet, grid: &Grid) -> Controls {
    Controls::zeros(Arc::new(ControlLayout::new(t, grid, 0)))
}

fn exact_quadratic_controls(t: &peer_ocp::catalog::PeerTriplet, grid: &Grid) -> Controls {
    let layout = Arc::new(ControlLayout::new(t, grid, 1));
    Controls::from_fn(layout, t, grid, |s| vec![optimal_control(s)])
}

fn max_stage_error(t: &peer_ocp::catalog::PeerTriplet, grid: &Grid, x: &StageArray, f: impl Fn(f64) -> f64) -> f64 {
    let mut e = 0.0_f64;
    for n in 0..grid.steps() {
        for (i, &c) in t.nodes().iter().enumerate() {
            e = e.max((x.stage(n, i)[0] - f(grid.stage_time(n, c))).abs());
        }
    }
    e
}

#[test]
fn zero_rhs_keeps_the_initial_value() {
    let prob = Linear::new(DMatrix::zeros(3, 3), vec![1.5, -2.0, 0.25], vec![0.0; 3], 1.0);
    for name in triplet_names() {
        let t = load_triplet(name).unwrap();
        let grid = Grid::new(6, 1.0).unwrap();
        let y = forward_sweep(&prob, &t, &grid, &no_controls(&t, &grid), &NewtonOptions::default()).unwrap();
        for n in 0..6 {
            for i in 0..4 {
                for (a, b) in y.stage(n, i).iter().zip(&prob.y0) {
                    assert!((a - b).abs() < 1e-13, "{name} step {n} stage {i}");
                }
            }
        }
    }
}

#[test]
fn standard_step_matches_dense_solve() {
    let lambda = -3.0;
    let prob = Linear::new(DMatrix::from_element(1, 1, lambda), vec![1.0], vec![1.0], 1.0);
    for name in triplet_names() {
        let t = load_triplet(name).unwrap();
        let grid = Grid::new(5, 1.0).unwrap();
        let y = forward_sweep(&prob, &t, &grid, &no_controls(&t, &grid), &NewtonOptions::default()).unwrap();
        let h = grid.h();
        let a = t.a_of(StepRole::Standard);
        let k = t.k_of(StepRole::Standard);
        let b = t.b_of(StepRole::Standard).unwrap();
        let prev = DVector::from_column_slice(y.step(1));
        let oracle = (a - k * (h * lambda)).lu().solve(&(b * prev)).unwrap();
        for i in 0..4 {
            assert!((y.step(2)[i] - oracle[i]).abs() < 1e-13, "{name} stage {i}");
        }
    }
}

#[test]
fn quadratic_state_with_exact_control() {
    let prob = QuadraticProblem::new();
    let t = load_triplet("AP4o43p").unwrap();
    let grid = Grid::new(40, 1.0).unwrap();
    let u = exact_quadratic_controls(&t, &grid);
    let y = forward_sweep(&prob, &t, &grid, &u, &NewtonOptions::default()).unwrap();
    let e = max_stage_error(&t, &grid, &y, optimal_state);
    assert!(e <= 1e-4, "state error {e}");
}

#[test]
fn quadratic_adjoint_with_exact_control() {
    let prob = QuadraticProblem::new();
    let t = load_triplet("AP4o33pfs").unwrap();
    let grid = Grid::new(40, 1.0).unwrap();
    let u = exact_quadratic_controls(&t, &grid);
    let opts = NewtonOptions::default();
    let y = forward_sweep(&prob, &t, &grid, &u, &opts).unwrap();
    let p = adjoint_sweep(&prob, &t, &grid, &y, &u).unwrap();
    let e = max_stage_error(&t, &grid, &p, optimal_adjoint);
    assert!(e <= 1e-3, "adjoint error {e}");
}

#[test]
fn auxiliary_adjoint_is_exactly_one() {
    let quad = QuadraticProblem::new();
    let heat = HeatProblem::new(10).unwrap();
    let problems: [&dyn ControlProblem; 2] = [&quad, &heat];
    for prob in problems {
        let aux = prob.auxiliary_index().unwrap();
        for name in triplet_names() {
            let t = load_triplet(name).unwrap();
            let grid = Grid::new(9, prob.horizon()).unwrap();
            let layout = Arc::new(ControlLayout::new(&t, &grid, 1));
            let u = Controls::from_fn(layout, &t, &grid, |s| vec![(5.0 * s).cos()]);
            let y = forward_sweep(prob, &t, &grid, &u, &NewtonOptions::default()).unwrap();
            let p = adjoint_sweep(prob, &t, &grid, &y, &u).unwrap();
            for n in 0..9 {
                for i in 0..4 {
                    let v = p.stage(n, i)[aux];
                    assert!((v - 1.0).abs() <= 1e-12, "{} {name} step {n} stage {i}: {v}", prob.name());
                }
            }
        }
    }
}

#[test]
fn zero_terminal_gradient_gives_zero_adjoint() {
    let j = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
    let prob = Linear::new(j, vec![1.0, 1.0], vec![0.0, 0.0], 1.0);
    for name in triplet_names() {
        let t = load_triplet(name).unwrap();
        let grid = Grid::new(7, 1.0).unwrap();
        let u = no_controls(&t, &grid);
        let y = forward_sweep(&prob, &t, &grid, &u, &NewtonOptions::default()).unwrap();
        let p = adjoint_sweep(&prob, &t, &grid, &y, &u).unwrap();
        assert_eq!(p.max_abs(), 0.0, "{name}");
    }
}

#[test]
fn forward_sweep_is_exact_for_polynomials() {
    for name in triplet_names() {
        let t = load_triplet(name).unwrap();
        let (r, _) = t.order();
        // solution components are polynomials of degree r - 1 and lower
        let y0: Vec<f64> = (0..r).map(|k| 0.5 + k as f64 * 0.3).collect();
        let prob = Linear::chain(r, y0.clone(), vec![0.0; r], 2.0);
        let grid = Grid::new(6, 2.0).unwrap();
        let y = forward_sweep(&prob, &t, &grid, &no_controls(&t, &grid), &NewtonOptions::default()).unwrap();
        for n in 0..6 {
            for (i, &c) in t.nodes().iter().enumerate() {
                let s = grid.stage_time(n, c);
                for comp in 0..r {
                    let exact = chain_value(&y0, comp, s);
                    let got = y.stage(n, i)[comp];
                    assert!((got - exact).abs() <= 1e-10 * (1.0 + exact.abs()), "{name} n {n} i {i} comp {comp}");
                }
            }
        }
    }
}

#[test]
fn adjoint_sweep_is_exact_for_polynomials() {
    for name in triplet_names() {
        let t = load_triplet(name).unwrap();
        let (_, q) = t.order();
        let horizon = 2.0;
        let c: Vec<f64> = (0..q).map(|k| 1.0 - 0.4 * k as f64).collect();
        let prob = Linear::chain(q, vec![1.0; q], c.clone(), horizon);
        let grid = Grid::new(6, horizon).unwrap();
        let u = no_controls(&t, &grid);
        let y = forward_sweep(&prob, &t, &grid, &u, &NewtonOptions::default()).unwrap();
        let p = adjoint_sweep(&prob, &t, &grid, &y, &u).unwrap();
        // p' = -J^T p gives p_i(t) = sum_{k <= i} c_k (T - t)^(i-k) / (i-k)!
        for n in 0..6 {
            for (i, &cn) in t.nodes().iter().enumerate() {
                let x = horizon - grid.stage_time(n, cn);
                for comp in 0..q {
                    let exact: f64 = (0..=comp).map(|k| c[k] * x.powi((comp - k) as i32) / factorial(comp - k)).sum();
                    let got = p.stage(n, i)[comp];
                    assert!((got - exact).abs() <= 1e-10 * (1.0 + exact.abs()), "{name} n {n} i {i} comp {comp}: {got} vs {exact}");
                }
            }
        }
    }
}

#[test]
fn sweeps_are_bit_identical_on_repeat() {
    let prob = HeatProblem::new(12).unwrap();
    let t = load_triplet("AP4o33pfs").unwrap();
    let grid = Grid::new(10, 1.0).unwrap();
    let layout = Arc::new(ControlLayout::new(&t, &grid, 1));
    let u = Controls::from_fn(layout, &t, &grid, |s| vec![s.sin()]);
    let run = || {
        let y = forward_sweep(&prob, &t, &grid, &u, &NewtonOptions::default()).unwrap();
        let p = adjoint_sweep(&prob, &t, &grid, &y, &u).unwrap();
        (y.as_slice().to_vec(), p.as_slice().to_vec())
    };
    let (a, b) = (run(), run());
    assert!(a.0.iter().zip(&b.0).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert!(a.1.iter().zip(&b.1).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn rejects_mismatched_controls() {
    let prob = QuadraticProblem::new();
    let t = load_triplet("AP4o43p").unwrap();
    let grid = Grid::new(5, 1.0).unwrap();
    let other = Grid::new(6, 1.0).unwrap();
    let u = exact_quadratic_controls(&t, &other);
    assert!(forward_sweep(&prob, &t, &grid, &u, &NewtonOptions::default()).is_err());
}
