//! Reduced cost, its discrete adjoint gradient, and the post-processed control.

use thiserror::Error;

use crate::catalog::PeerTriplet;
use crate::ivp::{adjoint_sweep, forward_sweep, terminal_state, NewtonOptions, SweepError};
use crate::problem::{ControlProblem, ProblemError};
use crate::trajectory::{Controls, Grid, StageArray};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradientError {
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("stage {stage} of step {step} has a zero column sum in K")]
    ZeroColumnSum { step: usize, stage: usize },
}

#[derive(Debug, Clone)]
pub struct GradientResult {
    pub cost: f64,
    /// Same layout as the controls; blind stages have no entry.
    pub grad: Vec<f64>,
    pub y: StageArray,
    pub p: StageArray,
    pub y_norm: f64,
    pub p_norm: f64,
    /// `h q̃ᵀ ∂²f/∂u²` on the diagonal, when the problem supplies it.
    pub hessian_diag: Option<Vec<f64>>,
}

/// Reduced cost `C((wᵀ⊗I) Y_N)` after a forward sweep.
pub fn cost(
    prob: &dyn ControlProblem,
    t: &PeerTriplet,
    grid: &Grid,
    u: &Controls,
    opts: &NewtonOptions,
) -> Result<f64, SweepError> {
    let y = forward_sweep(prob, t, grid, u, opts)?;
    Ok(prob.terminal_cost(&terminal_state(t, &y)))
}

/// `Σ_j κ_ji P_nj` for every stage `i` of step `n`.
fn weighted_adjoint(t: &PeerTriplet, grid: &Grid, n: usize, p: &StageArray, i: usize, out: &mut [f64]) {
    let k = t.k_of(grid.role(n));
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..t.stages() {
        let kji = k[(j, i)];
        if kji != 0.0 {
            for (o, v) in out.iter_mut().zip(p.stage(n, j)) {
                *o += kji * v;
            }
        }
    }
}

/// Cost and gradient `h (∂f/∂u)ᵀ Σ_j κ_ji P_nj` with respect to every active stage control.
pub fn evaluate(
    prob: &dyn ControlProblem,
    t: &PeerTriplet,
    grid: &Grid,
    u: &Controls,
    opts: &NewtonOptions,
) -> Result<GradientResult, SweepError> {
    let y = forward_sweep(prob, t, grid, u, opts)?;
    let cost = prob.terminal_cost(&terminal_state(t, &y));
    let p = adjoint_sweep(prob, t, grid, &y, u)?;
    let m = prob.state_dim();
    let d = prob.control_dim();
    let h = grid.h();
    let layout = u.layout();
    let mut grad = vec![0.0; layout.len()];
    let mut hess = vec![0.0; layout.len()];
    let mut has_hess = d > 0;
    let mut q = vec![0.0; m];
    for (n, i, o) in layout.active() {
        weighted_adjoint(t, grid, n, &p, i, &mut q);
        let time = grid.stage_time(n, t.nodes()[i]);
        let ui = &u.values()[o..o + d];
        prob.jac_u_transpose_mul(time, y.stage(n, i), ui, &q, &mut grad[o..o + d]);
        if has_hess {
            has_hess = prob.hessian_uu_diag(time, y.stage(n, i), ui, &q, &mut hess[o..o + d]);
        }
    }
    grad.iter_mut().for_each(|g| *g *= h);
    let hessian_diag = has_hess.then(|| hess.into_iter().map(|v| h * v).collect());
    Ok(GradientResult { cost, grad, y_norm: y.max_abs(), p_norm: p.max_abs(), y, p, hessian_diag })
}

/// `Q_ni = (1/k_ni) Σ_j κ_ji P_nj` with `k_ni` the `i`-th column sum of `K_n`.
/// Blind stages (zero column) give `None`.
pub fn q_multipliers(
    t: &PeerTriplet,
    grid: &Grid,
    n: usize,
    p: &StageArray,
) -> Result<Vec<Option<Vec<f64>>>, GradientError> {
    let k = t.k_of(grid.role(n));
    let mut out = Vec::with_capacity(t.stages());
    for i in 0..t.stages() {
        let column = k.column(i);
        if column.iter().all(|v| *v == 0.0) {
            out.push(None);
            continue;
        }
        let kni: f64 = column.sum();
        if kni == 0.0 {
            return Err(GradientError::ZeroColumnSum { step: n, stage: i });
        }
        let mut q = vec![0.0; p.dim()];
        weighted_adjoint(t, grid, n, p, i, &mut q);
        q.iter_mut().for_each(|v| *v /= kni);
        out.push(Some(q));
    }
    Ok(out)
}

/// `U‡_ni = argmin_u H(Y_ni, P_ni, u)` on every stage, blind ones included.
pub fn postprocess_control(
    prob: &dyn ControlProblem,
    t: &PeerTriplet,
    grid: &Grid,
    y: &StageArray,
    p: &StageArray,
) -> Result<StageArray, ProblemError> {
    let d = prob.control_dim();
    let mut out = StageArray::zeros(grid.steps(), t.stages(), d);
    for n in 0..grid.steps() {
        for (i, &c) in t.nodes().iter().enumerate() {
            let u = prob.control_solve(grid.stage_time(n, c), y.stage(n, i), p.stage(n, i), 1.0)?;
            out.stage_mut(n, i).copy_from_slice(&u);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::catalog::{load_triplet, triplet_names};
    use crate::problems::heat::HeatProblem;
    use crate::problems::quadratic::{optimal_adjoint, optimal_control, optimal_state, QuadraticProblem};
    use crate::trajectory::ControlLayout;

    #[test]
    fn diagonal_k_gives_q_equal_p() {
        let t = load_triplet("AP4o33pa").unwrap();
        let grid = Grid::new(6, 1.0).unwrap();
        let mut p = StageArray::zeros(6, 4, 2);
        for i in 0..4 {
            p.stage_mut(2, i).copy_from_slice(&[i as f64, -1.0]);
        }
        // standard steps of this triplet have a diagonal K
        assert!(t.is_stagewise(crate::catalog::StepRole::Standard));
        let q = q_multipliers(&t, &grid, 2, &p).unwrap();
        for i in 0..4 {
            assert_eq!(q[i].as_deref(), Some(p.stage(2, i)));
        }
        let zero = q_multipliers(&t, &grid, 0, &StageArray::zeros(6, 4, 2)).unwrap();
        assert!(zero.iter().flatten().all(|v| v.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn q_multipliers_approach_the_adjoint() {
        // Q_ni on the start step with exact P = p*(t_ni) approximates p*(t_ni)
        let t = load_triplet("AP4o43p").unwrap();
        let errs: Vec<f64> = [20usize, 40, 80]
            .iter()
            .map(|&steps| {
                let grid = Grid::new(steps, 1.0).unwrap();
                let mut p = StageArray::zeros(steps, 4, 1);
                for (i, &c) in t.nodes().iter().enumerate() {
                    p.stage_mut(0, i)[0] = optimal_adjoint(grid.stage_time(0, c));
                }
                let q = q_multipliers(&t, &grid, 0, &p).unwrap();
                (0..4)
                    .filter_map(|i| q[i].as_ref().map(|v| (v[0] - optimal_adjoint(grid.stage_time(0, t.nodes()[i]))).abs()))
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            if w[1] > 1e-13 {
                assert!((w[0] / w[1]).log2() >= 2.9, "{errs:?}");
            }
        }
    }

    #[test]
    fn postprocessed_control_at_exact_solution() {
        let prob = QuadraticProblem::new();
        for name in triplet_names() {
            let t = load_triplet(name).unwrap();
            let grid = Grid::new(7, 1.0).unwrap();
            let mut y = StageArray::zeros(7, 4, 2);
            let mut p = StageArray::zeros(7, 4, 2);
            for n in 0..7 {
                for (i, &c) in t.nodes().iter().enumerate() {
                    let tt = grid.stage_time(n, c);
                    y.stage_mut(n, i).copy_from_slice(&[optimal_state(tt), 0.0]);
                    p.stage_mut(n, i).copy_from_slice(&[optimal_adjoint(tt), 1.0]);
                }
            }
            let u = postprocess_control(&prob, &t, &grid, &y, &p).unwrap();
            for n in 0..7 {
                for (i, &c) in t.nodes().iter().enumerate() {
                    assert!((u.stage(n, i)[0] - optimal_control(grid.stage_time(n, c))).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn heat_postprocessed_control_at_exact_adjoint() {
        let prob = HeatProblem::new(8).unwrap();
        let r = prob.analytic().clone();
        let t = load_triplet("AP4o43p").unwrap();
        let grid = Grid::new(4, 1.0).unwrap();
        let y = StageArray::zeros(4, 4, 9);
        let mut p = StageArray::zeros(4, 4, 9);
        for n in 0..4 {
            for (i, &c) in t.nodes().iter().enumerate() {
                let mut v = r.adjoint(grid.stage_time(n, c));
                v.push(1.0);
                p.stage_mut(n, i).copy_from_slice(&v);
            }
        }
        let u = postprocess_control(&prob, &t, &grid, &y, &p).unwrap();
        for n in 0..4 {
            for (i, &c) in t.nodes().iter().enumerate() {
                let tt = grid.stage_time(n, c);
                let expect = -r.gamma * r.adjoint(tt)[7];
                assert!((u.stage(n, i)[0] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences_on_quadratic() {
        let prob = QuadraticProblem::new();
        let opts = NewtonOptions::default();
        for name in triplet_names() {
            let t = load_triplet(name).unwrap();
            let grid = Grid::new(5, 1.0).unwrap();
            let layout = Arc::new(ControlLayout::new(&t, &grid, 1));
            let u = Controls::from_fn(layout.clone(), &t, &grid, |s| vec![(3.0 * s).sin() - 0.4]);
            let res = evaluate(&prob, &t, &grid, &u, &opts).unwrap();
            for k in 0..layout.len() {
                let step = 1e-5 * (1.0 + u.values()[k].abs());
                let mut plus = u.clone();
                plus.values_mut()[k] += step;
                let mut minus = u.clone();
                minus.values_mut()[k] -= step;
                let fd = (cost(&prob, &t, &grid, &plus, &opts).unwrap() - cost(&prob, &t, &grid, &minus, &opts).unwrap())
                    / (2.0 * step);
                let rel = (fd - res.grad[k]).abs() / res.grad[k].abs().max(1e-8);
                assert!(rel < 1e-6, "{name} k = {k}: fd {fd} vs {}", res.grad[k]);
            }
        }
    }
}
