//! Scalar problem with a mixed term `y u` in the running cost.
//!
//! minimize `∫_0^1 (1.25 y² + y u + u²)/2 dt` subject to `y' = y/2 + u`, `y(0) = 1`,
//! written in Mayer form with the running cost as second state component.

use crate::catalog::PeerTriplet;
use crate::linsolve::SparseEntries;
use crate::problem::{Bounds, ControlProblem, ProblemError, Reference};
use crate::trajectory::{Grid, StageArray};

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    bounds: Bounds,
}

impl Default for QuadraticProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl QuadraticProblem {
    pub fn new() -> Self {
        Self { bounds: Bounds::unbounded(1) }
    }

    pub fn with_bounds(bounds: Bounds) -> Result<Self, ProblemError> {
        if bounds.dim() != 1 {
            return Err(ProblemError::Parameter("quadratic problem has a scalar control".into()));
        }
        Ok(Self { bounds })
    }
}

/// Optimal state `y1*(t) = cosh(1-t)/cosh(1)`.
pub fn optimal_state(t: f64) -> f64 {
    (1.0 - t).cosh() / 1f64.cosh()
}

/// Optimal control `u*(t) = -(tanh(1-t) + 1/2) cosh(1-t)/cosh(1)`.
pub fn optimal_control(t: f64) -> f64 {
    -((1.0 - t).tanh() + 0.5) * optimal_state(t)
}

/// Optimal adjoint `p1*(t) = -(y1* + 2u*)/2`.
pub fn optimal_adjoint(t: f64) -> f64 {
    -0.5 * (optimal_state(t) + 2.0 * optimal_control(t))
}

/// `(y1*, u*, p1*)` at time `t`.
pub fn quadratic_analytic(t: f64) -> (f64, f64, f64) {
    (optimal_state(t), optimal_control(t), optimal_adjoint(t))
}

/// Running cost integrand along a trajectory.
pub fn integrand(y: f64, u: f64) -> f64 {
    0.5 * (1.25 * y * y + y * u + u * u)
}

impl ControlProblem for QuadraticProblem {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> f64 {
        1.0
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![1.0, 0.0]
    }

    fn rhs(&self, _t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = 0.5 * y[0] + u[0];
        out[1] = integrand(y[0], u[0]);
    }

    fn jac_y(&self, _t: f64, y: &[f64], u: &[f64], jac: &mut SparseEntries) {
        jac.push(0, 0, 0.5);
        jac.push(1, 0, 1.25 * y[0] + 0.5 * u[0]);
    }

    fn jac_u_transpose_mul(&self, _t: f64, y: &[f64], u: &[f64], q: &[f64], out: &mut [f64]) {
        out[0] = q[0] + q[1] * (0.5 * y[0] + u[0]);
    }

    fn terminal_cost(&self, y: &[f64]) -> f64 {
        y[1]
    }

    fn terminal_grad(&self, _y: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = 1.0;
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn control_solve(&self, _t: f64, y: &[f64], q: &[f64], k: f64) -> Result<Vec<f64>, ProblemError> {
        // k (q0 u + q1 (y u + u²)/2): convex in u iff k q1 > 0
        let (lin, quad) = (k * (q[0] + 0.5 * q[1] * y[0]), 0.5 * k * q[1]);
        scalar_quadratic_min(lin, quad, self.bounds.lo[0], self.bounds.hi[0]).map(|u| vec![u])
    }

    fn hessian_uu_diag(&self, _t: f64, _y: &[f64], _u: &[f64], q: &[f64], out: &mut [f64]) -> bool {
        out[0] = q[1];
        true
    }

    fn auxiliary_index(&self) -> Option<usize> {
        Some(1)
    }

    fn reference(&self) -> Option<&dyn Reference> {
        Some(self)
    }
}

/// Minimizer of `lin u + quad u²` over `[lo, hi]`.
pub(crate) fn scalar_quadratic_min(lin: f64, quad: f64, lo: f64, hi: f64) -> Result<f64, ProblemError> {
    if quad > 0.0 {
        return Ok((-lin / (2.0 * quad)).clamp(lo, hi));
    }
    let unbounded = if quad < 0.0 {
        lo.is_infinite() || hi.is_infinite()
    } else {
        (lin > 0.0 && lo.is_infinite()) || (lin < 0.0 && hi.is_infinite())
    };
    if unbounded {
        return Err(ProblemError::NoMinimizer(format!("lin = {lin}, quad = {quad} on [{lo}, {hi}]")));
    }
    if quad == 0.0 && lin == 0.0 {
        return Ok(0.0_f64.clamp(lo, hi));
    }
    let value = |u: f64| lin * u + quad * u * u;
    Ok(if value(lo) <= value(hi) { lo } else { hi })
}

impl Reference for QuadraticProblem {
    fn control(&self, t: f64) -> Vec<f64> {
        vec![optimal_control(t)]
    }

    /// Largest stage error of the first state component.
    fn state_error(&self, triplet: &PeerTriplet, grid: &Grid, y: &StageArray) -> f64 {
        stage_error(triplet, grid, y, optimal_state)
    }

    fn adjoint_error(&self, triplet: &PeerTriplet, grid: &Grid, p: &StageArray) -> f64 {
        stage_error(triplet, grid, p, optimal_adjoint)
    }
}

fn stage_error(triplet: &PeerTriplet, grid: &Grid, x: &StageArray, exact: fn(f64) -> f64) -> f64 {
    let mut err = 0.0_f64;
    for n in 0..grid.steps() {
        for (i, &c) in triplet.nodes().iter().enumerate() {
            err = err.max((x.stage(n, i)[0] - exact(grid.stage_time(n, c))).abs());
        }
    }
    err
}
