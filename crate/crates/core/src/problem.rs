//! Interface between the integrator and a concrete optimal control problem.

use thiserror::Error;

use crate::catalog::PeerTriplet;
use crate::linsolve::SparseEntries;
use crate::trajectory::{Grid, StageArray};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("no admissible minimizer of the Hamiltonian: {0}")]
    NoMinimizer(String),
    #[error("invalid problem parameter: {0}")]
    Parameter(String),
}

/// Componentwise box `lo <= u <= hi` for a `d`-dimensional control.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(d: usize) -> Self {
        Self { lo: vec![f64::NEG_INFINITY; d], hi: vec![f64::INFINITY; d] }
    }

    pub fn uniform(d: usize, lo: f64, hi: f64) -> Result<Self, ProblemError> {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(ProblemError::Parameter(format!("empty box [{lo}, {hi}]")));
        }
        Ok(Self { lo: vec![lo; d], hi: vec![hi; d] })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo.iter().all(|v| *v == f64::NEG_INFINITY) && self.hi.iter().all(|v| *v == f64::INFINITY)
    }

    pub fn project(&self, u: &mut [f64]) {
        for (k, v) in u.iter_mut().enumerate() {
            let j = k % self.lo.len();
            *v = v.clamp(self.lo[j], self.hi[j]);
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.iter().enumerate().all(|(k, v)| {
            let j = k % self.lo.len();
            *v >= self.lo[j] && *v <= self.hi[j]
        })
    }

    /// Bounds repeated over a flat vector of `len` values.
    pub fn expand(&self, len: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.lo.len();
        ((0..len).map(|k| self.lo[k % d]).collect(), (0..len).map(|k| self.hi[k % d]).collect())
    }
}

/// Optimal control problem in Mayer form: minimize `C(y(T))` subject to
/// `y' = f(t, y, u)`, `y(0) = y0`, `u(t)` in a box.
pub trait ControlProblem: Send + Sync {
    fn name(&self) -> &str;
    /// State dimension `m`.
    fn state_dim(&self) -> usize;
    /// Control dimension `d`.
    fn control_dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn initial_state(&self) -> Vec<f64>;
    fn rhs(&self, t: f64, y: &[f64], u: &[f64], out: &mut [f64]);
    /// Push the entries of `∂f/∂y` into `jac` (row, column, value).
    fn jac_y(&self, t: f64, y: &[f64], u: &[f64], jac: &mut SparseEntries);
    /// `out = (∂f/∂u)^T q`.
    fn jac_u_transpose_mul(&self, t: f64, y: &[f64], u: &[f64], q: &[f64], out: &mut [f64]);
    fn terminal_cost(&self, y: &[f64]) -> f64;
    fn terminal_grad(&self, y: &[f64], out: &mut [f64]);
    fn bounds(&self) -> &Bounds;
    /// Minimizer of `k q^T f(t, y, u)` over the admissible box.
    fn control_solve(&self, t: f64, y: &[f64], q: &[f64], k: f64) -> Result<Vec<f64>, ProblemError>;
    /// Diagonal of `q^T ∂²f/∂u²`, if the problem supplies it.
    fn hessian_uu_diag(&self, _t: f64, _y: &[f64], _u: &[f64], _q: &[f64], _out: &mut [f64]) -> bool {
        false
    }
    /// Index of the auxiliary component carrying the running cost, if any.
    fn auxiliary_index(&self) -> Option<usize> {
        None
    }
    fn reference(&self) -> Option<&dyn Reference> {
        None
    }
}

/// Analytic solution of a benchmark, used to measure discretization errors.
pub trait Reference: Send + Sync {
    fn control(&self, t: f64) -> Vec<f64>;
    /// State error of a forward solution in the benchmark's own norm.
    fn state_error(&self, triplet: &PeerTriplet, grid: &Grid, y: &StageArray) -> f64;
    /// Adjoint error of a backward solution in the benchmark's own norm.
    fn adjoint_error(&self, triplet: &PeerTriplet, grid: &Grid, p: &StageArray) -> f64;
}

/// Dense `∂f/∂u` assembled column by column from transpose products; for tests and diagnostics.
pub fn dense_jac_u(prob: &dyn ControlProblem, t: f64, y: &[f64], u: &[f64]) -> nalgebra::DMatrix<f64> {
    let (m, d) = (prob.state_dim(), prob.control_dim());
    let mut jac = nalgebra::DMatrix::zeros(m, d);
    let mut q = vec![0.0; m];
    let mut row = vec![0.0; d];
    for i in 0..m {
        q.iter_mut().for_each(|v| *v = 0.0);
        q[i] = 1.0;
        prob.jac_u_transpose_mul(t, y, u, &q, &mut row);
        for j in 0..d {
            jac[(i, j)] = row[j];
        }
    }
    jac
}

pub fn dense_jac_y(prob: &dyn ControlProblem, t: f64, y: &[f64], u: &[f64]) -> nalgebra::DMatrix<f64> {
    let mut e = SparseEntries::new();
    prob.jac_y(t, y, u, &mut e);
    e.to_dense(prob.state_dim())
}
