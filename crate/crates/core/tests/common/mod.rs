#![allow(dead_code)]

use nalgebra::DMatrix;
use peer_ocp::linsolve::SparseEntries;
use peer_ocp::problem::{Bounds, ControlProblem, ProblemError};

/// `y' = J y`, `y(0) = y0`, terminal cost `c^T y`; no control.
pub struct Linear {
    pub j: DMatrix<f64>,
    pub y0: Vec<f64>,
    pub c: Vec<f64>,
    pub horizon: f64,
    bounds: Bounds,
}

impl Linear {
    pub fn new(j: DMatrix<f64>, y0: Vec<f64>, c: Vec<f64>, horizon: f64) -> Self {
        Self { j, y0, c, horizon, bounds: Bounds::unbounded(0) }
    }

    /// Nilpotent chain `y_i' = y_{i+1}` of length `dim`.
    pub fn chain(dim: usize, y0: Vec<f64>, c: Vec<f64>, horizon: f64) -> Self {
        Self::new(DMatrix::from_fn(dim, dim, |i, k| if k == i + 1 { 1.0 } else { 0.0 }), y0, c, horizon)
    }
}

impl ControlProblem for Linear {
    fn name(&self) -> &str {
        "linear"
    }
    fn state_dim(&self) -> usize {
        self.y0.len()
    }
    fn control_dim(&self) -> usize {
        0
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn initial_state(&self) -> Vec<f64> {
        self.y0.clone()
    }
    fn rhs(&self, _t: f64, y: &[f64], _u: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..y.len()).map(|k| self.j[(i, k)] * y[k]).sum();
        }
    }
    fn jac_y(&self, _t: f64, _y: &[f64], _u: &[f64], jac: &mut SparseEntries) {
        for i in 0..self.j.nrows() {
            for k in 0..self.j.ncols() {
                if self.j[(i, k)] != 0.0 {
                    jac.push(i, k, self.j[(i, k)]);
                }
            }
        }
    }
    fn jac_u_transpose_mul(&self, _t: f64, _y: &[f64], _u: &[f64], _q: &[f64], _out: &mut [f64]) {}
    fn terminal_cost(&self, y: &[f64]) -> f64 {
        y.iter().zip(&self.c).map(|(a, b)| a * b).sum()
    }
    fn terminal_grad(&self, _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.c);
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
    fn control_solve(&self, _t: f64, _y: &[f64], _q: &[f64], _k: f64) -> Result<Vec<f64>, ProblemError> {
        Ok(Vec::new())
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// `sum_j x^j / j! * coeffs[offset + j]`: component `offset` of the chain solution.
pub fn chain_value(coeffs: &[f64], offset: usize, x: f64) -> f64 {
    (offset..coeffs.len()).map(|k| x.powi((k - offset) as i32) / factorial(k - offset) * coeffs[k]).sum()
}
