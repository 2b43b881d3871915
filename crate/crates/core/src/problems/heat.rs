//! Boundary control of a 1D discrete heat equation with a closed-form optimum.
//!
//! minimize `½‖y(1) − ŷ‖² + ½∫u²` subject to `y' = A y + γ e_m u`, `y(0) = 𝟙`.
//! The running cost lives in component `m` (zero based) with `y_aux' = u²/2`.

use std::f64::consts::PI;

use crate::catalog::PeerTriplet;
use crate::ivp::{initial_adjoint, terminal_state};
use crate::linsolve::SparseEntries;
use crate::problem::{Bounds, ControlProblem, ProblemError, Reference};
use crate::problems::quadratic::scalar_quadratic_min;
use crate::trajectory::{Grid, StageArray};

pub const DELTA: f64 = 1.0 / 75.0;

/// `φ1(z) = (e^z − 1)/z`.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        // 1 + z/2 + z²/6 + ... ; eight terms are plenty for |z| < 1e-2
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 2..=9 {
            term *= z / k as f64;
            sum += term;
        }
        sum
    } else {
        z.exp_m1() / z
    }
}

/// Eigenvalue `λ_k = −4m² sin²(ω_k/(2m))`, `ω_k = (k − ½)π`, `k >= 1`.
pub fn eigenvalue(m: usize, k: usize) -> f64 {
    let mf = m as f64;
    let s = (omega(k) / (2.0 * mf)).sin();
    -4.0 * mf * mf * s * s
}

fn omega(k: usize) -> f64 {
    (k as f64 - 0.5) * PI
}

/// Normalized eigenvector `v^[k]` of the `m x m` heat matrix.
pub fn eigenvector(m: usize, k: usize) -> Vec<f64> {
    let mf = m as f64;
    let w = omega(k);
    let nu = 2.0 / (2.0 * mf + (2.0 * w).sin() / (w / mf).sin()).sqrt();
    (1..=m).map(|i| nu * (w * (2.0 * i as f64 - 1.0) / (2.0 * mf)).cos()).collect()
}

/// Closed-form optimum of the heat benchmark.
#[derive(Debug, Clone)]
pub struct HeatReference {
    pub m: usize,
    pub horizon: f64,
    pub gamma: f64,
    pub lambda: [f64; 2],
    pub v: [Vec<f64>; 2],
    /// `y*(T)`, length `m`.
    pub y_final: Vec<f64>,
    pub target: Vec<f64>,
}

impl HeatReference {
    pub fn new(m: usize, horizon: f64) -> Self {
        let mf = m as f64;
        let gamma = 2.0 * mf * mf;
        let lambda = [eigenvalue(m, 1), eigenvalue(m, 2)];
        let v = [eigenvector(m, 1), eigenvector(m, 2)];
        let mut y_final = vec![0.0; m];
        for k in 1..=m {
            let lk = eigenvalue(m, k);
            let vk = eigenvector(m, k);
            let eta0: f64 = vk.iter().sum();
            let coupling: f64 = (0..2).map(|l| v[l][m - 1] * phi1((lk + lambda[l]) * horizon)).sum();
            let eta = (lk * horizon).exp() * eta0 - gamma * gamma * DELTA * horizon * vk[m - 1] * coupling;
            for (y, vi) in y_final.iter_mut().zip(&vk) {
                *y += eta * vi;
            }
        }
        let target = (0..m).map(|i| y_final[i] - DELTA * (v[0][i] + v[1][i])).collect();
        Self { m, horizon, gamma, lambda, v, y_final, target }
    }

    /// `p*(t) = δ Σ_k e^{λ_k (T−t)} v^[k]`.
    pub fn adjoint(&self, t: f64) -> Vec<f64> {
        let e = self.lambda.map(|l| DELTA * (l * (self.horizon - t)).exp());
        (0..self.m).map(|i| e[0] * self.v[0][i] + e[1] * self.v[1][i]).collect()
    }

    /// `u*(t) = −γ p*_m(t)`.
    pub fn control(&self, t: f64) -> f64 {
        let m = self.m - 1;
        let e = self.lambda.map(|l| DELTA * (l * (self.horizon - t)).exp());
        -self.gamma * (e[0] * self.v[0][m] + e[1] * self.v[1][m])
    }
}

#[derive(Debug, Clone)]
pub struct HeatProblem {
    m: usize,
    scale: f64,
    reference: HeatReference,
    bounds: Bounds,
}

impl HeatProblem {
    pub fn new(m: usize) -> Result<Self, ProblemError> {
        Self::with_bounds(m, Bounds::unbounded(1))
    }

    pub fn with_bounds(m: usize, bounds: Bounds) -> Result<Self, ProblemError> {
        if m < 2 {
            return Err(ProblemError::Parameter(format!("heat problem needs m >= 2, got {m}")));
        }
        if bounds.dim() != 1 {
            return Err(ProblemError::Parameter("heat problem has a scalar control".into()));
        }
        Ok(Self { m, scale: (m * m) as f64, reference: HeatReference::new(m, 1.0), bounds })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn analytic(&self) -> &HeatReference {
        &self.reference
    }

    fn gamma(&self) -> f64 {
        self.reference.gamma
    }
}

impl ControlProblem for HeatProblem {
    fn name(&self) -> &str {
        "heat"
    }

    fn state_dim(&self) -> usize {
        self.m + 1
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> f64 {
        self.reference.horizon
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut y = vec![1.0; self.m + 1];
        y[self.m] = 0.0;
        y
    }

    fn rhs(&self, _t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        let m = self.m;
        let c = self.scale;
        out[0] = c * (y[1] - y[0]);
        for i in 1..m - 1 {
            out[i] = c * (y[i - 1] - 2.0 * y[i] + y[i + 1]);
        }
        out[m - 1] = c * (y[m - 2] - 3.0 * y[m - 1]) + self.gamma() * u[0];
        out[m] = 0.5 * u[0] * u[0];
    }

    fn jac_y(&self, _t: f64, _y: &[f64], _u: &[f64], jac: &mut SparseEntries) {
        let m = self.m;
        let c = self.scale;
        for i in 0..m {
            let diag = match i {
                0 => -1.0,
                _ if i == m - 1 => -3.0,
                _ => -2.0,
            };
            jac.push(i, i, c * diag);
            if i > 0 {
                jac.push(i, i - 1, c);
            }
            if i + 1 < m {
                jac.push(i, i + 1, c);
            }
        }
    }

    fn jac_u_transpose_mul(&self, _t: f64, _y: &[f64], u: &[f64], q: &[f64], out: &mut [f64]) {
        out[0] = self.gamma() * q[self.m - 1] + q[self.m] * u[0];
    }

    fn terminal_cost(&self, y: &[f64]) -> f64 {
        let dist: f64 = (0..self.m).map(|i| (y[i] - self.reference.target[i]).powi(2)).sum();
        0.5 * dist + y[self.m]
    }

    fn terminal_grad(&self, y: &[f64], out: &mut [f64]) {
        for i in 0..self.m {
            out[i] = y[i] - self.reference.target[i];
        }
        out[self.m] = 1.0;
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn control_solve(&self, _t: f64, _y: &[f64], q: &[f64], k: f64) -> Result<Vec<f64>, ProblemError> {
        let lin = k * self.gamma() * q[self.m - 1];
        let quad = 0.5 * k * q[self.m];
        scalar_quadratic_min(lin, quad, self.bounds.lo[0], self.bounds.hi[0]).map(|u| vec![u])
    }

    fn hessian_uu_diag(&self, _t: f64, _y: &[f64], _u: &[f64], q: &[f64], out: &mut [f64]) -> bool {
        out[0] = q[self.m];
        true
    }

    fn auxiliary_index(&self) -> Option<usize> {
        Some(self.m)
    }

    fn reference(&self) -> Option<&dyn Reference> {
        Some(self)
    }
}

impl Reference for HeatProblem {
    fn control(&self, t: f64) -> Vec<f64> {
        vec![self.reference.control(t)]
    }

    /// `‖y*(T) − y_h(T)‖∞` over the spatial components.
    fn state_error(&self, triplet: &PeerTriplet, _grid: &Grid, y: &StageArray) -> f64 {
        let yt = terminal_state(triplet, y);
        max_diff(&yt[..self.m], &self.reference.y_final)
    }

    /// `‖p*(0) − p_h(0)‖∞` over the spatial components.
    fn adjoint_error(&self, triplet: &PeerTriplet, _grid: &Grid, p: &StageArray) -> f64 {
        let p0 = initial_adjoint(triplet, p);
        max_diff(&p0[..self.m], &self.reference.adjoint(0.0))
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |e, (x, y)| e.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::dense_jac_y;

    #[test]
    fn eigenvalue_for_single_point() {
        assert!((eigenvalue(1, 1) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn phi1_limits() {
        assert_eq!(phi1(0.0), 1.0);
        assert!((phi1(1.0) - (1f64.exp() - 1.0)).abs() < 1e-15);
        // both branches agree near the switch
        let z = 0.999_999e-2;
        assert!((phi1(z) - z.exp_m1() / z).abs() < 1e-15);
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let m = 50;
        let vs: Vec<Vec<f64>> = (1..=m).map(|k| eigenvector(m, k)).collect();
        for j in 0..m {
            for k in 0..m {
                let d: f64 = vs[j].iter().zip(&vs[k]).map(|(a, b)| a * b).sum();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((d - expect).abs() <= 1e-10, "({j}, {k}): {d}");
            }
        }
    }

    #[test]
    fn eigenpairs_of_the_assembled_matrix() {
        let prob = HeatProblem::new(12).unwrap();
        let y = prob.initial_state();
        let a = dense_jac_y(&prob, 0.0, &y, &[0.0]);
        let a = a.view((0, 0), (12, 12));
        for k in 1..=12 {
            let v = nalgebra::DVector::from_vec(eigenvector(12, k));
            let r = a * &v - &v * eigenvalue(12, k);
            assert!(r.amax() < 1e-10 * eigenvalue(12, k).abs(), "k = {k}");
        }
    }

    #[test]
    fn adjoint_satisfies_its_equation() {
        // p' = −Aᵀ p for the closed-form adjoint
        let prob = HeatProblem::new(10).unwrap();
        let r = prob.analytic();
        let a = dense_jac_y(&prob, 0.0, &prob.initial_state(), &[0.0]);
        let a = a.view((0, 0), (10, 10)).into_owned();
        let (t, d) = (0.4, 1e-6);
        let dp = (nalgebra::DVector::from_vec(r.adjoint(t + d)) - nalgebra::DVector::from_vec(r.adjoint(t - d))) / (2.0 * d);
        let res = dp + a.transpose() * nalgebra::DVector::from_vec(r.adjoint(t));
        assert!(res.amax() < 1e-6, "{}", res.amax());
        assert!((r.control(t) + r.gamma * r.adjoint(t)[9]).abs() < 1e-14);
    }

    #[test]
    fn control_solve_matches_closed_form_at_exact_adjoint() {
        let prob = HeatProblem::new(10).unwrap();
        let r = prob.analytic();
        let mut q = r.adjoint(0.3);
        q.push(1.0);
        let u = prob.control_solve(0.3, &prob.initial_state(), &q, 1.0).unwrap()[0];
        assert!((u - r.control(0.3)).abs() < 1e-12 * r.control(0.3).abs().max(1.0));
    }
}
