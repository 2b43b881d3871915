//! Stopping a nucleation front of a Schlögl-type reaction-diffusion equation.
//!
//! `Y_t = Y_xx + Y − k Y³ + U` on `(0, L)` with Neumann ends, discretized on the
//! shifted mesh `x_i = (i − ½)Δx`. The tracking cost against `y_Q` and the control
//! cost are accumulated in the auxiliary component `m`, and `C = y_aux(T)`.

use crate::catalog::{load_triplet, PeerTriplet};
use crate::ivp::{forward_sweep, NewtonOptions, SweepError};
use crate::linsolve::SparseEntries;
use crate::problem::{Bounds, ControlProblem, ProblemError};
use crate::trajectory::{ControlLayout, Controls, Grid, StageArray};

pub const LENGTH: f64 = 20.0;
pub const HORIZON: f64 = 5.0;
pub const REACTION: f64 = 1.0 / 3.0;
pub const ALPHA: f64 = 1e-6;
/// Time after which the target profile is frozen.
pub const STOP_TIME: f64 = 2.5;
/// Default scheme of the natural solve: AP4o43p with the step size of 400 steps on `[0, HORIZON]`.
pub const NATURAL_STEPS: usize = 400;
pub const NATURAL_TRIPLET: &str = "AP4o43p";

/// Spatial operators shared by the controlled and the natural problem.
#[derive(Debug, Clone)]
struct Mesh {
    m: usize,
    dx: f64,
}

impl Mesh {
    fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx
    }

    /// `out = Â y` with Neumann rows `(−1, 1)`, `(1, −2, 1)`, `(1, −1)`.
    fn laplacian(&self, y: &[f64], out: &mut [f64]) {
        let m = self.m;
        let c = 1.0 / (self.dx * self.dx);
        out[0] = c * (y[1] - y[0]);
        for i in 1..m - 1 {
            out[i] = c * (y[i - 1] - 2.0 * y[i] + y[i + 1]);
        }
        out[m - 1] = c * (y[m - 2] - y[m - 1]);
    }

    fn push_laplacian(&self, jac: &mut SparseEntries) {
        let m = self.m;
        let c = 1.0 / (self.dx * self.dx);
        for i in 0..m {
            let diag = if i == 0 || i == m - 1 { -1.0 } else { -2.0 };
            jac.push(i, i, c * diag);
            if i > 0 {
                jac.push(i, i - 1, c);
            }
            if i + 1 < m {
                jac.push(i, i + 1, c);
            }
        }
    }

    fn mass_diag(&self, i: usize) -> f64 {
        let w = if i == 0 || i == self.m - 1 { 10.0 } else { 8.0 };
        w * self.dx / 12.0
    }

    fn mass_off(&self) -> f64 {
        2.0 * self.dx / 12.0
    }

    /// `out = M x`.
    fn mass(&self, x: &[f64], out: &mut [f64]) {
        let off = self.mass_off();
        for i in 0..self.m {
            let mut v = self.mass_diag(i) * x[i];
            if i > 0 {
                v += off * x[i - 1];
            }
            if i + 1 < self.m {
                v += off * x[i + 1];
            }
            out[i] = v;
        }
    }

    /// `xᵀ M x`.
    fn mass_norm2(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.m {
            s += self.mass_diag(i) * x[i] * x[i];
            if i + 1 < self.m {
                s += 2.0 * self.mass_off() * x[i] * x[i + 1];
            }
        }
        s
    }

    /// `out_i = (Â y)_i − k y_i³ + y_i`.
    fn reaction_diffusion(&self, y: &[f64], out: &mut [f64]) {
        self.laplacian(y, out);
        for i in 0..self.m {
            out[i] += y[i] - REACTION * y[i].powi(3);
        }
    }

    fn push_reaction_diffusion_jac(&self, y: &[f64], jac: &mut SparseEntries) {
        self.push_laplacian(jac);
        for i in 0..self.m {
            jac.push(i, i, 1.0 - 3.0 * REACTION * y[i] * y[i]);
        }
    }
}

/// Uncontrolled dynamics, used once to build the target.
struct Natural {
    mesh: Mesh,
    horizon: f64,
    y0: Vec<f64>,
    bounds: Bounds,
}

impl ControlProblem for Natural {
    fn name(&self) -> &str {
        "schlogl-natural"
    }
    fn state_dim(&self) -> usize {
        self.mesh.m
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
        self.mesh.reaction_diffusion(y, out);
    }
    fn jac_y(&self, _t: f64, y: &[f64], _u: &[f64], jac: &mut SparseEntries) {
        self.mesh.push_reaction_diffusion_jac(y, jac);
    }
    fn jac_u_transpose_mul(&self, _t: f64, _y: &[f64], _u: &[f64], _q: &[f64], _out: &mut [f64]) {}
    fn terminal_cost(&self, _y: &[f64]) -> f64 {
        0.0
    }
    fn terminal_grad(&self, _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }
    fn control_solve(&self, _t: f64, _y: &[f64], _q: &[f64], _k: f64) -> Result<Vec<f64>, ProblemError> {
        Ok(Vec::new())
    }
}

/// Stage values of the natural solution with cubic-in-time interpolation.
#[derive(Debug, Clone)]
struct NaturalSolution {
    grid: Grid,
    nodes: Vec<f64>,
    y: StageArray,
    snapshot: Vec<f64>,
}

impl NaturalSolution {
    fn interpolate(&self, t: f64, out: &mut [f64]) {
        // stage times of the natural grid take the stage values as they are
        let h = self.grid.h();
        for (i, &c) in self.nodes.iter().enumerate() {
            let k = ((t - c * h) / h).round();
            if k >= 0.0 && (k as usize) < self.grid.steps() && (self.grid.stage_time(k as usize, c) - t).abs() <= 1e-9 * h {
                out.copy_from_slice(self.y.stage(k as usize, i));
                return;
            }
        }
        let n = ((t / h).floor().max(0.0) as usize).min(self.grid.last());
        let theta = (t - self.grid.t(n)) / self.grid.h();
        self.lagrange(n, theta, out);
    }

    /// Stage polynomial of step `n` at `t_n + θh`.
    fn lagrange(&self, n: usize, theta: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &ci) in self.nodes.iter().enumerate() {
            let l: f64 = self
                .nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &cj)| (theta - cj) / (ci - cj))
                .product();
            for (o, v) in out.iter_mut().zip(self.y.stage(n, i)) {
                *o += l * v;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchloglProblem {
    mesh: Mesh,
    alpha: f64,
    y0: Vec<f64>,
    natural: NaturalSolution,
    stop_control: Vec<f64>,
    bounds: Bounds,
}

impl SchloglProblem {
    pub fn new(m: usize) -> Result<Self, ProblemError> {
        Self::with_params(m, ALPHA, Bounds::unbounded(m))
    }

    /// Target from the default natural solve.
    pub fn with_params(m: usize, alpha: f64, bounds: Bounds) -> Result<Self, ProblemError> {
        let triplet = load_triplet(NATURAL_TRIPLET).expect("catalog triplet");
        Self::on_grid(m, alpha, bounds, &triplet, NATURAL_STEPS)
    }

    /// Target from the natural solve of `triplet` with the step size of `nplus1` steps on
    /// `[0, HORIZON]`, i.e. the discrete natural solution of the run that uses this grid.
    /// For odd `nplus1` the step count on `[0, STOP_TIME]` is rounded.
    pub fn on_grid(m: usize, alpha: f64, bounds: Bounds, triplet: &PeerTriplet, nplus1: usize) -> Result<Self, ProblemError> {
        if m < 4 {
            return Err(ProblemError::Parameter(format!("Schlögl problem needs m >= 4, got {m}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ProblemError::Parameter(format!("alpha must be positive, got {alpha}")));
        }
        let bounds = match bounds.dim() {
            1 => Bounds { lo: vec![bounds.lo[0]; m], hi: vec![bounds.hi[0]; m] },
            d if d == m => bounds,
            d => return Err(ProblemError::Parameter(format!("bounds of dimension {d} for {m} controls"))),
        };
        let mesh = Mesh { m, dx: LENGTH / m as f64 };
        let peak = 1.2 * 3f64.sqrt();
        let y0: Vec<f64> = (0..m).map(|i| if (9.0..=11.0).contains(&mesh.x(i)) { peak } else { 0.0 }).collect();
        if nplus1 == 0 {
            return Err(ProblemError::Parameter("natural solve needs at least one step".into()));
        }
        let steps = ((nplus1 as f64 * STOP_TIME / HORIZON).round() as usize).max(1);
        let natural = natural_solution(&mesh, &y0, triplet, steps).map_err(|e| ProblemError::Parameter(format!("natural solve failed: {e}")))?;
        let ys = &natural.snapshot;
        let mut stop_control = vec![0.0; m];
        mesh.laplacian(ys, &mut stop_control);
        for i in 0..m {
            stop_control[i] = REACTION * ys[i].powi(3) - ys[i] - stop_control[i];
        }
        Ok(Self { mesh, alpha, y0, natural, stop_control, bounds })
    }

    pub fn m(&self) -> usize {
        self.mesh.m
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dx(&self) -> f64 {
        self.mesh.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        self.mesh.x(i)
    }

    /// `y_Q(t)`: the natural solution up to the stop time, frozen afterwards.
    pub fn target(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.m];
        self.target_into(t, &mut out);
        out
    }

    fn target_into(&self, t: f64, out: &mut [f64]) {
        if t >= STOP_TIME {
            out.copy_from_slice(&self.natural.snapshot);
        } else {
            self.natural.interpolate(t, out);
        }
    }

    /// `u_stop(t)`: zero up to the stop time, then `k y_Q³ − y_Q − Â y_Q` at the snapshot.
    pub fn stopping_control(&self, t: f64) -> Vec<f64> {
        if t <= STOP_TIME {
            vec![0.0; self.mesh.m]
        } else {
            self.stop_control.clone()
        }
    }

    /// `Â·x` on the spatial components.
    pub fn apply_laplacian(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.m];
        self.mesh.laplacian(x, &mut out);
        out
    }

    /// `M·x` with the spline quadrature mass matrix.
    pub fn apply_mass(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.m];
        self.mesh.mass(x, &mut out);
        out
    }

    /// Minimize `lin·u + ½ c uᵀMu` over the box for `c > 0`.
    fn box_qp(&self, lin: &[f64], c: f64) -> Vec<f64> {
        let m = self.mesh.m;
        let off = c * self.mesh.mass_off();
        let mut u = vec![0.0; m];
        let free = self.bounds.is_unbounded();
        if free {
            // tridiagonal solve of c M u = −lin
            let mut diag: Vec<f64> = (0..m).map(|i| c * self.mesh.mass_diag(i)).collect();
            let mut r: Vec<f64> = lin.iter().map(|v| -v).collect();
            for i in 1..m {
                let w = off / diag[i - 1];
                diag[i] -= w * off;
                r[i] -= w * r[i - 1];
            }
            u[m - 1] = r[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                u[i] = (r[i] - off * u[i + 1]) / diag[i];
            }
            return u;
        }
        // projected Gauss-Seidel; M is strictly diagonally dominant
        for _ in 0..10_000 {
            let mut change = 0.0_f64;
            let mut scale = 0.0_f64;
            for i in 0..m {
                let mut r = -lin[i];
                if i > 0 {
                    r -= off * u[i - 1];
                }
                if i + 1 < m {
                    r -= off * u[i + 1];
                }
                let v = (r / (c * self.mesh.mass_diag(i))).clamp(self.bounds.lo[i], self.bounds.hi[i]);
                change = change.max((v - u[i]).abs());
                scale = scale.max(v.abs());
                u[i] = v;
            }
            if change <= 1e-15 * (1.0 + scale) {
                break;
            }
        }
        u
    }
}

fn natural_solution(mesh: &Mesh, y0: &[f64], triplet: &PeerTriplet, steps: usize) -> Result<NaturalSolution, SweepError> {
    // two steps past the stop time keep every step up to it a standard step, as in the controlled run
    let grid = Grid::new(steps + 2, STOP_TIME * (steps + 2) as f64 / steps as f64).expect("valid grid");
    let prob = Natural { mesh: mesh.clone(), horizon: grid.horizon(), y0: y0.to_vec(), bounds: Bounds::unbounded(0) };
    let layout = std::sync::Arc::new(ControlLayout::new(triplet, &grid, 0));
    let y = forward_sweep(&prob, triplet, &grid, &Controls::zeros(layout), &NewtonOptions::default())?;
    let mut sol = NaturalSolution { grid, nodes: triplet.nodes().to_vec(), y, snapshot: vec![0.0; mesh.m] };
    let mut snap = vec![0.0; mesh.m];
    sol.lagrange(steps - 1, 1.0, &mut snap);
    sol.snapshot = snap;
    Ok(sol)
}

impl ControlProblem for SchloglProblem {
    fn name(&self) -> &str {
        "schlogl"
    }

    fn state_dim(&self) -> usize {
        self.mesh.m + 1
    }

    fn control_dim(&self) -> usize {
        self.mesh.m
    }

    fn horizon(&self) -> f64 {
        HORIZON
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut y = self.y0.clone();
        y.push(0.0);
        y
    }

    fn rhs(&self, t: f64, y: &[f64], u: &[f64], out: &mut [f64]) {
        let m = self.mesh.m;
        self.mesh.reaction_diffusion(&y[..m], &mut out[..m]);
        for i in 0..m {
            out[i] += u[i];
        }
        let mut d = vec![0.0; m];
        self.target_into(t, &mut d);
        for i in 0..m {
            d[i] = y[i] - d[i];
        }
        out[m] = 0.5 * self.mesh.mass_norm2(&d) + 0.5 * self.alpha * self.mesh.mass_norm2(u);
    }

    fn jac_y(&self, t: f64, y: &[f64], _u: &[f64], jac: &mut SparseEntries) {
        let m = self.mesh.m;
        self.mesh.push_reaction_diffusion_jac(&y[..m], jac);
        let mut d = vec![0.0; m];
        self.target_into(t, &mut d);
        for i in 0..m {
            d[i] = y[i] - d[i];
        }
        let mut md = vec![0.0; m];
        self.mesh.mass(&d, &mut md);
        for (j, v) in md.into_iter().enumerate() {
            jac.push(m, j, v);
        }
    }

    fn jac_u_transpose_mul(&self, _t: f64, _y: &[f64], u: &[f64], q: &[f64], out: &mut [f64]) {
        let m = self.mesh.m;
        self.mesh.mass(u, out);
        let c = q[m] * self.alpha;
        for i in 0..m {
            out[i] = q[i] + c * out[i];
        }
    }

    fn terminal_cost(&self, y: &[f64]) -> f64 {
        y[self.mesh.m]
    }

    fn terminal_grad(&self, _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[self.mesh.m] = 1.0;
    }

    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn control_solve(&self, _t: f64, _y: &[f64], q: &[f64], k: f64) -> Result<Vec<f64>, ProblemError> {
        let m = self.mesh.m;
        let c = k * q[m] * self.alpha;
        let lin: Vec<f64> = q[..m].iter().map(|v| k * v).collect();
        if c > 0.0 {
            return Ok(self.box_qp(&lin, c));
        }
        if c == 0.0 && self.bounds.lo.iter().chain(&self.bounds.hi).all(|v| v.is_finite()) {
            return Ok((0..m).map(|i| if lin[i] > 0.0 { self.bounds.lo[i] } else { self.bounds.hi[i] }).collect());
        }
        Err(ProblemError::NoMinimizer(format!("control cost weight {c} is not positive")))
    }

    fn hessian_uu_diag(&self, _t: f64, _y: &[f64], _u: &[f64], q: &[f64], out: &mut [f64]) -> bool {
        let c = q[self.mesh.m] * self.alpha;
        for (i, o) in out.iter_mut().enumerate() {
            *o = c * self.mesh.mass_diag(i);
        }
        true
    }

    fn auxiliary_index(&self) -> Option<usize> {
        Some(self.mesh.m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_rows_reproduce_constants() {
        let prob = SchloglProblem::new(24).unwrap();
        let mx = prob.apply_mass(&vec![1.0; 24]);
        for v in &mx {
            assert!((v - prob.dx()).abs() < 1e-15);
        }
        let ax = prob.apply_laplacian(&vec![1.0; 24]);
        assert!(ax.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn box_qp_is_optimal() {
        let m = 12;
        let prob = SchloglProblem::with_params(m, 0.5, Bounds::uniform(1, -0.3, 0.2).unwrap()).unwrap();
        let mut q: Vec<f64> = (0..m).map(|i| (i as f64 * 0.7).sin()).collect();
        q.push(2.0);
        let u = prob.control_solve(0.0, &prob.initial_state(), &q, 1.0).unwrap();
        assert!(prob.bounds().contains(&u));
        // KKT: gradient points into the box at active bounds and vanishes elsewhere
        let mu = prob.apply_mass(&u);
        for i in 0..m {
            let g = q[i] + q[m] * 0.5 * mu[i];
            if u[i] <= -0.3 {
                assert!(g >= -1e-12);
            } else if u[i] >= 0.2 {
                assert!(g <= 1e-12);
            } else {
                assert!(g.abs() < 1e-12, "i = {i}, g = {g}");
            }
        }
    }

    #[test]
    fn unbounded_control_solve_is_stationary() {
        let m = 10;
        let prob = SchloglProblem::with_params(m, 0.25, Bounds::unbounded(1)).unwrap();
        let mut q: Vec<f64> = (0..m).map(|i| (i as f64).cos()).collect();
        q.push(3.0);
        let u = prob.control_solve(0.0, &prob.initial_state(), &q, 1.0).unwrap();
        let mut g = vec![0.0; m];
        prob.jac_u_transpose_mul(0.0, &prob.initial_state(), &u, &q, &mut g);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn target_is_continuous_and_frozen() {
        let prob = SchloglProblem::new(30).unwrap();
        let a = prob.target(STOP_TIME);
        let b = prob.target(STOP_TIME + 1.0);
        assert_eq!(a, b);
        assert_eq!(prob.stopping_control(1.0), vec![0.0; 30]);
    }

    #[test]
    fn uncontrolled_run_on_the_target_grid_tracks_exactly() {
        let m = 16;
        for name in crate::catalog::triplet_names() {
            let t = load_triplet(name).unwrap();
            let prob = SchloglProblem::on_grid(m, ALPHA, Bounds::unbounded(1), &t, 12).unwrap();
            let grid = Grid::new(12, HORIZON).unwrap();
            let layout = std::sync::Arc::new(ControlLayout::new(&t, &grid, m));
            let y = forward_sweep(&prob, &t, &grid, &Controls::zeros(layout), &NewtonOptions::default()).unwrap();
            for n in 0..grid.steps() {
                for (i, &c) in t.nodes().iter().enumerate() {
                    let s = grid.stage_time(n, c);
                    if s <= STOP_TIME {
                        let d = prob.target(s).iter().zip(y.stage(n, i)).fold(0.0_f64, |e, (a, b)| e.max((a - b).abs()));
                        assert!(d <= 1e-10, "{name} step {n} stage {i}: {d:e}");
                    }
                }
            }
        }
    }
}
