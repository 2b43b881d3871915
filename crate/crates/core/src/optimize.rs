//! Projected limited-memory quasi-Newton minimization over stage controls.

use std::collections::VecDeque;
use std::time::Instant;

use serde::Serialize;

use crate::catalog::PeerTriplet;
use crate::gradient::{evaluate, GradientResult};
use crate::ivp::{NewtonOptions, SweepError};
use crate::problem::ControlProblem;
use crate::trajectory::{Controls, Grid};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub max_iters: usize,
    /// Stop when `‖P(x − ∇f) − x‖∞ <= grad_tol`.
    pub grad_tol: f64,
    /// Number of stored correction pairs; 0 gives projected gradient steps.
    pub memory: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Use the problem's Hessian diagonal as initial inverse Hessian when available.
    pub precondition: bool,
    pub newton: NewtonOptions,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-10,
            memory: 60,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            precondition: true,
            newton: NewtonOptions::default(),
        }
    }
}

/// Relative cost change treated as round-off by the line search.
pub const ROUNDOFF: f64 = 1e-12;

/// Objective value with gradient and an optional positive Hessian diagonal.
#[derive(Debug, Clone)]
pub struct Eval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hessian_diag: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub cost: f64,
    pub pg_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct BoxResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub pg_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub history: Vec<IterRecord>,
    pub message: String,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// `‖P(x − g) − x‖∞`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..x.len() {
        m = m.max(((x[i] - g[i]).clamp(lo[i], hi[i]) - x[i]).abs());
    }
    m
}

fn free_set(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<bool> {
    (0..x.len()).map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))).collect()
}

fn masked_dot(a: &[f64], b: &[f64], mask: &[bool]) -> f64 {
    a.iter().zip(b).zip(mask).filter(|(_, &f)| f).map(|((x, y), _)| x * y).sum()
}

/// Two-loop recursion restricted to the free variables.
fn direction(
    g: &[f64],
    free: &[bool],
    pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    diag: Option<&[f64]>,
) -> Vec<f64> {
    let mut q: Vec<f64> = g.iter().zip(free).map(|(v, &f)| if f { *v } else { 0.0 }).collect();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * masked_dot(s, &q, free);
        for i in 0..q.len() {
            if free[i] {
                q[i] -= a * y[i];
            }
        }
        alphas.push(a);
    }
    match diag {
        Some(d) => {
            // D^{-1} rescaled to the most recent curvature pair
            let gamma = match pairs.back() {
                Some((s, y, _)) => {
                    let ydy: f64 = (0..y.len()).filter(|&i| free[i]).map(|i| y[i] * y[i] / d[i]).sum();
                    masked_dot(s, y, free) / ydy
                }
                None => 1.0,
            };
            q.iter_mut().zip(d).for_each(|(v, di)| *v *= gamma / di);
        }
        None => {
            let gamma = match pairs.back() {
                Some((s, y, _)) => masked_dot(s, y, free) / masked_dot(y, y, free),
                None => 1.0 / q.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0),
            };
            q.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * masked_dot(y, &q, free);
        for i in 0..q.len() {
            if free[i] {
                q[i] += (a - b) * s[i];
            }
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimize over the box `lo <= x <= hi`. Errors at trial points count as failed trials.
pub fn minimize_box<E>(
    mut objective: impl FnMut(&[f64]) -> Result<Eval, E>,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    cfg: &OptimizeConfig,
) -> Result<BoxResult, E> {
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut cur = objective(&x)?;
    let mut evaluations = 1;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut last_free: Option<Vec<bool>> = None;
    let mut history = Vec::new();
    let mut step = 0.0;
    let mut iter = 0;
    loop {
        let pg = projected_gradient_norm(&x, &cur.grad, lo, hi);
        history.push(IterRecord { iter, cost: cur.value, pg_norm: pg, step });
        macro_rules! finish {
            ($converged:expr, $message:expr) => {
                return Ok(BoxResult {
                    x,
                    value: cur.value,
                    pg_norm: pg,
                    iterations: iter,
                    evaluations,
                    converged: $converged,
                    history,
                    message: $message,
                })
            };
        }
        if pg <= cfg.grad_tol {
            finish!(true, "projected gradient below tolerance".into());
        }
        if iter >= cfg.max_iters {
            finish!(false, format!("iteration limit {} reached", cfg.max_iters));
        }
        let free = free_set(&x, &cur.grad, lo, hi);
        if last_free.as_ref() != Some(&free) {
            pairs.clear();
        }
        let diag = cur
            .hessian_diag
            .as_deref()
            .filter(|d| cfg.precondition && d.iter().zip(&free).all(|(v, &f)| !f || (*v > 0.0 && v.is_finite())));
        let mut d = direction(&cur.grad, &free, &pairs, diag);
        let mut slope = masked_dot(&cur.grad, &d, &free);
        if !(slope < 0.0) {
            pairs.clear();
            d = direction(&cur.grad, &free, &pairs, diag);
            slope = masked_dot(&cur.grad, &d, &free);
        }
        // Armijo backtracking along the projected path. Near the optimum the cost decrease
        // drops below round-off; there an unclipped trial is taken if its cost is within
        // noise and the directional derivative satisfies the approximate Wolfe bounds.
        let noise = ROUNDOFF * (1.0 + cur.value.abs());
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let plain: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let mut trial = plain.clone();
            project(&mut trial, lo, hi);
            let decrease: f64 = cur.grad.iter().zip(trial.iter().zip(&x)).map(|(g, (a, b))| g * (a - b)).sum();
            evaluations += 1;
            if let Ok(e) = objective(&trial) {
                if e.value.is_finite() {
                    let armijo = decrease < 0.0 && e.value <= cur.value + cfg.armijo * decrease;
                    let wolfe = trial == plain && e.value <= cur.value + noise && {
                        let dphi = masked_dot(&e.grad, &d, &free);
                        0.9 * slope <= dphi && dphi <= -0.8 * slope
                    };
                    if armijo || wolfe {
                        accepted = Some((trial, e));
                        break;
                    }
                }
            }
            alpha *= cfg.backtrack;
        }
        let Some((trial, e)) = accepted else {
            finish!(false, format!("line search failed after {} backtracks", cfg.max_backtracks));
        };
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = e.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy = masked_dot(&s, &y, &free);
        let yy = masked_dot(&y, &y, &free);
        if cfg.memory > 0 && sy > 1e-12 * yy.sqrt() * masked_dot(&s, &s, &free).sqrt() && sy > 0.0 {
            pairs.push_back((s, y, 1.0 / sy));
            while pairs.len() > cfg.memory {
                pairs.pop_front();
            }
        }
        step = alpha;
        last_free = Some(free);
        x = trial;
        cur = e;
        iter += 1;
    }
}

#[derive(Debug, Clone)]
pub struct ControlOptimum {
    pub controls: Controls,
    pub cost: f64,
    pub pg_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub history: Vec<IterRecord>,
    pub message: String,
    pub wall_time: f64,
    /// Trajectories at the returned controls.
    pub result: GradientResult,
}

/// Minimize the reduced cost over the active stage controls, starting from `u0`.
pub fn minimize(
    prob: &dyn ControlProblem,
    t: &PeerTriplet,
    grid: &Grid,
    u0: &Controls,
    cfg: &OptimizeConfig,
) -> Result<ControlOptimum, SweepError> {
    let start = Instant::now();
    let layout = u0.layout().clone();
    let (lo, hi) = prob.bounds().expand(layout.len());
    let objective = |x: &[f64]| -> Result<Eval, SweepError> {
        let u = Controls::from_values(layout.clone(), x.to_vec());
        let r = evaluate(prob, t, grid, &u, &cfg.newton)?;
        Ok(Eval { value: r.cost, grad: r.grad, hessian_diag: r.hessian_diag })
    };
    let out = minimize_box(objective, u0.values(), &lo, &hi, cfg)?;
    let controls = Controls::from_values(layout, out.x);
    let result = evaluate(prob, t, grid, &controls, &cfg.newton)?;
    Ok(ControlOptimum {
        controls,
        cost: out.value,
        pg_norm: out.pg_norm,
        iterations: out.iterations,
        evaluations: out.evaluations,
        converged: out.converged,
        history: out.history,
        message: out.message,
        wall_time: start.elapsed().as_secs_f64(),
        result,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::catalog::load_triplet;
    use crate::problems::quadratic::{optimal_control, QuadraticProblem};
    use crate::trajectory::ControlLayout;

    fn quadratic<'a>(c: &'a [f64], b: &'a [f64]) -> impl FnMut(&[f64]) -> Result<Eval, ()> + 'a {
        move |x: &[f64]| {
            let grad: Vec<f64> = (0..x.len()).map(|i| c[i] * x[i] - b[i]).collect();
            let value = (0..x.len()).map(|i| 0.5 * c[i] * x[i] * x[i] - b[i] * x[i]).sum();
            Ok(Eval { value, grad, hessian_diag: None })
        }
    }

    #[test]
    fn box_qp_solution_is_clipped_minimizer() {
        let c = [1.0, 4.0, 0.5, 2.0];
        let b = [2.0, -8.0, 0.1, 1.0];
        let lo = [-1.0, -1.0, -1.0, -1.0];
        let hi = [1.0, 1.0, 1.0, 1.0];
        let r = minimize_box(quadratic(&c, &b), &[0.0; 4], &lo, &hi, &OptimizeConfig::default()).unwrap();
        assert!(r.converged, "{}", r.message);
        let expect = [1.0, -1.0, 0.2, 0.5];
        for i in 0..4 {
            assert!((r.x[i] - expect[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_problem_converges_to_analytic_control() {
        let prob = QuadraticProblem::new();
        let t = load_triplet("AP4o43p").unwrap();
        let grid = Grid::new(40, 1.0).unwrap();
        let layout = Arc::new(ControlLayout::new(&t, &grid, 1));
        let r = minimize(&prob, &t, &grid, &Controls::zeros(layout.clone()), &OptimizeConfig::default()).unwrap();
        assert!(r.converged, "{}", r.message);
        let err = layout
            .active()
            .map(|(n, i, o)| (r.controls.values()[o] - optimal_control(grid.stage_time(n, t.nodes()[i]))).abs())
            .fold(0.0, f64::max);
        assert!(err <= 5e-4, "control error {err}");
    }
}
