//! Forward Peer sweep for the state and backward sweep for the discrete adjoint.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::catalog::{PeerTriplet, StepRole};
use crate::linsolve::{Factorization, SparseEntries};
use crate::problem::ControlProblem;
use crate::trajectory::{Controls, Grid, StageArray};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("Newton iteration did not converge in step {step} after {iterations} iterations (|dY| = {update:e})")]
    NewtonFailed { step: usize, iterations: usize, update: f64 },
    #[error("singular stage matrix in step {step}")]
    Singular { step: usize },
    #[error("non-finite right-hand side in step {step}, stage {stage}")]
    Evaluation { step: usize, stage: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop when `|dY| <= tol (1 + |Y|)` or the scaled residual is below `tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 25 }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

struct StageBlock<'a> {
    step: usize,
    /// Stage indices solved together.
    stages: Vec<usize>,
    a: DMatrix<f64>,
    k: DMatrix<f64>,
    times: Vec<f64>,
    controls: Vec<Option<&'a [f64]>>,
}

impl StageBlock<'_> {
    fn active(&self, j: usize) -> bool {
        self.k.column(j).iter().any(|v| *v != 0.0)
    }
}

/// Jacobian of `(A⊗I) Y - h (K⊗I) F(Y)`: blocks `a_ij I - h κ_ij J_j`.
fn assemble_jacobian(
    prob: &dyn ControlProblem,
    block: &StageBlock,
    y: &[f64],
    h: f64,
    scratch: &mut SparseEntries,
    out: &mut SparseEntries,
) {
    let m = prob.state_dim();
    let ns = block.stages.len();
    out.clear();
    for i in 0..ns {
        for j in 0..ns {
            let aij = block.a[(i, j)];
            if aij != 0.0 {
                for p in 0..m {
                    out.push(i * m + p, j * m + p, aij);
                }
            }
        }
    }
    for j in 0..ns {
        if !block.active(j) {
            continue;
        }
        scratch.clear();
        let u = block.controls[j].unwrap_or(&[]);
        prob.jac_y(block.times[j], &y[j * m..(j + 1) * m], u, scratch);
        for i in 0..ns {
            let kij = block.k[(i, j)];
            if kij == 0.0 {
                continue;
            }
            for &(p, q, v) in scratch.entries() {
                out.push(i * m + p, j * m + q, -h * kij * v);
            }
        }
    }
}

/// Solve `(A⊗I) Y - h (K⊗I) F(Y) = rhs` for the stages of one block by full Newton.
fn newton_block(
    prob: &dyn ControlProblem,
    block: &StageBlock,
    rhs: &[f64],
    y: &mut [f64],
    h: f64,
    opts: &NewtonOptions,
) -> Result<usize, SweepError> {
    let m = prob.state_dim();
    let ns = block.stages.len();
    let n = ns * m;
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut ay = vec![0.0; n];
    let mut kf = vec![0.0; n];
    let mut scratch = SparseEntries::new();
    let mut jac = SparseEntries::new();
    let mut previous_update = f64::INFINITY;
    for iter in 0..=opts.max_iter {
        for j in 0..ns {
            if block.active(j) {
                let u = block.controls[j].unwrap_or(&[]);
                prob.rhs(block.times[j], &y[j * m..(j + 1) * m], u, &mut f[j * m..(j + 1) * m]);
                if f[j * m..(j + 1) * m].iter().any(|v| !v.is_finite()) {
                    return Err(SweepError::Evaluation { step: block.step, stage: block.stages[j] });
                }
            }
        }
        for i in 0..ns {
            for p in 0..m {
                let mut a_sum = 0.0;
                let mut k_sum = 0.0;
                for j in 0..ns {
                    a_sum += block.a[(i, j)] * y[j * m + p];
                    if block.k[(i, j)] != 0.0 {
                        k_sum += block.k[(i, j)] * f[j * m + p];
                    }
                }
                ay[i * m + p] = a_sum;
                kf[i * m + p] = h * k_sum;
                g[i * m + p] = a_sum - h * k_sum - rhs[i * m + p];
            }
        }
        let scale = 1.0 + inf_norm(&ay).max(inf_norm(&kf)).max(inf_norm(rhs));
        if inf_norm(&g) <= opts.tol * scale {
            return Ok(iter);
        }
        if iter == opts.max_iter {
            break;
        }
        assemble_jacobian(prob, block, y, h, &mut scratch, &mut jac);
        let lu = Factorization::new(n, &jac, false).map_err(|_| SweepError::Singular { step: block.step })?;
        lu.solve_in_place(&mut g).map_err(|_| SweepError::Singular { step: block.step })?;
        for (yi, di) in y.iter_mut().zip(&g) {
            *yi -= di;
        }
        let update = inf_norm(&g);
        let size = 1.0 + inf_norm(y);
        // accept once the update is negligible, or has stalled at round-off level
        if update <= opts.tol * size || (update <= 1e-8 * size && update >= 0.5 * previous_update) {
            return Ok(iter + 1);
        }
        previous_update = update;
    }
    Err(SweepError::NewtonFailed { step: block.step, iterations: opts.max_iter, update: previous_update })
}

fn check_dims(prob: &dyn ControlProblem, t: &PeerTriplet, grid: &Grid, u: &Controls) -> Result<(), SweepError> {
    let layout = u.layout();
    if layout.steps() != grid.steps() || layout.stages() != t.stages() || layout.dim() != prob.control_dim() {
        return Err(SweepError::Dimension(format!(
            "controls laid out for {} steps x {} stages x {}, problem needs {} x {} x {}",
            layout.steps(),
            layout.stages(),
            layout.dim(),
            grid.steps(),
            t.stages(),
            prob.control_dim()
        )));
    }
    Ok(())
}

fn stage_controls<'a>(u: &'a Controls, n: usize, s: usize) -> Vec<Option<&'a [f64]>> {
    (0..s).map(|i| u.stage(n, i)).collect()
}

/// Forward sweep: `A0 Y0 = a⊗y0 + h K0 F(Y0)`, `A_n Y_n = B_n Y_{n-1} + h K_n F(Y_n)`.
pub fn forward_sweep(
    prob: &dyn ControlProblem,
    t: &PeerTriplet,
    grid: &Grid,
    u: &Controls,
    opts: &NewtonOptions,
) -> Result<StageArray, SweepError> {
    check_dims(prob, t, grid, u)?;
    let s = t.stages();
    let m = prob.state_dim();
    let h = grid.h();
    let y0 = prob.initial_state();
    if y0.len() != m {
        return Err(SweepError::Dimension(format!("initial state has length {}, expected {m}", y0.len())));
    }
    let mut y = StageArray::zeros(grid.steps(), s, m);
    let mut rhs = vec![0.0; s * m];
    let mut guess = vec![0.0; s * m];
    for n in 0..grid.steps() {
        let role = grid.role(n);
        let a = t.a_of(role);
        let k = t.k_of(role);
        match t.b_of(role) {
            None => {
                for i in 0..s {
                    for p in 0..m {
                        rhs[i * m + p] = t.start_weights[i] * y0[p];
                        guess[i * m + p] = y0[p];
                    }
                }
            }
            Some(b) => {
                let prev = y.step(n - 1);
                guess.copy_from_slice(prev);
                for i in 0..s {
                    for p in 0..m {
                        rhs[i * m + p] = (0..s).map(|j| b[(i, j)] * prev[j * m + p]).sum();
                    }
                }
            }
        }
        let controls = stage_controls(u, n, s);
        let times: Vec<f64> = t.nodes().iter().map(|&c| grid.stage_time(n, c)).collect();
        if t.is_stagewise(role) {
            for i in 0..s {
                let mut r = rhs[i * m..(i + 1) * m].to_vec();
                for j in 0..i {
                    let aij = a[(i, j)];
                    if aij != 0.0 {
                        let yj = &guess[j * m..(j + 1) * m];
                        for p in 0..m {
                            r[p] -= aij * yj[p];
                        }
                    }
                }
                let block = StageBlock {
                    step: n,
                    stages: vec![i],
                    a: DMatrix::from_element(1, 1, a[(i, i)]),
                    k: DMatrix::from_element(1, 1, k[(i, i)]),
                    times: vec![times[i]],
                    controls: vec![controls[i]],
                };
                newton_block(prob, &block, &r, &mut guess[i * m..(i + 1) * m], h, opts)?;
            }
        } else {
            let block = StageBlock { step: n, stages: (0..s).collect(), a: a.clone(), k: k.clone(), times, controls };
            newton_block(prob, &block, &rhs, &mut guess, h, opts)?;
        }
        y.step_mut(n).copy_from_slice(&guess);
    }
    Ok(y)
}

/// `y_h(T) = (w^T ⊗ I) Y_N`.
pub fn terminal_state(t: &PeerTriplet, y: &StageArray) -> Vec<f64> {
    weighted_stage_sum(t.end_weights.as_slice(), y, y.steps() - 1)
}

/// `p_h(0) = (v^T ⊗ I) P_0`.
pub fn initial_adjoint(t: &PeerTriplet, p: &StageArray) -> Vec<f64> {
    weighted_stage_sum(t.initial_weights.as_slice(), p, 0)
}

fn weighted_stage_sum(w: &[f64], x: &StageArray, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.dim()];
    for (i, wi) in w.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(x.stage(n, i)) {
            *o += wi * v;
        }
    }
    out
}

/// Backward sweep for the discrete adjoint:
/// `A_N^T P_N = w⊗∇C(y_h(T)) + h J^T (K_N^T⊗I) P_N`, `A_n^T P_n = B_{n+1}^T P_{n+1} + h J^T (K_n^T⊗I) P_n`.
pub fn adjoint_sweep(
    prob: &dyn ControlProblem,
    t: &PeerTriplet,
    grid: &Grid,
    y: &StageArray,
    u: &Controls,
) -> Result<StageArray, SweepError> {
    check_dims(prob, t, grid, u)?;
    let s = t.stages();
    let m = prob.state_dim();
    let h = grid.h();
    let mut pt = vec![0.0; m];
    prob.terminal_grad(&terminal_state(t, y), &mut pt);
    let mut p = StageArray::zeros(grid.steps(), s, m);
    let mut rhs = vec![0.0; s * m];
    let mut scratch = SparseEntries::new();
    let mut jac = SparseEntries::new();
    for n in (0..grid.steps()).rev() {
        let role = grid.role(n);
        if role == StepRole::End {
            for i in 0..s {
                for q in 0..m {
                    rhs[i * m + q] = t.end_weights[i] * pt[q];
                }
            }
        } else {
            let b_next = t.b_of(grid.role(n + 1)).expect("steps after the first have B");
            let next = p.step(n + 1);
            for i in 0..s {
                for q in 0..m {
                    rhs[i * m + q] = (0..s).map(|j| b_next[(j, i)] * next[j * m + q]).sum();
                }
            }
        }
        let a = t.a_of(role);
        let k = t.k_of(role);
        let controls = stage_controls(u, n, s);
        let times: Vec<f64> = t.nodes().iter().map(|&c| grid.stage_time(n, c)).collect();
        let ystep = y.step(n);
        let singular = |_| SweepError::Singular { step: n };
        if t.is_stagewise(role) {
            let mut out = vec![0.0; s * m];
            for i in (0..s).rev() {
                let mut r = rhs[i * m..(i + 1) * m].to_vec();
                for j in i + 1..s {
                    let aji = a[(j, i)];
                    if aji != 0.0 {
                        for q in 0..m {
                            r[q] -= aji * out[j * m + q];
                        }
                    }
                }
                let block = StageBlock {
                    step: n,
                    stages: vec![i],
                    a: DMatrix::from_element(1, 1, a[(i, i)]),
                    k: DMatrix::from_element(1, 1, k[(i, i)]),
                    times: vec![times[i]],
                    controls: vec![controls[i]],
                };
                assemble_jacobian(prob, &block, &ystep[i * m..(i + 1) * m], h, &mut scratch, &mut jac);
                let lu = Factorization::new(m, &jac, true).map_err(singular)?;
                lu.solve_in_place(&mut r).map_err(singular)?;
                out[i * m..(i + 1) * m].copy_from_slice(&r);
            }
            p.step_mut(n).copy_from_slice(&out);
        } else {
            let block = StageBlock { step: n, stages: (0..s).collect(), a: a.clone(), k: k.clone(), times, controls };
            assemble_jacobian(prob, &block, ystep, h, &mut scratch, &mut jac);
            let lu = Factorization::new(s * m, &jac, true).map_err(singular)?;
            lu.solve_in_place(&mut rhs).map_err(singular)?;
            p.step_mut(n).copy_from_slice(&rhs);
        }
    }
    Ok(p)
}
