//! Convergence studies against analytic solutions.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::PeerTriplet;
use crate::gradient::{evaluate, postprocess_control};
use crate::ivp::SweepError;
use crate::optimize::{minimize, OptimizeConfig};
use crate::problem::{ControlProblem, ProblemError};
use crate::trajectory::{ControlLayout, Controls, Grid, GridError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("problem '{0}' has no analytic reference solution")]
    NoReference(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergeMode {
    /// Feed the analytic control and measure the sweeps.
    ExactControl,
    /// Optimize on every grid.
    Optimized,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub triplet: String,
    pub problem: String,
    #[serde(rename = "Nplus1")]
    pub nplus1: usize,
    #[serde(rename = "errU")]
    pub err_u: f64,
    #[serde(rename = "errUpp")]
    pub err_upp: f64,
    #[serde(rename = "errY")]
    pub err_y: f64,
    #[serde(rename = "errP")]
    pub err_p: f64,
    #[serde(rename = "eocU")]
    pub eoc_u: Option<f64>,
    #[serde(rename = "eocUpp")]
    pub eoc_upp: Option<f64>,
    #[serde(rename = "eocY")]
    pub eoc_y: Option<f64>,
    #[serde(rename = "eocP")]
    pub eoc_p: Option<f64>,
    #[serde(skip)]
    pub converged: bool,
    #[serde(skip)]
    pub iterations: usize,
}

pub const CSV_HEADER: &str = "triplet,problem,Nplus1,errU,errUpp,errY,errP,eocU,eocUpp,eocY,eocP";

/// Observed order `log(e_coarse/e_fine) / log(n_fine/n_coarse)`; `None` if an error vanishes.
pub fn eoc(e_coarse: f64, e_fine: f64, n_coarse: usize, n_fine: usize) -> Option<f64> {
    if e_coarse > 0.0 && e_fine > 0.0 && n_fine != n_coarse {
        Some((e_coarse / e_fine).ln() / (n_fine as f64 / n_coarse as f64).ln())
    } else {
        None
    }
}

/// Errors on one grid.
pub fn run_point(
    prob: &dyn ControlProblem,
    t: &PeerTriplet,
    steps: usize,
    mode: ConvergeMode,
    cfg: &OptimizeConfig,
) -> Result<ConvergenceRecord, ExperimentError> {
    let reference = prob.reference().ok_or_else(|| ExperimentError::NoReference(prob.name().to_string()))?;
    let grid = Grid::new(steps, prob.horizon())?;
    let layout = Arc::new(ControlLayout::new(t, &grid, prob.control_dim()));
    let exact = Controls::from_fn(layout.clone(), t, &grid, |s| reference.control(s));
    let (u, y, p, converged, iterations) = match mode {
        ConvergeMode::ExactControl => {
            let r = evaluate(prob, t, &grid, &exact, &cfg.newton)?;
            (exact.clone(), r.y, r.p, true, 0)
        }
        ConvergeMode::Optimized => {
            let r = minimize(prob, t, &grid, &Controls::zeros(layout.clone()), cfg)?;
            (r.controls, r.result.y, r.result.p, r.converged, r.iterations)
        }
    };
    let err_u = u.values().iter().zip(exact.values()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let upp = postprocess_control(prob, t, &grid, &y, &p)?;
    let mut err_upp = 0.0_f64;
    for n in 0..grid.steps() {
        for (i, &c) in t.nodes().iter().enumerate() {
            let ue = reference.control(grid.stage_time(n, c));
            for (a, b) in upp.stage(n, i).iter().zip(&ue) {
                err_upp = err_upp.max((a - b).abs());
            }
        }
    }
    Ok(ConvergenceRecord {
        triplet: t.name().to_string(),
        problem: prob.name().to_string(),
        nplus1: steps,
        err_u,
        err_upp,
        err_y: reference.state_error(t, &grid, &y),
        err_p: reference.adjoint_error(t, &grid, &p),
        eoc_u: None,
        eoc_upp: None,
        eoc_y: None,
        eoc_p: None,
        converged,
        iterations,
    })
}

/// One record per grid, ordered as given, with orders between consecutive rows.
pub fn converge(
    prob: &dyn ControlProblem,
    t: &PeerTriplet,
    grids: &[usize],
    mode: ConvergeMode,
    cfg: &OptimizeConfig,
) -> Result<Vec<ConvergenceRecord>, ExperimentError> {
    if prob.reference().is_none() {
        return Err(ExperimentError::NoReference(prob.name().to_string()));
    }
    let mut records = grids
        .par_iter()
        .map(|&n| run_point(prob, t, n, mode, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    fill_orders(&mut records);
    Ok(records)
}

pub fn fill_orders(records: &mut [ConvergenceRecord]) {
    for k in 1..records.len() {
        let (a, b) = (&records[k - 1], &records[k]);
        let (na, nb) = (a.nplus1, b.nplus1);
        let orders = (
            eoc(a.err_u, b.err_u, na, nb),
            eoc(a.err_upp, b.err_upp, na, nb),
            eoc(a.err_y, b.err_y, na, nb),
            eoc(a.err_p, b.err_p, na, nb),
        );
        let r = &mut records[k];
        (r.eoc_u, r.eoc_upp, r.eoc_y, r.eoc_p) = orders;
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn to_csv(records: &[ConvergenceRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{},{}",
            r.triplet,
            r.problem,
            r.nplus1,
            r.err_u,
            r.err_upp,
            r.err_y,
            r.err_p,
            opt(r.eoc_u),
            opt(r.eoc_upp),
            opt(r.eoc_y),
            opt(r.eoc_p)
        );
    }
    s
}

pub fn to_json(records: &[ConvergenceRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialize")
}

/// Mean of the defined orders in one column.
pub fn mean_order(records: &[ConvergenceRecord], column: impl Fn(&ConvergenceRecord) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = records.iter().filter_map(column).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_uses_the_actual_grid_ratio() {
        assert!((eoc(8.0, 1.0, 10, 20).unwrap() - 3.0).abs() < 1e-14);
        assert!((eoc(27.0, 1.0, 10, 30).unwrap() - 3.0).abs() < 1e-14);
        assert_eq!(eoc(0.0, 1.0, 10, 20), None);
    }
}
