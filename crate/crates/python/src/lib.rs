use std::borrow::Cow;
use std::sync::Arc;

use peer_ocp::catalog::{load_triplet, triplet_names, PeerTriplet, StepRole};
use peer_ocp::conditions::{check_triplet, DEFAULT_TOL};
use peer_ocp::experiment::{converge as run_converge, to_json, ConvergeMode};
use peer_ocp::gradient::{evaluate, postprocess_control};
use peer_ocp::ivp::{initial_adjoint, terminal_state, NewtonOptions};
use peer_ocp::optimize::{minimize, OptimizeConfig};
use peer_ocp::problems::{Problem as CoreProblem, ProblemSpec};
use peer_ocp::trajectory::{ControlLayout, Controls, Grid, StageArray};
use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn from_json<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn stage_rows(a: &StageArray) -> Vec<Vec<Vec<f64>>> {
    (0..a.steps()).map(|n| (0..a.stages()).map(|i| a.stage(n, i).to_vec()).collect()).collect()
}

fn parse_role(role: &str) -> PyResult<StepRole> {
    match role {
        "start" | "0" => Ok(StepRole::Start),
        "standard" => Ok(StepRole::Standard),
        "end" | "N" => Ok(StepRole::End),
        _ => Err(value_err(format!("unknown step role '{role}', expected start, standard or end"))),
    }
}

/// One Peer triplet with its derived matrices.
#[pyclass(name = "Triplet", frozen)]
struct PyTriplet {
    inner: PeerTriplet,
}

#[pymethods]
impl PyTriplet {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        load_triplet(name).map(|inner| Self { inner }).map_err(|e| PyKeyError::new_err(e.to_string()))
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn stages(&self) -> usize {
        self.inner.stages()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn order(&self) -> (usize, usize) {
        self.inner.order()
    }

    #[getter]
    fn fsal(&self) -> bool {
        self.inner.is_fsal()
    }

    /// Matrix `kind` in {"A", "K", "B"} of the step `role` in {"start", "standard", "end"}.
    fn matrix(&self, kind: &str, role: &str) -> PyResult<Vec<Vec<f64>>> {
        let role = parse_role(role)?;
        match kind {
            "A" => Ok(rows(self.inner.a_of(role))),
            "K" => Ok(rows(self.inner.k_of(role))),
            "B" => self.inner.b_of(role).map(rows).ok_or_else(|| value_err("the start step has no B matrix")),
            _ => Err(value_err(format!("unknown matrix '{kind}', expected A, K or B"))),
        }
    }

    /// Stages with a nonzero K column on a step.
    fn active_stages(&self, role: &str) -> PyResult<Vec<bool>> {
        Ok(self.inner.active_stages(parse_role(role)?))
    }

    /// Full record (nodes, exact coefficients, derived B, BN, a, w, v) as a dict.
    fn record<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        from_json(py, &serde_json::to_string(&self.inner.record()).map_err(runtime_err)?)
    }

    /// Condition residuals and diagnostics as a dict.
    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn verify<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let report = check_triplet(&self.inner, tol).map_err(value_err)?;
        from_json(py, &serde_json::to_string(&report).map_err(runtime_err)?)
    }

    fn __repr__(&self) -> String {
        let (r, q) = self.inner.order();
        format!("Triplet('{}', r={r}, q={q})", self.inner.name())
    }
}

/// A benchmark control problem.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    spec: ProblemSpec,
    inner: CoreProblem,
}

impl PyProblem {
    /// The Schlögl target depends on the run's triplet and grid; the others are reused.
    fn for_run(&self, t: &PeerTriplet, nsteps: usize) -> PyResult<Cow<'_, CoreProblem>> {
        match self.inner {
            CoreProblem::Schlogl(_) => self.spec.build_for(t, nsteps).map(Cow::Owned).map_err(value_err),
            _ => Ok(Cow::Borrowed(&self.inner)),
        }
    }
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (name, m = None, lo = None, hi = None, alpha = None))]
    fn new(name: &str, m: Option<usize>, lo: Option<f64>, hi: Option<f64>, alpha: Option<f64>) -> PyResult<Self> {
        let spec = ProblemSpec { name: name.to_string(), m, lo, hi, alpha };
        let inner = spec.build().map_err(value_err)?;
        Ok(Self { spec, inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.as_dyn().name().to_string()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.as_dyn().state_dim()
    }

    #[getter]
    fn control_dim(&self) -> usize {
        self.inner.as_dyn().control_dim()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.as_dyn().horizon()
    }

    #[getter]
    fn has_reference(&self) -> bool {
        self.inner.as_dyn().reference().is_some()
    }

    /// Analytic optimal control at time `t`, if the problem has one.
    fn reference_control(&self, t: f64) -> Option<Vec<f64>> {
        self.inner.as_dyn().reference().map(|r| r.control(t))
    }

    fn __repr__(&self) -> String {
        format!("Problem('{}', state_dim={})", self.name(), self.state_dim())
    }
}

fn setup(
    triplet: &PyTriplet,
    problem: &PyProblem,
    nsteps: usize,
    controls: Option<Vec<f64>>,
) -> PyResult<(Grid, Controls)> {
    let prob = problem.inner.as_dyn();
    let grid = Grid::new(nsteps, prob.horizon()).map_err(value_err)?;
    let layout = Arc::new(ControlLayout::new(&triplet.inner, &grid, prob.control_dim()));
    let u = match controls {
        None => Controls::zeros(layout),
        Some(v) if v.len() == layout.len() => Controls::from_values(layout, v),
        Some(v) => return Err(value_err(format!("{} control values given, layout needs {}", v.len(), layout.len()))),
    };
    Ok((grid, u))
}

/// Number of control unknowns (active stages times control dimension).
#[pyfunction]
fn control_count(triplet: &PyTriplet, problem: &PyProblem, nsteps: usize) -> PyResult<usize> {
    Ok(setup(triplet, problem, nsteps, None)?.1.values().len())
}

/// Forward and adjoint sweeps; returns cost, gradient and stage trajectories.
#[pyfunction]
#[pyo3(signature = (triplet, problem, nsteps, controls = None, tol = 1e-12))]
fn solve<'py>(
    py: Python<'py>,
    triplet: &PyTriplet,
    problem: &PyProblem,
    nsteps: usize,
    controls: Option<Vec<f64>>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (grid, u) = setup(triplet, problem, nsteps, controls)?;
    let run = problem.for_run(&triplet.inner, nsteps)?;
    let prob = run.as_dyn();
    let t = &triplet.inner;
    let opts = NewtonOptions { tol, ..NewtonOptions::default() };
    let r = py.detach(|| evaluate(prob, t, &grid, &u, &opts)).map_err(runtime_err)?;
    let out = PyDict::new(py);
    out.set_item("cost", r.cost)?;
    out.set_item("grad", r.grad.clone())?;
    out.set_item("y_final", terminal_state(t, &r.y))?;
    out.set_item("p_initial", initial_adjoint(t, &r.p))?;
    out.set_item("y", stage_rows(&r.y))?;
    out.set_item("p", stage_rows(&r.p))?;
    let upp = postprocess_control(prob, t, &grid, &r.y, &r.p).map_err(runtime_err)?;
    out.set_item("u_post", stage_rows(&upp))?;
    Ok(out)
}

/// Minimize the reduced cost from `controls` (zeros by default).
#[pyfunction]
#[pyo3(signature = (triplet, problem, nsteps, controls = None, max_iters = 500, grad_tol = 1e-10, memory = 60))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    triplet: &PyTriplet,
    problem: &PyProblem,
    nsteps: usize,
    controls: Option<Vec<f64>>,
    max_iters: usize,
    grad_tol: f64,
    memory: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let (grid, u0) = setup(triplet, problem, nsteps, controls)?;
    let run = problem.for_run(&triplet.inner, nsteps)?;
    let prob = run.as_dyn();
    let cfg = OptimizeConfig { max_iters, grad_tol, memory, ..OptimizeConfig::default() };
    let r = py.detach(|| minimize(prob, &triplet.inner, &grid, &u0, &cfg)).map_err(runtime_err)?;
    let out = PyDict::new(py);
    out.set_item("controls", r.controls.values().to_vec())?;
    out.set_item("cost", r.cost)?;
    out.set_item("pg_norm", r.pg_norm)?;
    out.set_item("iterations", r.iterations)?;
    out.set_item("evaluations", r.evaluations)?;
    out.set_item("converged", r.converged)?;
    out.set_item("message", r.message)?;
    out.set_item("y_final", terminal_state(&triplet.inner, &r.result.y))?;
    Ok(out)
}

/// Error and order table over `grids`; `mode` is "optimized" or "exact".
#[pyfunction]
#[pyo3(signature = (triplet, problem, grids, mode = "optimized"))]
fn converge<'py>(
    py: Python<'py>,
    triplet: &PyTriplet,
    problem: &PyProblem,
    grids: Vec<usize>,
    mode: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = match mode {
        "optimized" => ConvergeMode::Optimized,
        "exact" => ConvergeMode::ExactControl,
        _ => return Err(value_err(format!("unknown mode '{mode}', expected optimized or exact"))),
    };
    let prob = problem.inner.as_dyn();
    let cfg = OptimizeConfig::default();
    let records = py.detach(|| run_converge(prob, &triplet.inner, &grids, mode, &cfg)).map_err(runtime_err)?;
    from_json(py, &to_json(&records))
}

#[pyfunction]
fn triplets() -> Vec<&'static str> {
    triplet_names()
}

#[pymodule]
fn peerocp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTriplet>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(triplets, m)?)?;
    m.add_function(wrap_pyfunction!(control_count, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    Ok(())
}
