//! Benchmark problems.

pub mod heat;
pub mod quadratic;
pub mod schlogl;

pub use heat::{HeatProblem, HeatReference};
pub use quadratic::{quadratic_analytic, QuadraticProblem};
pub use schlogl::SchloglProblem;

use crate::catalog::PeerTriplet;
use crate::problem::{Bounds, ControlProblem, ProblemError};

pub const PROBLEM_NAMES: [&str; 3] = ["quadratic", "heat", "schlogl"];

/// Problem selection shared by the CLI and the bindings.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    /// Spatial points for the PDE problems.
    pub m: Option<usize>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    /// Control cost weight of the Schlögl problem.
    pub alpha: Option<f64>,
}

impl ProblemSpec {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), m: None, lo: None, hi: None, alpha: None }
    }

    pub fn default_m(&self) -> usize {
        match self.name.to_ascii_lowercase().as_str() {
            "heat" => 50,
            "schlogl" => 300,
            _ => 1,
        }
    }

    fn bounds(&self) -> Result<Bounds, ProblemError> {
        Bounds::uniform(1, self.lo.unwrap_or(f64::NEG_INFINITY), self.hi.unwrap_or(f64::INFINITY))
    }

    pub fn build(&self) -> Result<Problem, ProblemError> {
        self.build_inner(None)
    }

    /// As `build`, with the Schlögl target taken from the natural solve of `triplet` on the
    /// step size of `nplus1` steps. The other problems do not depend on the grid.
    pub fn build_for(&self, triplet: &PeerTriplet, nplus1: usize) -> Result<Problem, ProblemError> {
        self.build_inner(Some((triplet, nplus1)))
    }

    fn build_inner(&self, run: Option<(&PeerTriplet, usize)>) -> Result<Problem, ProblemError> {
        let bounds = self.bounds()?;
        let m = self.m.unwrap_or_else(|| self.default_m());
        Ok(match self.name.to_ascii_lowercase().as_str() {
            "quadratic" => Problem::Quadratic(QuadraticProblem::with_bounds(bounds)?),
            "heat" => Problem::Heat(HeatProblem::with_bounds(m, bounds)?),
            "schlogl" => {
                let alpha = self.alpha.unwrap_or(schlogl::ALPHA);
                Problem::Schlogl(match run {
                    Some((t, n)) => SchloglProblem::on_grid(m, alpha, bounds, t, n)?,
                    None => SchloglProblem::with_params(m, alpha, bounds)?,
                })
            }
            other => return Err(ProblemError::Parameter(format!("unknown problem '{other}'"))),
        })
    }
}

/// One of the shipped benchmarks.
#[derive(Debug, Clone)]
pub enum Problem {
    Quadratic(QuadraticProblem),
    Heat(HeatProblem),
    Schlogl(SchloglProblem),
}

impl Problem {
    pub fn as_dyn(&self) -> &dyn ControlProblem {
        match self {
            Self::Quadratic(p) => p,
            Self::Heat(p) => p,
            Self::Schlogl(p) => p,
        }
    }

    /// The Schlögl stopping control, the only shipped closed-form initial guess.
    pub fn stopping_control(&self, t: f64) -> Option<Vec<f64>> {
        match self {
            Self::Schlogl(p) => Some(p.stopping_control(t)),
            _ => None,
        }
    }
}
