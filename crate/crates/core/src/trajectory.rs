//! Time grid and per-stage storage.

use std::sync::Arc;

use thiserror::Error;

use crate::catalog::{PeerTriplet, StepRole};

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("a grid needs at least 2 steps (N+1 >= 2), got {0}")]
    TooFewSteps(usize),
    #[error("horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
}

/// Uniform grid with `N+1` steps of size `h = T/(N+1)`; step `n` starts at `t_n = n h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    steps: usize,
    horizon: f64,
    h: f64,
}

impl Grid {
    pub fn new(steps: usize, horizon: f64) -> Result<Self, GridError> {
        if steps < 2 {
            return Err(GridError::TooFewSteps(steps));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(GridError::BadHorizon(horizon));
        }
        Ok(Self { steps, horizon, h: horizon / steps as f64 })
    }

    /// Number of steps, `N+1`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Index of the last step, `N`.
    pub fn last(&self) -> usize {
        self.steps - 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.h
    }

    pub fn stage_time(&self, n: usize, c: f64) -> f64 {
        self.t(n) + c * self.h
    }

    pub fn role(&self, n: usize) -> StepRole {
        if n == 0 {
            StepRole::Start
        } else if n == self.last() {
            StepRole::End
        } else {
            StepRole::Standard
        }
    }
}

/// Dense `(N+1) x s x dim` array of stage vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct StageArray {
    steps: usize,
    stages: usize,
    dim: usize,
    data: Vec<f64>,
}

impl StageArray {
    pub fn zeros(steps: usize, stages: usize, dim: usize) -> Self {
        Self { steps, stages, dim, data: vec![0.0; steps * stages * dim] }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stage(&self, n: usize, i: usize) -> &[f64] {
        let o = (n * self.stages + i) * self.dim;
        &self.data[o..o + self.dim]
    }

    pub fn stage_mut(&mut self, n: usize, i: usize) -> &mut [f64] {
        let o = (n * self.stages + i) * self.dim;
        &mut self.data[o..o + self.dim]
    }

    /// All stages of step `n`, stage-major.
    pub fn step(&self, n: usize) -> &[f64] {
        let len = self.stages * self.dim;
        &self.data[n * len..(n + 1) * len]
    }

    pub fn step_mut(&mut self, n: usize) -> &mut [f64] {
        let len = self.stages * self.dim;
        &mut self.data[n * len..(n + 1) * len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Position of each active stage control inside the flat decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlLayout {
    steps: usize,
    stages: usize,
    dim: usize,
    offsets: Vec<Option<usize>>,
    len: usize,
}

impl ControlLayout {
    /// Stages with a zero column in `K_n` get no control.
    pub fn new(triplet: &PeerTriplet, grid: &Grid, dim: usize) -> Self {
        let s = triplet.stages();
        let masks = [StepRole::Start, StepRole::Standard, StepRole::End].map(|r| triplet.active_stages(r));
        let mut offsets = Vec::with_capacity(grid.steps() * s);
        let mut len = 0;
        for n in 0..grid.steps() {
            let mask = match grid.role(n) {
                StepRole::Start => &masks[0],
                StepRole::Standard => &masks[1],
                StepRole::End => &masks[2],
            };
            for &active in mask {
                if active {
                    offsets.push(Some(len));
                    len += dim;
                } else {
                    offsets.push(None);
                }
            }
        }
        Self { steps: grid.steps(), stages: s, dim, offsets, len }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the flat decision vector.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn offset(&self, n: usize, i: usize) -> Option<usize> {
        self.offsets[n * self.stages + i]
    }

    pub fn is_active(&self, n: usize, i: usize) -> bool {
        self.offset(n, i).is_some()
    }

    /// `(n, i, offset)` for every active stage, in step-major order.
    pub fn active(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.offsets
            .iter()
            .enumerate()
            .filter_map(move |(k, o)| o.map(|o| (k / self.stages, k % self.stages, o)))
    }
}

/// Stage controls on the active stages only.
#[derive(Debug, Clone, PartialEq)]
pub struct Controls {
    layout: Arc<ControlLayout>,
    values: Vec<f64>,
}

impl Controls {
    pub fn zeros(layout: Arc<ControlLayout>) -> Self {
        let len = layout.len();
        Self { layout, values: vec![0.0; len] }
    }

    pub fn from_values(layout: Arc<ControlLayout>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), layout.len(), "control vector length does not match layout");
        Self { layout, values }
    }

    /// Sample `u(t)` at the active stage times.
    pub fn from_fn(
        layout: Arc<ControlLayout>,
        triplet: &PeerTriplet,
        grid: &Grid,
        mut u: impl FnMut(f64) -> Vec<f64>,
    ) -> Self {
        let mut values = vec![0.0; layout.len()];
        let d = layout.dim();
        for (n, i, o) in layout.active() {
            let v = u(grid.stage_time(n, triplet.nodes()[i]));
            values[o..o + d].copy_from_slice(&v[..d]);
        }
        Self { layout, values }
    }

    pub fn layout(&self) -> &Arc<ControlLayout> {
        &self.layout
    }

    pub fn stage(&self, n: usize, i: usize) -> Option<&[f64]> {
        let d = self.layout.dim();
        self.layout.offset(n, i).map(|o| &self.values[o..o + d])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::load_triplet;

    #[test]
    fn grid_times_are_multiples_of_h() {
        let g = Grid::new(40, 1.0).unwrap();
        assert_eq!(g.t(0), 0.0);
        assert_eq!(g.h(), 1.0 / 40.0);
        for n in 0..39 {
            assert_eq!(g.t(n + 1), (n + 1) as f64 * g.h());
        }
        assert_eq!(g.role(0), StepRole::Start);
        assert_eq!(g.role(39), StepRole::End);
        assert_eq!(g.role(7), StepRole::Standard);
        assert_eq!(Grid::new(1, 1.0), Err(GridError::TooFewSteps(1)));
    }

    #[test]
    fn layout_skips_blind_stages() {
        let t = load_triplet("AP4o43p").unwrap();
        let g = Grid::new(5, 1.0).unwrap();
        let l = ControlLayout::new(&t, &g, 1);
        // start and end steps full, three standard steps without stage 3
        assert_eq!(l.len(), 4 + 3 * 3 + 4);
        assert!(!l.is_active(2, 2));
        assert!(l.is_active(0, 2));
        assert!(l.is_active(4, 2));

        let t = load_triplet("AP4o33pfs").unwrap();
        let l = ControlLayout::new(&t, &g, 2);
        assert!(!l.is_active(0, 0));
        assert!(!l.is_active(1, 0));
        assert!(l.is_active(4, 0));
        assert_eq!(l.len(), 2 * (3 + 3 * 3 + 4));
    }
}
