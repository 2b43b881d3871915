//! LU factorizations of assembled stage matrices.

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, MatMut};
use nalgebra::DMatrix;

/// Systems up to this size use dense LU.
pub const DENSE_LIMIT: usize = 48;

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct SparseEntries {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseEntries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// `y += M x`.
    pub fn mul_add(&self, x: &[f64], y: &mut [f64]) {
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
    }

    /// `y += M^T x`.
    pub fn mul_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        for &(i, j, v) in &self.entries {
            y[j] += v * x[i];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularMatrix;

pub enum Factorization {
    Dense(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Sparse(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

impl Factorization {
    /// Factor the `n x n` matrix given by `entries`, or its transpose.
    pub fn new(n: usize, entries: &SparseEntries, transpose: bool) -> Result<Self, SingularMatrix> {
        let flip = |&(i, j, v): &(usize, usize, f64)| if transpose { (j, i, v) } else { (i, j, v) };
        if n <= DENSE_LIMIT {
            let mut m = DMatrix::zeros(n, n);
            for e in entries.entries() {
                let (i, j, v) = flip(e);
                m[(i, j)] += v;
            }
            let lu = m.lu();
            if !lu.is_invertible() {
                return Err(SingularMatrix);
            }
            Ok(Self::Dense(lu))
        } else {
            let triplets: Vec<Triplet<usize, usize, f64>> = entries
                .entries()
                .iter()
                .map(|e| {
                    let (i, j, v) = flip(e);
                    Triplet::new(i, j, v)
                })
                .collect();
            let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).map_err(|_| SingularMatrix)?;
            let lu = mat.sp_lu().map_err(|_| SingularMatrix)?;
            Ok(Self::Sparse(lu))
        }
    }

    /// Overwrite `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) -> Result<(), SingularMatrix> {
        match self {
            Self::Dense(lu) => {
                let mut b = nalgebra::DVector::from_column_slice(rhs);
                if !lu.solve_mut(&mut b) {
                    return Err(SingularMatrix);
                }
                rhs.copy_from_slice(b.as_slice());
            }
            Self::Sparse(lu) => {
                let n = rhs.len();
                let mat = MatMut::from_column_major_slice_mut(rhs, n, 1);
                lu.solve_in_place_with_conj(Conj::No, mat);
            }
        }
        if rhs.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SingularMatrix)
        }
    }
}
