//! Structured matrices attached to a node vector.

use nalgebra::{DMatrix, DVector};

/// Node vector together with the Vandermonde, Pascal and shift matrices built on it.
#[derive(Debug, Clone)]
pub struct MethodAlgebra {
    nodes: Vec<f64>,
}

impl MethodAlgebra {
    pub fn new(nodes: &[f64]) -> Self {
        Self { nodes: nodes.to_vec() }
    }

    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `V_q = (1, c, ..., c^{q-1})`, an `s x q` matrix.
    pub fn vandermonde(&self, q: usize) -> DMatrix<f64> {
        vandermonde(&self.nodes, q)
    }

    /// `C = diag(c)`.
    pub fn node_diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.nodes))
    }

    /// `D_s = diag(1, ..., s)`.
    pub fn stage_diag(&self) -> DMatrix<f64> {
        index_diag(self.stages())
    }

    /// Componentwise power `c^k` (with `0^0 = 1`).
    pub fn node_power(&self, k: i32) -> DVector<f64> {
        power(&self.nodes, 0.0, k)
    }

    /// Componentwise power `(c + shift)^k`.
    pub fn shifted_power(&self, shift: f64, k: i32) -> DVector<f64> {
        power(&self.nodes, shift, k)
    }
}

fn power(c: &[f64], shift: f64, k: i32) -> DVector<f64> {
    DVector::from_iterator(c.len(), c.iter().map(|&x| (x + shift).powi(k)))
}

pub fn vandermonde(c: &[f64], q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(c.len(), q, |i, j| c[i].powi(j as i32))
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b.round()
}

/// Upper triangular Pascal matrix with entries `binom(j, i)` (0-based).
pub fn pascal(q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(q, q, |i, j| binomial(j, i))
}

/// Inverse of [`pascal`]: entries `(-1)^{i+j} binom(j, i)`.
pub fn pascal_inverse(q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(q, q, |i, j| {
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * binomial(j, i)
    })
}

/// Scaled shift `Ẽ_q` with entries `i` on the superdiagonal (1-based row index).
pub fn shift(q: usize) -> DMatrix<f64> {
    DMatrix::from_fn(q, q, |i, j| if j == i + 1 { (i + 1) as f64 } else { 0.0 })
}

pub fn index_diag(s: usize) -> DMatrix<f64> {
    DMatrix::from_fn(s, s, |i, j| if i == j { (i + 1) as f64 } else { 0.0 })
}

/// Exponential of a nilpotent matrix by its terminating series.
pub fn nilpotent_exp(e: &DMatrix<f64>) -> DMatrix<f64> {
    let n = e.nrows();
    let mut out = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=n {
        term = &term * e / k as f64;
        out += &term;
    }
    out
}

/// `L_{q,r}(X) = Ẽ_q^T X + X Ẽ_r` for a `q x r` matrix `X`.
pub fn ell_operator(x: &DMatrix<f64>) -> DMatrix<f64> {
    shift(x.nrows()).transpose() * x + x * shift(x.ncols())
}

/// Largest spread of entries along any anti-diagonal; zero exactly for Hankel matrices.
pub fn hankel_deviation(x: &DMatrix<f64>) -> f64 {
    let (q, r) = x.shape();
    let mut worst = 0.0_f64;
    for d in 0..q + r - 1 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..q {
            if d >= i && d - i < r {
                let v = x[(i, d - i)];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        worst = worst.max(hi - lo);
    }
    worst
}

/// Monic node polynomial coefficients: `prod (t - c_i) = t^s + sum_j psi_j t^{j}` (ascending, length `s`).
pub fn node_polynomial(c: &[f64]) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    for &ci in c {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, &a) in coeffs.iter().enumerate() {
            next[k + 1] += a;
            next[k] -= ci * a;
        }
        coeffs = next;
    }
    coeffs.pop();
    coeffs
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Row-sum (infinity) norm.
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pascal_small() {
        let p = pascal(3);
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 1.0]);
        assert_eq!(p, expect);
    }

    #[test]
    fn pascal_is_exp_of_shift() {
        for q in 1..7 {
            let diff = nilpotent_exp(&shift(q)) - pascal(q);
            assert!(max_abs(&diff) < 1e-13);
            let id = pascal(q) * pascal_inverse(q);
            assert!(max_abs(&(id - DMatrix::identity(q, q))) < 1e-13);
        }
    }

    #[test]
    fn shift_entries() {
        let e = shift(4);
        assert_eq!(e[(0, 1)], 1.0);
        assert_eq!(e[(1, 2)], 2.0);
        assert_eq!(e[(2, 3)], 3.0);
        assert_eq!(e.iter().filter(|v| **v != 0.0).count(), 3);
    }

    #[test]
    fn vandermonde_derivative_identity() {
        // d/dc V = V Ẽ^T (columns c^j -> j c^{j-1})
        let c = [0.1, 0.4, 0.7];
        let v = vandermonde(&c, 3);
        assert_eq!(v[(2, 2)], 0.7 * 0.7);
        assert_eq!(v[(1, 0)], 1.0);
    }

    #[test]
    fn hankel_detects_deviation() {
        let h = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0, 3.0, 4.0, 5.0]);
        assert_eq!(hankel_deviation(&h), 0.0);
        let mut g = h.clone();
        g[(0, 2)] += 0.5;
        assert_eq!(hankel_deviation(&g), 0.5);
    }

    #[test]
    fn node_polynomial_roots() {
        let c = [0.2, 0.5, 0.9];
        let p = node_polynomial(&c);
        for &x in &c {
            let mut val = x.powi(3);
            for (j, a) in p.iter().enumerate() {
                val += a * x.powi(j as i32);
            }
            assert!(val.abs() < 1e-15);
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(6, 0), 1.0);
    }
}
