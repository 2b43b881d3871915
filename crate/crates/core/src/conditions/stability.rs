//! Linear stability of the standard scheme and solvability of the boundary steps.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use super::ConditionError;
use crate::algebra::norm_inf;
use crate::catalog::PeerTriplet;

/// Sampling of a ray in the stability sector.
#[derive(Debug, Clone, Copy)]
pub struct RaySampling {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
    /// A ray is stable if every sampled spectral radius is below `1 - margin`.
    pub margin: f64,
    /// Bisection stops once the angle bracket is narrower than this (degrees).
    pub resolution_deg: f64,
}

impl Default for RaySampling {
    fn default() -> Self {
        Self { r_min: 1e-4, r_max: 1e8, points: 400, margin: 1e-10, resolution_deg: 0.01 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityDiagnostics {
    pub alpha_deg: f64,
    pub lambda2_abs: f64,
    pub norm_ainv_b: f64,
    pub mu0: f64,
    pub mun: f64,
    pub rho_b_a0inv: f64,
    pub rho_aninv_bn: f64,
    pub rho_bn_ainv: f64,
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    complex_eigenvalues(&to_complex(m))
}

fn complex_eigenvalues(m: &DMatrix<Complex<f64>>) -> Vec<Complex<f64>> {
    let schur = nalgebra::linalg::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    t.diagonal().iter().copied().collect()
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Stability matrix `M(z) = (A - zK)^{-1} B` of the standard scheme.
pub fn stability_matrix(t: &PeerTriplet, z: Complex<f64>) -> Option<DMatrix<Complex<f64>>> {
    let a = to_complex(&t.a);
    let k = to_complex(&t.k);
    let lhs = a - k * z;
    lhs.try_inverse().map(|inv| inv * to_complex(&t.b))
}

fn rho_at(t: &PeerTriplet, z: Complex<f64>) -> f64 {
    match stability_matrix(t, z) {
        Some(m) => complex_eigenvalues(&m).iter().map(|e| e.norm()).fold(0.0, f64::max),
        None => f64::INFINITY,
    }
}

/// Is the ray `arg(-z) = theta` stable at every sampled radius?
pub fn ray_is_stable(t: &PeerTriplet, theta_deg: f64, sampling: &RaySampling) -> bool {
    let theta = theta_deg.to_radians();
    let dir = Complex::new(-theta.cos(), theta.sin());
    let (l0, l1) = (sampling.r_min.ln(), sampling.r_max.ln());
    let n = sampling.points.max(2);
    (0..n).all(|i| {
        let r = (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp();
        rho_at(t, dir * r) < 1.0 - sampling.margin
    })
}

/// Largest `alpha` (degrees) such that the ray at `alpha` is stable, by bisection.
pub fn stability_angle(t: &PeerTriplet, sampling: &RaySampling) -> f64 {
    if !ray_is_stable(t, 0.0, sampling) {
        return 0.0;
    }
    if ray_is_stable(t, 90.0, sampling) {
        return 90.0;
    }
    let (mut lo, mut hi) = (0.0, 90.0);
    while hi - lo > sampling.resolution_deg {
        let mid = 0.5 * (lo + hi);
        if ray_is_stable(t, mid, sampling) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn inverse(m: &DMatrix<f64>, label: &'static str) -> Result<DMatrix<f64>, ConditionError> {
    m.clone().try_inverse().ok_or(ConditionError::Singular(label))
}

/// `min Re lambda(K^{-1} A)`, restricted to the stages `from..s`.
fn min_real_part(a: &DMatrix<f64>, k: &DMatrix<f64>, from: usize, label: &'static str) -> Result<f64, ConditionError> {
    let s = a.nrows();
    let n = s - from;
    let ab = a.view((from, from), (n, n)).into_owned();
    let kb = k.view((from, from), (n, n)).into_owned();
    let m = inverse(&kb, label)? * ab;
    Ok(eigenvalues(&m).iter().map(|z| z.re).fold(f64::INFINITY, f64::min))
}

pub fn stability_diagnostics(t: &PeerTriplet, sampling: &RaySampling) -> Result<StabilityDiagnostics, ConditionError> {
    let ainv = inverse(&t.a, "A")?;
    let ainv_b = &ainv * &t.b;
    let mut moduli: Vec<f64> = eigenvalues(&ainv_b).iter().map(|z| z.norm()).collect();
    moduli.sort_by(|x, y| y.total_cmp(x));
    let start_block = usize::from(t.is_fsal());
    Ok(StabilityDiagnostics {
        alpha_deg: stability_angle(t, sampling),
        lambda2_abs: moduli.get(1).copied().unwrap_or(0.0),
        norm_ainv_b: norm_inf(&ainv_b),
        mu0: min_real_part(&t.a0, &t.k0, start_block, "K0")?,
        mun: min_real_part(&t.an, &t.kn, 0, "KN")?,
        rho_b_a0inv: spectral_radius(&(&t.b * inverse(&t.a0, "A0")?)),
        rho_aninv_bn: spectral_radius(&(inverse(&t.an, "AN")? * &t.bn)),
        rho_bn_ainv: spectral_radius(&(&t.bn * &ainv)),
    })
}
