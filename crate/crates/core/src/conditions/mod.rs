//! Order, compatibility, positivity and stability conditions of a Peer triplet.

pub mod stability;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{
    ell_operator, hankel_deviation, index_diag, max_abs, node_polynomial, pascal, pascal_inverse, shift,
    vandermonde,
};
use crate::catalog::{PeerTriplet, StepRole};
pub use stability::{stability_diagnostics, RaySampling, StabilityDiagnostics};

#[derive(Debug, Error)]
pub enum ConditionError {
    #[error("orders must satisfy 1 <= q <= r <= s, got r = {r}, q = {q}, s = {s}")]
    InvalidOrder { r: usize, q: usize, s: usize },
    #[error("matrix {0} is singular")]
    Singular(&'static str),
}

pub const DEFAULT_TOL: f64 = 1e-9;

/// One named condition with its residual.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorConstants {
    pub err_r: f64,
    pub err_q_dagger: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub triplet: String,
    pub order: [usize; 2],
    pub conditions: BTreeMap<String, Check>,
    /// Reported but not part of the pass/fail verdict.
    pub informational: BTreeMap<String, f64>,
    pub scalars: BTreeMap<String, f64>,
    pub pass: bool,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.conditions.get(name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.conditions.iter().filter(|(_, c)| !c.pass).map(|(k, _)| k.as_str()).collect()
    }
}

fn check_orders(t: &PeerTriplet, r: usize, q: usize) -> Result<(), ConditionError> {
    let s = t.stages();
    if q < 1 || q > r || r > s {
        return Err(ConditionError::InvalidOrder { r, q, s });
    }
    Ok(())
}

fn ones(n: usize) -> DVector<f64> {
    DVector::from_element(n, 1.0)
}

fn e1_row(n: usize) -> RowDVector<f64> {
    let mut e = RowDVector::zeros(n);
    e[0] = 1.0;
    e
}

fn pow(c: &[f64], shift_by: f64, k: i32) -> DVector<f64> {
    DVector::from_iterator(c.len(), c.iter().map(|x| (x + shift_by).powi(k)))
}

/// Forward order residuals `[start, standard, last, end]` at order `r`.
pub fn forward_order_residuals(t: &PeerTriplet, r: usize) -> [(&'static str, f64); 4] {
    let v = vandermonde(t.nodes(), r);
    let e = shift(r);
    let pinv = pascal_inverse(r);
    let start = &t.a0 * &v - &t.start_weights * e1_row(r) - &t.k0 * &v * &e;
    let standard = &t.a * &v - &t.b * &v * &pinv - &t.k * &v * &e;
    let last = &t.an * &v - &t.bn * &v * &pinv - &t.kn * &v * &e;
    let end = t.end_weights.transpose() * &v - ones(r).transpose();
    [
        ("fwd_start", max_abs(&start)),
        ("fwd_standard", max_abs(&standard)),
        ("fwd_last", max_abs(&last)),
        ("fwd_end", end.iter().fold(0.0_f64, |m, x| m.max(x.abs()))),
    ]
}

/// Adjoint order residuals `[start, standard, last, end]` at order `q`.
///
/// The first three are `A_n^T V = B_{n+1}^T V P - K_n^T V Ẽ` for the neighbour pairs
/// (start, standard), (standard, standard) and (standard, end).
pub fn adjoint_order_residuals(t: &PeerTriplet, q: usize) -> [(&'static str, f64); 4] {
    let v = vandermonde(t.nodes(), q);
    let e = shift(q);
    let p = pascal(q);
    let pair = |a: &DMatrix<f64>, b_next: &DMatrix<f64>, k: &DMatrix<f64>| {
        max_abs(&(a.transpose() * &v - b_next.transpose() * &v * &p + k.transpose() * &v * &e))
    };
    let end = t.an.transpose() * &v - &t.end_weights * ones(q).transpose() + t.kn.transpose() * &v * &e;
    [
        ("adj_start", pair(&t.a0, &t.b, &t.k0)),
        ("adj_standard", pair(&t.a, &t.b, &t.k)),
        ("adj_last", pair(&t.a, &t.bn, &t.k)),
        ("adj_end", max_abs(&end)),
    ]
}

fn insert(out: &mut BTreeMap<String, Check>, name: &str, residual: f64, tol: f64) {
    let residual = if residual.is_nan() { f64::INFINITY } else { residual.abs() };
    out.insert(name.to_string(), Check { residual, tol, pass: residual <= tol });
}

pub fn check_order_conditions(
    t: &PeerTriplet,
    r: usize,
    q: usize,
    tol: f64,
) -> Result<BTreeMap<String, Check>, ConditionError> {
    check_orders(t, r, q)?;
    let mut out = BTreeMap::new();
    for (name, res) in forward_order_residuals(t, r).into_iter().chain(adjoint_order_residuals(t, q)) {
        insert(&mut out, name, res, tol);
    }
    Ok(out)
}

/// `(c^{l-1})^T K - 1^T K C^{l-1}` for one `K`, maximised over `l = 2..=q`.
pub fn one_leg_residual(nodes: &[f64], k: &DMatrix<f64>, q: usize) -> f64 {
    let s = nodes.len();
    let mut worst = 0.0_f64;
    for l in 2..=q {
        let p = (l - 1) as i32;
        for j in 0..s {
            let weighted: f64 = (0..s).map(|i| nodes[i].powi(p) * k[(i, j)]).sum();
            let colsum: f64 = (0..s).map(|i| k[(i, j)]).sum();
            worst = worst.max((weighted - colsum * nodes[j].powi(p)).abs());
        }
    }
    worst
}

pub fn check_one_leg(t: &PeerTriplet, q: usize, tol: f64) -> BTreeMap<String, Check> {
    let mut out = BTreeMap::new();
    for (name, role) in [
        ("one_leg_start", StepRole::Start),
        ("one_leg_standard", StepRole::Standard),
        ("one_leg_end", StepRole::End),
    ] {
        insert(&mut out, name, one_leg_residual(t.nodes(), t.k_of(role), q), tol);
    }
    out
}

/// Column sums `1^T K`.
pub fn column_sums(k: &DMatrix<f64>) -> Vec<f64> {
    k.column_iter().map(|c| c.sum()).collect()
}

/// Column sums that enter the positivity and `csq` conditions; the FSAL start step drops column 1.
fn effective_column_sums(t: &PeerTriplet, role: StepRole) -> Vec<f64> {
    let sums = column_sums(t.k_of(role));
    if t.is_fsal() && role == StepRole::Start {
        sums[1..].to_vec()
    } else {
        sums
    }
}

/// Column-sum quotient `max |k| / min k` of one boundary step.
pub fn csq_of(t: &PeerTriplet, role: StepRole) -> f64 {
    let sums = effective_column_sums(t, role);
    let hi = sums.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Larger of the start and end quotients.
pub fn csq(t: &PeerTriplet) -> f64 {
    csq_of(t, StepRole::Start).max(csq_of(t, StepRole::End))
}

pub fn check_positivity_and_csq(t: &PeerTriplet) -> (BTreeMap<String, Check>, f64) {
    let mut out = BTreeMap::new();
    let mut strict = |name: &str, sums: &[f64], allow_zero: bool| {
        let violation = sums
            .iter()
            .map(|&v| if v > 0.0 || (allow_zero && v == 0.0) { 0.0 } else { (-v).max(f64::MIN_POSITIVE) })
            .fold(0.0, f64::max);
        out.insert(name.to_string(), Check { residual: violation, tol: 0.0, pass: violation == 0.0 });
    };
    strict("pos_start", &effective_column_sums(t, StepRole::Start), false);
    strict("pos_standard", &column_sums(&t.k), true);
    strict("pos_end", &effective_column_sums(t, StepRole::End), false);
    if t.is_fsal() {
        let first = column_sums(&t.k0)[0];
        out.insert("fsal_start_column".into(), Check { residual: first.abs(), tol: 0.0, pass: first == 0.0 });
    }
    (out, csq(t))
}

/// Weighted superconvergence residuals `(forward, adjoint)`.
pub fn superconvergence_residuals(t: &PeerTriplet, r: usize, q: usize) -> (f64, f64) {
    let c = t.nodes();
    let fwd = &t.a * pow(c, 0.0, r as i32)
        - &t.b * pow(c, -1.0, r as i32)
        - &t.k * pow(c, 0.0, r as i32 - 1) * r as f64;
    let adj = t.a.transpose() * pow(c, 0.0, q as i32) - t.b.transpose() * pow(c, 1.0, q as i32)
        + &t.k * pow(c, 0.0, q as i32 - 1) * q as f64;
    (fwd.sum(), adj.sum())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn error_constants(t: &PeerTriplet, r: usize, q: usize) -> Result<ErrorConstants, ConditionError> {
    let c = t.nodes();
    let ainv = t.a.clone().try_inverse().ok_or(ConditionError::Singular("A"))?;
    let fwd = pow(c, 0.0, r as i32)
        - &ainv * &t.b * pow(c, -1.0, r as i32)
        - &ainv * &t.k * pow(c, 0.0, r as i32 - 1) * r as f64;
    let ainv_t = ainv.transpose();
    let adj = pow(c, 0.0, q as i32) - &ainv_t * t.b.transpose() * pow(c, 1.0, q as i32)
        + &ainv_t * t.k.transpose() * pow(c, 0.0, q as i32 - 1) * q as f64;
    Ok(ErrorConstants { err_r: fwd.amax() / factorial(r), err_q_dagger: adj.amax() / factorial(q) })
}

/// `Q_{q,r} = V_q^T B V_r P_r^{-1}`.
pub fn q_matrix(t: &PeerTriplet, r: usize, q: usize) -> DMatrix<f64> {
    vandermonde(t.nodes(), q).transpose() * &t.b * vandermonde(t.nodes(), r) * pascal_inverse(r)
}

/// Residuals of the combined conditions `[standard, start, end]` obtained by eliminating `A_n`.
pub fn combined_residuals(t: &PeerTriplet, r: usize, q: usize) -> [(&'static str, f64); 3] {
    let vq = vandermonde(t.nodes(), q);
    let vr = vandermonde(t.nodes(), r);
    let qm = q_matrix(t, r, q);
    let pq_t = pascal(q).transpose();
    let pr = pascal(r);
    let lhs = |k: &DMatrix<f64>| ell_operator(&(vq.transpose() * k * &vr));
    let std = lhs(&t.k) - (&pq_t * &qm * &pr - &qm);
    let start = lhs(&t.k0) - (&pq_t * &qm * &pr - vq.transpose() * &t.start_weights * e1_row(r));
    let end = lhs(&t.kn) - (DMatrix::from_element(q, r, 1.0) - &qm);
    [("combined_standard", max_abs(&std)), ("combined_start", max_abs(&start)), ("combined_end", max_abs(&end))]
}

/// Column sums of `K0` and `KN` predicted from the nodes and `B`, by the general
/// row selection (valid for `q + r >= s + 2`).
pub fn predicted_column_sums(t: &PeerTriplet, r: usize, q: usize) -> Option<(DVector<f64>, DVector<f64>)> {
    let s = t.stages();
    let c = t.nodes();
    let mut rhs0 = RowDVector::zeros(s);
    let mut rhsn = RowDVector::zeros(s);
    for j in 1..=s {
        // exponent j - l + 1 must stay within the r columns of V_r
        let l = 2.max((j + 2).saturating_sub(r));
        if l > q.min(j + 1) {
            return None;
        }
        let e = (j + 1 - l) as i32;
        let lp = (l - 1) as i32;
        rhs0[j - 1] = pow(c, 1.0, lp).dot(&(&t.b * pow(c, 0.0, e)));
        rhsn[j - 1] = 1.0 - pow(c, 0.0, lp).dot(&(&t.b * pow(c, -1.0, e)));
    }
    let vd = vandermonde(c, s) * index_diag(s);
    let vd_inv = vd.try_inverse()?;
    Some(((rhs0 * &vd_inv).transpose(), (rhsn * &vd_inv).transpose()))
}

/// Closed-form column sums for `r = s`.
pub fn predicted_column_sums_full_order(t: &PeerTriplet) -> Option<(DVector<f64>, DVector<f64>)> {
    let s = t.stages();
    let c = t.nodes();
    let v = vandermonde(c, s);
    let vinv = v.clone().try_inverse()?;
    let dinv = index_diag(s).try_inverse()?;
    let k0 = pow(c, 1.0, 1).transpose() * &t.b * &v * &dinv * &vinv;
    let kn = (ones(s).transpose() - pow(c, 0.0, 1).transpose() * &t.b * &v * pascal_inverse(s)) * &dinv * &vinv;
    Some((k0.transpose(), kn.transpose()))
}

/// `psi = -V_s^{-1} c^s`: lower coefficients of the monic node polynomial.
pub fn node_psi(t: &PeerTriplet) -> Option<DVector<f64>> {
    let s = t.stages();
    let vinv = vandermonde(t.nodes(), s).try_inverse()?;
    Some(-(vinv * pow(t.nodes(), 0.0, s as i32)))
}

/// `∫_0^1 prod (t - c_i) dt`.
pub fn node_polynomial_integral(nodes: &[f64]) -> f64 {
    let p = node_polynomial(nodes);
    1.0 / (nodes.len() + 1) as f64 + p.iter().enumerate().map(|(j, a)| a / (j + 1) as f64).sum::<f64>()
}

/// Left-hand sides of the two extra (4,3) conditions: `(Bnot43a/Gnot43a LHS, Gnot43b LHS)`.
pub fn extra_43_terms(t: &PeerTriplet) -> Option<(f64, f64)> {
    let s = t.stages();
    let c = t.nodes();
    let psi = node_psi(t)?;
    let v = vandermonde(c, s);
    let dinv = index_diag(s).try_inverse()?;
    let fifth = 1.0 / (s + 1) as f64;
    let ga = pow(c, 0.0, 1).dot(&(&t.b * &v * pascal_inverse(s) * &dinv * &psi))
        + fifth * pow(c, 0.0, 2).dot(&(&t.b * pow(c, -1.0, 3)));
    let gb = pow(c, 1.0, 1).dot(&(&t.b * &v * &dinv * &psi)) + fifth * pow(c, 1.0, 2).dot(&(&t.b * pow(c, 0.0, 3)));
    Some((ga, gb))
}

/// `V_{q-1}^T (AC - CA - K) V_{s-1}`: vanishes iff `Q_{q,s}` is Hankel.
pub fn commutator_residual(t: &PeerTriplet, q: usize) -> f64 {
    let s = t.stages();
    let cm = DMatrix::from_diagonal(&DVector::from_column_slice(t.nodes()));
    let m = &t.a * &cm - &cm * &t.a - &t.k;
    max_abs(&(vandermonde(t.nodes(), q - 1).transpose() * m * vandermonde(t.nodes(), s - 1)))
}

pub fn check_combined_and_structural(
    t: &PeerTriplet,
    r: usize,
    q: usize,
    tol: f64,
) -> Result<(BTreeMap<String, Check>, BTreeMap<String, f64>), ConditionError> {
    check_orders(t, r, q)?;
    let s = t.stages();
    let mut out = BTreeMap::new();
    let mut info = BTreeMap::new();
    for (name, res) in combined_residuals(t, r, q) {
        insert(&mut out, name, res, tol);
    }
    insert(&mut out, "hankel_q", hankel_deviation(&q_matrix(t, r, q)), tol);
    insert(&mut out, "compat_a", t.start_weights.sum() - 1.0, tol);
    insert(&mut out, "compat_b", (&t.b * ones(s)).sum() - 1.0, tol);
    if q + r >= s + 2 {
        let (k0, kn) = predicted_column_sums(t, r, q).ok_or(ConditionError::Singular("V_s D_s"))?;
        let d0 = k0 - DVector::from_vec(column_sums(&t.k0));
        let dn = kn - DVector::from_vec(column_sums(&t.kn));
        insert(&mut out, "colsum_start", d0.amax(), tol);
        insert(&mut out, "colsum_end", dn.amax(), tol);
    }
    if r == s {
        insert(&mut out, "commutator", commutator_residual(t, q), tol);
    }
    if (r, q) == (4, 3) && s == 4 {
        let k33 = t.k[(2, 2)];
        out.insert("kappa33".into(), Check { residual: k33.abs(), tol: 0.0, pass: k33 == 0.0 });
        let integral = node_polynomial_integral(t.nodes());
        insert(&mut out, "korth43", integral, 1e-12);
        let (ga, gb) = extra_43_terms(t).ok_or(ConditionError::Singular("V_s"))?;
        insert(&mut out, "bnot43a", ga, tol);
        info.insert("gnot43a".into(), (ga - integral).abs());
        info.insert("gnot43b".into(), gb.abs());
    }
    Ok((out, info))
}

/// Run every check with the triplet's own order pair.
pub fn check_triplet(t: &PeerTriplet, tol: f64) -> Result<ConditionReport, ConditionError> {
    let (r, q) = t.order();
    let mut conditions = check_order_conditions(t, r, q, tol)?;
    conditions.extend(check_one_leg(t, q, tol));
    let (pos, csq_value) = check_positivity_and_csq(t);
    conditions.extend(pos);
    let (fwd, adj) = superconvergence_residuals(t, r, q);
    insert(&mut conditions, "super_fwd", fwd, tol);
    insert(&mut conditions, "super_adj", adj, tol);
    let (combined, informational) = check_combined_and_structural(t, r, q, tol)?;
    conditions.extend(combined);

    let errc = error_constants(t, r, q)?;
    let stab = stability_diagnostics(t, &RaySampling::default())?;
    let scalars: BTreeMap<String, f64> = [
        ("alpha_deg", stab.alpha_deg),
        ("lambda2_abs", stab.lambda2_abs),
        ("norm_ainv_b", stab.norm_ainv_b),
        ("err_r", errc.err_r),
        ("err_q_dagger", errc.err_q_dagger),
        ("csq", csq_value),
        ("csq_start", csq_of(t, StepRole::Start)),
        ("csq_end", csq_of(t, StepRole::End)),
        ("mu0", stab.mu0),
        ("mun", stab.mun),
        ("rho_b_a0inv", stab.rho_b_a0inv),
        ("rho_aninv_bn", stab.rho_aninv_bn),
        ("rho_bn_ainv", stab.rho_bn_ainv),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let pass = conditions.values().all(|c| c.pass);
    Ok(ConditionReport {
        triplet: t.name().to_string(),
        order: [r, q],
        conditions,
        informational,
        scalars,
        pass,
    })
}
