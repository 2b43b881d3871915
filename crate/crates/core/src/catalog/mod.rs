//! Shipped Peer triplets and the coefficients derived from them.

mod data;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{pascal, shift, vandermonde};
use data::{Table, TripletData};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown triplet `{0}` (known: AP4o33pa, AP4o33pfs, AP4o43p)")]
    UnknownTriplet(String),
    #[error("coefficient `{0}` is not a decimal number")]
    BadCoefficient(String),
    #[error("nodes are not distinct (c[{0}] = c[{1}])")]
    ConfluentNodes(usize, usize),
    #[error("matrix `{0}` has shape {1}x{2}, expected {3}x{3}")]
    Shape(&'static str, usize, usize, usize),
    #[error("Vandermonde matrix is singular")]
    SingularVandermonde,
}

/// Which of the three coefficient sets a time step uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StepRole {
    Start,
    Standard,
    End,
}

/// Coefficients of the boundary and standard steps of a Peer triplet.
#[derive(Debug, Clone)]
pub struct PeerTriplet {
    name: String,
    nodes: Vec<f64>,
    node_fractions: Option<Vec<(i64, i64)>>,
    order: (usize, usize),
    fsal: bool,
    pub a0: DMatrix<f64>,
    pub k0: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub an: DMatrix<f64>,
    pub kn: DMatrix<f64>,
    pub rn: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub bn: DMatrix<f64>,
    /// `a = A0 1`
    pub start_weights: DVector<f64>,
    /// `w = AN^T 1`
    pub end_weights: DVector<f64>,
    /// `v = V^{-T} e1`, extracts the adjoint at `t = 0` from the first step.
    pub initial_weights: DVector<f64>,
    source: Option<&'static TripletData>,
}

/// Names of the shipped triplets.
pub fn triplet_names() -> Vec<&'static str> {
    data::ALL.iter().map(|d| d.name).collect()
}

/// Load a shipped triplet by name (case-insensitive).
pub fn load_triplet(name: &str) -> Result<PeerTriplet, CatalogError> {
    let src = data::ALL
        .iter()
        .find(|d| d.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| CatalogError::UnknownTriplet(name.to_string()))?;
    let nodes: Vec<f64> = src.nodes.iter().map(|&(p, q)| p as f64 / q as f64).collect();
    let mut t = PeerTriplet::from_matrices(
        src.name,
        &nodes,
        src.order,
        src.fsal,
        [
            parse_table(&src.a0)?,
            parse_table(&src.k0)?,
            parse_table(&src.a)?,
            parse_table(&src.k)?,
            parse_table(&src.r)?,
            parse_table(&src.an)?,
            parse_table(&src.kn)?,
            parse_table(&src.rn)?,
        ],
    )?;
    t.node_fractions = Some(src.nodes.to_vec());
    t.source = Some(src);
    Ok(t)
}

/// Parse a decimal coefficient string.
pub fn parse_coefficient(s: &str) -> Result<f64, CatalogError> {
    let v: f64 = s.trim().parse().map_err(|_| CatalogError::BadCoefficient(s.to_string()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CatalogError::BadCoefficient(s.to_string()))
    }
}

fn parse_table(t: &Table) -> Result<DMatrix<f64>, CatalogError> {
    let mut m = DMatrix::zeros(4, 4);
    for (i, row) in t.iter().enumerate() {
        for (j, s) in row.iter().enumerate() {
            m[(i, j)] = parse_coefficient(s)?;
        }
    }
    Ok(m)
}

/// `B = (A V - K V Ẽ + R) P V^{-1}` with `s x s` Vandermonde `V`.
pub fn derive_b(
    nodes: &[f64],
    a: &DMatrix<f64>,
    k: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, CatalogError> {
    let s = nodes.len();
    check_distinct(nodes)?;
    let v = vandermonde(nodes, s);
    let vinv = v.clone().try_inverse().ok_or(CatalogError::SingularVandermonde)?;
    Ok((a * &v - k * &v * shift(s) + r) * pascal(s) * vinv)
}

/// `(B, BN)` for the standard and end steps.
pub fn derive_b_matrices(t: &PeerTriplet) -> Result<(DMatrix<f64>, DMatrix<f64>), CatalogError> {
    Ok((derive_b(&t.nodes, &t.a, &t.k, &t.r)?, derive_b(&t.nodes, &t.an, &t.kn, &t.rn)?))
}

fn check_distinct(nodes: &[f64]) -> Result<(), CatalogError> {
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[i] == nodes[j] {
                return Err(CatalogError::ConfluentNodes(i, j));
            }
        }
    }
    Ok(())
}

impl PeerTriplet {
    /// Build a triplet from `[A0, K0, A, K, R, AN, KN, RN]`; `B`, `BN`, `a`, `w`, `v` are derived.
    pub fn from_matrices(
        name: &str,
        nodes: &[f64],
        order: (usize, usize),
        fsal: bool,
        mats: [DMatrix<f64>; 8],
    ) -> Result<Self, CatalogError> {
        let s = nodes.len();
        const NAMES: [&str; 8] = ["A0", "K0", "A", "K", "R", "AN", "KN", "RN"];
        for (m, label) in mats.iter().zip(NAMES) {
            if m.shape() != (s, s) {
                return Err(CatalogError::Shape(label, m.nrows(), m.ncols(), s));
            }
        }
        let [a0, k0, a, k, r, an, kn, rn] = mats;
        check_distinct(nodes)?;
        let v = vandermonde(nodes, s);
        let vinv_t = v.try_inverse().ok_or(CatalogError::SingularVandermonde)?.transpose();
        let b = derive_b(nodes, &a, &k, &r)?;
        let bn = derive_b(nodes, &an, &kn, &rn)?;
        let ones = DVector::from_element(s, 1.0);
        let mut e1 = DVector::zeros(s);
        e1[0] = 1.0;
        Ok(Self {
            name: name.to_string(),
            nodes: nodes.to_vec(),
            node_fractions: None,
            order,
            fsal,
            start_weights: &a0 * &ones,
            end_weights: an.transpose() * &ones,
            initial_weights: vinv_t * e1,
            a0,
            k0,
            a,
            k,
            r,
            an,
            kn,
            rn,
            b,
            bn,
            source: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Exact rational nodes, when known.
    pub fn node_fractions(&self) -> Option<&[(i64, i64)]> {
        self.node_fractions.as_deref()
    }

    /// `(r, q)`: forward and adjoint orders.
    pub fn order(&self) -> (usize, usize) {
        self.order
    }

    pub fn is_fsal(&self) -> bool {
        self.fsal
    }

    pub fn a_of(&self, role: StepRole) -> &DMatrix<f64> {
        match role {
            StepRole::Start => &self.a0,
            StepRole::Standard => &self.a,
            StepRole::End => &self.an,
        }
    }

    pub fn k_of(&self, role: StepRole) -> &DMatrix<f64> {
        match role {
            StepRole::Start => &self.k0,
            StepRole::Standard => &self.k,
            StepRole::End => &self.kn,
        }
    }

    /// `B_n`; the start step has none.
    pub fn b_of(&self, role: StepRole) -> Option<&DMatrix<f64>> {
        match role {
            StepRole::Start => None,
            StepRole::Standard => Some(&self.b),
            StepRole::End => Some(&self.bn),
        }
    }

    /// Stages whose column of `K_n` is nonzero. Inactive stages carry no control
    /// and their right-hand side is never evaluated.
    pub fn active_stages(&self, role: StepRole) -> Vec<bool> {
        let k = self.k_of(role);
        (0..self.stages()).map(|j| k.column(j).iter().any(|v| *v != 0.0)).collect()
    }

    /// Lower triangular `A_n` with diagonal `K_n`: stages decouple.
    pub fn is_stagewise(&self, role: StepRole) -> bool {
        let a = self.a_of(role);
        let k = self.k_of(role);
        let s = self.stages();
        (0..s).all(|i| (i + 1..s).all(|j| a[(i, j)] == 0.0))
            && (0..s).all(|i| (0..s).all(|j| i == j || k[(i, j)] == 0.0))
    }

    /// Serializable view for `verify --dump`.
    pub fn record(&self) -> TripletRecord {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        let exact = self.source.map(|src| ExactCoefficients {
            a0: strings(&src.a0),
            k0: strings(&src.k0),
            a: strings(&src.a),
            k: strings(&src.k),
            r: strings(&src.r),
            an: strings(&src.an),
            kn: strings(&src.kn),
            rn: strings(&src.rn),
        });
        TripletRecord {
            name: self.name.clone(),
            stages: self.stages(),
            order: [self.order.0, self.order.1],
            fsal: self.fsal,
            nodes: self.nodes.clone(),
            node_fractions: self
                .node_fractions
                .as_ref()
                .map(|f| f.iter().map(|(p, q)| format!("{p}/{q}")).collect()),
            exact,
            b: rows(&self.b),
            bn: rows(&self.bn),
            a: self.start_weights.iter().copied().collect(),
            w: self.end_weights.iter().copied().collect(),
            v: self.initial_weights.iter().copied().collect(),
        }
    }
}

fn strings(t: &Table) -> Vec<Vec<String>> {
    t.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactCoefficients {
    pub a0: Vec<Vec<String>>,
    pub k0: Vec<Vec<String>>,
    pub a: Vec<Vec<String>>,
    pub k: Vec<Vec<String>>,
    pub r: Vec<Vec<String>>,
    pub an: Vec<Vec<String>>,
    pub kn: Vec<Vec<String>>,
    pub rn: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TripletRecord {
    pub name: String,
    pub stages: usize,
    pub order: [usize; 2],
    pub fsal: bool,
    pub nodes: Vec<f64>,
    pub node_fractions: Option<Vec<String>>,
    pub exact: Option<ExactCoefficients>,
    pub b: Vec<Vec<f64>>,
    pub bn: Vec<Vec<f64>>,
    pub a: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}
