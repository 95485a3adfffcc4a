//! QP data for the conditional-probability problem.
//!
//! Minimizing `(Y − KA)ᵀV(Y − KA) + γAᵀKA` subject to `0 ≤ KA ≤ 1` and
//! `1ᵀKA = Σy` is, after dropping the constant `YᵀVY`,
//!
//! ```text
//! minimize   Aᵀ P A + 2 qᵀ A,      P = KVK + γK,  q = −KVY
//! subject to G A ≤ h,              G = [K; −K],   h = (1, …, 1, 0, …, 0)
//!            a_eqᵀ A = b_eq,       a_eq = K·1,    b_eq = Σ y
//! ```
//!
//! Every QP in this crate uses that objective convention (no ½ factor).

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::numerics::{dot, sym_eigen, Matrix};

/// Symmetric PSD weighting matrix of the residual term.
#[derive(Debug, Clone, PartialEq)]
pub struct VMatrix {
    v: Matrix,
}

impl VMatrix {
    pub const PSD_TOLERANCE: f64 = 1e-9;

    pub fn identity(n: usize) -> Self {
        VMatrix {
            v: Matrix::identity(n),
        }
    }

    /// Validates exact symmetry and `λ_min ≥ −1e−9`.
    pub fn new(v: Matrix) -> Result<Self> {
        if !v.is_symmetric() {
            return Err(Error::contract("V matrix must be square and symmetric"));
        }
        if v.rows() == 0 {
            return Err(Error::contract("V matrix must be non-empty"));
        }
        let eig = sym_eigen(&v)?;
        let min = *eig.values.last().unwrap();
        if min < -Self::PSD_TOLERANCE {
            return Err(Error::contract(format!(
                "V matrix is not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(VMatrix { v })
    }

    /// Read an `ℓ×ℓ` comma-separated numeric grid (no header).
    pub fn load_csv(path: &Path) -> Result<Self> {
        let parse_err = |line: u64, reason: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        };
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in reader.records() {
            let record = record
                .map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| parse_err(line, format!("not a finite number: `{f}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(parse_err(
                        line,
                        format!("expected {} fields, found {}", first.len(), row.len()),
                    ));
                }
            }
            rows.push(row);
        }
        if rows.is_empty() || rows.len() != rows[0].len() {
            return Err(parse_err(
                rows.len() as u64,
                format!(
                    "V matrix must be square, got {}x{}",
                    rows.len(),
                    rows.first().map_or(0, |r| r.len())
                ),
            ));
        }
        Self::new(Matrix::from_rows(&rows)?)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.v.rows()
    }
}

/// A single linear equality `aᵀx = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equality {
    pub a: Vec<f64>,
    pub b: f64,
}

/// `minimize xᵀPx + 2qᵀx  s.t.  Gx ≤ h,  aᵀx = b`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub p: Matrix,
    pub q: Vec<f64>,
    pub g: Matrix,
    pub h: Vec<f64>,
    pub equality: Option<Equality>,
    /// Ridge weight γ when assembled from a Gram matrix.
    pub gamma: Option<f64>,
    /// Gram matrix the problem was assembled from, for diagnostics.
    pub source_gram: Option<Arc<GramMatrix>>,
}

impl QpProblem {
    /// General QP; `p` must be exactly symmetric.
    pub fn new(
        p: Matrix,
        q: Vec<f64>,
        g: Matrix,
        h: Vec<f64>,
        equality: Option<Equality>,
    ) -> Result<Self> {
        if !p.is_symmetric() {
            return Err(Error::contract("P must be square and symmetric"));
        }
        let n = p.rows();
        Error::check_dim(n, q.len())?;
        Error::check_dim(n, g.cols())?;
        Error::check_dim(g.rows(), h.len())?;
        if let Some(eq) = &equality {
            Error::check_dim(n, eq.a.len())?;
        }
        Ok(QpProblem {
            p,
            q,
            g,
            h,
            equality,
            gamma: None,
            source_gram: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.p.rows()
    }

    pub fn inequality_count(&self) -> usize {
        self.g.rows()
    }
}

/// Canonical QP for the V-matrix conditional-probability problem.
pub fn assemble(
    gram: &Arc<GramMatrix>,
    v: &VMatrix,
    labels: &[u8],
    gamma: f64,
) -> Result<QpProblem> {
    let k = gram.matrix();
    let n = k.rows();
    Error::check_dim(n, v.dim())?;
    Error::check_dim(n, labels.len())?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::contract(format!("gamma must be >= 0, got {gamma}")));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::contract(format!("label must be 0 or 1, got {bad}")));
    }
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();

    let kv = k.matmul(v.matrix())?;
    let kvk = kv.matmul(k)?;
    // Symmetrize from the upper triangle so P is exactly symmetric.
    let upper = (0..n)
        .map(|i| (i..n).map(|j| kvk[(i, j)] + gamma * k[(i, j)]).collect())
        .collect();
    let p = Matrix::symmetric_from_upper(upper);
    let q: Vec<f64> = kv.mul_vec(&y)?.into_iter().map(|v| -v).collect();

    let g = Matrix::from_fn(
        2 * n,
        n,
        |i, j| if i < n { k[(i, j)] } else { -k[(i - n, j)] },
    );
    let mut h = vec![1.0; n];
    h.resize(2 * n, 0.0);

    let a_eq = k.mul_vec(&vec![1.0; n])?;
    let b_eq: f64 = y.iter().sum();

    let mut problem = QpProblem::new(p, q, g, h, Some(Equality { a: a_eq, b: b_eq }))?;
    problem.gamma = Some(gamma);
    problem.source_gram = Some(Arc::clone(gram));
    Ok(problem)
}

/// `aᵀPa + 2qᵀa`.
pub fn objective_value(problem: &QpProblem, a: &[f64]) -> Result<f64> {
    let pa = problem.p.mul_vec(a)?;
    Ok(dot(a, &pa) + 2.0 * dot(&problem.q, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    /// `max_i (Ga − h)_i⁺`.
    pub inequality: f64,
    /// `|a_eqᵀa − b_eq|`, zero when there is no equality row.
    pub equality: f64,
}

impl ConstraintResiduals {
    pub fn max(&self) -> f64 {
        self.inequality.max(self.equality)
    }
}

pub fn constraint_residuals(problem: &QpProblem, a: &[f64]) -> Result<ConstraintResiduals> {
    let ga = problem.g.mul_vec(a)?;
    let inequality = ga
        .iter()
        .zip(&problem.h)
        .fold(0.0_f64, |m, (gi, hi)| m.max(gi - hi));
    let equality = problem
        .equality
        .as_ref()
        .map_or(0.0, |eq| (dot(&eq.a, a) - eq.b).abs());
    Ok(ConstraintResiduals {
        inequality,
        equality,
    })
}
