//! Kernel functions and Gram-matrix construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{sym_eigen, Matrix, SpectralReport, SymmetricEigen};
use crate::parallel::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rbf,
    InkSpline0,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Rbf => "rbf",
            KernelKind::InkSpline0 => "ink0",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rbf" => Ok(KernelKind::Rbf),
            "ink0" => Ok(KernelKind::InkSpline0),
            other => Err(Error::contract(format!(
                "unknown kernel `{other}` (expected rbf or ink0)"
            ))),
        }
    }
}

/// A kernel and its parameter. `param` is the RBF width factor and is ignored
/// by the INK-spline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub param: f64,
}

impl KernelSpec {
    pub const DEFAULT_RBF_PARAM: f64 = 1.0;

    pub fn rbf(param: f64) -> Result<Self> {
        if !(param > 0.0 && param.is_finite()) {
            return Err(Error::contract(format!(
                "RBF parameter must be positive, got {param}"
            )));
        }
        Ok(KernelSpec {
            kind: KernelKind::Rbf,
            param,
        })
    }

    pub fn ink_spline0() -> Self {
        KernelSpec {
            kind: KernelKind::InkSpline0,
            param: 0.0,
        }
    }

    pub fn new(kind: KernelKind, param: f64) -> Result<Self> {
        match kind {
            KernelKind::Rbf => Self::rbf(param),
            KernelKind::InkSpline0 => Ok(Self::ink_spline0()),
        }
    }

    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        match self.kind {
            KernelKind::Rbf => rbf(x1, x2, self.param),
            KernelKind::InkSpline0 => ink_spline0(x1, x2),
        }
    }

    // Callers have already checked dimensions.
    fn eval_unchecked(&self, x1: &[f64], x2: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Rbf => rbf_unchecked(x1, x2, self.param),
            KernelKind::InkSpline0 => ink_unchecked(x1, x2),
        }
    }
}

/// `exp(-‖x1 − x2‖² · param · 0.5)`.
pub fn rbf(x1: &[f64], x2: &[f64], param: f64) -> Result<f64> {
    Error::check_dim(x1.len(), x2.len())?;
    if !(param > 0.0) {
        return Err(Error::contract(format!(
            "RBF parameter must be positive, got {param}"
        )));
    }
    Ok(rbf_unchecked(x1, x2, param))
}

fn rbf_unchecked(x1: &[f64], x2: &[f64], param: f64) -> f64 {
    let sq: f64 = x1.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq * param * 0.5).exp()
}

/// INK-spline of order zero: `Σ_k min(x1[k], x2[k])`.
pub fn ink_spline0(x1: &[f64], x2: &[f64]) -> Result<f64> {
    Error::check_dim(x1.len(), x2.len())?;
    Ok(ink_unchecked(x1, x2))
}

fn ink_unchecked(x1: &[f64], x2: &[f64]) -> f64 {
    x1.iter().zip(x2).map(|(a, b)| a.min(*b)).sum()
}

/// Kernel matrix of a dataset, with its eigendecomposition and spectral
/// report computed once at construction.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    k: Matrix,
    spec: Option<KernelSpec>,
    eigen: SymmetricEigen,
    report: SpectralReport,
}

impl GramMatrix {
    /// Wrap an arbitrary symmetric matrix (no kernel attached). Used for
    /// hand-built Gram matrices in studies and tests.
    pub fn from_matrix(k: Matrix) -> Result<Self> {
        Self::build(k, None)
    }

    fn build(k: Matrix, spec: Option<KernelSpec>) -> Result<Self> {
        let eigen = sym_eigen(&k)?;
        let report = SpectralReport::from_eigen(&eigen);
        Ok(GramMatrix {
            k,
            spec,
            eigen,
            report,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.k
    }

    pub fn spec(&self) -> Option<KernelSpec> {
        self.spec
    }

    pub fn eigen(&self) -> &SymmetricEigen {
        &self.eigen
    }

    pub fn report(&self) -> &SpectralReport {
        &self.report
    }

    pub fn dim(&self) -> usize {
        self.k.rows()
    }
}

/// Gram matrix of `data` under `spec`, rows evaluated in parallel when the
/// `parallel` feature is enabled.
pub fn gram(data: &Dataset, spec: KernelSpec) -> Result<GramMatrix> {
    gram_with(data, spec, Execution::Parallel)
}

pub fn gram_with(data: &Dataset, spec: KernelSpec, exec: Execution) -> Result<GramMatrix> {
    GramMatrix::build(gram_entries(data, spec, exec), Some(spec))
}

/// Just the kernel matrix, without the spectral analysis. Upper triangle is
/// evaluated row by row and mirrored.
pub fn gram_entries(data: &Dataset, spec: KernelSpec, exec: Execution) -> Matrix {
    let pts = data.points();
    let n = pts.len();
    let upper = exec.map(n, |i| {
        (i..n)
            .map(|j| spec.eval_unchecked(&pts[i], &pts[j]))
            .collect::<Vec<f64>>()
    });
    Matrix::symmetric_from_upper(upper)
}
