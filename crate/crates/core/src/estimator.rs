//! End-to-end fit of the conditional probability `p(y = 1 | x)` as the kernel
//! expansion `f(x) = Σ_i α_i K(x_i, x)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::feasibility::{analyze, FeasibilityReport, DEFAULT_TOLERANCE};
use crate::kernels::{gram, GramMatrix, KernelSpec};
use crate::numerics::SpectralReport;
use crate::qp::{assemble, constraint_residuals, QpProblem, VMatrix};
use crate::solver::{solve, KktResiduals, QpSolution, SolveStatus, SolverConfig};

/// Solver outcome of a fit, kept alongside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt: KktResiduals,
    pub feasibility: FeasibilityReport,
}

#[derive(Debug, Clone)]
pub struct Model {
    alpha: Vec<f64>,
    training: Dataset,
    spec: KernelSpec,
    gamma: f64,
    gram_report: Option<SpectralReport>,
    diagnostics: Option<FitDiagnostics>,
}

/// Everything known about a fit the solver could not finish.
#[derive(Debug, Clone)]
pub struct FitFailure {
    pub gram_report: SpectralReport,
    pub status: SolveStatus,
    pub solution: QpSolution,
    pub feasibility: FeasibilityReport,
}

#[derive(Debug, Clone)]
pub enum FitOutcome {
    Fitted(Box<Model>),
    Failed(Box<FitFailure>),
}

impl FitOutcome {
    pub fn model(&self) -> Option<&Model> {
        match self {
            FitOutcome::Fitted(m) => Some(m),
            FitOutcome::Failed(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&FitFailure> {
        match self {
            FitOutcome::Fitted(_) => None,
            FitOutcome::Failed(f) => Some(f),
        }
    }
}

/// Every intermediate of a fit, for reporting.
#[derive(Debug, Clone)]
pub struct FitRun {
    pub gram: Arc<GramMatrix>,
    pub problem: QpProblem,
    pub feasibility: FeasibilityReport,
    pub solution: QpSolution,
    /// Present when the solve was optimal.
    pub model: Option<Model>,
}

impl FitRun {
    pub fn into_outcome(self) -> FitOutcome {
        match self.model {
            Some(model) => FitOutcome::Fitted(Box::new(model)),
            None => FitOutcome::Failed(Box::new(FitFailure {
                gram_report: self.gram.report().clone(),
                status: self.solution.status,
                solution: self.solution,
                feasibility: self.feasibility,
            })),
        }
    }
}

/// Fit with the identity V matrix when `v` is `None`.
///
/// Single-class data is a contract error. A solver failure is not: it comes
/// back as [`FitOutcome::Failed`] with the Gram spectrum, solver status and
/// feasibility analysis attached.
pub fn fit(
    data: &Dataset,
    spec: KernelSpec,
    v: Option<&VMatrix>,
    gamma: f64,
    solver: &SolverConfig,
) -> Result<FitOutcome> {
    Ok(run_fit(data, spec, v, gamma, solver)?.into_outcome())
}

/// [`fit`], keeping the Gram matrix, QP, feasibility analysis and raw solver
/// output.
pub fn run_fit(
    data: &Dataset,
    spec: KernelSpec,
    v: Option<&VMatrix>,
    gamma: f64,
    solver: &SolverConfig,
) -> Result<FitRun> {
    let ell = data.len();
    if ell < 2 {
        return Err(Error::contract("fit needs at least two points"));
    }
    let positives = data.positives();
    if positives == 0 || positives == ell {
        return Err(Error::contract("fit needs both classes present"));
    }
    let identity;
    let v = match v {
        Some(v) => v,
        None => {
            identity = VMatrix::identity(ell);
            &identity
        }
    };

    let g = Arc::new(gram(data, spec)?);
    let problem = assemble(&g, v, data.labels(), gamma)?;
    let b_eq = problem.equality.as_ref().map_or(0.0, |e| e.b);
    let feasibility = analyze(&g, b_eq, DEFAULT_TOLERANCE)?;
    let solution = solve(&problem, solver)?;

    let model = match &solution.alpha {
        Some(alpha) => {
            let residuals = constraint_residuals(&problem, alpha)?;
            if residuals.max() > 1e-6 {
                return Err(Error::Invariant(format!(
                    "optimal solve left training constraint residual {:e}",
                    residuals.max()
                )));
            }
            Some(Model {
                alpha: alpha.clone(),
                training: data.clone(),
                spec,
                gamma,
                gram_report: Some(g.report().clone()),
                diagnostics: Some(FitDiagnostics {
                    status: solution.status,
                    iterations: solution.iterations,
                    kkt: solution.kkt,
                    feasibility: feasibility.clone(),
                }),
            })
        }
        None => None,
    };
    Ok(FitRun {
        gram: g,
        problem,
        feasibility,
        solution,
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Mean `|f(x_i) − y_i|` of the clipped predictions.
    pub mean_abs_residual: f64,
    /// Largest violation of `0 ≤ f(x_i) ≤ 1` by the raw expansion.
    pub max_constraint_violation: f64,
    /// Mean clipped prediction.
    pub mean_prediction: f64,
}

impl Model {
    /// A model with given coefficients and no fit history.
    pub fn from_coefficients(training: Dataset, spec: KernelSpec, alpha: Vec<f64>) -> Result<Self> {
        Error::check_dim(training.len(), alpha.len())?;
        Ok(Model {
            alpha,
            training,
            spec,
            gamma: 0.0,
            gram_report: None,
            diagnostics: None,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn training(&self) -> &Dataset {
        &self.training
    }

    pub fn gram_report(&self) -> Option<&SpectralReport> {
        self.gram_report.as_ref()
    }

    pub fn diagnostics(&self) -> Option<&FitDiagnostics> {
        self.diagnostics.as_ref()
    }

    /// Unclipped `Σ_i α_i K(x_i, x)`.
    pub fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim(self.training.dim(), x.len())?;
        let mut acc = 0.0;
        for (a, xi) in self.alpha.iter().zip(self.training.points()) {
            acc += a * self.spec.eval(xi, x)?;
        }
        Ok(acc)
    }

    /// Probability estimate, clipped to `[0, 1]`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_raw(x)?.clamp(0.0, 1.0))
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<Metrics> {
        let mut abs_res = 0.0;
        let mut violation = 0.0_f64;
        let mut mean = 0.0;
        for (x, &y) in data.points().iter().zip(data.labels()) {
            let raw = self.predict_raw(x)?;
            let p = raw.clamp(0.0, 1.0);
            abs_res += (p - f64::from(y)).abs();
            violation = violation.max(-raw).max(raw - 1.0);
            mean += p;
        }
        let n = data.len() as f64;
        Ok(Metrics {
            mean_abs_residual: abs_res / n,
            max_constraint_violation: violation,
            mean_prediction: mean / n,
        })
    }
}
