//! End-to-end experiment runs: dataset, Gram matrix, feasibility analysis,
//! QP solve and model metrics, collected into one JSON report. `compare`
//! runs several configurations and tabulates the outcome per row.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datasets::{gaussian_mixture, load_csv, xor_dataset, Dataset, MixtureConfig};
use crate::error::{Error, Result};
use crate::estimator::{run_fit, Metrics};
use crate::feasibility::{FeasibilityReport, Verdict};
use crate::kernels::{KernelKind, KernelSpec};
use crate::numerics::SpectralReport;
use crate::parallel::Execution;
use crate::qp::VMatrix;
use crate::solver::{DeficientMatrix, KktResiduals, PivotBreakdown, SolveStatus, SolverConfig};

/// Where the training set comes from. Written as `xor`, `gauss` or
/// `csv:<path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetSource {
    Xor,
    Gauss,
    Csv(PathBuf),
}

/// The V matrix: `identity` or `csv:<path>`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum VSource {
    #[default]
    Identity,
    Csv(PathBuf),
}

fn split_csv(s: &str) -> Option<&str> {
    s.strip_prefix("csv:").filter(|p| !p.is_empty())
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DatasetSource::Xor => f.write_str("xor"),
            DatasetSource::Gauss => f.write_str("gauss"),
            DatasetSource::Csv(p) => write!(f, "csv:{}", p.display()),
        }
    }
}

impl FromStr for DatasetSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xor" => Ok(DatasetSource::Xor),
            "gauss" => Ok(DatasetSource::Gauss),
            _ => split_csv(s)
                .map(|p| DatasetSource::Csv(PathBuf::from(p)))
                .ok_or_else(|| {
                    Error::contract(format!(
                        "unknown dataset {s:?}: expected xor, gauss or csv:<path>"
                    ))
                }),
        }
    }
}

impl fmt::Display for VSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VSource::Identity => f.write_str("identity"),
            VSource::Csv(p) => write!(f, "csv:{}", p.display()),
        }
    }
}

impl FromStr for VSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(VSource::Identity);
        }
        split_csv(s)
            .map(|p| VSource::Csv(PathBuf::from(p)))
            .ok_or_else(|| {
                Error::contract(format!(
                    "unknown V matrix {s:?}: expected identity or csv:<path>"
                ))
            })
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(DatasetSource);
string_serde!(VSource);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub kernel: KernelKind,
    pub rbf_param: f64,
    pub gamma: f64,
    /// Only used by the Gaussian mixture.
    pub seed: u64,
    pub v_matrix: VSource,
    /// Opt-in `εI` added to `P`. Not part of the method itself.
    pub regularization: Option<f64>,
    /// Where to write the JSON report. Not echoed into the report.
    #[serde(skip)]
    pub report_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Xor,
            kernel: KernelKind::Rbf,
            rbf_param: KernelSpec::DEFAULT_RBF_PARAM,
            gamma: 1.0,
            seed: MixtureConfig::default().seed,
            v_matrix: VSource::Identity,
            regularization: None,
            report_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn new(dataset: DatasetSource, kernel: KernelKind) -> Self {
        ExperimentConfig {
            dataset,
            kernel,
            ..ExperimentConfig::default()
        }
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel, self.rbf_param)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            regularization_floor: self.regularization.unwrap_or(0.0),
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel_spec()?;
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::contract(format!(
                "gamma must be finite and >= 0, got {}",
                self.gamma
            )));
        }
        if let Some(eps) = self.regularization {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::contract(format!(
                    "regularization must be finite and > 0, got {eps}"
                )));
            }
        }
        self.solver_config().validate()
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Xor => Ok(xor_dataset()),
            DatasetSource::Gauss => gaussian_mixture(&MixtureConfig::with_seed(self.seed)),
            DatasetSource::Csv(path) => load_csv(path),
        }
    }

    pub fn load_v_matrix(&self, ell: usize) -> Result<VMatrix> {
        match &self.v_matrix {
            VSource::Identity => Ok(VMatrix::identity(ell)),
            VSource::Csv(path) => {
                let v = VMatrix::load_csv(path)?;
                Error::check_dim(ell, v.dim())?;
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub points: usize,
    pub dim: usize,
    pub positives: usize,
    pub p1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub kkt: KktResiduals,
    pub pivot: Option<PivotBreakdown>,
    pub deficient: Option<DeficientMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub metrics: Metrics,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub gram: SpectralReport,
    pub solver: SolverSummary,
    pub feasibility: FeasibilityReport,
    /// Present when the solve was optimal.
    pub model: Option<ModelSummary>,
    pub wall_time_ms: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// JSON with the wall time zeroed, for comparing runs.
    pub fn canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.wall_time_ms = 0.0;
        copy.to_json()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = self.to_json()?;
        json.push('\n');
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Plain-text summary of the main fields.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(
            out,
            "dataset        {} ({} points, p1 = {})",
            c.dataset, self.dataset.points, self.dataset.p1
        );
        match c.kernel {
            KernelKind::Rbf => {
                let _ = writeln!(
                    out,
                    "kernel         rbf (param {}), gamma {}",
                    c.rbf_param, c.gamma
                );
            }
            KernelKind::InkSpline0 => {
                let _ = writeln!(out, "kernel         ink0, gamma {}", c.gamma);
            }
        }
        if let Some(eps) = c.regularization {
            let _ = writeln!(out, "regularization {eps:e}");
        }
        let _ = writeln!(
            out,
            "gram           rank {}/{}, condition {}, restricted {:.4e}, psd {}",
            self.gram.rank,
            self.gram.dimension,
            format_condition(self.gram.condition_number),
            self.gram.restricted_condition,
            self.gram.psd
        );
        let s = &self.solver;
        let _ = writeln!(
            out,
            "solver         {} after {} iterations, kkt {:.2e}",
            s.status,
            s.iterations,
            s.kkt.max()
        );
        if let Some(p) = &s.pivot {
            let _ = writeln!(
                out,
                "pivot          iteration {}, column {}, |pivot| {:.2e} <= {:.2e}",
                p.iteration, p.column, p.magnitude, p.threshold
            );
        }
        let f = &self.feasibility;
        let _ = writeln!(
            out,
            "feasibility    {:?} (reduced dimension {}, min violation {:.2e})",
            f.verdict, f.reduced_dimension, f.min_violation
        );
        if let Some(m) = &self.model {
            let _ = writeln!(
                out,
                "model          mean |f - y| {:.6}, mean f {:.6}, max violation {:.2e}",
                m.metrics.mean_abs_residual,
                m.metrics.mean_prediction,
                m.metrics.max_constraint_violation
            );
        }
        let _ = writeln!(out, "wall time      {:.1} ms", self.wall_time_ms);
        out
    }
}

fn format_condition(c: f64) -> String {
    if c.is_finite() {
        format!("{c:.4e}")
    } else {
        "inf".to_string()
    }
}

/// Run the full pipeline. Solver failures are part of the report, not errors.
/// Writes the report to `config.report_path` when set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate()?;
    let data = config.load_dataset()?;
    let v = config.load_v_matrix(data.len())?;
    let spec = config.kernel_spec()?;
    let run = run_fit(&data, spec, Some(&v), config.gamma, &config.solver_config())?;

    let model = match &run.model {
        Some(m) => Some(ModelSummary {
            metrics: m.evaluate(&data)?,
            alpha: m.alpha().to_vec(),
        }),
        None => None,
    };
    let diagnostics = run.solution.diagnostics.as_ref();
    let report = ExperimentReport {
        config: config.clone(),
        dataset: DatasetSummary {
            points: data.len(),
            dim: data.dim(),
            positives: data.positives(),
            p1: data.p1(),
        },
        gram: run.gram.report().clone(),
        solver: SolverSummary {
            status: run.solution.status,
            iterations: run.solution.iterations,
            objective: run.solution.objective,
            kkt: run.solution.kkt,
            pivot: diagnostics.and_then(|d| d.pivot),
            deficient: diagnostics.and_then(|d| d.deficient_matrix()),
        },
        feasibility: run.feasibility,
        model,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    if let Some(path) = &config.report_path {
        report.write(path)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub points: usize,
    pub rank: usize,
    #[serde(with = "crate::serde_ext::float")]
    pub condition_number: f64,
    pub status: SolveStatus,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub dataset: DatasetSource,
    pub kernel: KernelKind,
    pub result: Option<RowResult>,
    /// Set when the row's pipeline failed before producing a report.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn render(&self) -> String {
        let header = [
            "dataset",
            "kernel",
            "rank/l",
            "condition",
            "status",
            "feasibility",
        ];
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|row| {
                let (rank, cond, status, verdict) = match (&row.result, &row.error) {
                    (Some(r), _) => (
                        format!("{}/{}", r.rank, r.points),
                        format_condition(r.condition_number),
                        r.status.to_string(),
                        format!("{:?}", r.verdict),
                    ),
                    (None, e) => (
                        "-".into(),
                        "-".into(),
                        "error".into(),
                        e.clone().unwrap_or_default(),
                    ),
                };
                [
                    row.dataset.to_string(),
                    row.kernel.to_string(),
                    rank,
                    cond,
                    status,
                    verdict,
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: &[&str]| {
            let mut parts: Vec<String> = row
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            if let Some(last) = parts.last_mut() {
                *last = last.trim_end().to_string();
            }
            let _ = writeln!(out, "{}", parts.join("  "));
        };
        line(&mut out, &header);
        for row in &cells {
            line(
                &mut out,
                &row.iter().map(String::as_str).collect::<Vec<_>>(),
            );
        }
        out
    }
}

/// One row per configuration, in input order. A row whose pipeline fails
/// carries the error message instead of a result.
pub fn compare(configs: &[ExperimentConfig]) -> Result<CompareTable> {
    compare_with(configs, Execution::Parallel)
}

pub fn compare_with(configs: &[ExperimentConfig], exec: Execution) -> Result<CompareTable> {
    if configs.is_empty() {
        return Err(Error::contract("compare needs at least one configuration"));
    }
    let rows = exec.map(configs.len(), |i| {
        let config = ExperimentConfig {
            report_path: None,
            ..configs[i].clone()
        };
        let (result, error) = match run_experiment(&config) {
            Ok(r) => (
                Some(RowResult {
                    points: r.dataset.points,
                    rank: r.gram.rank,
                    condition_number: r.gram.condition_number,
                    status: r.solver.status,
                    verdict: r.feasibility.verdict,
                }),
                None,
            ),
            Err(e) => (None, Some(e.to_string())),
        };
        CompareRow {
            dataset: config.dataset,
            kernel: config.kernel,
            result,
            error,
        }
    });
    Ok(CompareTable { rows })
}

/// `{xor, gauss} × {rbf, ink0}` with default parameters.
pub fn default_cells(seed: u64) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for dataset in [DatasetSource::Xor, DatasetSource::Gauss] {
        for kernel in [KernelKind::Rbf, KernelKind::InkSpline0] {
            out.push(ExperimentConfig {
                seed,
                ..ExperimentConfig::new(dataset.clone(), kernel)
            });
        }
    }
    out
}
