//! Dense primal-dual interior-point method (Mehrotra predictor-corrector) for
//! [`QpProblem`]s.
//!
//! The objective is `xᵀPx + 2qᵀx`; internally the method works with the
//! equivalent `½xᵀ(2P)x + (2q)ᵀx`, so the multipliers it reports satisfy
//! `2Px + 2q + Gᵀz + a·y = 0` for the canonical objective directly.
//!
//! Each iteration solves the reduced Newton system
//!
//! ```text
//! [ 2P + GᵀWG   a ] [Δx]   [r₁]
//! [ aᵀ          0 ] [Δy] = [r₂],     W = diag(z / s)
//! ```
//!
//! by LU with partial pivoting. When the Hessian and the constraint rows share
//! a null direction (a rank-deficient Gram matrix, for example) that matrix is
//! singular and the factorization reports it; the solve then ends with
//! [`SolveStatus::SingularKkt`] instead of returning a meaningless iterate.
//!
//! Starting point: `x = 0`, slacks `s = max(h − Gx, 1)`, inequality
//! multipliers `z = 1`, equality multiplier `y = 0`.

pub mod oracle;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, max_abs, Lu, Matrix, SpectralReport};
use crate::qp::{objective_value, QpProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    /// Fraction of the maximal step to the boundary.
    pub step_fraction: f64,
    /// `ε` added to the diagonal of `P`. Zero leaves the problem untouched;
    /// a positive value is the standard ridge remedy for rank deficiency.
    pub regularization_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 100,
            kkt_tolerance: 1e-8,
            step_fraction: 0.99,
            regularization_floor: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::contract("kkt_tolerance must be positive"));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < 1.0) {
            return Err(Error::contract("step_fraction must lie in (0, 1)"));
        }
        if !(self.regularization_floor >= 0.0 && self.regularization_floor.is_finite()) {
            return Err(Error::contract("regularization_floor must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// The Newton system could not be factored.
    SingularKkt,
    MaxIterations,
    /// Step length collapsed or the iterate became non-finite.
    NumericalBreakdown,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::SingularKkt => "SingularKkt",
            SolveStatus::MaxIterations => "MaxIterations",
            SolveStatus::NumericalBreakdown => "NumericalBreakdown",
        })
    }
}

/// Lagrange multipliers: `inequality[i] ≥ 0` pairs with row `i` of `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub inequality: Vec<f64>,
    pub equality: Option<f64>,
}

/// Max-norm KKT residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `max (Gx − h)⁺`
    #[serde(with = "crate::serde_ext::float")]
    pub primal_ineq: f64,
    /// `|aᵀx − b|`
    #[serde(with = "crate::serde_ext::float")]
    pub primal_eq: f64,
    /// `‖2Px + 2q + Gᵀz + a·y‖∞`
    #[serde(with = "crate::serde_ext::float")]
    pub dual: f64,
    /// `max |z_i (h − Gx)_i|`
    #[serde(with = "crate::serde_ext::float")]
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal_ineq
            .max(self.primal_eq)
            .max(self.dual)
            .max(self.complementarity)
    }

    fn all_finite(&self) -> bool {
        self.max().is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Average complementarity `sᵀz / m` after the step.
    pub mu: f64,
    pub step: f64,
    pub kkt_max: f64,
}

/// Where the Newton factorization failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PivotBreakdown {
    pub iteration: usize,
    pub column: usize,
    pub magnitude: f64,
    pub threshold: f64,
}

/// Matrix that made the Newton system singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeficientMatrix {
    /// Source Gram matrix has rank below its dimension.
    Gram { rank: usize, dimension: usize },
    /// Gram matrix full rank (or unknown) but a KKT pivot vanished anyway.
    KktPivot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub gram_report: Option<SpectralReport>,
    pub pivot: Option<PivotBreakdown>,
}

impl SolverDiagnostics {
    pub fn deficient_matrix(&self) -> Option<DeficientMatrix> {
        self.pivot?;
        match &self.gram_report {
            Some(r) if !r.full_rank() => Some(DeficientMatrix::Gram {
                rank: r.rank,
                dimension: r.dimension,
            }),
            _ => Some(DeficientMatrix::KktPivot),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub status: SolveStatus,
    /// Present only when `status` is `Optimal`.
    pub alpha: Option<Vec<f64>>,
    pub multipliers: Option<Multipliers>,
    /// Residuals at the last iterate.
    pub kkt: KktResiduals,
    /// Canonical objective of the unregularized problem at `alpha`.
    pub objective: Option<f64>,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    /// Always present for problems assembled from a Gram matrix and for any
    /// singular outcome.
    pub diagnostics: Option<SolverDiagnostics>,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// KKT residuals of `(alpha, duals)` for `problem`.
pub fn kkt_residuals(
    problem: &QpProblem,
    alpha: &[f64],
    duals: &Multipliers,
) -> Result<KktResiduals> {
    let n = problem.dim();
    Error::check_dim(n, alpha.len())?;
    Error::check_dim(problem.inequality_count(), duals.inequality.len())?;
    if duals.inequality.iter().any(|&z| z < 0.0) {
        return Err(Error::contract(
            "inequality multipliers must be nonnegative",
        ));
    }
    let gx = problem.g.mul_vec(alpha)?;
    let primal_ineq = gx
        .iter()
        .zip(&problem.h)
        .fold(0.0_f64, |m, (g, h)| m.max(g - h));
    let complementarity = gx
        .iter()
        .zip(&problem.h)
        .zip(&duals.inequality)
        .fold(0.0_f64, |m, ((g, h), z)| m.max((z * (h - g)).abs()));

    let mut grad: Vec<f64> = problem
        .p
        .mul_vec(alpha)?
        .iter()
        .zip(&problem.q)
        .map(|(pa, q)| 2.0 * pa + 2.0 * q)
        .collect();
    let gtz = problem.g.tr_mul_vec(&duals.inequality)?;
    grad.iter_mut().zip(&gtz).for_each(|(d, v)| *d += v);

    let primal_eq = match (&problem.equality, duals.equality) {
        (Some(eq), y) => {
            let y = y.unwrap_or(0.0);
            grad.iter_mut().zip(&eq.a).for_each(|(d, a)| *d += a * y);
            (dot(&eq.a, alpha) - eq.b).abs()
        }
        (None, Some(_)) => {
            return Err(Error::contract(
                "equality multiplier given without an equality row",
            ))
        }
        (None, None) => 0.0,
    };
    Ok(KktResiduals {
        primal_ineq,
        primal_eq,
        dual: max_abs(&grad),
        complementarity,
    })
}

struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    y: f64,
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dz: Vec<f64>,
    dy: f64,
}

/// Solve `problem`. Never panics on degenerate input: failures are reported
/// through [`QpSolution::status`].
pub fn solve(problem: &QpProblem, config: &SolverConfig) -> Result<QpSolution> {
    config.validate()?;
    let working;
    let prob = if config.regularization_floor > 0.0 {
        let mut p = problem.clone();
        let eps = config.regularization_floor;
        for i in 0..p.dim() {
            p.p[(i, i)] += eps;
        }
        working = p;
        &working
    } else {
        problem
    };

    let n = prob.dim();
    let m = prob.inequality_count();
    let has_eq = prob.equality.is_some();
    let eq_a: &[f64] = prob.equality.as_ref().map_or(&[], |e| &e.a);
    let eq_b = prob.equality.as_ref().map_or(0.0, |e| e.b);
    let gram_report = prob.source_gram.as_ref().map(|g| g.report().clone());

    let mut it = Iterate {
        x: vec![0.0; n],
        s: prob.h.iter().map(|&h| h.max(1.0)).collect(),
        z: vec![1.0; m],
        y: 0.0,
    };
    let mut trace = Vec::new();
    let pattern: Vec<Vec<(usize, f64)>> = (0..m)
        .map(|r| {
            prob.g
                .row(r)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v))
                .collect()
        })
        .collect();

    let finish = |status: SolveStatus,
                  it: &Iterate,
                  kkt: KktResiduals,
                  iterations: usize,
                  trace: Vec<IterationRecord>,
                  pivot: Option<PivotBreakdown>|
     -> Result<QpSolution> {
        let optimal = status == SolveStatus::Optimal;
        let diagnostics = (gram_report.is_some() || pivot.is_some()).then(|| SolverDiagnostics {
            gram_report: gram_report.clone(),
            pivot,
        });
        Ok(QpSolution {
            status,
            alpha: optimal.then(|| it.x.clone()),
            multipliers: optimal.then(|| Multipliers {
                inequality: it.z.clone(),
                equality: has_eq.then_some(it.y),
            }),
            kkt,
            objective: if optimal {
                Some(objective_value(problem, &it.x)?)
            } else {
                None
            },
            iterations,
            trace,
            diagnostics,
        })
    };

    for iteration in 0..=config.max_iterations {
        let duals = Multipliers {
            inequality: it.z.clone(),
            equality: has_eq.then_some(it.y),
        };
        let kkt = kkt_residuals(prob, &it.x, &duals)?;
        if !kkt.all_finite() {
            return finish(
                SolveStatus::NumericalBreakdown,
                &it,
                kkt,
                iteration,
                trace,
                None,
            );
        }
        if kkt.max() <= config.kkt_tolerance {
            return finish(SolveStatus::Optimal, &it, kkt, iteration, trace, None);
        }
        if iteration == config.max_iterations {
            return finish(SolveStatus::MaxIterations, &it, kkt, iteration, trace, None);
        }

        // Residuals of the slack formulation.
        let gx = prob.g.mul_vec(&it.x)?;
        let r_p: Vec<f64> = (0..m).map(|i| gx[i] + it.s[i] - prob.h[i]).collect();
        let mut r_d: Vec<f64> = prob
            .p
            .mul_vec(&it.x)?
            .iter()
            .zip(&prob.q)
            .map(|(pa, q)| 2.0 * pa + 2.0 * q)
            .collect();
        let gtz = prob.g.tr_mul_vec(&it.z)?;
        for j in 0..n {
            r_d[j] += gtz[j] + eq_a.get(j).map_or(0.0, |a| a * it.y);
        }
        let r_e = if has_eq { dot(eq_a, &it.x) - eq_b } else { 0.0 };
        let mu = if m > 0 {
            dot(&it.s, &it.z) / m as f64
        } else {
            0.0
        };

        let (kkt_matrix, scale) = equilibrate(newton_matrix(prob, &pattern, &it));
        let lu = match Lu::factor(&kkt_matrix) {
            Ok(lu) => lu,
            Err(Error::SingularMatrix {
                column,
                magnitude,
                threshold,
            }) => {
                let pivot = PivotBreakdown {
                    iteration,
                    column,
                    magnitude,
                    threshold,
                };
                return finish(
                    SolveStatus::SingularKkt,
                    &it,
                    kkt,
                    iteration,
                    trace,
                    Some(pivot),
                );
            }
            Err(e) => return Err(e),
        };
        let direction = |r_c: &[f64]| -> Result<Direction> {
            newton_direction(prob, &lu, &scale, &it, &r_d, &r_p, r_e, r_c)
        };

        // Predictor.
        let r_c_aff: Vec<f64> = (0..m).map(|i| it.s[i] * it.z[i]).collect();
        let aff = direction(&r_c_aff)?;
        let alpha_aff = max_step(&it, &aff);
        let mu_aff = complementarity_after(&it, &aff, alpha_aff);
        let sigma = if mu > 0.0 {
            (mu_aff / mu).clamp(0.0, 1.0).powi(3)
        } else {
            0.0
        };

        // Corrector.
        let r_c: Vec<f64> = (0..m)
            .map(|i| it.s[i] * it.z[i] + aff.ds[i] * aff.dz[i] - sigma * mu)
            .collect();
        let mut dir = direction(&r_c)?;
        let mut step = (config.step_fraction * max_step(&it, &dir)).min(1.0);

        // Accept only steps that do not increase the complementarity gap.
        if m > 0 && !shrink_until_gap_decreases(&it, &dir, &mut step, mu) {
            let r_c: Vec<f64> = (0..m).map(|i| it.s[i] * it.z[i] - 0.5 * mu).collect();
            dir = direction(&r_c)?;
            step = (config.step_fraction * max_step(&it, &dir)).min(1.0);
            if !shrink_until_gap_decreases(&it, &dir, &mut step, mu) {
                return finish(
                    SolveStatus::NumericalBreakdown,
                    &it,
                    kkt,
                    iteration,
                    trace,
                    None,
                );
            }
        }
        if !(step > 1e-14) {
            return finish(
                SolveStatus::NumericalBreakdown,
                &it,
                kkt,
                iteration,
                trace,
                None,
            );
        }

        for j in 0..n {
            it.x[j] += step * dir.dx[j];
        }
        for i in 0..m {
            it.s[i] += step * dir.ds[i];
            it.z[i] += step * dir.dz[i];
        }
        it.y += step * dir.dy;

        let new_mu = if m > 0 {
            dot(&it.s, &it.z) / m as f64
        } else {
            0.0
        };
        trace.push(IterationRecord {
            iteration: iteration + 1,
            mu: new_mu,
            step,
            kkt_max: kkt.max(),
        });
    }
    unreachable!("loop returns at max_iterations")
}

/// `[2P + GᵀWG, a; aᵀ, 0]` (the last row/column only with an equality).
/// `pattern[r]` lists the nonzeros of row `r` of `G`.
fn newton_matrix(prob: &QpProblem, pattern: &[Vec<(usize, f64)>], it: &Iterate) -> Matrix {
    let n = prob.dim();
    let dim = n + usize::from(prob.equality.is_some());
    let mut k = Matrix::zeros(dim, dim);
    for i in 0..n {
        for (kij, pij) in k.row_mut(i).iter_mut().zip(prob.p.row(i)) {
            *kij = 2.0 * pij;
        }
    }
    for (r, nz) in pattern.iter().enumerate() {
        let w = it.z[r] / it.s[r];
        for &(i, gi) in nz {
            let wi = w * gi;
            let row = k.row_mut(i);
            for &(j, gj) in nz {
                row[j] += wi * gj;
            }
        }
    }
    if let Some(eq) = &prob.equality {
        for j in 0..n {
            k[(n, j)] = eq.a[j];
            k[(j, n)] = eq.a[j];
        }
    }
    k
}

/// `D M D` with `D = diag(M)^(-1/2)` where the diagonal is positive. A row
/// with a zero diagonal (the equality row) is scaled by its largest entry.
fn equilibrate(mut m: Matrix) -> (Matrix, Vec<f64>) {
    let n = m.rows();
    let mut d: Vec<f64> = (0..n)
        .map(|i| {
            let v = m[(i, i)];
            if v > 0.0 {
                1.0 / v.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    for i in 0..n {
        if d[i] == 0.0 {
            let big = (0..n).fold(0.0_f64, |b, j| b.max((m[(i, j)] * d[j]).abs()));
            d[i] = if big > 0.0 { 1.0 / big } else { 1.0 };
        }
    }
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] *= d[i] * d[j];
        }
    }
    (m, d)
}

#[allow(clippy::too_many_arguments)]
fn newton_direction(
    prob: &QpProblem,
    lu: &Lu,
    scale: &[f64],
    it: &Iterate,
    r_d: &[f64],
    r_p: &[f64],
    r_e: f64,
    r_c: &[f64],
) -> Result<Direction> {
    let n = prob.dim();
    let m = prob.inequality_count();
    // t = S⁻¹(r_c − Z r_p)
    let t: Vec<f64> = (0..m)
        .map(|i| (r_c[i] - it.z[i] * r_p[i]) / it.s[i])
        .collect();
    let gtt = prob.g.tr_mul_vec(&t)?;
    let mut rhs: Vec<f64> = (0..n).map(|j| -r_d[j] + gtt[j]).collect();
    if prob.equality.is_some() {
        rhs.push(-r_e);
    }
    rhs.iter_mut().zip(scale).for_each(|(r, d)| *r *= d);
    let mut sol = lu.solve(&rhs)?;
    sol.iter_mut().zip(scale).for_each(|(v, d)| *v *= d);
    let dx = sol[..n].to_vec();
    let dy = if prob.equality.is_some() { sol[n] } else { 0.0 };
    let gdx = prob.g.mul_vec(&dx)?;
    let ds: Vec<f64> = (0..m).map(|i| -r_p[i] - gdx[i]).collect();
    let dz: Vec<f64> = (0..m)
        .map(|i| (-r_c[i] - it.z[i] * ds[i]) / it.s[i])
        .collect();
    Ok(Direction { dx, ds, dz, dy })
}

/// Largest `α ∈ (0, 1]` keeping `s + αΔs ≥ 0` and `z + αΔz ≥ 0`.
fn max_step(it: &Iterate, d: &Direction) -> f64 {
    let mut alpha = 1.0_f64;
    for (v, dv) in it.s.iter().zip(&d.ds).chain(it.z.iter().zip(&d.dz)) {
        if *dv < 0.0 {
            alpha = alpha.min(-v / dv);
        }
    }
    alpha
}

fn complementarity_after(it: &Iterate, d: &Direction, alpha: f64) -> f64 {
    let m = it.s.len();
    if m == 0 {
        return 0.0;
    }
    (0..m)
        .map(|i| (it.s[i] + alpha * d.ds[i]) * (it.z[i] + alpha * d.dz[i]))
        .sum::<f64>()
        / m as f64
}

/// Halve `step` until the gap does not exceed `mu`; `false` if that fails.
fn shrink_until_gap_decreases(it: &Iterate, d: &Direction, step: &mut f64, mu: f64) -> bool {
    for _ in 0..40 {
        if complementarity_after(it, d, *step) <= mu {
            return true;
        }
        *step *= 0.5;
    }
    false
}
