//! Consistency of the constraint system `0 ≤ KA ≤ 1`, `1ᵀKA = b_eq`,
//! decided without solving the QP.
//!
//! The constraints touch `A` only through `z = KA`, so the system is
//! consistent iff the box `[0,1]^ℓ` meets the budget hyperplane `1ᵀz = b_eq`
//! inside `range(K)`. With `U` an orthonormal basis of the numerical range
//! (`ℓ×r`), that is the polytope `{w ∈ R^r : 0 ≤ Uw ≤ 1, 1ᵀUw = b_eq}`.
//!
//! [`analyze`] decides it with a phase-1 program (minimize the total
//! constraint violation) and returns either a witness `z`, mapped back to
//! coefficients, or a Farkas-type certificate built from the phase-1
//! multipliers. [`brute_force_oracle`] is an independent grid search over the
//! same reduced coordinates, usable when `r ≤ 3`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::GramMatrix;
use crate::numerics::{default_rank_tolerance, dot, max_abs, Lu, Matrix};
use crate::parallel::Execution;
use crate::qp::{Equality, QpProblem};
use crate::solver::{solve, SolveStatus, SolverConfig};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Phase-1 optimum above this is infeasible outright. At or below it, the
/// verdict is Feasible only if a witness meets the residual tolerance.
pub const FEASIBILITY_THRESHOLD: f64 = 1e-5;
/// Proximal-point weight for the phase-1 LP.
const PROXIMAL: f64 = 1e-3;
const MAX_PROXIMAL_STEPS: usize = 50;
/// Vertex enumeration limits for certificate verification.
const MAX_VERIFY_RANK: usize = 3;
const MAX_VERIFY_ROWS: usize = 60;

/// The reduced feasibility system over range coordinates `w`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    /// Orthonormal basis of the numerical range of `K` (`ℓ×r`).
    pub basis: Matrix,
    /// Rows of `basis` whose norm exceeds the tolerance. The others give
    /// constraints `0 ≤ 0 ≤ 1` and are always satisfied.
    pub active_rows: Vec<usize>,
    /// `Uᵀ1`: the budget row in `w` coordinates.
    pub budget_row: Vec<f64>,
    pub b_eq: f64,
}

impl ReducedSystem {
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.rows()
    }

    /// `z = U w`.
    pub fn lift(&self, w: &[f64]) -> Vec<f64> {
        if self.rank() == 0 {
            return vec![0.0; self.ambient_dim()];
        }
        self.basis.mul_vec(w).expect("w has the reduced dimension")
    }

    fn budget_vanishes(&self, tolerance: f64) -> bool {
        max_abs(&self.budget_row) <= tolerance
    }
}

/// The range of `K` uses the same relative cutoff as its spectral rank, on
/// `|λ|` so indefinite Grams keep their negative directions.
fn range_tolerance(gram: &GramMatrix) -> f64 {
    default_rank_tolerance(gram.dim())
}

/// Restrict the constraints to `range(K)`: eigenvectors whose `|λ|` clears
/// the rank cutoff. Rows of the basis below `tolerance` count as inactive.
pub fn reduce_constraints(gram: &GramMatrix, b_eq: f64, tolerance: f64) -> ReducedSystem {
    let eig = gram.eigen();
    let basis = eig
        .vectors
        .select_columns(&eig.range_indices(range_tolerance(gram)));
    let ell = basis.rows();
    let active_rows = (0..ell)
        .filter(|&i| max_abs(basis.row(i)) > tolerance)
        .collect();
    let budget_row = basis
        .tr_mul_vec(&vec![1.0; ell])
        .expect("square basis rows");
    ReducedSystem {
        basis,
        active_rows,
        budget_row,
        b_eq,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Feasible,
    Infeasible,
}

/// Proof of inconsistency. For every `z ∈ [0,1]^ℓ ∩ range(K)`,
/// `d·(1ᵀz) = cᵀz ≤ bound`, while `d·b_eq > bound`.
///
/// `c = y_upper − y_lower` and `bound = Σ y_upper` come from nonnegative
/// multipliers on the upper and lower box rows; `c − d·1` is orthogonal to
/// `range(K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub c: Vec<f64>,
    pub d: f64,
    pub bound: f64,
    /// `d·b_eq − bound`, positive for a valid certificate.
    pub margin: f64,
    /// `‖Uᵀ(c − d·1)‖∞`.
    pub range_residual: f64,
    /// Checked at every vertex of the reduced box polytope; `None` when the
    /// polytope is too large to enumerate.
    pub verified: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessResiduals {
    /// `max_i max(−z_i, z_i − 1, 0)`
    pub box_violation: f64,
    /// `|1ᵀz − b_eq|`
    pub budget: f64,
    /// `‖K·alpha − z‖∞`
    pub range: f64,
}

impl WitnessResiduals {
    pub fn max(&self) -> f64 {
        self.box_violation.max(self.budget).max(self.range)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub verdict: Verdict,
    pub witness_z: Option<Vec<f64>>,
    pub witness_alpha: Option<Vec<f64>>,
    pub witness_residuals: Option<WitnessResiduals>,
    pub certificate: Option<Certificate>,
    /// Rank from the Gram matrix's spectral report.
    pub gram_rank: usize,
    /// Dimension `r` of the reduced system (rank at the feasibility tolerance).
    pub reduced_dimension: usize,
    /// Phase-1 optimum: total violation of the best point in `range(K)`.
    #[serde(with = "crate::serde_ext::float")]
    pub min_violation: f64,
    pub phase_one_status: SolveStatus,
}

/// Decide consistency of the constraints for `gram` and `b_eq`.
pub fn analyze(gram: &GramMatrix, b_eq: f64, tolerance: f64) -> Result<FeasibilityReport> {
    let sys = reduce_constraints(gram, b_eq, tolerance);
    let gram_rank = gram.report().rank;
    let r = sys.rank();

    if r == 0 {
        return Ok(zero_range_report(gram, &sys, tolerance, gram_rank));
    }

    let phase1 = phase_one(&sys)?;
    let mut found = None;
    if phase1.violation <= FEASIBILITY_THRESHOLD {
        let candidates = witness(&sys, tolerance)?
            .into_iter()
            .chain([phase1.w.clone()]);
        for w in candidates {
            let z = sys.lift(&w);
            let alpha = gram.eigen().pseudo_solve(&z, range_tolerance(gram))?;
            let residuals = witness_residuals(gram, &z, &alpha, b_eq)?;
            if residuals.max() <= tolerance {
                found = Some((z, alpha, residuals));
                break;
            }
        }
    }

    if let Some((z, alpha, residuals)) = found {
        Ok(FeasibilityReport {
            verdict: Verdict::Feasible,
            witness_z: Some(z),
            witness_alpha: Some(alpha),
            witness_residuals: Some(residuals),
            certificate: None,
            gram_rank,
            reduced_dimension: r,
            min_violation: phase1.violation,
            phase_one_status: phase1.status,
        })
    } else {
        let certificate = phase1
            .duals
            .as_ref()
            .map(|(y_u, y_l, nu)| certificate_from_duals(&sys, y_u, y_l, *nu));
        Ok(FeasibilityReport {
            verdict: Verdict::Infeasible,
            witness_z: None,
            witness_alpha: None,
            witness_residuals: None,
            certificate,
            gram_rank,
            reduced_dimension: r,
            min_violation: phase1.violation,
            phase_one_status: phase1.status,
        })
    }
}

fn zero_range_report(
    gram: &GramMatrix,
    sys: &ReducedSystem,
    tolerance: f64,
    gram_rank: usize,
) -> FeasibilityReport {
    let ell = sys.ambient_dim();
    let b = sys.b_eq;
    let base = FeasibilityReport {
        verdict: Verdict::Feasible,
        witness_z: None,
        witness_alpha: None,
        witness_residuals: None,
        certificate: None,
        gram_rank,
        reduced_dimension: 0,
        min_violation: b.abs(),
        phase_one_status: SolveStatus::Optimal,
    };
    if b.abs() <= tolerance {
        let z = vec![0.0; ell];
        let alpha = vec![0.0; ell];
        let residuals = witness_residuals(gram, &z, &alpha, b).expect("dimensions agree");
        FeasibilityReport {
            witness_z: Some(z),
            witness_alpha: Some(alpha),
            witness_residuals: Some(residuals),
            ..base
        }
    } else {
        // range(K) = {0}: d·1ᵀz = 0 ≤ 0 < d·b with d = sign(b).
        let d = b.signum();
        FeasibilityReport {
            verdict: Verdict::Infeasible,
            certificate: Some(Certificate {
                c: vec![0.0; ell],
                d,
                bound: 0.0,
                margin: d * b,
                range_residual: 0.0,
                verified: Some(true),
            }),
            ..base
        }
    }
}

struct PhaseOne {
    w: Vec<f64>,
    violation: f64,
    status: SolveStatus,
    /// `(y_upper, y_lower, ν)` over the active rows.
    duals: Option<(Vec<f64>, Vec<f64>, f64)>,
}

/// minimize Σt_u + Σt_l + e₊ + e₋
/// s.t. U_i w − t_u,i ≤ 1,  −U_i w − t_l,i ≤ 0,  t, e ≥ 0,
///      (Uᵀ1)ᵀw + e₊ − e₋ = b_eq
fn phase_one(sys: &ReducedSystem) -> Result<PhaseOne> {
    let r = sys.rank();
    let rows = &sys.active_rows;
    let na = rows.len();
    let nv = r + 2 * na + 2;
    let (tu, tl, ep, em) = (r, r + na, r + 2 * na, r + 2 * na + 1);

    let p = Matrix::identity(nv).scaled(PROXIMAL);
    let mut q = vec![0.0; nv];
    q[r..].iter_mut().for_each(|v| *v = 0.5);

    let n_ineq = 4 * na + 2;
    let mut g = Matrix::zeros(n_ineq, nv);
    let mut h = vec![0.0; n_ineq];
    for (k, &i) in rows.iter().enumerate() {
        let u = sys.basis.row(i);
        for j in 0..r {
            g[(k, j)] = u[j];
            g[(na + k, j)] = -u[j];
        }
        g[(k, tu + k)] = -1.0;
        h[k] = 1.0;
        g[(na + k, tl + k)] = -1.0;
        g[(2 * na + k, tu + k)] = -1.0;
        g[(3 * na + k, tl + k)] = -1.0;
    }
    g[(4 * na, ep)] = -1.0;
    g[(4 * na + 1, em)] = -1.0;

    let mut a = vec![0.0; nv];
    a[..r].copy_from_slice(&sys.budget_row);
    a[ep] = 1.0;
    a[em] = -1.0;

    // Proximal-point iteration: re-centre the proximal term on each solution
    // until it stops moving, so the final duals are those of the LP itself.
    let config = SolverConfig {
        max_iterations: 200,
        ..SolverConfig::default()
    };
    let mut center = vec![0.0; nv];
    let mut sol = None;
    for _ in 0..MAX_PROXIMAL_STEPS {
        let shifted: Vec<f64> = q
            .iter()
            .zip(&center)
            .map(|(qi, c)| qi - PROXIMAL * c)
            .collect();
        let prob = QpProblem::new(
            p.clone(),
            shifted,
            g.clone(),
            h.clone(),
            Some(Equality {
                a: a.clone(),
                b: sys.b_eq,
            }),
        )?;
        let step = solve(&prob, &config)?;
        let Some(x) = step.alpha.clone() else {
            sol = Some(step);
            break;
        };
        let moved = x
            .iter()
            .zip(&center)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        center = x;
        sol = Some(step);
        if moved <= 1e-10 {
            break;
        }
    }
    let sol = sol.expect("at least one proximal step");
    match (&sol.alpha, &sol.multipliers) {
        (Some(x), Some(mult)) => {
            let violation = x[r..].iter().sum::<f64>().max(0.0);
            let y_u = mult.inequality[..na].to_vec();
            let y_l = mult.inequality[na..2 * na].to_vec();
            let nu = mult.equality.unwrap_or(0.0);
            Ok(PhaseOne {
                w: x[..r].to_vec(),
                violation,
                status: sol.status,
                duals: Some((y_u, y_l, nu)),
            })
        }
        _ => Ok(PhaseOne {
            w: vec![0.0; r],
            violation: f64::INFINITY,
            status: sol.status,
            duals: None,
        }),
    }
}

/// Minimum-norm feasible point: minimize ‖w‖² over the reduced polytope.
fn witness(sys: &ReducedSystem, tolerance: f64) -> Result<Option<Vec<f64>>> {
    let r = sys.rank();
    let rows = &sys.active_rows;
    let na = rows.len();
    let mut g = Matrix::zeros(2 * na, r);
    let mut h = vec![0.0; 2 * na];
    for (k, &i) in rows.iter().enumerate() {
        let u = sys.basis.row(i);
        for j in 0..r {
            g[(k, j)] = u[j];
            g[(na + k, j)] = -u[j];
        }
        h[k] = 1.0;
    }
    let equality = (!sys.budget_vanishes(tolerance)).then(|| Equality {
        a: sys.budget_row.clone(),
        b: sys.b_eq,
    });
    let prob = QpProblem::new(Matrix::identity(r), vec![0.0; r], g, h, equality)?;
    let sol = solve(&prob, &SolverConfig::default())?;
    Ok(sol.alpha)
}

fn witness_residuals(
    gram: &GramMatrix,
    z: &[f64],
    alpha: &[f64],
    b_eq: f64,
) -> Result<WitnessResiduals> {
    let box_violation = z.iter().fold(0.0_f64, |m, &v| m.max(-v).max(v - 1.0));
    let budget = (z.iter().sum::<f64>() - b_eq).abs();
    let ka = gram.matrix().mul_vec(alpha)?;
    let range = ka
        .iter()
        .zip(z)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(WitnessResiduals {
        box_violation,
        budget,
        range,
    })
}

fn certificate_from_duals(sys: &ReducedSystem, y_u: &[f64], y_l: &[f64], nu: f64) -> Certificate {
    let ell = sys.ambient_dim();
    let mut c = vec![0.0; ell];
    for (k, &i) in sys.active_rows.iter().enumerate() {
        c[i] = y_u[k] - y_l[k];
    }
    let d = -nu;
    let bound: f64 = y_u.iter().sum();
    let shifted: Vec<f64> = c.iter().map(|ci| ci - d).collect();
    let range_residual = max_abs(&sys.basis.tr_mul_vec(&shifted).expect("basis rows"));
    let margin = d * sys.b_eq - bound;
    let verified = verify_certificate(sys, d, bound, margin, range_residual);
    Certificate {
        c,
        d,
        bound,
        margin,
        range_residual,
        verified,
    }
}

/// Check `d·1ᵀz ≤ bound` at every vertex of `{w : 0 ≤ Uw ≤ 1}`.
fn verify_certificate(
    sys: &ReducedSystem,
    d: f64,
    bound: f64,
    margin: f64,
    range_residual: f64,
) -> Option<bool> {
    let r = sys.rank();
    let na = sys.active_rows.len();
    if r > MAX_VERIFY_RANK || na > MAX_VERIFY_ROWS {
        return None;
    }
    let scale = 1.0 + bound.abs();
    if !(margin > 0.0) || range_residual > 1e-6 * (1.0 + d.abs()) {
        return Some(false);
    }
    let vertices = polytope_vertices(sys);
    if vertices.is_empty() {
        return Some(false);
    }
    Some(vertices.iter().all(|w| {
        let total = dot(&sys.budget_row, w);
        d * total <= bound + 1e-7 * scale
    }))
}

/// Vertices of `{w : 0 ≤ U_i w ≤ 1 for active i}` by enumerating `r`-subsets
/// of the constraint rows.
fn polytope_vertices(sys: &ReducedSystem) -> Vec<Vec<f64>> {
    let r = sys.rank();
    let na = sys.active_rows.len();
    // Row k < na: U_i w = 1; row k ≥ na: U_i w = 0.
    let row = |k: usize| -> (&[f64], f64) {
        let i = sys.active_rows[k % na];
        (sys.basis.row(i), if k < na { 1.0 } else { 0.0 })
    };
    let mut out = Vec::new();
    for subset in combinations(2 * na, r) {
        let m = Matrix::from_fn(r, r, |a, b| row(subset[a]).0[b]);
        let rhs: Vec<f64> = subset.iter().map(|&k| row(k).1).collect();
        let Ok(lu) = Lu::factor_with(&m, 1e-10) else {
            continue;
        };
        let Ok(w) = lu.solve(&rhs) else { continue };
        let inside = sys.active_rows.iter().all(|&i| {
            let v = dot(sys.basis.row(i), &w);
            (-1e-9..=1.0 + 1e-9).contains(&v)
        });
        if inside {
            out.push(w);
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Map a range-space vector back to coefficients: minimum-norm `alpha` with
/// `K alpha = z`. Fails with `RangeViolation` when `z` is more than
/// `tolerance` away from `range(K)`.
pub fn recover_alpha(gram: &GramMatrix, z: &[f64], tolerance: f64) -> Result<Vec<f64>> {
    Error::check_dim(gram.dim(), z.len())?;
    let alpha = gram.eigen().pseudo_solve(z, range_tolerance(gram))?;
    let ka = gram.matrix().mul_vec(&alpha)?;
    let residual = ka
        .iter()
        .zip(z)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if residual > tolerance {
        return Err(Error::RangeViolation {
            residual,
            tolerance,
        });
    }
    Ok(alpha)
}

/// Outcome of the grid search.
#[derive(Debug, Clone, PartialEq)]
pub enum OracleVerdict {
    Feasible { w: Vec<f64>, z: Vec<f64> },
    NotFoundAtResolution,
}

impl OracleVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, OracleVerdict::Feasible { .. })
    }
}

/// Largest reduced dimension the grid oracle accepts.
pub const MAX_ORACLE_RANK: usize = 3;

/// Exhaustive grid over reduced coordinates.
///
/// Since `|w_j| = |u_jᵀz| ≤ Σ_i |U_ij| =: m_j` for any `z ∈ [0,1]^ℓ`, axis `j`
/// spans `[−m_j, m_j]` with `grid_steps` nodes and spacing `h_j`. A node is
/// accepted when each constraint holds to within the change a half-spacing
/// move can cause (`Σ_j |U_ij| h_j / 2` for row `i`, likewise for the
/// budget), so any feasible point has an accepted node next to it. The
/// lexicographically smallest accepted node is returned.
pub fn brute_force_oracle(
    gram: &GramMatrix,
    b_eq: f64,
    grid_steps: usize,
) -> Result<OracleVerdict> {
    brute_force_oracle_with(gram, b_eq, grid_steps, Execution::Parallel)
}

pub fn brute_force_oracle_with(
    gram: &GramMatrix,
    b_eq: f64,
    grid_steps: usize,
    exec: Execution,
) -> Result<OracleVerdict> {
    let sys = reduce_constraints(gram, b_eq, DEFAULT_TOLERANCE);
    let r = sys.rank();
    if r > MAX_ORACLE_RANK {
        return Err(Error::contract(format!(
            "grid oracle supports reduced dimension <= {MAX_ORACLE_RANK}, got {r}"
        )));
    }
    if grid_steps < 2 {
        return Err(Error::contract("grid_steps must be >= 2"));
    }
    let ell = sys.ambient_dim();
    if r == 0 {
        return Ok(if b_eq.abs() <= DEFAULT_TOLERANCE {
            OracleVerdict::Feasible {
                w: vec![],
                z: vec![0.0; ell],
            }
        } else {
            OracleVerdict::NotFoundAtResolution
        });
    }

    let extent: Vec<f64> = (0..r)
        .map(|j| (0..ell).map(|i| sys.basis[(i, j)].abs()).sum())
        .collect();
    let spacing: Vec<f64> = extent
        .iter()
        .map(|m| 2.0 * m / (grid_steps - 1) as f64)
        .collect();
    let row_tol: Vec<f64> = (0..ell)
        .map(|i| {
            (0..r)
                .map(|j| sys.basis[(i, j)].abs() * spacing[j] / 2.0)
                .sum()
        })
        .collect();
    let budget_tol: f64 = (0..r)
        .map(|j| sys.budget_row[j].abs() * spacing[j] / 2.0)
        .sum();

    let total = grid_steps.pow(r as u32);
    let node = |flat: usize| -> Vec<f64> {
        let mut w = vec![0.0; r];
        let mut rem = flat;
        // Axis 0 is the most significant digit.
        for j in (0..r).rev() {
            let idx = rem % grid_steps;
            rem /= grid_steps;
            w[j] = -extent[j] + idx as f64 * spacing[j];
        }
        w
    };
    let hit = exec.find_first(total, |flat| {
        let w = node(flat);
        let z = sys.lift(&w);
        let box_ok = z
            .iter()
            .zip(&row_tol)
            .all(|(&v, &t)| v >= -t && v <= 1.0 + t);
        let budget_ok = (dot(&sys.budget_row, &w) - b_eq).abs() <= budget_tol;
        (box_ok && budget_ok).then_some((w, z))
    });
    Ok(match hit {
        Some((_, (w, z))) => OracleVerdict::Feasible { w, z },
        None => OracleVerdict::NotFoundAtResolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::xor_dataset;
    use crate::kernels::{gram, KernelSpec};
    use crate::qp::{assemble, constraint_residuals, VMatrix};
    use std::sync::Arc;

    fn k_spline() -> GramMatrix {
        gram(&xor_dataset(), KernelSpec::ink_spline0()).unwrap()
    }

    fn from(m: Matrix) -> GramMatrix {
        GramMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn reduce_identity() {
        let sys = reduce_constraints(&from(Matrix::identity(3)), 2.0, DEFAULT_TOLERANCE);
        assert_eq!(sys.rank(), 3);
        assert_eq!(sys.active_rows, vec![0, 1, 2]);
        let utu = sys.basis.transpose().matmul(&sys.basis).unwrap();
        assert_eq!(utu, Matrix::identity(3));
    }

    #[test]
    fn reduce_spline_range() {
        let sys = reduce_constraints(&k_spline(), 2.0, DEFAULT_TOLERANCE);
        assert_eq!(sys.rank(), 2);
        assert_eq!(sys.active_rows, vec![1, 2, 3]);
        // Every basis vector has the form (0, a + b, a, b).
        for j in 0..2 {
            let u = sys.basis.column(j);
            assert!(u[0].abs() < 1e-14);
            assert!((u[1] - u[2] - u[3]).abs() < 1e-12);
        }
    }

    #[test]
    fn reduce_zero() {
        let sys = reduce_constraints(&from(Matrix::zeros(3, 3)), 0.0, DEFAULT_TOLERANCE);
        assert_eq!(sys.rank(), 0);
        let rep = analyze(&from(Matrix::zeros(3, 3)), 0.0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(rep.verdict, Verdict::Feasible);
        assert_eq!(rep.witness_z, Some(vec![0.0; 3]));
        let rep = analyze(&from(Matrix::zeros(3, 3)), 1.0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(rep.verdict, Verdict::Infeasible);
        assert_eq!(rep.certificate.unwrap().verified, Some(true));
        assert_eq!(
            brute_force_oracle(&from(Matrix::zeros(3, 3)), 0.0, 11).unwrap(),
            OracleVerdict::Feasible {
                w: vec![],
                z: vec![0.0; 3]
            }
        );
    }

    #[test]
    fn spline_budget_two_is_feasible_with_canonical_witness() {
        let g = k_spline();
        let rep = analyze(&g, 2.0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(rep.verdict, Verdict::Feasible);
        assert_eq!(rep.gram_rank, 2);
        assert_eq!(rep.reduced_dimension, 2);
        let z = rep.witness_z.as_ref().unwrap();
        let canonical = [0.0, 1.0, 0.5, 0.5];
        for (a, b) in z.iter().zip(canonical) {
            assert!((a - b).abs() < 1e-6, "{z:?}");
        }
        let res = rep.witness_residuals.unwrap();
        assert!(res.max() <= 1e-8, "{res:?}");

        // Re-check through the assembled QP's residuals.
        let arc = Arc::new(g);
        let prob = assemble(&arc, &VMatrix::identity(4), &[0, 0, 1, 1], 1.0).unwrap();
        let r = constraint_residuals(&prob, rep.witness_alpha.as_ref().unwrap()).unwrap();
        assert!(r.inequality <= 1e-8 && r.equality <= 1e-8, "{r:?}");
    }

    #[test]
    fn spline_budget_above_two_is_infeasible() {
        let rep = analyze(&k_spline(), 3.5, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(rep.verdict, Verdict::Infeasible);
        // Best point: a + b = 1.75 violates z₂ ≤ 1 by 0.75.
        assert!(
            (rep.min_violation - 0.75).abs() < 1e-6,
            "{}",
            rep.min_violation
        );
        let cert = rep.certificate.unwrap();
        assert!(cert.margin > 0.0);
        assert_eq!(cert.verified, Some(true), "{cert:?}");
    }

    #[test]
    fn negative_budget_is_infeasible_with_certificate() {
        let rep = analyze(&from(Matrix::identity(3)), -0.5, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(rep.verdict, Verdict::Infeasible);
        let cert = rep.certificate.unwrap();
        assert!(cert.d < 0.0);
        assert_eq!(cert.verified, Some(true), "{cert:?}");
    }

    #[test]
    fn identity_full_budget() {
        let rep = analyze(&from(Matrix::identity(4)), 4.0, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(rep.verdict, Verdict::Feasible);
        for v in rep.witness_z.unwrap() {
            assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn oracle_on_spline() {
        let g = k_spline();
        assert!(brute_force_oracle(&g, 2.0, 101).unwrap().is_feasible());
        assert_eq!(
            brute_force_oracle(&g, 2.5, 101).unwrap(),
            OracleVerdict::NotFoundAtResolution
        );
        let seq = brute_force_oracle_with(&g, 1.3, 201, Execution::Sequential).unwrap();
        let par = brute_force_oracle_with(&g, 1.3, 201, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert!(brute_force_oracle(&from(Matrix::identity(5)), 1.0, 11).is_err());
    }

    #[test]
    fn recover_alpha_cases() {
        let z = vec![0.2, 0.9, 0.4];
        let a = recover_alpha(&from(Matrix::identity(3)), &z, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(a, z);

        let g = k_spline();
        let z = [0.0, 1.0, 0.5, 0.5];
        let a = recover_alpha(&g, &z, DEFAULT_TOLERANCE).unwrap();
        let ka = g.matrix().mul_vec(&a).unwrap();
        for (x, y) in ka.iter().zip(z) {
            assert!((x - y).abs() <= 1e-8);
        }
        assert!(matches!(
            recover_alpha(&g, &[1.0, 0.0, 0.0, 0.0], DEFAULT_TOLERANCE),
            Err(Error::RangeViolation { .. })
        ));
    }

    #[test]
    fn feasible_budgets_form_the_interval_zero_two() {
        let g = k_spline();
        let mut verdicts = Vec::new();
        for k in -4..=12 {
            let b = k as f64 * 0.25;
            let rep = analyze(&g, b, DEFAULT_TOLERANCE).unwrap();
            let expected = (0.0..=2.0).contains(&b);
            assert_eq!(rep.verdict == Verdict::Feasible, expected, "b_eq = {b}");
            verdicts.push(rep.verdict);
        }
        // Contiguous run of Feasible.
        let first = verdicts
            .iter()
            .position(|v| *v == Verdict::Feasible)
            .unwrap();
        let last = verdicts
            .iter()
            .rposition(|v| *v == Verdict::Feasible)
            .unwrap();
        assert!(verdicts[first..=last]
            .iter()
            .all(|v| *v == Verdict::Feasible));
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(6, 2).len(), 15);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
    }
}
