//! Exhaustive grid oracle for small QPs with two-sided constraints
//! `lower ≤ M x ≤ upper` (that is, `G = [M; −M]`, `h = (upper, −lower)`),
//! which covers both the assembled V-matrix problems (`M = K`) and plain box
//! QPs (`M = I`).
//!
//! The grid lives in `z = M x` space, where the feasible region is the box
//! intersected with the equality hyperplane. With an equality row, one
//! coordinate is solved from the others, so the grid covers the
//! equality-constrained slice. `M` must be nonsingular so every grid point
//! maps back to a unique `x = M⁻¹ z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, sym_eigen, Lu, Matrix};
use crate::parallel::Execution;
use crate::qp::{objective_value, QpProblem};

use super::QpSolution;

/// Largest problem the oracle will enumerate.
pub const MAX_ORACLE_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub solver_objective: f64,
    /// Best objective over feasible grid points; `None` if none was feasible.
    pub oracle_objective: Option<f64>,
    /// `oracle − solver`. Negative means a grid point beat the solver.
    pub gap: Option<f64>,
    /// Upper bound on how far the best grid point can sit above the true
    /// optimum, from a second-order expansion around the solver's point with
    /// the largest displacement to the nearest grid node.
    pub resolution_bound: f64,
    pub grid_points: usize,
    pub feasible_points: usize,
}

impl OracleComparison {
    /// Solver no worse than any grid point (up to `slack`) and the grid no
    /// further from the solver than the resolution allows.
    pub fn agrees(&self, slack: f64) -> bool {
        match self.gap {
            Some(gap) => gap >= -slack && gap <= self.resolution_bound + slack,
            None => false,
        }
    }
}

struct PairedBox {
    m: Matrix,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

fn paired_box(problem: &QpProblem) -> Result<PairedBox> {
    let n = problem.dim();
    let g = &problem.g;
    if g.rows() != 2 * n {
        return Err(Error::contract(
            "grid oracle needs G = [M; -M] with M square",
        ));
    }
    for i in 0..n {
        for j in 0..n {
            if g[(i + n, j)] != -g[(i, j)] {
                return Err(Error::contract("grid oracle needs G = [M; -M]"));
            }
        }
    }
    let m = Matrix::from_fn(n, n, |i, j| g[(i, j)]);
    let upper = problem.h[..n].to_vec();
    let lower: Vec<f64> = problem.h[n..].iter().map(|v| -v).collect();
    if lower
        .iter()
        .zip(&upper)
        .any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite())
    {
        return Err(Error::contract(
            "grid oracle needs finite bounds lower <= upper",
        ));
    }
    Ok(PairedBox { m, lower, upper })
}

/// Compare `solution` with the best point of a `resolution`-per-axis grid.
pub fn verify_against_oracle(
    problem: &QpProblem,
    solution: &QpSolution,
    resolution: usize,
) -> Result<OracleComparison> {
    verify_against_oracle_with(problem, solution, resolution, Execution::Parallel)
}

pub fn verify_against_oracle_with(
    problem: &QpProblem,
    solution: &QpSolution,
    resolution: usize,
    exec: Execution,
) -> Result<OracleComparison> {
    let n = problem.dim();
    if n == 0 || n > MAX_ORACLE_DIM {
        return Err(Error::contract(format!(
            "grid oracle supports 1..={MAX_ORACLE_DIM} variables, got {n}"
        )));
    }
    if resolution < 2 {
        return Err(Error::contract("grid resolution must be >= 2"));
    }
    let alpha = solution
        .alpha
        .as_ref()
        .ok_or_else(|| Error::contract("grid oracle needs an optimal solution"))?;
    let solver_objective = objective_value(problem, alpha)?;

    let bx = paired_box(problem)?;
    let lu = Lu::factor(&bx.m)?;
    // Columns of M⁻¹.
    let minv_cols: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            lu.solve(&e)
        })
        .collect::<Result<_>>()?;
    let to_x = |z: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (j, col) in minv_cols.iter().enumerate() {
            for i in 0..n {
                x[i] += col[i] * z[j];
            }
        }
        x
    };

    // Equality in z space: cᵀz = b with c = M⁻ᵀ a.
    let eq = match &problem.equality {
        Some(e) => {
            let c: Vec<f64> = minv_cols.iter().map(|col| dot(col, &e.a)).collect();
            let k = (0..n)
                .max_by(|&i, &j| c[i].abs().total_cmp(&c[j].abs()))
                .unwrap();
            if c[k].abs() <= 1e-14 * (1.0 + e.b.abs()) {
                return Err(Error::contract("equality row vanishes in constraint space"));
            }
            Some((c, e.b, k))
        }
        None => None,
    };
    let free: Vec<usize> = (0..n)
        .filter(|&j| eq.as_ref().is_none_or(|(_, _, k)| j != *k))
        .collect();
    let spacing: Vec<f64> = (0..n)
        .map(|j| (bx.upper[j] - bx.lower[j]) / (resolution - 1) as f64)
        .collect();
    let grid_points = resolution
        .checked_pow(free.len() as u32)
        .filter(|&c| c <= 50_000_000)
        .ok_or_else(|| Error::contract("grid too large"))?;

    let eval = |flat: usize| -> Option<f64> {
        let mut z = vec![0.0; n];
        let mut rem = flat;
        for &j in &free {
            let idx = rem % resolution;
            rem /= resolution;
            z[j] = if idx == resolution - 1 {
                bx.upper[j]
            } else {
                bx.lower[j] + idx as f64 * spacing[j]
            };
        }
        if let Some((c, b, k)) = &eq {
            let rest: f64 = free.iter().map(|&j| c[j] * z[j]).sum();
            let zk = (b - rest) / c[*k];
            let tol = 1e-12 * (1.0 + bx.upper[*k].abs().max(bx.lower[*k].abs()));
            if zk < bx.lower[*k] - tol || zk > bx.upper[*k] + tol {
                return None;
            }
            z[*k] = zk;
        }
        let x = to_x(&z);
        objective_value(problem, &x).ok()
    };
    let values = exec.map(grid_points, eval);
    let feasible_points = values.iter().filter(|v| v.is_some()).count();
    let oracle_objective = values
        .iter()
        .flatten()
        .copied()
        .fold(None, |best: Option<f64>, v| {
            Some(best.map_or(v, |b| b.min(v)))
        });

    // Second-order bound in z space: f(z* + δ) − f(z*) ≤ ‖∇f‖‖δ‖ + λ_max‖δ‖².
    let z_star = bx.m.mul_vec(alpha)?;
    let pz = Matrix::from_fn(n, n, |i, j| {
        let pj = problem.p.mul_vec(&minv_cols[j]).unwrap();
        dot(&minv_cols[i], &pj)
    });
    let pz = Matrix::symmetric_from_upper(
        (0..n)
            .map(|i| (i..n).map(|j| pz[(i, j)]).collect())
            .collect(),
    );
    let qz: Vec<f64> = minv_cols.iter().map(|col| dot(col, &problem.q)).collect();
    let grad: Vec<f64> = pz
        .mul_vec(&z_star)?
        .iter()
        .zip(&qz)
        .map(|(a, b)| 2.0 * a + 2.0 * b)
        .collect();
    let lambda_max = sym_eigen(&pz)?.values[0].max(0.0);
    let mut delta_sq: f64 = free.iter().map(|&j| (spacing[j] / 2.0).powi(2)).sum();
    if let Some((c, _, k)) = &eq {
        let dep: f64 = free
            .iter()
            .map(|&j| (c[j] / c[*k]).abs() * spacing[j] / 2.0)
            .sum();
        delta_sq += dep * dep;
    }
    let delta = delta_sq.sqrt();
    let resolution_bound = dot(&grad, &grad).sqrt() * delta + lambda_max * delta_sq;

    Ok(OracleComparison {
        solver_objective,
        oracle_objective,
        gap: oracle_objective.map(|o| o - solver_objective),
        resolution_bound,
        grid_points,
        feasible_points,
    })
}
