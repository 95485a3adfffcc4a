//! Dense real linear algebra: a row-major matrix, cyclic Jacobi
//! eigendecomposition for symmetric matrices, LU with partial pivoting, and
//! rank / conditioning diagnostics.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_dim(rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            Error::check_dim(cols, r.as_ref().len())?;
            data.extend_from_slice(r.as_ref());
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Symmetric matrix from its upper-triangle rows: `upper[i]` holds the
    /// entries `(i, i..n)`. The lower triangle is mirrored, so the result is
    /// exactly symmetric.
    pub fn symmetric_from_upper(upper: Vec<Vec<f64>>) -> Self {
        let n = upper.len();
        let mut m = Matrix::zeros(n, n);
        for (i, row) in upper.into_iter().enumerate() {
            debug_assert_eq!(row.len(), n - i);
            for (off, v) in row.into_iter().enumerate() {
                let j = i + off;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Exact symmetry: `m[i][j] == m[j][i]` bit for bit.
    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (i + 1..self.cols).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        Error::check_dim(self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.cols, v.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `self^T v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        Error::check_dim(self.rows, other.rows)?;
        Error::check_dim(self.cols, other.cols)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Copy of the selected columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, cols.len(), |i, j| self[(i, cols[j])])
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    fn require_symmetric(&self) -> Result<()> {
        self.require_square()?;
        if self.is_symmetric() {
            Ok(())
        } else {
            Err(Error::contract("matrix is not symmetric"))
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Eigendecomposition `M = Q diag(values) Q^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: Matrix,
}

impl SymmetricEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Rebuild `Q diag(values) Q^T`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.dim();
        let q = &self.vectors;
        Matrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| q[(i, k)] * self.values[k] * q[(j, k)]).sum()
        })
    }

    /// Indices of eigenpairs with `|value| > tolerance * max(max|value|, 1)`,
    /// in order. Negative eigenvalues count, so these span the range of an
    /// indefinite matrix too.
    pub fn range_indices(&self, tolerance: f64) -> Vec<usize> {
        let cutoff = tolerance * self.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        (0..self.dim())
            .filter(|&k| self.values[k].abs() > cutoff)
            .collect()
    }

    /// Minimum-norm least-squares solution of `M x = target` over the
    /// eigenpairs selected by [`Self::range_indices`].
    pub fn pseudo_solve(&self, target: &[f64], tolerance: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        Error::check_dim(n, target.len())?;
        let mut x = vec![0.0; n];
        for k in self.range_indices(tolerance) {
            let lambda = self.values[k];
            let coef = (0..n)
                .map(|i| self.vectors[(i, k)] * target[i])
                .sum::<f64>()
                / lambda;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coef * self.vectors[(i, k)];
            }
        }
        Ok(x)
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Fails with a contract error on non-square or asymmetric input.
pub fn sym_eigen(m: &Matrix) -> Result<SymmetricEigen> {
    m.require_symmetric()?;
    let n = m.rows();
    if n == 0 {
        return Err(Error::contract("eigendecomposition of an empty matrix"));
    }
    let mut a = m.clone();
    // Eigenvectors accumulate as rows.
    let mut vt = Matrix::identity(n);
    let total: f64 = a.as_slice().iter().map(|x| x * x).sum();
    let negligible = 1e-18 * total.sqrt();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| 2.0 * a[(i, j)] * a[(i, j)])
            .sum();
        if off == 0.0 || off <= total * 1e-34 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() <= negligible {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, &mut vt, p, q, c, s);
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&k| a[(k, k)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| vt[(order[j], i)]);
    Ok(SymmetricEigen { values, vectors })
}

/// Apply the rotation in the `(p, q)` plane to the rows of `a` and `vt`, then
/// mirror rows `p`, `q` of `a` into its columns. The caller fixes the 2×2 block.
fn rotate(a: &mut Matrix, vt: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    rotate_rows(&mut a.data, n, p, q, c, s);
    rotate_rows(&mut vt.data, n, p, q, c, s);
    for k in 0..n {
        a.data[k * n + p] = a.data[p * n + k];
        a.data[k * n + q] = a.data[q * n + k];
    }
}

fn rotate_rows(data: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Default relative rank tolerance for an `n`-dimensional matrix.
pub fn default_rank_tolerance(n: usize) -> f64 {
    1e-10 * n as f64
}

/// Default absolute PSD tolerance given the largest eigenvalue.
pub fn default_psd_tolerance(largest: f64) -> f64 {
    1e-9 * largest.max(1.0)
}

/// Rank, conditioning and definiteness summary of a symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
    pub dimension: usize,
    /// `λ_1 / λ_n` at full rank, `+inf` otherwise.
    #[serde(with = "crate::serde_ext::float")]
    pub condition_number: f64,
    /// `λ_1 / λ_rank`, the conditioning on the numerical range.
    #[serde(with = "crate::serde_ext::float")]
    pub restricted_condition: f64,
    pub min_eigenvalue: f64,
    pub psd: bool,
}

impl SpectralReport {
    /// Report with the default tolerances.
    pub fn of(m: &Matrix) -> Result<Self> {
        let eig = sym_eigen(m)?;
        Ok(Self::from_eigen(&eig))
    }

    pub fn from_eigen(eig: &SymmetricEigen) -> Self {
        let largest = eig.values.first().copied().unwrap_or(0.0);
        Self::from_eigenvalues(
            eig.values.clone(),
            default_rank_tolerance(eig.dim()),
            default_psd_tolerance(largest),
        )
    }

    /// `eigenvalues` must be sorted descending.
    pub fn from_eigenvalues(
        eigenvalues: Vec<f64>,
        rank_tolerance: f64,
        psd_tolerance: f64,
    ) -> Self {
        let dimension = eigenvalues.len();
        let largest = eigenvalues.first().copied().unwrap_or(0.0);
        let cutoff = rank_tolerance * largest.max(1.0);
        let rank = eigenvalues.iter().filter(|&&l| l > cutoff).count();
        let min_eigenvalue = eigenvalues.last().copied().unwrap_or(0.0);
        let restricted_condition = if rank > 0 {
            largest / eigenvalues[rank - 1]
        } else {
            f64::INFINITY
        };
        let condition_number = if rank == dimension && rank > 0 {
            restricted_condition
        } else {
            f64::INFINITY
        };
        SpectralReport {
            eigenvalues,
            rank,
            dimension,
            condition_number,
            restricted_condition,
            min_eigenvalue,
            psd: min_eigenvalue >= -psd_tolerance,
        }
    }

    pub fn full_rank(&self) -> bool {
        self.rank == self.dimension
    }
}

/// Spectral report with explicit tolerances.
pub fn spectral_report(
    m: &Matrix,
    rank_tolerance: f64,
    psd_tolerance: f64,
) -> Result<SpectralReport> {
    let eig = sym_eigen(m)?;
    Ok(SpectralReport::from_eigenvalues(
        eig.values,
        rank_tolerance,
        psd_tolerance,
    ))
}

/// Default pivot tolerance relative to the largest matrix entry.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// LU factorization `P M = L U` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Factor with the default pivot tolerance `1e-12 * max|M|`.
    pub fn factor(m: &Matrix) -> Result<Self> {
        Self::factor_with(m, PIVOT_TOLERANCE)
    }

    /// Factor, failing with `SingularMatrix` as soon as the chosen pivot has
    /// magnitude `<= relative_tolerance * max|M|`.
    pub fn factor_with(m: &Matrix, relative_tolerance: f64) -> Result<Self> {
        m.require_square()?;
        let n = m.rows();
        let threshold = relative_tolerance * m.max_abs();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, mag) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if mag <= threshold || !mag.is_finite() {
                return Err(Error::SingularMatrix {
                    column: k,
                    magnitude: mag,
                    threshold,
                });
            }
            if piv != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let (upper, lower) = lu.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..];
            let pivot = pivot_row[k];
            for row in lower.chunks_exact_mut(n) {
                let factor = row[k] / pivot;
                row[k] = factor;
                if factor == 0.0 {
                    continue;
                }
                for (x, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                    *x -= factor * u;
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n, rhs.len())?;
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        Ok(x)
    }
}

/// Solve `M x = rhs` by LU with partial pivoting.
pub fn solve_linear(m: &Matrix, rhs: &[f64]) -> Result<Vec<f64>> {
    Error::check_dim(m.rows(), rhs.len())?;
    Lu::factor(m)?.solve(rhs)
}

/// Minimum-norm `x` minimizing `‖M x − target‖` for symmetric PSD `M`, via the
/// eigen pseudo-inverse restricted to eigenvalues above
/// `tolerance * max(λ_1, 1)`.
pub fn least_squares_range(m: &Matrix, target: &[f64], tolerance: f64) -> Result<Vec<f64>> {
    Error::check_dim(m.rows(), target.len())?;
    sym_eigen(m)?.pseudo_solve(target, tolerance)
}
