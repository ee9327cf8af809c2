//! Dense real linear algebra: points, matrices and minimum-norm solves.
//!
//! Every point of the working Hilbert space is an `R^n` vector. Matrices that
//! play the role of points (the MMUP variable) are flattened row-major, so the
//! Frobenius inner product is the plain dot product of the flattened entries.

use std::fmt;
use std::ops::Index;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::tol::TOL_RANK;

/// An element of the working space `R^n`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    /// Builds a point, rejecting empty input and non-finite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Wraps a vector produced by internal arithmetic without validation.
    pub(crate) fn from_vec(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Dot product. Both points must share a dimension.
    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sub(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scaled(&self, alpha: f64) -> Point {
        Point(self.0.iter().map(|a| alpha * a).collect())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Point) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub(crate) fn from_dvector(v: &DVector<f64>) -> Point {
        Point(v.iter().copied().collect())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Point").field(&self.0).finish()
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

/// Inner product with a dimension check.
pub fn inner(x: &Point, y: &Point) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    Ok(x.dot(y))
}

/// Dense real matrix. Stored by nalgebra; exposed row-major when flattened.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Builds a `rows x cols` matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        check_dim(rows * cols, entries.len())?;
        if let Some(pos) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            check_dim(cols, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, entries)
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn from_na(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn as_na(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_na(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn row(&self, i: usize) -> Point {
        Point(self.0.row(i).iter().copied().collect())
    }

    /// Row-major flattening.
    pub fn to_point(&self) -> Point {
        Point(self.0.transpose().as_slice().to_vec())
    }

    /// Inverse of [`DenseMatrix::to_point`].
    pub fn from_point(rows: usize, cols: usize, p: &Point) -> Result<Self> {
        check_dim(rows * cols, p.dim())?;
        Ok(Self(DMatrix::from_row_slice(rows, cols, p.as_slice())))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        check_dim(self.cols(), other.rows())?;
        Ok(Self(&self.0 * &other.0))
    }

    pub fn mul_vec(&self, x: &Point) -> Result<Point> {
        check_dim(self.cols(), x.dim())?;
        Ok(Point::from_dvector(&(&self.0 * x.to_dvector())))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows() == self.cols() && (&self.0 - self.0.transpose()).amax() <= tol
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{}) {:?}", self.rows(), self.cols(), self.0.as_slice())
    }
}

impl TryFrom<Vec<Vec<f64>>> for DenseMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        DenseMatrix::from_rows(&rows)
    }
}

impl From<DenseMatrix> for Vec<Vec<f64>> {
    fn from(m: DenseMatrix) -> Self {
        m.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Thin SVD with the numerically-zero singular triplets removed.
///
/// For `C = U S V^T` only the triplets with `s > TOL_RANK * s_max` are kept,
/// so `u` is `m x r`, `v` is `n x r` and `sigma` has length `r`.
///
/// The right singular vectors of the tall orientation `B` (`C` or `C^T`) come
/// from nalgebra and, for up to [`JACOBI_MAX_COLS`] columns, are polished by
/// one-sided Jacobi sweeps on `B V`. nalgebra's bidiagonal iteration alone can
/// leave `|U S V^T - C|` near `1e-11 |C|` when singular values cluster; the
/// sweeps bring it back to a few ulps.
#[derive(Debug, Clone)]
pub(crate) struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// Sweep cap for [`jacobi_polish`]; a handful suffice from a good start.
const JACOBI_MAX_SWEEPS: usize = 30;

/// Widest orientation that gets polished. Each sweep costs `O(q^2 p)`, which
/// beyond this dominates the decomposition itself.
const JACOBI_MAX_COLS: usize = 512;

/// Rotates column pairs of `g` (and `w` alongside) until all columns are
/// mutually orthogonal to working precision.
fn jacobi_polish(g: &mut DMatrix<f64>, w: &mut DMatrix<f64>) {
    let q = g.ncols();
    let mut norms: Vec<f64> = (0..q).map(|k| g.column(k).norm_squared()).collect();
    let tiny = f64::MIN_POSITIVE / f64::EPSILON;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let (alpha, beta) = (norms[i], norms[j]);
                if alpha <= tiny || beta <= tiny {
                    continue;
                }
                let (gi, gj) = column_pair(g, i, j);
                let gamma: f64 = gi.iter().zip(gj.iter()).map(|(a, b)| a * b).sum();
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(gi, gj, c, s);
                let (wi, wj) = column_pair(w, i, j);
                rotate(wi, wj, c, s);
                norms[i] = alpha - t * gamma;
                norms[j] = beta + t * gamma;
            }
        }
        if !rotated {
            break;
        }
        // refresh against drift in the incremental updates
        for (k, n) in norms.iter_mut().enumerate() {
            *n = g.column(k).norm_squared();
        }
    }
}

/// Columns `i < j` of a column-major matrix as disjoint mutable slices.
fn column_pair(m: &mut DMatrix<f64>, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
    let rows = m.nrows();
    let (head, tail) = m.as_mut_slice().split_at_mut(j * rows);
    (&mut head[i * rows..(i + 1) * rows], &mut tail[..rows])
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (u, v) = (*x, *y);
        *x = c * u - s * v;
        *y = s * u + c * v;
    }
}

impl TruncatedSvd {
    pub fn new(c: &DMatrix<f64>) -> Self {
        Self::with_tol(c, TOL_RANK)
    }

    /// Keeps the triplets with `s > rel_tol * s_max`.
    pub fn with_tol(c: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (m, n) = c.shape();
        if m == 0 || n == 0 {
            return Self { u: DMatrix::zeros(m, 0), sigma: Vec::new(), v: DMatrix::zeros(n, 0) };
        }
        let wide = m < n;
        let b = if wide { c.transpose() } else { c.clone() };
        let mut w = b.clone().svd(false, true).v_t.expect("requested V^T").transpose();
        // columns of B W are sigma_k times the left singular vectors of B
        let mut g = &b * &w;
        if g.ncols() <= JACOBI_MAX_COLS {
            jacobi_polish(&mut g, &mut w);
        }

        let norms: Vec<f64> = (0..g.ncols()).map(|k| g.column(k).norm()).collect();
        let s_max = norms.iter().copied().fold(0.0, f64::max);
        let mut keep: Vec<usize> = (0..norms.len()).filter(|&k| s_max > 0.0 && norms[k] > rel_tol * s_max).collect();
        keep.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        let sigma: Vec<f64> = keep.iter().map(|&k| norms[k]).collect();
        let mut left = g.select_columns(keep.iter());
        for (k, s) in sigma.iter().enumerate() {
            left.column_mut(k).unscale_mut(*s);
        }
        let right = w.select_columns(keep.iter());
        if wide {
            Self { u: right, sigma, v: left }
        } else {
            Self { u: left, sigma, v: right }
        }
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `C^+ d = V S^-1 U^T d`
    pub fn pinv_apply(&self, d: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.u.tr_mul(d);
        for (c, s) in coeffs.iter_mut().zip(&self.sigma) {
            *c /= s;
        }
        &self.v * coeffs
    }

    /// `(C C^T)^+ d = U S^-2 U^T d`
    pub fn gram_pinv_apply(&self, d: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.u.tr_mul(d);
        for (c, s) in coeffs.iter_mut().zip(&self.sigma) {
            *c /= s * s;
        }
        &self.u * coeffs
    }
}

/// Minimum-norm least-squares solution of `C x = d`.
///
/// Rank deficiency is handled by truncating singular values below
/// `TOL_RANK * sigma_max`; it is never an error.
pub fn lstsq_min_norm(c: &DenseMatrix, d: &Point) -> Result<Point> {
    check_dim(c.rows(), d.dim())?;
    let svd = TruncatedSvd::new(c.as_na());
    Ok(Point::from_dvector(&svd.pinv_apply(&d.to_dvector())))
}

/// Stacks points as the rows of a matrix.
pub(crate) fn stack_rows(vectors: &[&Point], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(vectors.len(), dim, |i, j| vectors[i][j])
}

/// Coefficients `lambda` of the minimum-norm combination `sum lambda_j a_j`
/// whose inner products with the `a_j` reproduce `rhs` in the least-squares
/// sense, i.e. `lambda = G^+ rhs` with `G_jk = <a_j, a_k>`.
///
/// The pseudo-inverse is taken through the SVD of the stacked vectors rather
/// than of `G`, which keeps the conditioning of the vectors themselves.
pub fn gram_solve(vectors: &[Point], rhs: &[f64]) -> Result<Vec<f64>> {
    if vectors.is_empty() {
        check_dim(0, rhs.len())?;
        return Ok(Vec::new());
    }
    check_dim(vectors.len(), rhs.len())?;
    let dim = vectors[0].dim();
    for v in vectors {
        check_dim(dim, v.dim())?;
    }
    let refs: Vec<&Point> = vectors.iter().collect();
    let svd = TruncatedSvd::new(&stack_rows(&refs, dim));
    let lambda = svd.gram_pinv_apply(&DVector::from_column_slice(rhs));
    Ok(lambda.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn inner_examples() {
        assert_eq!(inner(&p(&[1.0, 0.0]), &p(&[0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(inner(&p(&[2.0, 3.0]), &p(&[2.0, 3.0])).unwrap(), 13.0);
        // 1*4 + 2*5 + 3*6
        assert_eq!(inner(&p(&[1.0, 2.0, 3.0]), &p(&[4.0, 5.0, 6.0])).unwrap(), 32.0);
    }

    #[test]
    fn inner_rejects_mismatch() {
        assert!(matches!(inner(&p(&[1.0]), &p(&[1.0, 2.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn point_rejects_nonfinite_and_empty() {
        assert!(matches!(Point::new(vec![1.0, f64::NAN]), Err(Error::NonFinite(1))));
        assert!(matches!(Point::new(vec![]), Err(Error::Empty)));
        assert!(DenseMatrix::new(1, 2, vec![0.0, f64::INFINITY]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn lstsq_examples() {
        let x = lstsq_min_norm(&DenseMatrix::identity(2), &p(&[3.0, 4.0])).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[3.0, 4.0][..], epsilon = 1e-12);

        let dup = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let x = lstsq_min_norm(&dup, &p(&[2.0, 2.0])).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[2.0, 0.0][..], epsilon = 1e-12);

        // normal-equation oracle C^T (C C^T)^-1 d = (1,1)^T * (1/2) * 2
        let c = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let x = lstsq_min_norm(&c, &p(&[2.0])).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[1.0, 1.0][..], epsilon = 1e-12);
    }

    #[test]
    fn gram_solve_examples() {
        let l = gram_solve(&[p(&[1.0, 0.0])], &[2.0]).unwrap();
        assert_abs_diff_eq!(l.as_slice(), &[2.0][..], epsilon = 1e-12);

        let l = gram_solve(&[p(&[1.0, 0.0]), p(&[0.0, 1.0])], &[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(l.as_slice(), &[3.0, 4.0][..], epsilon = 1e-12);

        let l = gram_solve(&[p(&[1.0, 0.0]), p(&[1.0, 0.0])], &[2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(l.as_slice(), &[1.0, 1.0][..], epsilon = 1e-12);
        // sum lambda_j a_j equals the single-hyperplane correction (2, 0)
        assert_abs_diff_eq!(l[0] + l[1], 2.0, epsilon = 1e-12);

        assert!(gram_solve(&[], &[]).unwrap().is_empty());
    }

    fn reconstruction_error(c: &DMatrix<f64>) -> f64 {
        let svd = TruncatedSvd::new(c);
        let s = DMatrix::from_diagonal(&DVector::from_vec(svd.sigma.clone()));
        (&svd.u * s * svd.v.transpose() - c).norm() / c.norm()
    }

    #[test]
    fn svd_is_accurate_with_clustered_singular_values() {
        let c = DMatrix::from_row_slice(
            3,
            3,
            &[
                4.66223291700559,
                1.686581357850936,
                0.11202448274474594,
                -0.11349786343988291,
                -4.195138370875024,
                2.6259612609066565,
                -3.1143468625883175,
                2.3371151886316732,
                -0.5111305203281712,
            ],
        );
        assert!(reconstruction_error(&c) < 1e-15);
        for shape in [(2, 5), (5, 2), (4, 4)] {
            let m = DMatrix::from_fn(shape.0, shape.1, |i, j| ((i * 31 + j * 17) % 11) as f64 - 5.0 + 0.1 * j as f64);
            assert!(reconstruction_error(&m) < 1e-14, "{shape:?}");
            let svd = TruncatedSvd::new(&m);
            let r = svd.rank();
            assert!((svd.u.tr_mul(&svd.u) - DMatrix::identity(r, r)).norm() < 1e-14);
            assert!((svd.v.tr_mul(&svd.v) - DMatrix::identity(r, r)).norm() < 1e-14);
            assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_truncates_rank() {
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let svd = TruncatedSvd::new(&c);
        assert_eq!(svd.rank(), 1);
        assert!(reconstruction_error(&c) < 1e-15);
    }

    #[test]
    fn flatten_is_row_major() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.to_point().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(DenseMatrix::from_point(2, 2, &m.to_point()).unwrap(), m);
        assert_abs_diff_eq!(m.frobenius_norm(), m.to_point().norm(), epsilon = 1e-14);
    }

    #[test]
    fn matrix_serde_is_nested_rows() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: DenseMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
