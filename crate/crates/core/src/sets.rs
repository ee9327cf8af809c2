//! Closed affine subspaces and their exact projectors.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{stack_rows, DenseMatrix, Point, TruncatedSvd};
use crate::tol::{TOL_FEAS, TOL_RANK, TOL_ZERO_NORMAL};

/// `{x : <normal, x> = offset}`. A zero normal denotes the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    normal: Point,
    offset: f64,
}

impl Hyperplane {
    pub fn new(normal: Point, offset: f64) -> Self {
        let offset = if normal.norm_sq() == 0.0 { 0.0 } else { offset };
        Self { normal, offset }
    }

    pub fn whole_space(dim: usize) -> Self {
        Self::new(Point::zeros(dim), 0.0)
    }

    pub fn normal(&self) -> &Point {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.dim()
    }

    pub fn is_whole_space(&self) -> bool {
        self.normal.norm_sq() == 0.0
    }

    /// Signed distance `(<a, x> - b) / |a|`; zero for the whole space.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        let n = self.normal.norm();
        if n == 0.0 {
            0.0
        } else {
            (self.normal.dot(x) - self.offset) / n
        }
    }
}

/// Projection onto a single hyperplane.
pub fn project_hyperplane(x: &Point, h: &Hyperplane) -> Result<Point> {
    check_dim(h.dim(), x.dim())?;
    let nsq = h.normal.norm_sq();
    let mut out = x.clone();
    if nsq > 0.0 {
        out.axpy((h.offset - h.normal.dot(x)) / nsq, &h.normal);
    }
    Ok(out)
}

/// Result of projecting onto an intersection of hyperplanes.
#[derive(Debug, Clone)]
pub struct IntersectionProjection {
    pub point: Point,
    /// `point - x = sum_j coefficients[j] * normal_j`, one entry per input
    /// hyperplane. Whole-space hyperplanes get a zero coefficient.
    pub coefficients: Vec<f64>,
}

/// Projection onto `H_1 ∩ ... ∩ H_m`, with the multipliers of each normal.
///
/// Normals are scaled to unit length before the minimum-norm solve, so tiny
/// normals produced near convergence do not dominate the conditioning.
pub fn project_onto_hyperplanes(x: &Point, hs: &[&Hyperplane]) -> Result<IntersectionProjection> {
    project_onto_hyperplanes_with(x, hs, TOL_RANK)
}

/// [`project_onto_hyperplanes`] with directions of the unit normals whose
/// singular value is below `rank_tol * sigma_max` left unconstrained.
pub(crate) fn project_onto_hyperplanes_with(
    x: &Point,
    hs: &[&Hyperplane],
    rank_tol: f64,
) -> Result<IntersectionProjection> {
    let dim = x.dim();
    let mut active = Vec::with_capacity(hs.len());
    let mut units = Vec::with_capacity(hs.len());
    let mut rhs = Vec::with_capacity(hs.len());
    for (j, h) in hs.iter().enumerate() {
        check_dim(dim, h.dim())?;
        let n = h.normal.norm();
        if n == 0.0 {
            continue;
        }
        let unit = h.normal.scaled(1.0 / n);
        rhs.push(h.offset / n - unit.dot(x));
        units.push(unit);
        active.push((j, n));
    }
    let mut coefficients = vec![0.0; hs.len()];
    if units.is_empty() {
        return Ok(IntersectionProjection { point: x.clone(), coefficients });
    }

    let refs: Vec<&Point> = units.iter().collect();
    let svd = TruncatedSvd::with_tol(&stack_rows(&refs, dim), rank_tol);
    let lambda = svd.gram_pinv_apply(&DVector::from_column_slice(&rhs));

    let mut point = x.clone();
    for ((unit, l), (j, n)) in units.iter().zip(lambda.iter()).zip(&active) {
        point.axpy(*l, unit);
        coefficients[*j] = l / n;
    }

    let scale = 1.0 + x.norm();
    let worst = units.iter().zip(&rhs).map(|(u, r)| (u.dot(&point) - u.dot(x) - r).abs()).fold(0.0, f64::max);
    if worst > TOL_FEAS * scale {
        return Err(Error::InfeasibleIntersection { residual: worst });
    }
    Ok(IntersectionProjection { point, coefficients })
}

/// Projection onto the intersection of the given hyperplanes.
pub fn project_hyperplane_intersection(x: &Point, hs: &[Hyperplane]) -> Result<Point> {
    let refs: Vec<&Hyperplane> = hs.iter().collect();
    project_onto_hyperplanes(x, &refs).map(|r| r.point)
}

/// `{x : C x = d}` with a cached truncated SVD of `C`.
///
/// Projection subtracts the minimum-norm correction `C^+ (C x - d)`, which
/// lies in `range(C^T)` and so is orthogonal to the set.
#[derive(Debug, Clone)]
pub struct RowConstraint {
    matrix: DenseMatrix,
    rhs: Point,
    svd: TruncatedSvd,
    particular: Point,
}

impl RowConstraint {
    pub fn new(matrix: DenseMatrix, rhs: Point) -> Result<Self> {
        check_dim(matrix.rows(), rhs.dim())?;
        let svd = TruncatedSvd::new(matrix.as_na());
        let particular = Point::from_dvector(&svd.pinv_apply(&rhs.to_dvector()));
        let residual = matrix.mul_vec(&particular)?.distance(&rhs);
        if residual > TOL_FEAS * (1.0 + rhs.norm()) {
            return Err(Error::InfeasibleSet { residual });
        }
        Ok(Self { matrix, rhs, svd, particular })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &Point {
        &self.rhs
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    /// Codimension of the set.
    pub fn rank(&self) -> usize {
        self.svd.rank()
    }

    /// The minimum-norm member `C^+ d`.
    pub fn particular(&self) -> &Point {
        &self.particular
    }

    /// `x - C^+ (C x - d)`. Members of the set are left exactly in place.
    pub fn project(&self, x: &Point) -> Point {
        let xv = x.to_dvector();
        let r = self.matrix.as_na() * &xv - self.rhs.to_dvector();
        Point::from_dvector(&(xv - self.svd.pinv_apply(&r)))
    }
}

/// Projection onto `{x : C x = d}`.
pub fn project_row_constraint(x: &Point, c: &DenseMatrix, d: &Point) -> Result<Point> {
    check_dim(c.cols(), x.dim())?;
    Ok(RowConstraint::new(c.clone(), d.clone())?.project(x))
}

/// An affine set with a closed-form projector supplied by the caller.
pub trait StructuredSet: Debug + Send + Sync {
    fn dim(&self) -> usize;

    /// Exact orthogonal projection. `x.dim()` equals `self.dim()`.
    fn project(&self, x: &Point) -> Point;

    /// Distance to the set.
    fn residual(&self, x: &Point) -> f64 {
        x.distance(&self.project(x))
    }

    /// `(C, d)` with `{x : C x = d}` equal to this set, when available.
    fn row_constraints(&self) -> Option<(DenseMatrix, Point)> {
        None
    }

    fn label(&self) -> &str {
        "custom"
    }
}

/// A closed affine subspace of `R^n`.
#[derive(Debug, Clone)]
pub enum AffineSet {
    Rows(Arc<RowConstraint>),
    Hyperplane(Hyperplane),
    Custom(Arc<dyn StructuredSet>),
}

impl AffineSet {
    pub fn rows(matrix: DenseMatrix, rhs: Point) -> Result<Self> {
        Ok(Self::Rows(Arc::new(RowConstraint::new(matrix, rhs)?)))
    }

    pub fn custom<S: StructuredSet + 'static>(set: S) -> Self {
        Self::Custom(Arc::new(set))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Rows(r) => r.dim(),
            Self::Hyperplane(h) => h.dim(),
            Self::Custom(c) => c.dim(),
        }
    }

    pub fn project(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x.dim())?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &Point) -> Point {
        match self {
            Self::Rows(r) => r.project(x),
            Self::Hyperplane(h) => project_hyperplane(x, h).expect("dimension checked"),
            Self::Custom(c) => c.project(x),
        }
    }

    /// `(C, d)` describing the set, if the set can export one.
    pub fn row_constraints(&self) -> Option<(DenseMatrix, Point)> {
        match self {
            Self::Rows(r) => Some((r.matrix.clone(), r.rhs.clone())),
            Self::Hyperplane(h) => {
                let dim = h.dim();
                Some((DenseMatrix::new(1, dim, h.normal.as_slice().to_vec()).ok()?, Point::from_vec(vec![h.offset])))
            }
            Self::Custom(c) => c.row_constraints(),
        }
    }
}

/// `|x - P(x)|`; zero exactly for members up to rounding.
pub fn residual(set: &AffineSet, x: &Point) -> f64 {
    match set {
        AffineSet::Custom(c) => c.residual(x),
        AffineSet::Hyperplane(h) => h.signed_distance(x).abs(),
        _ => x.distance(&set.project_unchecked(x)),
    }
}

/// Returns `true` when `a` is negligible next to the point it was taken from.
pub(crate) fn is_negligible_normal(a: &Point, reference: &Point) -> bool {
    a.norm() <= TOL_ZERO_NORMAL * (1.0 + reference.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol::TOL_LIN;
    use approx::assert_abs_diff_eq;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn h(a: &[f64], b: f64) -> Hyperplane {
        Hyperplane::new(p(a), b)
    }

    #[test]
    fn roundoff_sized_normals_are_negligible() {
        let x = Point::new(vec![100.0, 0.0]).unwrap();
        assert!(is_negligible_normal(&Point::new(vec![1e-9, 0.0]).unwrap(), &x));
        assert!(!is_negligible_normal(&Point::new(vec![1e-7, 0.0]).unwrap(), &x));
        assert!(is_negligible_normal(&Point::zeros(2), &Point::zeros(2)));
    }

    #[test]
    fn hyperplane_examples() {
        let x = project_hyperplane(&p(&[2.0, 0.0]), &h(&[1.0, 0.0], 1.0)).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[1.0, 0.0][..], epsilon = 1e-15);

        let on = p(&[1.0, 7.0]);
        assert_eq!(project_hyperplane(&on, &h(&[1.0, 0.0], 1.0)).unwrap(), on);

        let x = project_hyperplane(&p(&[1.0, 1.0]), &h(&[0.0, 0.0], 0.0)).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);
        assert!(project_hyperplane(&p(&[1.0]), &h(&[1.0, 0.0], 0.0)).is_err());
    }

    #[test]
    fn zero_normal_forces_zero_offset() {
        let w = Hyperplane::new(Point::zeros(3), 5.0);
        assert!(w.is_whole_space());
        assert_eq!(w.offset(), 0.0);
        assert_eq!(w.signed_distance(&p(&[1.0, 2.0, 3.0])), 0.0);
    }

    #[test]
    fn row_constraint_examples() {
        let c = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let x = project_row_constraint(&p(&[3.0, 5.0]), &c, &p(&[0.0])).unwrap();
        assert_abs_diff_eq!(x.as_slice(), &[0.0, 5.0][..], epsilon = 1e-14);
        let again = project_row_constraint(&x, &c, &p(&[0.0])).unwrap();
        assert_abs_diff_eq!(again.as_slice(), x.as_slice(), epsilon = 1e-14);

        let c = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let x = project_row_constraint(&p(&[0.0, 0.0]), &c, &p(&[2.0])).unwrap();
        let via_h = project_hyperplane(&p(&[0.0, 0.0]), &h(&[1.0, 1.0], 2.0)).unwrap();
        assert_abs_diff_eq!(x.as_slice(), via_h.as_slice(), epsilon = 1e-14);
        assert_abs_diff_eq!(x.as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
    }

    #[test]
    fn inconsistent_rows_rejected() {
        let c = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let err = RowConstraint::new(c, p(&[0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::InfeasibleSet { .. }));
    }

    #[test]
    fn intersection_examples() {
        let single = h(&[1.0, 2.0], 3.0);
        let x = p(&[4.0, -1.0]);
        let a = project_hyperplane_intersection(&x, std::slice::from_ref(&single)).unwrap();
        let b = project_hyperplane(&x, &single).unwrap();
        assert_abs_diff_eq!(a.as_slice(), b.as_slice(), epsilon = 1e-14);

        let x = p(&[1.0, 1.0, 1.0]);
        let hs = [h(&[1.0, 0.0, 0.0], 0.0), h(&[0.0, 1.0, 0.0], 0.0)];
        let y = project_hyperplane_intersection(&x, &hs).unwrap();
        assert_abs_diff_eq!(y.as_slice(), &[0.0, 0.0, 1.0][..], epsilon = 1e-14);

        let dup = [h(&[1.0, 0.0], 1.0), h(&[1.0, 0.0], 1.0)];
        let y = project_hyperplane_intersection(&p(&[3.0, 0.0]), &dup).unwrap();
        assert_abs_diff_eq!(y.as_slice(), &[1.0, 0.0][..], epsilon = 1e-14);
    }

    #[test]
    fn intersection_skips_whole_space_and_reports_coefficients() {
        let hs = [Hyperplane::whole_space(2), h(&[2.0, 0.0], 2.0)];
        let refs: Vec<&Hyperplane> = hs.iter().collect();
        let r = project_onto_hyperplanes(&p(&[3.0, 1.0]), &refs).unwrap();
        assert_abs_diff_eq!(r.point.as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
        assert_eq!(r.coefficients[0], 0.0);
        // (3,1) + c * (2,0) = (1,1)
        assert_abs_diff_eq!(r.coefficients[1], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn inconsistent_family_rejected() {
        let hs = [h(&[1.0, 0.0], 1.0), h(&[1.0, 0.0], 2.0)];
        let err = project_hyperplane_intersection(&p(&[0.0, 0.0]), &hs).unwrap_err();
        assert!(matches!(err, Error::InfeasibleIntersection { .. }));
    }

    #[test]
    fn residual_examples() {
        let hp = AffineSet::Hyperplane(h(&[1.0, 0.0], 1.0));
        assert_abs_diff_eq!(residual(&hp, &p(&[2.0, 0.0])), 1.0, epsilon = 1e-15);
        assert!(residual(&hp, &p(&[1.0, 9.0])) < TOL_LIN);

        let c = DenseMatrix::from_rows(&[vec![1.0, 2.0, 0.0], vec![0.0, 1.0, -1.0]]).unwrap();
        let d = p(&[1.0, 2.0]);
        let set = AffineSet::rows(c.clone(), d.clone()).unwrap();
        let x = p(&[0.3, -2.0, 4.0]);
        // internal consistency with the multiplier form x - C^T lambda
        let r = c.mul_vec(&x).unwrap().sub(&d);
        let rows: Vec<Point> = (0..2).map(|i| c.row(i)).collect();
        let lambda = crate::linalg::gram_solve(&rows, r.as_slice()).unwrap();
        let mut corr = Point::zeros(3);
        for (row, l) in rows.iter().zip(&lambda) {
            corr.axpy(*l, row);
        }
        assert_abs_diff_eq!(residual(&set, &x), corr.norm(), epsilon = 1e-12);
    }
}
