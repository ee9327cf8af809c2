//! Ground truth `P_M(x0)` by one dense minimum-norm solve on all constraints.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Point};
use crate::sets::{AffineSet, RowConstraint};

/// Largest stacked system the oracle accepts.
pub const ORACLE_ROW_LIMIT: usize = 5000;

/// Every set's `C_l x = d_l` stacked into one system `C x = d`.
#[derive(Debug, Clone)]
pub struct StackedConstraints {
    pub matrix: DenseMatrix,
    pub rhs: Point,
}

impl StackedConstraints {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }
}

/// Stacks the row-constraint exports of all sets.
pub fn stack(sets: &[AffineSet]) -> Result<StackedConstraints> {
    let mut blocks = Vec::with_capacity(sets.len());
    for (i, s) in sets.iter().enumerate() {
        blocks.push(s.row_constraints().ok_or(Error::UnsupportedOracle(i))?);
    }
    stack_blocks(&blocks)
}

pub(crate) fn stack_blocks(blocks: &[(DenseMatrix, Point)]) -> Result<StackedConstraints> {
    let cols = blocks.first().map(|(c, _)| c.cols()).ok_or(Error::Empty)?;
    let mut entries = Vec::new();
    let mut rhs = Vec::new();
    for (c, d) in blocks {
        crate::error::check_dim(cols, c.cols())?;
        entries.extend(c.to_point().into_vec());
        rhs.extend_from_slice(d.as_slice());
    }
    Ok(StackedConstraints { matrix: DenseMatrix::new(rhs.len(), cols, entries)?, rhs: Point::new(rhs)? })
}

/// `x0 - C^T lambda` with `lambda` the minimum-norm solution of
/// `C C^T lambda = C x0 - d`.
pub fn direct_projection(x0: &Point, sc: &StackedConstraints) -> Result<Point> {
    if sc.rows() > ORACLE_ROW_LIMIT {
        return Err(Error::OracleTooLarge { rows: sc.rows(), limit: ORACLE_ROW_LIMIT });
    }
    crate::error::check_dim(sc.matrix.cols(), x0.dim())?;
    Ok(RowConstraint::new(sc.matrix.clone(), sc.rhs.clone())?.project(x0))
}

/// [`stack`] followed by [`direct_projection`].
pub fn oracle_projection(sets: &[AffineSet], x0: &Point) -> Result<Point> {
    direct_projection(x0, &stack(sets)?)
}
