//! Best approximation in an intersection of affine subspaces by alternating
//! projections, accelerated with supporting hyperplanes.
//!
//! The building blocks:
//!
//! * [`linalg`]: points, dense matrices, minimum-norm least squares;
//! * [`sets`]: hyperplanes, row-constrained affine sets and structured sets
//!   with closed-form projectors;
//! * [`solver`]: plain alternating projections and the two accelerated
//!   schemes with their window policies;
//! * [`diagnostics`]: traces and convergence monitors;
//! * [`oracle`]: the direct projection used as ground truth;
//! * [`mmup`]: the quadratic-pencil model updating application;
//! * [`batch`]: independent runs executed together, in parallel when the
//!   `parallel` feature is on.
//!
//! ```
//! use affproj::linalg::{DenseMatrix, Point};
//! use affproj::sets::AffineSet;
//! use affproj::solver::{solve, Algorithm, SolverConfig, WindowPolicy};
//!
//! // the x-axis and the diagonal in the plane meet only at the origin
//! let axis = AffineSet::rows(DenseMatrix::new(1, 2, vec![0.0, 1.0])?, Point::zeros(1))?;
//! let diag = AffineSet::rows(DenseMatrix::new(1, 2, vec![1.0, -1.0])?, Point::zeros(1))?;
//! let x0 = Point::new(vec![3.0, 1.0])?;
//! let result = solve(&[axis, diag], &x0, &SolverConfig::new(Algorithm::Alg1, WindowPolicy::All))?;
//! assert!(result.solution.norm() < 1e-10);
//! # Ok::<(), affproj::Error>(())
//! ```

pub mod batch;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod mmup;
pub mod oracle;
pub mod random;
pub mod sets;
pub mod solver;
pub mod tol;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, Point};
pub use sets::{AffineSet, Hyperplane};
pub use solver::{solve, Algorithm, SolveResult, SolverConfig, WindowPolicy};
