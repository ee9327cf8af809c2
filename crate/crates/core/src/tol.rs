//! Numerical tolerances shared by every module.
//!
//! All values are absolute and assume unit-scale data unless noted.

/// Membership and idempotency checks.
pub const TOL_LIN: f64 = 1e-10;

/// Post-solve residual above which a constraint system is declared empty.
pub const TOL_FEAS: f64 = 1e-8;

/// Singular values below `TOL_RANK * sigma_max` are treated as zero.
pub const TOL_RANK: f64 = 1e-12;

/// Relative size below which a generated hyperplane normal counts as zero.
pub const TOL_ZERO_NORMAL: f64 = 1e-10;

/// Rank cutoff for the unit normals of a solver window.
pub const TOL_WINDOW_RANK: f64 = 1e-10;

/// Two unit normals with `|cos| >= 1 - TOL_PARALLEL` are duplicates.
pub const TOL_PARALLEL: f64 = 1e-12;
