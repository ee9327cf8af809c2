//! Many independent solves at once.
//!
//! A run owns its state, so runs never share anything mutable. With the
//! `parallel` feature (on by default) [`run_batch`] spreads them over the
//! rayon pool; without it, or through [`run_sequential`], they run one after
//! another. Both return results in job order.

use crate::error::Result;
use crate::linalg::Point;
use crate::sets::AffineSet;
use crate::solver::{solve, SolveResult, SolverConfig};

/// One solve: sets, starting point and configuration.
#[derive(Debug, Clone)]
pub struct Job {
    pub sets: Vec<AffineSet>,
    pub x0: Point,
    pub config: SolverConfig,
}

impl Job {
    pub fn new(sets: Vec<AffineSet>, x0: Point, config: SolverConfig) -> Self {
        Self { sets, x0, config }
    }

    pub fn run(&self) -> Result<SolveResult> {
        solve(&self.sets, &self.x0, &self.config)
    }
}

/// Applies `f` to every item, in order.
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Applies `f` to every item on the rayon pool; output keeps input order.
#[cfg(feature = "parallel")]
pub fn map_parallel<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Without the `parallel` feature this is [`map_sequential`].
#[cfg(not(feature = "parallel"))]
pub fn map_parallel<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_sequential(items, f)
}

pub fn run_sequential(jobs: &[Job]) -> Vec<Result<SolveResult>> {
    map_sequential(jobs, Job::run)
}

pub fn run_parallel(jobs: &[Job]) -> Vec<Result<SolveResult>> {
    map_parallel(jobs, Job::run)
}

/// The default batch runner: parallel when the feature is enabled.
pub fn run_batch(jobs: &[Job]) -> Vec<Result<SolveResult>> {
    if cfg!(feature = "parallel") {
        run_parallel(jobs)
    } else {
        run_sequential(jobs)
    }
}
