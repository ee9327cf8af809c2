//! Iteration traces and runtime monitors for the strong-convergence conditions.
//!
//! None of these prove convergence; they measure, along an actual run, the
//! quantities the convergence argument relies on:
//!
//! * Fejér monotonicity of the interleaved trace with respect to `M`,
//! * the span condition `x0 - x_i ∈ span{a_j : j ∈ J_i}` and its consequence
//!   `<x0 - x_i, x_i - m> = 0`,
//! * the ratio bounded by `K` in the decomposed-step condition,
//! * the running sum of squared step lengths, bounded by `|x0 - m|^2`.

use serde::{Deserialize, Serialize};

use crate::linalg::{stack_rows, Point, TruncatedSvd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// The starting point, before any projection.
    Initial,
    SetProjection,
    HyperplaneProjection,
    M1Projection,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Initial => "initial",
            Phase::SetProjection => "set-projection",
            Phase::HyperplaneProjection => "hyperplane-projection",
            Phase::M1Projection => "m1-projection",
        }
    }
}

/// One point of the interleaved trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Outer iteration `i` that produced this point.
    pub index: usize,
    pub phase: Phase,
    /// Zero-based set index for set projections.
    pub set_index: Option<usize>,
    /// Distance from the previous trace point.
    pub step_norm: f64,
    pub per_set_residuals: Vec<f64>,
    pub distance_to_oracle: Option<f64>,
    #[serde(skip)]
    pub point: Option<Point>,
}

impl IterationRecord {
    pub fn residual_max(&self) -> f64 {
        self.per_set_residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Squared pieces of one Algorithm-1 style step, split by owning set.
///
/// `x_i - x~_i` belongs wholly to the projected set; the hyperplane correction
/// `x~_i - x_{i+1} = sum_j lambda_j a_j` is grouped by the set that generated
/// each `a_j`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StepDecomposition {
    pub set_step_sq: f64,
    pub hyperplane_step_sq: f64,
    /// `|v_{i,l}|^2` for each set `l` that contributed a hyperplane.
    pub hyperplane_parts_sq: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FejerSummary {
    pub violations: usize,
    /// Largest `|x_{t+1} - m| - |x_t - m|` seen; non-positive on a clean run.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Present only when a member of `M` (the oracle solution) was supplied.
    pub fejer: Option<FejerSummary>,
    pub condition_b_residuals: Vec<f64>,
    /// `<x0 - x_i, x_i - m>` for the supplied member `m`.
    pub condition_b_inner: Vec<f64>,
    pub b_prime_ratios: Vec<f64>,
    /// Running sum of squared trace steps.
    pub sum_of_squares: Vec<f64>,
    /// Second-algorithm only: `|P_H(x_i) - P_H(x''_i)|` for the window `H`.
    pub equal_projection_gaps: Vec<f64>,
    /// Second-algorithm only: distance of each main iterate to the easy set.
    pub m1_residuals: Vec<f64>,
}

impl ConditionReport {
    pub fn max_condition_b_residual(&self) -> f64 {
        max_of(&self.condition_b_residuals)
    }

    pub fn max_b_prime_ratio(&self) -> f64 {
        max_of(&self.b_prime_ratios)
    }

    pub fn max_condition_b_inner(&self) -> f64 {
        self.condition_b_inner.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn total_sum_of_squares(&self) -> f64 {
        self.sum_of_squares.last().copied().unwrap_or(0.0)
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Worst Fejér margin `max_t (|x_{t+1} - m| - |x_t - m|)`; `0` for fewer than
/// two points.
pub fn check_fejer(trace: &[Point], m: &Point) -> f64 {
    let dists: Vec<f64> = trace.iter().map(|x| x.distance(m)).collect();
    dists.windows(2).map(|w| w[1] - w[0]).reduce(f64::max).unwrap_or(0.0)
}

/// Distance from `x0 - x_i` to `span(normals)`.
pub fn check_condition_b(x0: &Point, x_i: &Point, normals: &[Point]) -> f64 {
    let diff = x0.sub(x_i);
    let nonzero: Vec<&Point> = normals.iter().filter(|a| a.norm_sq() > 0.0).collect();
    if nonzero.is_empty() {
        return diff.norm();
    }
    let units: Vec<Point> = nonzero.iter().map(|a| a.scaled(1.0 / a.norm())).collect();
    let refs: Vec<&Point> = units.iter().collect();
    let svd = TruncatedSvd::new(&stack_rows(&refs, diff.dim()));
    // V spans the row space of the stacked normals
    let dv = diff.to_dvector();
    let in_span = &svd.v * svd.v.tr_mul(&dv);
    (dv - in_span).norm()
}

/// Ratio of the decomposed-step sum to the squared step lengths, per step.
/// Steps with zero length are skipped.
pub fn check_b_prime(steps: &[StepDecomposition]) -> Vec<f64> {
    steps
        .iter()
        .filter_map(|s| {
            let rhs = s.set_step_sq + s.hyperplane_step_sq;
            if rhs <= 0.0 {
                return None;
            }
            let lhs = s.set_step_sq + s.hyperplane_parts_sq.iter().sum::<f64>();
            Some(lhs / rhs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn fejer_constant_trace_is_zero() {
        let x = p(&[1.0, 2.0]);
        assert_eq!(check_fejer(&[x.clone(), x.clone(), x], &p(&[0.0, 0.0])), 0.0);
        assert_eq!(check_fejer(&[p(&[1.0])], &p(&[0.0])), 0.0);
    }

    #[test]
    fn fejer_detects_corruption() {
        let m = p(&[0.0, 0.0]);
        let trace = [p(&[2.0, 0.0]), p(&[1.0, 0.0]), p(&[3.0, 0.0]), p(&[0.5, 0.0])];
        assert!((check_fejer(&trace, &m) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn condition_b_examples() {
        let x0 = p(&[1.0, 2.0, 3.0]);
        assert_eq!(check_condition_b(&x0, &x0, &[p(&[1.0, 0.0, 0.0])]), 0.0);
        let xi = p(&[1.0, 0.0, 0.0]);
        // x0 - xi = (0, 2, 3); span{e2} leaves (0, 0, 3)
        let r = check_condition_b(&x0, &xi, &[p(&[0.0, 5.0, 0.0])]);
        assert!((r - 3.0).abs() < 1e-14);
        assert!((check_condition_b(&x0, &xi, &[]) - 13f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn b_prime_skips_zero_steps() {
        let steps = [
            StepDecomposition { set_step_sq: 4.0, hyperplane_step_sq: 0.0, hyperplane_parts_sq: vec![] },
            StepDecomposition::default(),
            StepDecomposition { set_step_sq: 1.0, hyperplane_step_sq: 1.0, hyperplane_parts_sq: vec![2.0, 1.0] },
        ];
        let r = check_b_prime(&steps);
        assert_eq!(r, vec![1.0, 2.0]);
    }
}
