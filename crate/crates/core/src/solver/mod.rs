//! Alternating projections and its two supporting-hyperplane accelerations.
//!
//! * [`run_map`]: cyclic projections `x <- P_{M_l}(x)`.
//! * [`run_alg1`]: after each set projection, record the supporting hyperplane
//!   with normal `x_i - x~_i` and project onto the intersection of a window of
//!   recorded hyperplanes.
//! * [`run_alg2`]: keep iterates in an easy set `M_1` (index 0). Each step goes
//!   through `M_l` and back into `M_1`, records the hyperplane through the
//!   extrapolated point `x+`, and projects onto the window intersected with
//!   `M_1`.
//!
//! Every run records the full interleaved trace and stops once the largest
//! distance to any set drops below [`StoppingRule::stop_tol`].

mod policy;
mod schedule;
mod steps;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{check_condition_b, ConditionReport, FejerSummary, IterationRecord, Phase};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Point;
use crate::sets::{project_onto_hyperplanes, residual, AffineSet, Hyperplane};

pub use policy::{BufferEntry, HyperplaneBuffer, WindowPolicy};
pub use schedule::CyclicSchedule;
pub use steps::{alg1_step, alg2_step, lift_start, Alg1Step, Alg2Step, IterState, StepEvent};

/// Fejér margins above this count as violations in the report.
const FEJER_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Map,
    Alg1,
    Alg2,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Map => "map",
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "map" => Ok(Algorithm::Map),
            "alg1" | "1" => Ok(Algorithm::Alg1),
            "alg2" | "2" => Ok(Algorithm::Alg2),
            other => Err(Error::Parse(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    /// Stop once `max_l residual(M_l, x_i) <= stop_tol`.
    pub stop_tol: f64,
    /// Cap on outer iterations (set projections for MAP).
    pub max_iter: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self { stop_tol: 1e-10, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub stop: StoppingRule,
    /// Fill in a [`ConditionReport`]. Costs extra projections per step.
    pub monitors: bool,
    /// Keep every trace point in its record.
    pub keep_points: bool,
    /// `P_M(x0)`, when known. Enables distance-to-oracle and Fejér tracking.
    pub oracle: Option<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ResidualMet,
    MaxIter,
    /// The iterate stopped being finite.
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solution: Point,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub final_residuals: Vec<f64>,
    pub events: Vec<(usize, StepEvent)>,
    pub report: Option<ConditionReport>,
}

impl SolveResult {
    pub fn residual_max(&self) -> f64 {
        self.final_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// Number of projections onto set `l` in the trace.
    pub fn projections_onto(&self, l: usize) -> usize {
        self.trace.iter().filter(|r| r.phase == Phase::SetProjection && r.set_index == Some(l)).count()
    }
}

/// Full solver configuration for [`solve`].
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub policy: WindowPolicy,
    /// Custom visiting order; cyclic when absent.
    pub schedule: Option<CyclicSchedule>,
    pub options: SolveOptions,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, policy: WindowPolicy) -> Self {
        Self { algorithm, policy, schedule: None, options: SolveOptions::default() }
    }
}

/// Dispatches to the configured algorithm.
pub fn solve(sets: &[AffineSet], x0: &Point, config: &SolverConfig) -> Result<SolveResult> {
    let k = sets.len();
    match config.algorithm {
        Algorithm::Map => {
            let schedule = config.schedule.clone().unwrap_or_else(|| CyclicSchedule::cyclic(k));
            run_map(sets, x0, schedule, &config.options)
        }
        Algorithm::Alg1 => {
            let schedule = config.schedule.clone().unwrap_or_else(|| CyclicSchedule::cyclic(k));
            run_alg1(sets, x0, schedule, config.policy, &config.options)
        }
        Algorithm::Alg2 => {
            let schedule = config.schedule.clone().unwrap_or_else(|| CyclicSchedule::skipping_first(k));
            run_alg2(sets, x0, schedule, config.policy, &config.options)
        }
    }
}

fn validate(sets: &[AffineSet], x0: &Point) -> Result<()> {
    if sets.is_empty() {
        return Err(Error::InvalidProblem("no sets given".into()));
    }
    for s in sets {
        check_dim(x0.dim(), s.dim())?;
    }
    Ok(())
}

/// Builds the trace and the monitor report as points arrive.
struct Recorder<'a> {
    sets: &'a [AffineSet],
    opts: &'a SolveOptions,
    x0: Point,
    trace: Vec<IterationRecord>,
    prev: Option<Point>,
    sum_sq: f64,
    report: Option<ConditionReport>,
    events: Vec<(usize, StepEvent)>,
}

impl<'a> Recorder<'a> {
    fn new(sets: &'a [AffineSet], opts: &'a SolveOptions, x0: &Point) -> Self {
        let report = opts.monitors.then(|| ConditionReport {
            fejer: opts.oracle.as_ref().map(|_| FejerSummary { violations: 0, worst_margin: f64::NEG_INFINITY }),
            ..ConditionReport::default()
        });
        Self { sets, opts, x0: x0.clone(), trace: Vec::new(), prev: None, sum_sq: 0.0, report, events: Vec::new() }
    }

    /// Appends a trace point and returns its largest set residual.
    fn record(&mut self, index: usize, phase: Phase, set_index: Option<usize>, point: &Point) -> f64 {
        let per_set_residuals: Vec<f64> = self.sets.iter().map(|s| residual(s, point)).collect();
        let step_norm = self.prev.as_ref().map_or(0.0, |p| p.distance(point));
        let distance_to_oracle = self.opts.oracle.as_ref().map(|m| m.distance(point));

        if let Some(report) = self.report.as_mut() {
            if let (Some(m), Some(prev)) = (self.opts.oracle.as_ref(), self.prev.as_ref()) {
                let margin = point.distance(m) - prev.distance(m);
                let fejer = report.fejer.get_or_insert_with(FejerSummary::default);
                if margin > FEJER_SLACK {
                    fejer.violations += 1;
                }
                fejer.worst_margin = fejer.worst_margin.max(margin);
            }
            if self.prev.is_some() {
                self.sum_sq += step_norm * step_norm;
                report.sum_of_squares.push(self.sum_sq);
            }
        }

        let record = IterationRecord {
            index,
            phase,
            set_index,
            step_norm,
            per_set_residuals,
            distance_to_oracle,
            point: self.opts.keep_points.then(|| point.clone()),
        };
        let r = record.residual_max();
        self.trace.push(record);
        self.prev = Some(point.clone());
        r
    }

    /// Condition-B residual at `x_i` for its window, and the orthogonality
    /// `<x0 - x_{i+1}, x_{i+1} - m>` against the oracle member when known.
    fn condition_b(&mut self, start: &Point, normals: &[Point], next: &Point) {
        let Some(report) = self.report.as_mut() else { return };
        report.condition_b_residuals.push(check_condition_b(&self.x0, start, normals));
        if let Some(m) = self.opts.oracle.as_ref() {
            report.condition_b_inner.push(self.x0.sub(next).dot(&next.sub(m)));
        }
    }

    fn finish(mut self, x: Point, iterations: usize, stop_reason: StopReason) -> SolveResult {
        if let Some(f) = self.report.as_mut().and_then(|r| r.fejer.as_mut()) {
            if f.worst_margin == f64::NEG_INFINITY {
                f.worst_margin = 0.0;
            }
        }
        let final_residuals = self.sets.iter().map(|s| residual(s, &x)).collect();
        SolveResult {
            solution: x,
            iterations,
            trace: self.trace,
            converged: stop_reason == StopReason::ResidualMet,
            stop_reason,
            final_residuals,
            events: self.events,
            report: self.report,
        }
    }
}

/// Cyclic projections `x <- P_{M_l}(x)` in schedule order.
pub fn run_map(
    sets: &[AffineSet],
    x0: &Point,
    mut schedule: CyclicSchedule,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    validate(sets, x0)?;
    schedule.validate(0, sets.len())?;
    let mut rec = Recorder::new(sets, opts, x0);
    let mut x = x0.clone();
    if rec.record(0, Phase::Initial, None, &x) <= opts.stop.stop_tol {
        return Ok(rec.finish(x, 0, StopReason::ResidualMet));
    }
    for it in 0..opts.stop.max_iter {
        let l = schedule.next_index();
        let next = sets[l].project_unchecked(&x);
        let step_sq = x.distance(&next).powi(2);
        x = next;
        let r = rec.record(it, Phase::SetProjection, Some(l), &x);
        if let Some(report) = rec.report.as_mut() {
            if step_sq > 0.0 {
                // the whole step belongs to M_l and there is no correction
                report.b_prime_ratios.push(1.0);
            }
        }
        if !x.is_finite() {
            return Ok(rec.finish(x, it + 1, StopReason::Infeasible));
        }
        if r <= opts.stop.stop_tol {
            return Ok(rec.finish(x, it + 1, StopReason::ResidualMet));
        }
    }
    Ok(rec.finish(x, opts.stop.max_iter, StopReason::MaxIter))
}

/// First accelerated algorithm.
pub fn run_alg1(
    sets: &[AffineSet],
    x0: &Point,
    schedule: CyclicSchedule,
    policy: WindowPolicy,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    validate(sets, x0)?;
    schedule.validate(0, sets.len())?;
    let mut rec = Recorder::new(sets, opts, x0);
    let mut state = IterState::new(x0.clone(), schedule);
    let mut buffer = HyperplaneBuffer::new(policy);
    if rec.record(0, Phase::Initial, None, x0) <= opts.stop.stop_tol {
        return Ok(rec.finish(state.x, 0, StopReason::ResidualMet));
    }
    for it in 0..opts.stop.max_iter {
        let step = alg1_step(&mut state, sets, &mut buffer);
        rec.record(it, Phase::SetProjection, Some(step.set_index), &step.projected);
        let r = rec.record(it, Phase::HyperplaneProjection, None, &step.next);
        if let Some(e) = step.event {
            rec.events.push((it, e));
        }
        if opts.monitors {
            rec.condition_b(&step.start, &step.selected_normals, &step.next);
            if let Some(report) = rec.report.as_mut() {
                report
                    .b_prime_ratios
                    .extend(crate::diagnostics::check_b_prime(std::slice::from_ref(&step.decomposition)));
            }
        }
        if !state.x.is_finite() {
            return Ok(rec.finish(state.x, it + 1, StopReason::Infeasible));
        }
        if r <= opts.stop.stop_tol {
            return Ok(rec.finish(state.x, it + 1, StopReason::ResidualMet));
        }
    }
    Ok(rec.finish(state.x, opts.stop.max_iter, StopReason::MaxIter))
}

/// Second accelerated algorithm. Set 0 is the easy set; `x0` is first lifted
/// onto it.
pub fn run_alg2(
    sets: &[AffineSet],
    x0: &Point,
    schedule: CyclicSchedule,
    policy: WindowPolicy,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    validate(sets, x0)?;
    let mut rec = Recorder::new(sets, opts, x0);
    rec.record(0, Phase::Initial, None, x0);
    let lifted = lift_start(x0, &sets[0])?;
    let r = rec.record(0, Phase::M1Projection, Some(0), &lifted);
    // the algorithm's own starting point is the lifted one
    rec.x0 = lifted.clone();
    if r <= opts.stop.stop_tol || sets.len() == 1 {
        let reason = if r <= opts.stop.stop_tol { StopReason::ResidualMet } else { StopReason::MaxIter };
        return Ok(rec.finish(lifted, 0, reason));
    }
    schedule.validate(1, sets.len())?;

    let mut state = IterState::new(lifted, schedule);
    let mut buffer = HyperplaneBuffer::new(policy);
    for it in 0..opts.stop.max_iter {
        let step = alg2_step(&mut state, sets, &mut buffer);
        rec.record(it, Phase::SetProjection, Some(step.set_index), &step.after_set);
        rec.record(it, Phase::M1Projection, Some(0), &step.after_m1);
        let r = rec.record(it, Phase::HyperplaneProjection, None, &step.next);
        if let Some(e) = step.event {
            rec.events.push((it, e));
        }
        if opts.monitors {
            rec.condition_b(&step.start, &step.selected_normals, &step.next);
            let gap = equal_projection_gap(&step, &buffer);
            let m1 = residual(&sets[0], &step.next);
            if let Some(report) = rec.report.as_mut() {
                if let Some(g) = gap {
                    report.equal_projection_gaps.push(g);
                }
                report.m1_residuals.push(m1);
            }
        }
        if !state.x.is_finite() {
            return Ok(rec.finish(state.x, it + 1, StopReason::Infeasible));
        }
        if r <= opts.stop.stop_tol {
            return Ok(rec.finish(state.x, it + 1, StopReason::ResidualMet));
        }
    }
    Ok(rec.finish(state.x, opts.stop.max_iter, StopReason::MaxIter))
}

/// `|P_H(x_i) - x_{i+1}|` for the window actually used; `x_i - x''_i` is a
/// normal of the window so both projections coincide.
fn equal_projection_gap(step: &Alg2Step, buffer: &HyperplaneBuffer) -> Option<f64> {
    if step.selected.is_empty() {
        return None;
    }
    let hs: Vec<&Hyperplane> = step.selected.iter().filter_map(|g| buffer.get(*g).map(|e| &e.hyperplane)).collect();
    let from_start = project_onto_hyperplanes(&step.start, &hs).ok()?;
    Some(from_start.point.distance(&step.next))
}
