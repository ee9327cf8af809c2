use serde::{Deserialize, Serialize};

use crate::diagnostics::StepDecomposition;
use crate::error::Error;
use crate::linalg::Point;
use crate::sets::{is_negligible_normal, project_onto_hyperplanes_with, AffineSet, Hyperplane};
use crate::tol::{TOL_LIN, TOL_WINDOW_RANK};

use super::policy::{BufferEntry, HyperplaneBuffer};
use super::schedule::CyclicSchedule;

/// Mutable state of a run: the current main iterate and the schedule cursor.
#[derive(Debug, Clone)]
pub struct IterState {
    pub x: Point,
    pub iteration: usize,
    pub schedule: CyclicSchedule,
}

impl IterState {
    pub fn new(x: Point, schedule: CyclicSchedule) -> Self {
        Self { x, iteration: 0, schedule }
    }
}

/// Something unusual a step had to work around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepEvent {
    /// The window was numerically inconsistent; the older half was dropped.
    RetriedWithFewer,
    /// Still inconsistent after the retry; the hyperplane correction was skipped.
    FellBack,
    /// `x_i - x''_i` vanished; the step reduced to the composite projection.
    Degenerate,
}

#[derive(Debug, Clone)]
struct Correction {
    point: Point,
    /// `(generation, set_index, coefficient, normal)` for the hyperplanes used.
    used: Vec<(usize, usize, f64, Point)>,
    event: Option<StepEvent>,
}

fn project_window(from: &Point, window: &[&BufferEntry]) -> Result<Correction, Error> {
    let hs: Vec<&Hyperplane> = window.iter().map(|e| &e.hyperplane).collect();
    let r = project_onto_hyperplanes_with(from, &hs, TOL_WINDOW_RANK)?;
    let used = window
        .iter()
        .zip(r.coefficients)
        .map(|(e, c)| (e.generation, e.set_index, c, e.hyperplane.normal().clone()))
        .collect();
    Ok(Correction { point: r.point, used, event: None })
}

/// Projects `from` onto the selected window, dropping the older half once if
/// the family is numerically inconsistent, and skipping the correction if it
/// still is.
fn correct(from: &Point, buffer: &HyperplaneBuffer) -> Correction {
    let window = buffer.select();
    match project_window(from, &window) {
        Ok(c) => c,
        Err(_) => {
            let newer = &window[window.len() / 2..];
            match project_window(from, newer) {
                Ok(mut c) if window.len() > 1 => {
                    c.event = Some(StepEvent::RetriedWithFewer);
                    c
                }
                _ => Correction { point: from.clone(), used: Vec::new(), event: Some(StepEvent::FellBack) },
            }
        }
    }
}

/// Outcome of one step of the first accelerated algorithm.
#[derive(Debug, Clone)]
pub struct Alg1Step {
    pub set_index: usize,
    /// `x_i`
    pub start: Point,
    /// `x~_i = P_{M_l}(x_i)`
    pub projected: Point,
    /// `x_{i+1}`
    pub next: Point,
    pub generation: usize,
    /// Generations forming the window `J_i` that was actually used.
    pub selected: Vec<usize>,
    /// Normals of the window, aligned with `selected`.
    pub selected_normals: Vec<Point>,
    pub decomposition: StepDecomposition,
    pub event: Option<StepEvent>,
}

/// `x_i -> x~_i = P_{M_l}(x_i) -> x_{i+1} = P_{H~_i}(x~_i)` where `H_i` has
/// normal `x_i - x~_i` through `x~_i` and `H~_i` intersects the window.
pub fn alg1_step(state: &mut IterState, sets: &[AffineSet], buffer: &mut HyperplaneBuffer) -> Alg1Step {
    let l = state.schedule.next_index();
    let start = state.x.clone();
    let projected = sets[l].project_unchecked(&start);
    let a = start.sub(&projected);
    let h = if is_negligible_normal(&a, &start) {
        Hyperplane::whole_space(start.dim())
    } else {
        let b = a.dot(&projected);
        Hyperplane::new(a, b)
    };
    let generation = buffer.push(l, h);
    let c = correct(&projected, buffer);

    let k = sets.len();
    let mut parts = vec![Point::zeros(start.dim()); k];
    for (_, set, coef, normal) in &c.used {
        parts[*set].axpy(*coef, normal);
    }
    let decomposition = StepDecomposition {
        set_step_sq: start.distance(&projected).powi(2),
        hyperplane_step_sq: projected.distance(&c.point).powi(2),
        hyperplane_parts_sq: parts.iter().map(Point::norm_sq).collect(),
    };

    state.x = c.point.clone();
    state.iteration += 1;
    Alg1Step {
        set_index: l,
        start,
        projected,
        next: c.point,
        generation,
        selected: c.used.iter().map(|u| u.0).collect(),
        selected_normals: c.used.into_iter().map(|u| u.3).collect(),
        decomposition,
        event: c.event,
    }
}

/// Outcome of one step of the second accelerated algorithm.
#[derive(Debug, Clone)]
pub struct Alg2Step {
    pub set_index: usize,
    /// `x_i`, a member of the easy set.
    pub start: Point,
    /// `x'_i = P_{M_l}(x_i)`
    pub after_set: Point,
    /// `x''_i = P_{M_1}(x'_i)`
    pub after_m1: Point,
    /// `x_{i+1}`
    pub next: Point,
    pub generation: usize,
    pub selected: Vec<usize>,
    pub selected_normals: Vec<Point>,
    pub event: Option<StepEvent>,
}

/// Projects onto the easy set (index 0). The second algorithm starts here.
pub fn lift_start(x0: &Point, m1: &AffineSet) -> Result<Point, Error> {
    m1.project(x0)
}

/// `x_i -> x'_i -> x''_i -> x_{i+1} = P_{H~_i}(x''_i)`.
///
/// `H_i` has normal `a = x_i - x''_i` (a member of the easy set's direction
/// space) and passes through `x+ = x_i - t a` with
/// `t = |x_i - x'_i|^2 / |a|^2`, so `b = <a, x_i> - |x_i - x'_i|^2`.
/// `state.x` must already lie in the easy set. It is projected onto it once
/// more before use: otherwise rounding off the easy set enters the next normal
/// and is amplified by the window solve on every later step.
pub fn alg2_step(state: &mut IterState, sets: &[AffineSet], buffer: &mut HyperplaneBuffer) -> Alg2Step {
    let l = state.schedule.next_index();
    debug_assert!(l >= 1, "the easy set is never scheduled");
    let start = sets[0].project_unchecked(&state.x);
    let after_set = sets[l].project_unchecked(&start);
    let after_m1 = sets[0].project_unchecked(&after_set);
    let a = start.sub(&after_m1);

    let degenerate = a.norm() <= TOL_LIN * (1.0 + start.norm());
    let (generation, c) = if degenerate {
        let generation = buffer.push(l, Hyperplane::whole_space(start.dim()));
        let c = Correction { point: after_m1.clone(), used: Vec::new(), event: Some(StepEvent::Degenerate) };
        (generation, c)
    } else {
        let b = a.dot(&start) - start.distance(&after_set).powi(2);
        let generation = buffer.push(l, Hyperplane::new(a, b));
        (generation, correct(&after_m1, buffer))
    };

    state.x = c.point.clone();
    state.iteration += 1;
    Alg2Step {
        set_index: l,
        start,
        after_set,
        after_m1,
        next: c.point,
        generation,
        selected: c.used.iter().map(|u| u.0).collect(),
        selected_normals: c.used.into_iter().map(|u| u.3).collect(),
        event: c.event,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::solver::policy::WindowPolicy;
    use approx::assert_abs_diff_eq;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    fn line(dir: &[f64]) -> AffineSet {
        // {x : <n, x> = 0} with n orthogonal to dir in R^2
        let n = vec![-dir[1], dir[0]];
        AffineSet::rows(DenseMatrix::new(1, 2, n).unwrap(), p(&[0.0])).unwrap()
    }

    #[test]
    fn alg1_last_one_is_a_plain_projection() {
        let sets = vec![line(&[1.0, 0.0]), line(&[1.0, 1.0])];
        let mut state = IterState::new(p(&[0.3, 2.0]), CyclicSchedule::cyclic(2));
        let mut buf = HyperplaneBuffer::new(WindowPolicy::LastQ { q: 1 });
        for _ in 0..5 {
            let s = alg1_step(&mut state, &sets, &mut buf);
            assert_abs_diff_eq!(s.next.as_slice(), s.projected.as_slice(), epsilon = 1e-15);
        }
    }

    #[test]
    fn alg1_zero_normal_uses_previous_hyperplanes() {
        let sets = vec![line(&[1.0, 0.0]), line(&[1.0, 1.0])];
        let mut state = IterState::new(p(&[2.0, 0.0]), CyclicSchedule::cyclic(2));
        let mut buf = HyperplaneBuffer::new(WindowPolicy::All);
        let s = alg1_step(&mut state, &sets, &mut buf);
        assert_eq!(s.projected, s.start);
        assert!(s.selected.is_empty());
        assert_eq!(buf.len(), 0);
    }

    #[test]
    fn alg1_two_lines_all_reaches_origin() {
        // 45 degree lines through the origin; after two recorded hyperplanes
        // their intersection is {0}
        let sets = vec![line(&[1.0, 0.0]), line(&[1.0, 1.0])];
        let mut state = IterState::new(p(&[1.0, 2.0]), CyclicSchedule::cyclic(2));
        let mut buf = HyperplaneBuffer::new(WindowPolicy::All);
        alg1_step(&mut state, &sets, &mut buf);
        let s = alg1_step(&mut state, &sets, &mut buf);
        assert_eq!(s.selected.len(), 2);
        assert_abs_diff_eq!(state.x.as_slice(), &[0.0, 0.0][..], epsilon = 1e-14);
    }

    #[test]
    fn alg2_one_step_exact_on_axis_and_diagonal() {
        let sets = vec![line(&[1.0, 0.0]), line(&[1.0, 1.0])];
        let mut state = IterState::new(p(&[1.0, 0.0]), CyclicSchedule::skipping_first(2));
        let mut buf = HyperplaneBuffer::new(WindowPolicy::LastQ { q: 1 });
        let s = alg2_step(&mut state, &sets, &mut buf);
        assert_abs_diff_eq!(s.after_set.as_slice(), &[0.5, 0.5][..], epsilon = 1e-15);
        assert_abs_diff_eq!(s.after_m1.as_slice(), &[0.5, 0.0][..], epsilon = 1e-15);
        let h = &buf.get(s.generation).unwrap().hyperplane;
        // H = {y : 0.5 y_1 = 0}
        assert_abs_diff_eq!(h.normal().as_slice(), &[0.5, 0.0][..], epsilon = 1e-15);
        assert_abs_diff_eq!(h.offset(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.next.as_slice(), &[0.0, 0.0][..], epsilon = 1e-15);
    }

    #[test]
    fn alg2_degenerate_when_already_feasible() {
        let sets = vec![line(&[1.0, 0.0]), line(&[1.0, 0.0])];
        let mut state = IterState::new(p(&[3.0, 0.0]), CyclicSchedule::skipping_first(2));
        let mut buf = HyperplaneBuffer::new(WindowPolicy::All);
        let s = alg2_step(&mut state, &sets, &mut buf);
        assert_eq!(s.event, Some(StepEvent::Degenerate));
        assert_eq!(s.next, s.start);
        assert!(buf.is_empty());
    }

    #[test]
    fn alg2_relifts_an_iterate_that_drifted_off_the_easy_set() {
        let sets = vec![line(&[1.0, 0.0]), line(&[1.0, 1.0])];
        let mut state = IterState::new(p(&[1.0, 1e-9]), CyclicSchedule::skipping_first(2));
        let mut buf = HyperplaneBuffer::new(WindowPolicy::All);
        let s = alg2_step(&mut state, &sets, &mut buf);
        assert_eq!(s.start.as_slice(), &[1.0, 0.0]);
        assert_abs_diff_eq!(s.next.as_slice(), &[0.0, 0.0][..], epsilon = 1e-15);
    }

    #[test]
    fn lift_start_examples() {
        let m1 = line(&[1.0, 0.0]);
        assert_eq!(lift_start(&p(&[4.0, 0.0]), &m1).unwrap().as_slice(), &[4.0, 0.0]);
        let y = lift_start(&p(&[1.0, 1.0]), &m1).unwrap();
        assert_abs_diff_eq!(y.as_slice(), &[1.0, 0.0][..], epsilon = 1e-15);
    }
}
