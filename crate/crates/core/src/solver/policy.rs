use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::Point;
use crate::sets::Hyperplane;
use crate::tol::TOL_PARALLEL;

/// Rule choosing which stored hyperplanes are intersected at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WindowPolicy {
    /// Hyperplanes from the last `q` generations. `q = 1` is plain MAP for
    /// the first algorithm.
    LastQ { q: usize },
    /// Every hyperplane generated so far (`q = ∞`).
    All,
    /// A window certified to contain `x0 - x_i` in its normal span. Realized
    /// as `All`, since every displacement is a combination of generated
    /// normals.
    ConditionB,
}

impl WindowPolicy {
    pub fn last_q(q: usize) -> Result<Self, Error> {
        if q == 0 {
            return Err(Error::InvalidProblem("window size q must be positive".into()));
        }
        Ok(Self::LastQ { q })
    }

    fn window(self) -> Option<usize> {
        match self {
            Self::LastQ { q } => Some(q),
            Self::All | Self::ConditionB => None,
        }
    }
}

impl fmt::Display for WindowPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LastQ { q } => write!(f, "last-{q}"),
            Self::All => f.write_str("all"),
            Self::ConditionB => f.write_str("condition-b"),
        }
    }
}

impl FromStr for WindowPolicy {
    type Err = Error;

    /// Accepts `all`, `condition-b`/`condb`, `last-<q>` or a bare integer.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "all" | "inf" => return Ok(Self::All),
            "condition-b" | "conditionb" | "condb" => return Ok(Self::ConditionB),
            _ => {}
        }
        let digits = s.strip_prefix("last-").or_else(|| s.strip_prefix("lastq")).unwrap_or(&s);
        let q = digits
            .trim_start_matches(['-', '='])
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("unknown window policy '{s}'")))?;
        Self::last_q(q)
    }
}

#[derive(Debug, Clone)]
pub struct BufferEntry {
    pub generation: usize,
    pub set_index: usize,
    pub hyperplane: Hyperplane,
    unit: Point,
}

/// Ordered store of generated hyperplanes.
///
/// Every step pushes exactly one generation. Whole-space hyperplanes advance
/// the generation counter but are not stored.
#[derive(Debug, Clone)]
pub struct HyperplaneBuffer {
    policy: WindowPolicy,
    entries: Vec<BufferEntry>,
    generations: usize,
}

impl HyperplaneBuffer {
    pub fn new(policy: WindowPolicy) -> Self {
        Self { policy, entries: Vec::new(), generations: 0 }
    }

    pub fn policy(&self) -> WindowPolicy {
        self.policy
    }

    /// Number of generations pushed so far, including whole-space ones.
    pub fn generations(&self) -> usize {
        self.generations
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stores `h` as the newest generation and returns its index.
    pub fn push(&mut self, set_index: usize, h: Hyperplane) -> usize {
        let generation = self.generations;
        self.generations += 1;
        if !h.is_whole_space() {
            let unit = h.normal().scaled(1.0 / h.normal().norm());
            self.entries.push(BufferEntry { generation, set_index, hyperplane: h, unit });
        }
        if let Some(q) = self.policy.window() {
            let oldest = self.generations.saturating_sub(q);
            self.entries.retain(|e| e.generation >= oldest);
        }
        generation
    }

    /// The window `J_i` for the newest generation, oldest first.
    ///
    /// Among hyperplanes with parallel normals only the newest is kept.
    pub fn select(&self) -> Vec<&BufferEntry> {
        let oldest = match self.policy.window() {
            Some(q) => self.generations.saturating_sub(q),
            None => 0,
        };
        let mut kept: Vec<&BufferEntry> = Vec::new();
        for e in self.entries.iter().rev().take_while(|e| e.generation >= oldest) {
            let duplicate = kept.iter().any(|k| k.unit.dot(&e.unit).abs() >= 1.0 - TOL_PARALLEL);
            if !duplicate {
                kept.push(e);
            }
        }
        kept.reverse();
        kept
    }

    pub fn get(&self, generation: usize) -> Option<&BufferEntry> {
        self.entries.binary_search_by_key(&generation, |e| e.generation).ok().map(|i| &self.entries[i])
    }
}
