use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order in which the sets are visited, repeated forever.
///
/// Every index listed is revisited once per pass, so any set the order
/// covers is projected onto at least every `cycle_len()` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicSchedule {
    order: Vec<usize>,
    #[serde(skip)]
    position: usize,
}

impl CyclicSchedule {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::InvalidProblem("schedule order is empty".into()));
        }
        Ok(Self { order, position: 0 })
    }

    /// `0, 1, ..., k-1`.
    pub fn cyclic(k: usize) -> Self {
        Self { order: (0..k.max(1)).collect(), position: 0 }
    }

    /// `1, ..., k-1`: the second algorithm never schedules the easy set.
    pub fn skipping_first(k: usize) -> Self {
        Self { order: (1..k.max(2)).collect(), position: 0 }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn cycle_len(&self) -> usize {
        self.order.len()
    }

    /// Index of the set for the next step.
    pub fn next_index(&mut self) -> usize {
        let l = self.order[self.position];
        self.position = (self.position + 1) % self.order.len();
        l
    }

    /// Checks every index lies in `lo..k` and each index of `lo..k` appears.
    pub(crate) fn validate(&self, lo: usize, k: usize) -> Result<()> {
        if let Some(&bad) = self.order.iter().find(|&&l| l < lo || l >= k) {
            return Err(Error::InvalidProblem(format!("schedule index {bad} outside {lo}..{k}")));
        }
        if let Some(missing) = (lo..k).find(|l| !self.order.contains(l)) {
            return Err(Error::InvalidProblem(format!("schedule never visits set {missing}")));
        }
        Ok(())
    }
}
