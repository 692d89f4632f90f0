//! Time-stamped records shared by the particle simulator and the solvers.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

/// One snapshot of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Extent of reaction (reactions per initial cluster).
    pub t: f64,
    /// Cluster fractions by size (all sizes or a tracked subset).
    pub fractions: BTreeMap<usize, f64>,
    /// `m_0 ..= m_3`.
    pub moments: [f64; 4],
    /// Largest cluster over total particles; `None` for deterministic
    /// solutions where it is not defined.
    pub gel_fraction: Option<f64>,
    /// Interaction mass of the recorded state.
    pub interaction_mass: f64,
    /// Reactions performed so far (particle runs only).
    pub step: Option<u64>,
}

impl Record {
    pub fn fraction(&self, n: usize) -> f64 {
        self.fractions.get(&n).copied().unwrap_or(0.0)
    }
}

/// Which sizes a trajectory keeps per record.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Tracking {
    #[default]
    All,
    Sizes(Vec<usize>),
}

impl Tracking {
    pub(crate) fn keeps(&self, n: usize) -> bool {
        match self {
            Tracking::All => true,
            Tracking::Sizes(sizes) => sizes.contains(&n),
        }
    }
}

/// An ordered sequence of records with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    records: Vec<Record>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record. Records at a time not after the last one are
    /// ignored so that times stay strictly increasing.
    pub fn push(&mut self, record: Record) -> bool {
        if self.records.last().is_some_and(|last| record.t <= last.t) {
            return false;
        }
        self.records.push(record);
        true
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.t)
    }

    /// The last record at or before `t`, the natural reading of a
    /// piecewise-constant particle trajectory.
    pub fn at_or_before(&self, t: f64) -> Option<&Record> {
        let idx = self.records.partition_point(|r| r.t <= t);
        idx.checked_sub(1).map(|i| &self.records[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64) -> Record {
        Record {
            t,
            fractions: BTreeMap::new(),
            moments: [0.0; 4],
            gel_fraction: None,
            interaction_mass: 0.0,
            step: None,
        }
    }

    #[test]
    fn times_strictly_increase() {
        let mut tr = Trajectory::new();
        assert!(tr.push(rec(0.0)));
        assert!(tr.push(rec(0.5)));
        assert!(!tr.push(rec(0.5)));
        assert!(!tr.push(rec(0.1)));
        assert_eq!(tr.len(), 2);
        assert_eq!(tr.at_or_before(0.7).unwrap().t, 0.5);
        assert_eq!(tr.at_or_before(0.2).unwrap().t, 0.0);
        assert!(tr.at_or_before(-1.0).is_none());
    }
}
