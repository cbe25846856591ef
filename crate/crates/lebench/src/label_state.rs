//! Annotation bookkeeping: which pool examples are labeled, in which round,
//! against a fixed per-round budget schedule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelStateError {
    #[error("budget schedule must be nonempty")]
    EmptySchedule,
    #[error("budget schedule entries must be >= 1 (entry {index} is 0)")]
    ZeroBatch { index: usize },
    #[error("total budget {total} exceeds pool size {n_pool}")]
    BudgetExceedsPool { total: usize, n_pool: usize },
    #[error("schedule already exhausted after {rounds} rounds")]
    ScheduleExhausted { rounds: usize },
    #[error("round {round} expects a batch of {expected}, got {got}")]
    WrongBatchSize { round: usize, expected: usize, got: usize },
    #[error("index {0} appears more than once in the batch")]
    DuplicateIndex(usize),
    #[error("index {0} is already labeled")]
    AlreadyLabeled(usize),
    #[error("index {index} out of range for pool of {n_pool}")]
    IndexOutOfRange { index: usize, n_pool: usize },
}

/// Mutable core of the annotation loop. Only the engine's round loop writes
/// to it; everything else works off read-only snapshots.
///
/// Invariants (enforced by construction):
/// - the number of labeled examples equals the sum of consumed schedule entries
/// - `round_of[i]` is `Some` iff `labeled[i]`
/// - `current_round <= schedule.len()`
/// - annotation is monotone: no operation ever un-labels an example
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelState {
    labeled: Vec<bool>,
    round_of: Vec<Option<u32>>,
    schedule: Vec<usize>,
    current_round: usize,
}

impl LabelState {
    /// Fresh state with nothing labeled and the full schedule pending.
    pub fn new(n_pool: usize, schedule: &[usize]) -> Result<Self, LabelStateError> {
        if schedule.is_empty() {
            return Err(LabelStateError::EmptySchedule);
        }
        if let Some(index) = schedule.iter().position(|&b| b == 0) {
            return Err(LabelStateError::ZeroBatch { index });
        }
        let total: usize = schedule.iter().sum();
        if total > n_pool {
            return Err(LabelStateError::BudgetExceedsPool { total, n_pool });
        }
        Ok(Self {
            labeled: vec![false; n_pool],
            round_of: vec![None; n_pool],
            schedule: schedule.to_vec(),
            current_round: 0,
        })
    }

    /// Marks `indices` as labeled in the current round and advances the
    /// round counter. The batch must match the schedule entry exactly;
    /// there is no carry-over of unused budget.
    pub fn annotate(&mut self, indices: &[usize]) -> Result<(), LabelStateError> {
        let expected = *self
            .schedule
            .get(self.current_round)
            .ok_or(LabelStateError::ScheduleExhausted { rounds: self.schedule.len() })?;
        if indices.len() != expected {
            return Err(LabelStateError::WrongBatchSize {
                round: self.current_round,
                expected,
                got: indices.len(),
            });
        }
        // Validate the whole batch before touching state so a failed call
        // leaves the state unchanged.
        let mut seen = vec![false; self.labeled.len()];
        for &i in indices {
            if i >= self.labeled.len() {
                return Err(LabelStateError::IndexOutOfRange { index: i, n_pool: self.labeled.len() });
            }
            if self.labeled[i] {
                return Err(LabelStateError::AlreadyLabeled(i));
            }
            if seen[i] {
                return Err(LabelStateError::DuplicateIndex(i));
            }
            seen[i] = true;
        }
        let round = self.current_round as u32;
        for &i in indices {
            self.labeled[i] = true;
            self.round_of[i] = Some(round);
        }
        self.current_round += 1;
        Ok(())
    }

    pub fn n_pool(&self) -> usize {
        self.labeled.len()
    }

    pub fn is_labeled(&self, index: usize) -> bool {
        self.labeled[index]
    }

    pub fn labeled_mask(&self) -> &[bool] {
        &self.labeled
    }

    pub fn round_of(&self, index: usize) -> Option<u32> {
        self.round_of[index]
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled.iter().filter(|&&l| l).count()
    }

    /// Labeled pool indices in ascending order.
    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.labeled.len()).filter(|&i| self.labeled[i]).collect()
    }

    /// Unlabeled pool indices in ascending order.
    pub fn unlabeled_indices(&self) -> Vec<usize> {
        (0..self.labeled.len()).filter(|&i| !self.labeled[i]).collect()
    }

    pub fn current_round(&self) -> usize {
        self.current_round
    }

    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    /// Batch size of the next pending round, or `None` once exhausted.
    pub fn next_batch_size(&self) -> Option<usize> {
        self.schedule.get(self.current_round).copied()
    }

    pub fn is_exhausted(&self) -> bool {
        self.current_round == self.schedule.len()
    }

    /// Sum of schedule entries consumed so far.
    pub fn consumed_budget(&self) -> usize {
        self.schedule[..self.current_round].iter().sum()
    }

    /// Checks the internal invariants; used after deserializing persisted
    /// state from disk.
    pub fn validate(&self) -> Result<(), LabelStateError> {
        if self.schedule.is_empty() {
            return Err(LabelStateError::EmptySchedule);
        }
        if let Some(index) = self.schedule.iter().position(|&b| b == 0) {
            return Err(LabelStateError::ZeroBatch { index });
        }
        let total: usize = self.schedule.iter().sum();
        if total > self.labeled.len() {
            return Err(LabelStateError::BudgetExceedsPool { total, n_pool: self.labeled.len() });
        }
        if self.current_round > self.schedule.len() || self.round_of.len() != self.labeled.len() {
            return Err(LabelStateError::ScheduleExhausted { rounds: self.schedule.len() });
        }
        let consumed = self.consumed_budget();
        if self.labeled_count() != consumed {
            return Err(LabelStateError::WrongBatchSize {
                round: self.current_round,
                expected: consumed,
                got: self.labeled_count(),
            });
        }
        for i in 0..self.labeled.len() {
            if self.labeled[i] != self.round_of[i].is_some() {
                return Err(LabelStateError::AlreadyLabeled(i));
            }
            if let Some(r) = self.round_of[i] {
                if r as usize >= self.current_round {
                    return Err(LabelStateError::AlreadyLabeled(i));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn init_starts_empty() {
        let s = LabelState::new(10, &[2, 3]).unwrap();
        assert_eq!(s.labeled_count(), 0);
        assert_eq!(s.current_round(), 0);
        assert_eq!(s.next_batch_size(), Some(2));
        assert!(!s.is_exhausted());
    }

    #[test]
    fn init_rejects_budget_over_pool() {
        assert_eq!(
            LabelState::new(5, &[6]).unwrap_err(),
            LabelStateError::BudgetExceedsPool { total: 6, n_pool: 5 }
        );
    }

    #[test]
    fn init_rejects_empty_and_zero_schedules() {
        assert_eq!(LabelState::new(5, &[]).unwrap_err(), LabelStateError::EmptySchedule);
        assert_eq!(
            LabelState::new(5, &[1, 0]).unwrap_err(),
            LabelStateError::ZeroBatch { index: 1 }
        );
    }

    #[test]
    fn init_mirrors_batch_1000_schedule() {
        let s = LabelState::new(50_000, &[1000; 10]).unwrap();
        assert_eq!(s.schedule().len(), 10);
        assert_eq!(s.schedule().iter().sum::<usize>(), 10_000);
        assert_eq!(s.labeled_count(), 0);
    }

    #[test]
    fn annotate_labels_batch_and_advances_round() {
        let mut s = LabelState::new(10, &[2, 3]).unwrap();
        s.annotate(&[4, 7]).unwrap();
        assert!(s.is_labeled(4) && s.is_labeled(7));
        assert_eq!(s.round_of(4), Some(0));
        assert_eq!(s.current_round(), 1);
        assert_eq!(s.labeled_count(), 2);
    }

    #[test]
    fn annotate_rejects_already_labeled() {
        let mut s = LabelState::new(10, &[4, 1]).unwrap();
        s.annotate(&[1, 2, 3, 4]).unwrap();
        assert_eq!(s.annotate(&[4]).unwrap_err(), LabelStateError::AlreadyLabeled(4));
        // Failed call left state untouched.
        assert_eq!(s.current_round(), 1);
        assert_eq!(s.labeled_count(), 4);
    }

    #[test]
    fn annotate_rejects_duplicates() {
        let mut s = LabelState::new(10, &[2]).unwrap();
        assert_eq!(s.annotate(&[1, 1]).unwrap_err(), LabelStateError::DuplicateIndex(1));
    }

    #[test]
    fn annotate_rejects_wrong_batch_size_and_out_of_range() {
        let mut s = LabelState::new(10, &[2]).unwrap();
        assert!(matches!(s.annotate(&[1]), Err(LabelStateError::WrongBatchSize { .. })));
        assert!(matches!(s.annotate(&[3, 10]), Err(LabelStateError::IndexOutOfRange { .. })));
    }

    #[test]
    fn full_schedule_consumption_matches_sum() {
        let mut s = LabelState::new(8, &[3, 2, 3]).unwrap();
        s.annotate(&[0, 1, 2]).unwrap();
        s.annotate(&[3, 4]).unwrap();
        s.annotate(&[5, 6, 7]).unwrap();
        assert!(s.is_exhausted());
        assert_eq!(s.labeled_count(), 8);
        assert!(s.annotate(&[]).is_err());
    }

    proptest! {
        // Replaying the same batches yields bit-identical state, annotation
        // is monotone, and the labeled count tracks the consumed schedule.
        #[test]
        fn replay_is_bit_identical(perm in proptest::sample::subsequence((0..30usize).collect::<Vec<_>>(), 10)) {
            let schedule = [4usize, 3, 3];
            let mut a = LabelState::new(30, &schedule).unwrap();
            let mut b = LabelState::new(30, &schedule).unwrap();
            let mut offset = 0;
            for (round, &bsz) in schedule.iter().enumerate() {
                let batch = &perm[offset..offset + bsz];
                offset += bsz;
                let before = a.labeled_count();
                a.annotate(batch).unwrap();
                b.annotate(batch).unwrap();
                prop_assert_eq!(a.labeled_count(), before + bsz);
                prop_assert_eq!(a.consumed_budget(), a.labeled_count());
                for &i in batch {
                    prop_assert_eq!(a.round_of(i), Some(round as u32));
                }
            }
            prop_assert_eq!(&a, &b);
            prop_assert!(a.validate().is_ok());
        }
    }
}
