//! Ground-truth grading of reward allocations against the three reward
//! conditions, and classification of a whole run.

use serde::{Deserialize, Serialize};

use crate::chain::Blockchain;
use crate::error::FairnessError;
use crate::reward::RewardMatrix;
use crate::types::{BehaviorSchedule, Height, ProcessId};

/// Which processes followed the protocol at which heights. Comes from the
/// scenario's behavior schedules, never from observed messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    schedules: Vec<BehaviorSchedule>,
}

impl GroundTruth {
    pub fn new(schedules: Vec<BehaviorSchedule>) -> Self {
        Self { schedules }
    }

    pub fn all_correct(population: usize) -> Self {
        Self::new(vec![BehaviorSchedule::correct(); population])
    }

    pub fn is_h_correct(&self, h: Height, p: ProcessId) -> bool {
        self.schedules.get(p.index()).is_none_or(|s| s.at(h).is_correct())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Non-members are not rewarded.
    NonMemberUnrewarded,
    Completeness,
    Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub height: Height,
    pub process: ProcessId,
    pub condition: Condition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightGrade {
    pub height: Height,
    pub cond1: bool,
    pub completeness: bool,
    pub accuracy: bool,
    /// Committee members that were not h-correct; accuracy is vacuous when 0.
    pub faulty_members: usize,
}

impl HeightGrade {
    pub fn clean(&self) -> bool {
        self.cond1 && self.completeness && self.accuracy
    }
}

/// `(cond1, completeness, accuracy)` for height `h`.
pub fn grade_height(
    h: Height,
    matrix: &RewardMatrix,
    committee: &[ProcessId],
    truth: &GroundTruth,
) -> Result<(bool, bool, bool), FairnessError> {
    let mut witnesses = Vec::new();
    let g = grade_height_detailed(h, matrix, committee, truth, &mut witnesses)?;
    Ok((g.cond1, g.completeness, g.accuracy))
}

pub fn grade_height_detailed(
    h: Height,
    matrix: &RewardMatrix,
    committee: &[ProcessId],
    truth: &GroundTruth,
    witnesses: &mut Vec<Witness>,
) -> Result<HeightGrade, FairnessError> {
    if !matrix.is_allocated(h) {
        return Err(FairnessError::RewardsNotYetAllocated { height: h });
    }
    let mut grade = HeightGrade {
        height: h,
        cond1: true,
        completeness: true,
        accuracy: true,
        faulty_members: 0,
    };
    for i in 0..matrix.population() {
        let p = ProcessId(i as u32);
        let rewarded = matrix.r(h, p)?;
        let failed = if !committee.contains(&p) {
            (rewarded).then_some(Condition::NonMemberUnrewarded)
        } else if truth.is_h_correct(h, p) {
            (!rewarded).then_some(Condition::Completeness)
        } else {
            grade.faulty_members += 1;
            rewarded.then_some(Condition::Accuracy)
        };
        if let Some(condition) = failed {
            match condition {
                Condition::NonMemberUnrewarded => grade.cond1 = false,
                Condition::Completeness => grade.completeness = false,
                Condition::Accuracy => grade.accuracy = false,
            }
            witnesses.push(Witness {
                height: h,
                process: p,
                condition,
            });
        }
    }
    Ok(grade)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    Fair,
    EventuallyFair { h0: Height },
    CompleteFair,
    AccurateFair,
    None,
}

impl Classification {
    pub fn is_fair_or_eventually(&self) -> bool {
        matches!(self, Classification::Fair | Classification::EventuallyFair { .. })
    }
}

/// Which definitions hold over the graded trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessProperties {
    pub complete_fair: bool,
    pub accurate_fair: bool,
    pub fair: bool,
    /// Start of the clean suffix, when it is at least the window long.
    pub eventually_fair_from: Option<Height>,
    /// Start of the maximal clean suffix, whatever its length.
    pub clean_suffix_from: Option<Height>,
}

pub fn properties(rows: &[HeightGrade], window: u64) -> Result<FairnessProperties, FairnessError> {
    let available = rows.len() as u64;
    if available < window || rows.is_empty() {
        return Err(FairnessError::InsufficientTrace { available, window });
    }
    let complete_fair = rows.iter().all(|r| r.cond1 && r.completeness);
    let accurate_fair = rows.iter().all(|r| r.cond1 && r.accuracy);
    let fair = rows.iter().all(HeightGrade::clean);
    let suffix_len = rows.iter().rev().take_while(|r| r.clean()).count();
    let clean_suffix_from = (suffix_len > 0).then(|| rows[rows.len() - suffix_len].height);
    let eventually_fair_from = clean_suffix_from.filter(|_| suffix_len as u64 >= window);
    Ok(FairnessProperties {
        complete_fair,
        accurate_fair,
        fair,
        eventually_fair_from,
        clean_suffix_from,
    })
}

/// Strongest class that holds.
///
/// Fair beats eventually fair, which beats the one-sided classes. A
/// one-sided class is only reported when it says something: accurate
/// fairness with no faulty committee member anywhere is vacuous and yields
/// `None`.
pub fn classify(rows: &[HeightGrade], window: u64) -> Result<Classification, FairnessError> {
    let props = properties(rows, window)?;
    let any_faulty = rows.iter().any(|r| r.faulty_members > 0);
    Ok(if props.fair {
        Classification::Fair
    } else if let Some(h0) = props.eventually_fair_from {
        Classification::EventuallyFair { h0 }
    } else if props.complete_fair {
        Classification::CompleteFair
    } else if props.accurate_fair && any_faulty {
        Classification::AccurateFair
    } else {
        Classification::None
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub rows: Vec<HeightGrade>,
    pub classification: Classification,
    pub properties: FairnessProperties,
    pub witnesses: Vec<Witness>,
    pub window: u64,
}

impl FairnessReport {
    /// Grades heights `1..=max_height` of `bc`. Every graded height must
    /// have both its block and its allocation on chain.
    pub fn from_chain(
        bc: &Blockchain,
        truth: &GroundTruth,
        max_height: Height,
        window: u64,
    ) -> Result<Self, FairnessError> {
        let matrix = RewardMatrix::from_chain(bc);
        let mut rows = Vec::with_capacity(max_height as usize);
        let mut witnesses = Vec::new();
        for h in 1..=max_height {
            let committee = bc
                .block(h)
                .map(|b| b.committee.as_slice())
                .ok_or(FairnessError::RewardsNotYetAllocated { height: h })?;
            rows.push(grade_height_detailed(
                h,
                &matrix,
                committee,
                truth,
                &mut witnesses,
            )?);
        }
        let properties = properties(&rows, window)?;
        let classification = classify(&rows, window)?;
        Ok(Self {
            rows,
            classification,
            properties,
            witnesses,
            window,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BehaviorKind, HeightSet};
    use std::collections::BTreeMap;

    fn ids(v: &[u32]) -> Vec<ProcessId> {
        v.iter().copied().map(ProcessId).collect()
    }

    fn row(pairs: &[(u32, u64)]) -> BTreeMap<ProcessId, u64> {
        pairs.iter().map(|&(p, a)| (ProcessId(p), a)).collect()
    }

    fn grade(h: Height, clean: bool) -> HeightGrade {
        HeightGrade {
            height: h,
            cond1: true,
            completeness: clean,
            accuracy: true,
            faulty_members: 0,
        }
    }

    #[test]
    fn reward_all_with_byzantine_member() {
        let mut truth = vec![BehaviorSchedule::correct(); 4];
        truth[3] = BehaviorSchedule::with(BehaviorKind::ByzantineSilent, HeightSet::All);
        let truth = GroundTruth::new(truth);
        let mut m = RewardMatrix::new(4);
        m.insert_row(1, row(&[(0, 1), (1, 1), (2, 1), (3, 1)])).unwrap();
        assert_eq!(
            grade_height(1, &m, &ids(&[0, 1, 2, 3]), &truth),
            Ok((true, true, false))
        );
    }

    #[test]
    fn never_reward_all_correct() {
        let mut m = RewardMatrix::new(4);
        m.insert_row(1, row(&[(0, 0), (1, 0), (2, 0), (3, 0)])).unwrap();
        assert_eq!(
            grade_height(1, &m, &ids(&[0, 1, 2, 3]), &GroundTruth::all_correct(4)),
            Ok((true, false, true))
        );
    }

    #[test]
    fn exact_allocation_is_clean() {
        let mut truth = vec![BehaviorSchedule::correct(); 5];
        truth[1] = BehaviorSchedule::with(BehaviorKind::ByzantineEquivocate, HeightSet::All);
        let truth = GroundTruth::new(truth);
        let mut m = RewardMatrix::new(5);
        m.insert_row(2, row(&[(0, 1), (1, 0), (2, 1), (3, 1)])).unwrap();
        assert_eq!(
            grade_height(2, &m, &ids(&[0, 1, 2, 3]), &truth),
            Ok((true, true, true))
        );
    }

    #[test]
    fn non_member_reward_breaks_condition_one() {
        let mut m = RewardMatrix::new(5);
        m.insert_row(1, row(&[(4, 1), (0, 1), (1, 1), (2, 1), (3, 1)]))
            .unwrap();
        let mut w = Vec::new();
        let g =
            grade_height_detailed(1, &m, &ids(&[0, 1, 2, 3]), &GroundTruth::all_correct(5), &mut w).unwrap();
        assert!(!g.cond1 && g.completeness && g.accuracy);
        assert_eq!(
            w,
            vec![Witness {
                height: 1,
                process: ProcessId(4),
                condition: Condition::NonMemberUnrewarded
            }]
        );
    }

    #[test]
    fn unallocated_height_errors() {
        let m = RewardMatrix::new(4);
        assert_eq!(
            grade_height(3, &m, &ids(&[0]), &GroundTruth::all_correct(4)),
            Err(FairnessError::RewardsNotYetAllocated { height: 3 })
        );
    }

    #[test]
    fn all_clean_is_fair() {
        let rows: Vec<_> = (1..=10).map(|h| grade(h, true)).collect();
        assert_eq!(classify(&rows, 5), Ok(Classification::Fair));
        let p = properties(&rows, 5).unwrap();
        assert_eq!(p.eventually_fair_from, Some(1));
    }

    #[test]
    fn clean_suffix_from_fourteen() {
        let rows: Vec<_> = (1..=100).map(|h| grade(h, h >= 14)).collect();
        assert_eq!(classify(&rows, 50), Ok(Classification::EventuallyFair { h0: 14 }));
    }

    #[test]
    fn short_suffix_is_not_eventual() {
        let rows: Vec<_> = (1..=100).map(|h| grade(h, h >= 60)).collect();
        assert_eq!(classify(&rows, 50), Ok(Classification::None));
        assert_eq!(properties(&rows, 50).unwrap().clean_suffix_from, Some(60));
    }

    #[test]
    fn perpetual_incompleteness_is_none() {
        let rows: Vec<_> = (1..=100).map(|h| grade(h, false)).collect();
        assert_eq!(classify(&rows, 50), Ok(Classification::None));
    }

    #[test]
    fn accurate_label_needs_a_faulty_member() {
        let mut rows: Vec<_> = (1..=10).map(|h| grade(h, false)).collect();
        rows[3].faulty_members = 1;
        assert_eq!(classify(&rows, 5), Ok(Classification::AccurateFair));
    }

    #[test]
    fn complete_but_inaccurate() {
        let rows: Vec<_> = (1..=10)
            .map(|h| HeightGrade {
                height: h,
                cond1: true,
                completeness: true,
                accuracy: false,
                faulty_members: 1,
            })
            .collect();
        assert_eq!(classify(&rows, 5), Ok(Classification::CompleteFair));
    }

    #[test]
    fn window_longer_than_trace() {
        let rows: Vec<_> = (1..=3).map(|h| grade(h, true)).collect();
        assert_eq!(
            classify(&rows, 4),
            Err(FairnessError::InsufficientTrace {
                available: 3,
                window: 4
            })
        );
    }
}
