//! Reward mechanisms: the reward function, Byzantine detection through a
//! suspicion quorum, and allocation of the vector written in the next block.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::chain::{Blockchain, PayloadId};
use crate::consensus::collect_decisions;
use crate::error::FairnessError;
use crate::network::{Message, MessageKind, SimTime};
use crate::types::{suspicion_threshold, Height, ProcessId, Units};

/// How the decision-collection window Δ evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeoutPolicy {
    #[default]
    Fixed,
    /// Δ grows by a fixed increment after every height where some committee
    /// member could not be accounted for.
    Modulable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMechanismId {
    RewardAllCommittee,
    NeverReward,
    /// Reward members whose decision arrived and who were not confirmed as
    /// faulty by `2⌊n/3⌋+1` accusers.
    SuspicionQuorum {
        #[serde(default)]
        timeout_policy: TimeoutPolicy,
    },
    /// Reward exactly the proposer's `toReward` set.
    TendermintToReward {
        #[serde(default)]
        timeout_policy: TimeoutPolicy,
    },
}

impl RewardMechanismId {
    pub fn timeout_policy(&self) -> TimeoutPolicy {
        match self {
            RewardMechanismId::SuspicionQuorum { timeout_policy }
            | RewardMechanismId::TendermintToReward { timeout_policy } => *timeout_policy,
            _ => TimeoutPolicy::Fixed,
        }
    }

    pub fn label(&self) -> String {
        let policy = |p: &TimeoutPolicy| match p {
            TimeoutPolicy::Fixed => "fixed",
            TimeoutPolicy::Modulable => "modulable",
        };
        match self {
            RewardMechanismId::RewardAllCommittee => "reward_all_committee".into(),
            RewardMechanismId::NeverReward => "never_reward".into(),
            RewardMechanismId::SuspicionQuorum { timeout_policy } => {
                format!("suspicion_quorum_{}", policy(timeout_policy))
            }
            RewardMechanismId::TendermintToReward { timeout_policy } => {
                format!("tendermint_to_reward_{}", policy(timeout_policy))
            }
        }
    }

    /// All mechanisms with both timeout policies where applicable.
    pub fn all() -> [RewardMechanismId; 6] {
        use RewardMechanismId::*;
        use TimeoutPolicy::*;
        [
            RewardAllCommittee,
            NeverReward,
            SuspicionQuorum {
                timeout_policy: Fixed,
            },
            SuspicionQuorum {
                timeout_policy: Modulable,
            },
            TendermintToReward {
                timeout_policy: Fixed,
            },
            TendermintToReward {
                timeout_policy: Modulable,
            },
        ]
    }
}

/// Reward parameters `r_i^h` and amounts, one row per allocated height.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RewardMatrix {
    population: usize,
    rows: BTreeMap<Height, BTreeMap<ProcessId, Units>>,
}

impl RewardMatrix {
    pub fn new(population: usize) -> Self {
        Self {
            population,
            rows: BTreeMap::new(),
        }
    }

    pub fn from_chain(bc: &Blockchain) -> Self {
        let mut m = Self::new(bc.genesis.population);
        for b in &bc.blocks {
            if let Some(h) = b.rewards_for {
                // a well-formed chain allocates each height once
                let _ = m.insert_row(h, b.reward_vector.clone());
            }
        }
        m
    }

    pub fn population(&self) -> usize {
        self.population
    }

    /// Records the allocation for `h`. Rows are write-once.
    pub fn insert_row(&mut self, h: Height, amounts: BTreeMap<ProcessId, Units>) -> Result<(), Height> {
        if self.rows.contains_key(&h) {
            return Err(h);
        }
        self.rows.insert(h, amounts);
        Ok(())
    }

    pub fn is_allocated(&self, h: Height) -> bool {
        self.rows.contains_key(&h)
    }

    pub fn heights(&self) -> impl Iterator<Item = Height> + '_ {
        self.rows.keys().copied()
    }

    pub fn amount(&self, h: Height, p: ProcessId) -> Result<Units, FairnessError> {
        self.rows
            .get(&h)
            .map(|row| row.get(&p).copied().unwrap_or(0))
            .ok_or(FairnessError::RewardsNotYetAllocated { height: h })
    }

    /// `r_i^h`.
    pub fn r(&self, h: Height, p: ProcessId) -> Result<bool, FairnessError> {
        self.amount(h, p).map(|a| a > 0)
    }
}

/// Accusations gathered from delivered suspicion messages.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SuspicionState {
    accusers: BTreeMap<(Height, ProcessId), BTreeSet<ProcessId>>,
}

impl SuspicionState {
    pub fn record(&mut self, h: Height, suspect: ProcessId, accuser: ProcessId) {
        self.accusers.entry((h, suspect)).or_default().insert(accuser);
    }

    /// Suspicions in `info` about height `h`, counting only accusers from
    /// `committee`.
    pub fn from_messages(info: &[Message], h: Height, committee: &[ProcessId]) -> Self {
        let mut s = Self::default();
        for m in info {
            if let MessageKind::Suspicion { suspect } = m.kind {
                if m.height == h && committee.contains(&m.sender) {
                    s.record(h, suspect, m.sender);
                }
            }
        }
        s
    }

    pub fn accusers(&self, h: Height, suspect: ProcessId) -> usize {
        self.accusers.get(&(h, suspect)).map_or(0, BTreeSet::len)
    }

    pub fn is_confirmed(&self, h: Height, suspect: ProcessId, n: usize) -> bool {
        self.accusers(h, suspect) >= suspicion_threshold(n)
    }

    pub fn confirmed(&self, n: usize) -> BTreeSet<(Height, ProcessId)> {
        self.accusers
            .iter()
            .filter(|(_, a)| a.len() >= suspicion_threshold(n))
            .map(|(k, _)| *k)
            .collect()
    }
}

/// Partition of a committee by what the observer can establish.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Detection {
    pub correct: BTreeSet<ProcessId>,
    pub incorrect: BTreeSet<ProcessId>,
    pub unknown: BTreeSet<ProcessId>,
}

impl Detection {
    /// Members whose status is settled either way.
    pub fn known(&self) -> BTreeSet<ProcessId> {
        self.correct.union(&self.incorrect).copied().collect()
    }
}

/// Classifies the members of `V_h` from the observer's delivered messages.
///
/// A member is `incorrect` once its suspicion is confirmed, `correct` when
/// its decision for the agreed block has been delivered, and `unknown`
/// otherwise. Under synchrony a missing decision is itself proof of an
/// omission, so nothing stays unknown.
pub fn detect_h_correct(
    info: &[Message],
    h: Height,
    committee: &[ProcessId],
    decided: PayloadId,
    suspicion: &SuspicionState,
    synchronous: bool,
) -> Detection {
    let n = committee.len();
    let decided_by: BTreeSet<ProcessId> = info
        .iter()
        .filter(|m| m.height == h)
        .filter_map(|m| match m.kind {
            MessageKind::Decision { payload } if payload == decided => Some(m.sender),
            _ => None,
        })
        .collect();
    let mut d = Detection::default();
    for &p in committee {
        if suspicion.is_confirmed(h, p, n) {
            d.incorrect.insert(p);
        } else if decided_by.contains(&p) {
            d.correct.insert(p);
        } else if synchronous {
            d.incorrect.insert(p);
        } else {
            d.unknown.insert(p);
        }
    }
    d
}

/// What the proposer of the allocating block knows about height `h`.
#[derive(Debug, Clone, Copy)]
pub struct ProposerView<'a> {
    /// Messages tagged with height `h` delivered to the proposer.
    pub messages: &'a [Message],
    pub decided_at: SimTime,
    /// Collection window Δ the proposer used for `h`.
    pub delta: u64,
    pub synchronous: bool,
}

/// Members of `committee` rewarded by `mech`.
pub fn allocate(
    mech: RewardMechanismId,
    committee: &[ProcessId],
    detection: Option<&Detection>,
    to_reward: Option<&BTreeSet<ProcessId>>,
) -> BTreeSet<ProcessId> {
    match mech {
        RewardMechanismId::RewardAllCommittee => committee.iter().copied().collect(),
        RewardMechanismId::NeverReward => BTreeSet::new(),
        RewardMechanismId::SuspicionQuorum { .. } => detection.map(|d| d.correct.clone()).unwrap_or_default(),
        RewardMechanismId::TendermintToReward { .. } => to_reward
            .map(|t| t.iter().filter(|p| committee.contains(p)).copied().collect())
            .unwrap_or_default(),
    }
}

/// Full reward vector for height `h`; `None` entries are `⊥` (the chain does
/// not reach `h` yet).
pub fn reward_fn(
    bc: &Blockchain,
    view: &ProposerView<'_>,
    h: Height,
    mech: RewardMechanismId,
) -> Vec<Option<Units>> {
    let population = bc.genesis.population;
    let Some(block) = bc.block(h).filter(|_| (bc.len() as Height) >= h) else {
        return vec![None; population];
    };
    let committee = &block.committee;
    let decided = block.payload_id;
    let rewarded = match mech {
        RewardMechanismId::SuspicionQuorum { .. } => {
            let suspicion = SuspicionState::from_messages(view.messages, h, committee);
            let d = detect_h_correct(view.messages, h, committee, decided, &suspicion, view.synchronous);
            allocate(mech, committee, Some(&d), None)
        }
        RewardMechanismId::TendermintToReward { .. } => {
            let to_reward =
                collect_decisions(view.messages, h, committee, decided, view.decided_at, view.delta);
            allocate(mech, committee, None, Some(&to_reward))
        }
        _ => allocate(mech, committee, None, None),
    };
    let amount = bc.genesis.reward_per_member;
    (0..population)
        .map(|i| {
            let p = ProcessId(i as u32);
            Some(if rewarded.contains(&p) { amount } else { 0 })
        })
        .collect()
}

/// The entries of a full reward vector that belong in a block: committee
/// members of the rewarded height only.
pub fn restrict_to_committee(
    vector: &[Option<Units>],
    committee: &[ProcessId],
) -> BTreeMap<ProcessId, Units> {
    committee
        .iter()
        .map(|&p| (p, vector.get(p.index()).copied().flatten().unwrap_or(0)))
        .collect()
}
