//! Repeated consensus: per-height committee computation, a round-based BFT
//! instance inside the committee, decision broadcast, decision collection
//! for Δ, and height advance.
//!
//! Members go `ComputeCommittee → SolveConsensus → CollectDecisions`;
//! non-members go `ComputeCommittee → WaitForDecision → CollectDecisions`;
//! both then move to the next height.

mod process;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use process::{HeightRecord, Process, Timer, TimerKind};

use crate::chain::PayloadId;
use crate::network::{Message, MessageKind, SimTime};
use crate::reward::TimeoutPolicy;
use crate::types::{Height, ProcessId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum HeightState {
    ComputeCommittee,
    SolveConsensus {
        round: u32,
    },
    WaitForDecision,
    CollectDecisions {
        deadline: SimTime,
    },
    /// Target height reached; the process no longer advances.
    Finished,
}

/// Timing knobs of the protocol, public and identical for every process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Initial decision-collection window Δ.
    pub initial_delta: u64,
    /// Additive growth of Δ under the modulable policy.
    pub delta_increment: u64,
    /// Base duration of each round step timeout.
    pub round_timeout: u64,
    /// Growth of the step timeouts per round.
    pub round_timeout_increment: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            initial_delta: 10,
            delta_increment: 5,
            round_timeout: 50,
            round_timeout_increment: 25,
        }
    }
}

impl ProtocolParams {
    pub fn step_timeout(&self, round: u32) -> u64 {
        self.round_timeout
            .saturating_add(self.round_timeout_increment.saturating_mul(round as u64))
    }
}

/// What happened at one height from the point of view of every process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsensusOutcome {
    pub height: Height,
    pub decided: PayloadId,
    /// Per process: committee members whose decision for the agreed block it
    /// delivered, with delivery time.
    pub decision_messages_delivered: BTreeMap<ProcessId, Vec<(ProcessId, SimTime)>>,
    /// Per process: when it decided (members) or accepted (non-members).
    pub decided_at: BTreeMap<ProcessId, SimTime>,
    /// Round in which each member decided, for members that decided through
    /// their own precommit quorum.
    pub decision_round: BTreeMap<ProcessId, u32>,
}

/// The payload backed by at least `threshold` identical decisions from
/// distinct committee members, if any.
pub fn wait_for_decision(
    decisions: &BTreeMap<ProcessId, PayloadId>,
    committee: &[ProcessId],
    threshold: usize,
) -> Option<PayloadId> {
    let mut tally: BTreeMap<PayloadId, usize> = BTreeMap::new();
    for (sender, payload) in decisions {
        if committee.contains(sender) {
            *tally.entry(*payload).or_default() += 1;
        }
    }
    tally
        .into_iter()
        .find(|(_, count)| *count >= threshold)
        .map(|(p, _)| p)
}

/// Committee members of `V_h` whose decision for `decided` was delivered no
/// later than `decided_at + delta`. Decisions delivered before the
/// observer's own decision count as well.
pub fn collect_decisions(
    info: &[Message],
    h: Height,
    committee: &[ProcessId],
    decided: PayloadId,
    decided_at: SimTime,
    delta: u64,
) -> BTreeSet<ProcessId> {
    let deadline = decided_at.plus(delta);
    info.iter()
        .filter(|m| m.height == h && m.deliver_at <= deadline && committee.contains(&m.sender))
        .filter(|m| matches!(m.kind, MessageKind::Decision { payload } if payload == decided))
        .map(|m| m.sender)
        .collect()
}

/// Next Δ: unchanged under the fixed policy or when nobody is missing,
/// otherwise grown by `increment`.
pub fn update_delta(
    current: u64,
    collected: &BTreeSet<ProcessId>,
    committee: &[ProcessId],
    policy: TimeoutPolicy,
    increment: u64,
) -> u64 {
    match policy {
        TimeoutPolicy::Fixed => current,
        TimeoutPolicy::Modulable => {
            if committee.iter().all(|p| collected.contains(p)) {
                current
            } else {
                current.saturating_add(increment)
            }
        }
    }
}
