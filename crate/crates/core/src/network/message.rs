use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chain::PayloadId;
use crate::types::{Height, ProcessId};

/// Simulated time in integer ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn ticks(self) -> u64 {
        self.0
    }

    pub fn plus(self, ticks: u64) -> SimTime {
        SimTime(self.0.saturating_add(ticks))
    }

    pub fn since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    One(ProcessId),
    Broadcast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VotePhase {
    Prevote,
    Precommit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    /// Block proposal for `(height, round)`. `valid_round` is set when the
    /// proposer re-proposes a value that already gathered a prevote quorum.
    Propose {
        payload: PayloadId,
        valid_round: Option<u32>,
    },
    /// A vote; `None` is a nil vote.
    Vote {
        phase: VotePhase,
        payload: Option<PayloadId>,
    },
    /// "I decided this block"; the input to reward collection.
    Decision { payload: PayloadId },
    /// The sender saw `suspect` misbehave during `height`.
    Suspicion { suspect: ProcessId },
}

impl MessageKind {
    pub fn label(&self) -> &'static str {
        match self {
            MessageKind::Propose { .. } => "propose",
            MessageKind::Vote {
                phase: VotePhase::Prevote,
                ..
            } => "prevote",
            MessageKind::Vote {
                phase: VotePhase::Precommit,
                ..
            } => "precommit",
            MessageKind::Decision { .. } => "decision",
            MessageKind::Suspicion { .. } => "suspicion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub sender: ProcessId,
    pub recipient: Recipient,
    pub height: Height,
    pub round: u32,
    pub kind: MessageKind,
    pub sent_at: SimTime,
    pub deliver_at: SimTime,
}

impl Message {
    pub fn delay(&self) -> u64 {
        self.deliver_at.since(self.sent_at)
    }

    /// Concrete recipient of a point-to-point copy.
    pub fn to(&self) -> Option<ProcessId> {
        match self.recipient {
            Recipient::One(p) => Some(p),
            Recipient::Broadcast => None,
        }
    }
}
