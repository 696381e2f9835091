//! Shared domain vocabulary: processes, heights, merit and behaviors.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// A block height. Height 0 is the genesis placeholder; real blocks start at 1.
pub type Height = u64;

/// Stake and reward amounts, in integer units.
pub type Units = u64;

/// Merit parameter of a process, a rational in `[0, 1]`.
pub type Merit = Ratio<u64>;

/// Index of a process in the population `[0, N)`.
///
/// The total order on ids is the tie-breaker used everywhere a deterministic
/// choice between otherwise equal processes is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ProcessId(pub u32);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl From<u32> for ProcessId {
    fn from(v: u32) -> Self {
        ProcessId(v)
    }
}

/// What a process does during one height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BehaviorKind {
    Correct,
    /// Sends nothing tagged with the height.
    ByzantineSilent,
    /// Sends conflicting proposals, votes and decisions to the lower and
    /// upper halves of its peers.
    ByzantineEquivocate,
    /// Sends only its final decision message.
    ByzantineDecisionOnly,
}

impl BehaviorKind {
    pub fn is_correct(self) -> bool {
        matches!(self, BehaviorKind::Correct)
    }
}

/// A set of heights, used to express behavior schedules compactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightSet {
    All,
    Even,
    Odd,
    /// Inclusive range.
    Range {
        from: Height,
        to: Height,
    },
    /// Every height `>= from`.
    From(Height),
    List(Vec<Height>),
}

impl HeightSet {
    pub fn contains(&self, h: Height) -> bool {
        match self {
            HeightSet::All => true,
            HeightSet::Even => h.is_multiple_of(2),
            HeightSet::Odd => h % 2 == 1,
            HeightSet::Range { from, to } => (*from..=*to).contains(&h),
            HeightSet::From(from) => h >= *from,
            HeightSet::List(hs) => hs.contains(&h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorRule {
    pub kind: BehaviorKind,
    pub heights: HeightSet,
}

/// Height → behavior map. Heights not covered by any rule are `Correct`;
/// the first matching rule wins.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BehaviorSchedule {
    pub rules: Vec<BehaviorRule>,
}

impl BehaviorSchedule {
    pub fn correct() -> Self {
        Self::default()
    }

    pub fn with(kind: BehaviorKind, heights: HeightSet) -> Self {
        Self {
            rules: vec![BehaviorRule { kind, heights }],
        }
    }

    pub fn at(&self, h: Height) -> BehaviorKind {
        self.rules
            .iter()
            .find(|r| r.heights.contains(h))
            .map(|r| r.kind)
            .unwrap_or(BehaviorKind::Correct)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub id: ProcessId,
    pub merit: Merit,
    pub initial_stake: Units,
    #[serde(default)]
    pub behavior: BehaviorSchedule,
}

/// Byzantine bound on a committee of size `n`: `⌊(n−1)/3⌋`.
pub fn max_faulty(n: usize) -> usize {
    n.saturating_sub(1) / 3
}

/// Decision quorum inside a committee: `⌈2n/3⌉`.
pub fn quorum(n: usize) -> usize {
    (2 * n).div_ceil(3)
}

/// Smallest count of identical reports that contains at least one correct
/// reporter: `⌊n/3⌋+1`.
pub fn evidence_threshold(n: usize) -> usize {
    n / 3 + 1
}

/// Distinct accusers needed before a suspect is considered non-correct:
/// `2⌊n/3⌋+1`.
pub fn suspicion_threshold(n: usize) -> usize {
    2 * (n / 3) + 1
}

/// Uniform merit over a population of `n` processes.
pub fn uniform_merits(n: usize) -> Vec<Merit> {
    (0..n).map(|_| Ratio::new(1, n as u64)).collect()
}
