//! Committee selection from chain contents, and the selection-fairness check.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::chain::{Block, Blockchain, GenesisConfig, PayloadId};
use crate::error::FairnessError;
use crate::reward::RewardMechanismId;
use crate::types::{Height, Merit, ProcessId, Units};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMechanismId {
    HighestStake,
    LowestStake,
    FewestSelections,
    /// Everyone, every height. Requires `n == N`.
    SelectAll,
    /// Consecutive ids starting at offset `(h-1)·n mod N`.
    RoundRobin,
}

/// Stakes and selection counts implied by a chain prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ledger {
    pub stakes: Vec<Units>,
    pub counts: Vec<u64>,
    applied: usize,
}

impl Ledger {
    pub fn new(genesis: &GenesisConfig) -> Self {
        let n = genesis.population;
        Self {
            stakes: (0..n).map(|i| genesis.stake_of(ProcessId(i as u32))).collect(),
            counts: vec![0; n],
            applied: 0,
        }
    }

    /// Number of blocks folded in so far.
    pub fn applied(&self) -> usize {
        self.applied
    }

    pub fn apply(&mut self, block: &Block) {
        for (p, amount) in &block.reward_vector {
            if let Some(s) = self.stakes.get_mut(p.index()) {
                *s += amount;
            }
        }
        for p in &block.committee {
            if let Some(c) = self.counts.get_mut(p.index()) {
                *c += 1;
            }
        }
        self.applied += 1;
    }

    /// Folds in blocks until `upto` blocks have been applied.
    pub fn catch_up(&mut self, bc: &Blockchain, upto: usize) {
        while self.applied < upto.min(bc.len()) {
            let b = &bc.blocks[self.applied];
            self.apply(b);
        }
    }

    /// Committee for the next height given the ledger state.
    pub fn choose(&self, mech: SelectionMechanismId, n: usize, h: Height) -> Vec<ProcessId> {
        let total = self.stakes.len();
        let mut ids: Vec<ProcessId> = (0..total as u32).map(ProcessId).collect();
        match mech {
            SelectionMechanismId::SelectAll => return ids,
            SelectionMechanismId::RoundRobin => {
                if total == 0 {
                    return Vec::new();
                }
                let offset = ((h.saturating_sub(1)) as usize * n) % total;
                return (0..n.min(total))
                    .map(|j| ProcessId(((offset + j) % total) as u32))
                    .collect();
            }
            SelectionMechanismId::HighestStake => {
                ids.sort_by_key(|p| (std::cmp::Reverse(self.stakes[p.index()]), *p))
            }
            SelectionMechanismId::LowestStake => ids.sort_by_key(|p| (self.stakes[p.index()], *p)),
            SelectionMechanismId::FewestSelections => ids.sort_by_key(|p| (self.counts[p.index()], *p)),
        }
        ids.truncate(n);
        ids
    }
}

/// Committee `V_h` computed from `bc`, or empty when `|bc| < h − 1`.
///
/// Only blocks `1..h−1` are consulted, so replaying a trace always
/// reproduces the same committees.
pub fn select(bc: &Blockchain, h: Height, mech: SelectionMechanismId) -> Vec<ProcessId> {
    if h == 0 || (bc.len() as Height) < h - 1 {
        return Vec::new();
    }
    let mut ledger = Ledger::new(&bc.genesis);
    ledger.catch_up(bc, (h - 1) as usize);
    ledger.choose(mech, bc.genesis.committee_size, h)
}

/// Incremental equivalent of [`select`] for monotonically growing chains.
#[derive(Debug, Clone)]
pub struct Selector {
    mech: SelectionMechanismId,
    n: usize,
    ledger: Ledger,
    cache: BTreeMap<Height, Vec<ProcessId>>,
}

impl Selector {
    pub fn new(genesis: &GenesisConfig) -> Self {
        Self {
            mech: genesis.selection,
            n: genesis.committee_size,
            ledger: Ledger::new(genesis),
            cache: BTreeMap::new(),
        }
    }

    /// `V_h`, or `None` while the chain is shorter than `h − 1`.
    pub fn committee(&mut self, bc: &Blockchain, h: Height) -> Option<&[ProcessId]> {
        if h == 0 || (bc.len() as Height) < h - 1 {
            return None;
        }
        if !self.cache.contains_key(&h) {
            // heights are requested in increasing order by the engine; fall
            // back to a fresh ledger if asked about the past
            let upto = (h - 1) as usize;
            let committee = if self.ledger.applied() <= upto {
                self.ledger.catch_up(bc, upto);
                self.ledger.choose(self.mech, self.n, h)
            } else {
                select(bc, h, self.mech)
            };
            self.cache.insert(h, committee);
        }
        self.cache.get(&h).map(Vec::as_slice)
    }

    pub fn cached(&self, h: Height) -> Option<&[ProcessId]> {
        self.cache.get(&h).map(Vec::as_slice)
    }
}

/// How often each process sat on a committee over a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionStats {
    pub counts: Vec<u64>,
    pub total_heights: u64,
    /// Longest run of consecutive heights without being selected, leading
    /// and trailing runs included.
    pub max_gap: Vec<u64>,
}

impl SelectionStats {
    pub fn from_committees<'a, I>(population: usize, committees: I) -> Self
    where
        I: IntoIterator<Item = &'a [ProcessId]>,
    {
        let mut counts = vec![0u64; population];
        let mut last_seen = vec![0u64; population];
        let mut max_gap = vec![0u64; population];
        let mut total = 0u64;
        for (i, committee) in committees.into_iter().enumerate() {
            let h = i as u64 + 1;
            total = h;
            for p in committee {
                let k = p.index();
                if k >= population {
                    continue;
                }
                counts[k] += 1;
                max_gap[k] = max_gap[k].max(h - last_seen[k] - 1);
                last_seen[k] = h;
            }
        }
        for k in 0..population {
            max_gap[k] = max_gap[k].max(total - last_seen[k]);
        }
        Self {
            counts,
            total_heights: total,
            max_gap,
        }
    }

    pub fn from_chain(bc: &Blockchain) -> Self {
        Self::from_committees(
            bc.genesis.population,
            bc.blocks.iter().map(|b| b.committee.as_slice()),
        )
    }

    /// `v_i`, the fraction of heights at which `p` was a committee member.
    pub fn frequency(&self, p: ProcessId) -> Ratio<u64> {
        Ratio::new(self.counts[p.index()], self.total_heights.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionFairnessOptions {
    /// Every positive-merit process must be selected within each window of
    /// this many heights.
    pub window: u64,
    /// Tolerated count deficit of a higher-merit process.
    pub slack: u64,
}

impl SelectionFairnessOptions {
    /// Defaults: a window of two full rotations and a slack of `n`.
    pub fn defaults_for(population: usize, n: usize) -> Self {
        let rotation = population.div_ceil(n.max(1)) as u64;
        Self {
            window: 2 * rotation.max(1),
            slack: n as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionVerdict {
    pub condition1: bool,
    pub condition2: bool,
    /// Positive-merit processes that sat out a whole window.
    pub starved: Vec<ProcessId>,
    /// Pairs `(i, j)` with `α_i ≥ α_j` but `count_i + slack < count_j`.
    pub inversions: Vec<(ProcessId, ProcessId)>,
}

impl SelectionVerdict {
    pub fn is_fair(&self) -> bool {
        self.condition1 && self.condition2
    }
}

/// Finite-trace check of the two selection-fairness conditions.
pub fn check_selection_fairness(
    stats: &SelectionStats,
    merits: &[Merit],
    opts: SelectionFairnessOptions,
) -> Result<SelectionVerdict, FairnessError> {
    if stats.total_heights < opts.window {
        return Err(FairnessError::InsufficientTrace {
            available: stats.total_heights,
            window: opts.window,
        });
    }
    let zero = Ratio::from_integer(0);
    let n = stats.counts.len();
    let merit = |i: usize| merits.get(i).copied().unwrap_or(zero);

    let starved: Vec<ProcessId> = (0..n)
        .filter(|&i| merit(i) > zero && stats.max_gap[i] >= opts.window)
        .map(|i| ProcessId(i as u32))
        .collect();

    let mut inversions = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && merit(i) >= merit(j) && stats.counts[i] + opts.slack < stats.counts[j] {
                inversions.push((ProcessId(i as u32), ProcessId(j as u32)));
            }
        }
    }
    Ok(SelectionVerdict {
        condition1: starved.is_empty(),
        condition2: inversions.is_empty(),
        starved,
        inversions,
    })
}

/// Builds a chain of `heights` blocks where only selection and the reward
/// feedback into stakes matter: every height decides, and the committee is
/// rewarded (unless the mechanism never rewards) in block `h + reward_delay`.
pub fn simulate_selection(genesis: &GenesisConfig, heights: Height) -> Blockchain {
    let mut bc = Blockchain::new(genesis.clone());
    let mut selector = Selector::new(genesis);
    let k = genesis.reward_delay;
    let mut committees: Vec<Vec<ProcessId>> = Vec::with_capacity(heights as usize);
    for h in 1..=heights {
        let committee = selector
            .committee(&bc, h)
            .expect("chain holds h-1 blocks")
            .to_vec();
        committees.push(committee.clone());
        let rewards_for = h.checked_sub(k).filter(|&r| r >= 1);
        let reward_vector = match rewards_for {
            Some(r) => committees[(r - 1) as usize]
                .iter()
                .map(|&p| match genesis.reward {
                    RewardMechanismId::NeverReward => (p, 0),
                    _ => (p, genesis.reward_per_member),
                })
                .collect(),
            None => BTreeMap::new(),
        };
        let block = Block {
            height: h,
            committee,
            rewards_for,
            reward_vector,
            payload_id: PayloadId::new(h, 0, ProcessId(0), 0),
            parent_link: bc.tip_hash(),
        };
        bc.append(block).expect("blocks are built in order");
    }
    bc
}
