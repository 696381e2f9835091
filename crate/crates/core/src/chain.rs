//! Blocks, the blockchain, and its line-oriented JSON trace format.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::ChainError;
use crate::reward::RewardMechanismId;
use crate::selection::SelectionMechanismId;
use crate::types::{Height, ProcessId, Units};

/// Opaque block content identifier.
///
/// Consensus-produced payloads pack `(height, round, author, variant)` so that
/// a receiver can tell which process signed a proposal for which round.
/// Layout: height in the top 32 bits, then 12 bits of round, 16 bits of author
/// and 4 bits of variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct PayloadId(pub u64);

impl PayloadId {
    pub const MAX_ROUND: u32 = (1 << 12) - 1;
    pub const MAX_AUTHOR: u32 = (1 << 16) - 1;
    pub const MAX_VARIANT: u8 = (1 << 4) - 1;

    pub fn new(height: Height, round: u32, author: ProcessId, variant: u8) -> Self {
        assert!(height <= u32::MAX as u64, "height out of payload range");
        assert!(round <= Self::MAX_ROUND, "round out of payload range");
        assert!(author.0 <= Self::MAX_AUTHOR, "author out of payload range");
        assert!(variant <= Self::MAX_VARIANT, "variant out of payload range");
        PayloadId(height << 32 | (round as u64) << 20 | (author.0 as u64) << 4 | variant as u64)
    }

    pub fn height(self) -> Height {
        self.0 >> 32
    }

    pub fn round(self) -> u32 {
        ((self.0 >> 20) & Self::MAX_ROUND as u64) as u32
    }

    pub fn author(self) -> ProcessId {
        ProcessId(((self.0 >> 4) & Self::MAX_AUTHOR as u64) as u32)
    }

    pub fn variant(self) -> u8 {
        (self.0 & Self::MAX_VARIANT as u64) as u8
    }
}

/// Public configuration carried by the genesis block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenesisConfig {
    /// Committee size `n`.
    pub committee_size: usize,
    /// Population size `N`.
    pub population: usize,
    pub selection: SelectionMechanismId,
    pub reward: RewardMechanismId,
    /// Initial stake of each process, indexed by id.
    pub initial_stakes: Vec<Units>,
    #[serde(default = "default_reward_per_member")]
    pub reward_per_member: Units,
    /// Rewards for height `h` are written in block `h + reward_delay`.
    #[serde(default = "default_reward_delay")]
    pub reward_delay: u64,
}

fn default_reward_per_member() -> Units {
    1
}

fn default_reward_delay() -> u64 {
    1
}

impl GenesisConfig {
    pub fn stake_of(&self, p: ProcessId) -> Units {
        self.initial_stakes.get(p.index()).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub height: Height,
    /// Committee `V_h` that produced this block, in selection order.
    pub committee: Vec<ProcessId>,
    /// Height whose rewards this block allocates, if any.
    pub rewards_for: Option<Height>,
    pub reward_vector: BTreeMap<ProcessId, Units>,
    pub payload_id: PayloadId,
    #[serde(with = "hex_u128")]
    pub parent_link: u128,
}

/// Simulated hash of a block.
///
/// An injective encoding of `(height, payload_id)`; the genesis placeholder
/// (height 0, payload 0) hashes to 0.
pub fn simulated_hash(height: Height, payload_id: PayloadId) -> u128 {
    (height as u128) << 64 | payload_id.0 as u128
}

impl Block {
    pub fn hash(&self) -> u128 {
        simulated_hash(self.height, self.payload_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blockchain {
    pub genesis: GenesisConfig,
    pub blocks: Vec<Block>,
}

impl Blockchain {
    pub fn new(genesis: GenesisConfig) -> Self {
        Self {
            genesis,
            blocks: Vec::new(),
        }
    }

    /// Number of blocks, genesis excluded.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, h: Height) -> Option<&Block> {
        if h == 0 {
            return None;
        }
        self.blocks.get(h as usize - 1)
    }

    /// Hash of the block at `h`, or of the genesis placeholder for `h == 0`.
    pub fn hash_at(&self, h: Height) -> Option<u128> {
        if h == 0 {
            Some(0)
        } else {
            self.block(h).map(Block::hash)
        }
    }

    pub fn tip_hash(&self) -> u128 {
        self.hash_at(self.len() as Height).unwrap_or(0)
    }

    /// Appends `block`, refusing anything that would break the chain property.
    pub fn append(&mut self, block: Block) -> Result<(), ChainError> {
        let expected = self.len() as Height + 1;
        if block.height != expected {
            return Err(ChainError::NonContiguous {
                expected,
                found: block.height,
            });
        }
        if block.parent_link != self.tip_hash() {
            return Err(ChainError::BrokenLink { height: block.height });
        }
        self.blocks.push(block);
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), ChainError> {
        serde_json::to_writer(&mut out, &TraceLine::Genesis(self.genesis.clone()))?;
        out.write_all(b"\n")?;
        for b in &self.blocks {
            serde_json::to_writer(&mut out, &TraceLine::Block(b.clone()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads a trace written by [`Blockchain::write_jsonl`]. Links are not
    /// checked here; see [`chain_validate`].
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, ChainError> {
        let mut genesis = None;
        let mut blocks = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine = serde_json::from_str(&line).map_err(|e| ChainError::Line {
                line: i + 1,
                source: e,
            })?;
            match parsed {
                TraceLine::Genesis(g) if genesis.is_none() && blocks.is_empty() => genesis = Some(g),
                TraceLine::Genesis(_) => return Err(ChainError::MisplacedGenesis { line: i + 1 }),
                TraceLine::Block(b) => blocks.push(b),
            }
        }
        let genesis = genesis.ok_or(ChainError::MissingGenesis)?;
        Ok(Self { genesis, blocks })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TraceLine {
    Genesis(GenesisConfig),
    Block(Block),
}

/// True iff heights are contiguous from 1 and every parent link matches the
/// simulated hash of the previous block.
pub fn chain_validate(bc: &Blockchain) -> bool {
    let mut prev = 0u128;
    for (i, b) in bc.blocks.iter().enumerate() {
        if b.height != i as Height + 1 || b.parent_link != prev {
            return false;
        }
        prev = b.hash();
    }
    true
}

mod hex_u128 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{v:#x}"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        let s = String::deserialize(d)?;
        let digits = s.strip_prefix("0x").unwrap_or(&s);
        u128::from_str_radix(digits, 16).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardMechanismId;
    use crate::selection::SelectionMechanismId;

    fn genesis() -> GenesisConfig {
        GenesisConfig {
            committee_size: 4,
            population: 4,
            selection: SelectionMechanismId::SelectAll,
            reward: RewardMechanismId::RewardAllCommittee,
            initial_stakes: vec![0; 4],
            reward_per_member: 1,
            reward_delay: 1,
        }
    }

    fn linked(n: u64) -> Blockchain {
        let mut bc = Blockchain::new(genesis());
        for h in 1..=n {
            let block = Block {
                height: h,
                committee: (0..4).map(ProcessId).collect(),
                rewards_for: (h > 1).then(|| h - 1),
                reward_vector: BTreeMap::new(),
                payload_id: PayloadId::new(h, 0, ProcessId(0), 0),
                parent_link: bc.tip_hash(),
            };
            bc.append(block).unwrap();
        }
        bc
    }

    #[test]
    fn genesis_hash_is_zero() {
        assert_eq!(simulated_hash(0, PayloadId(0)), 0);
        assert_eq!(linked(0).hash_at(0), Some(0));
    }

    #[test]
    fn hash_is_deterministic() {
        assert_eq!(simulated_hash(1, PayloadId(7)), simulated_hash(1, PayloadId(7)));
    }

    #[test]
    fn hash_is_injective_on_small_space() {
        let mut seen = std::collections::HashSet::new();
        for h in 0..32u64 {
            for p in 0..256u64 {
                assert!(seen.insert(simulated_hash(h, PayloadId(p))));
            }
        }
        // edges of the payload range
        assert_ne!(
            simulated_hash(1, PayloadId(u64::MAX)),
            simulated_hash(2, PayloadId(0))
        );
    }

    #[test]
    fn payload_fields_roundtrip() {
        let p = PayloadId::new(123_456, 17, ProcessId(4000), 2);
        assert_eq!(p.height(), 123_456);
        assert_eq!(p.round(), 17);
        assert_eq!(p.author(), ProcessId(4000));
        assert_eq!(p.variant(), 2);
    }

    #[test]
    fn validate_empty_and_linked() {
        assert!(chain_validate(&linked(0)));
        assert!(chain_validate(&linked(3)));
    }

    #[test]
    fn validate_detects_corrupted_link() {
        let mut bc = linked(3);
        bc.blocks[1].parent_link ^= 1;
        assert!(!chain_validate(&bc));
    }

    #[test]
    fn validate_detects_payload_change_upstream() {
        // rewriting block 1's payload changes its hash, orphaning block 2
        let mut bc = linked(3);
        bc.blocks[0].payload_id = PayloadId(99);
        assert!(!chain_validate(&bc));
    }

    #[test]
    fn validate_detects_gap() {
        let mut bc = linked(3);
        bc.blocks[2].height = 4;
        assert!(!chain_validate(&bc));
    }

    #[test]
    fn append_rejects_bad_link() {
        let mut bc = linked(1);
        let mut b = bc.blocks[0].clone();
        b.height = 2;
        b.parent_link = 5;
        assert!(matches!(bc.append(b), Err(ChainError::BrokenLink { height: 2 })));
    }

    #[test]
    fn jsonl_roundtrip() {
        let mut bc = linked(4);
        bc.blocks[3].reward_vector.insert(ProcessId(2), 1);
        let mut buf = Vec::new();
        bc.write_jsonl(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&c| c == b'\n').count(), 5);
        let back = Blockchain::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, bc);
    }

    #[test]
    fn jsonl_requires_genesis_first() {
        let bc = linked(1);
        let mut buf = Vec::new();
        bc.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let swapped: Vec<&str> = text.lines().rev().collect();
        let err = Blockchain::read_jsonl(swapped.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, ChainError::MisplacedGenesis { .. }));
    }
}
