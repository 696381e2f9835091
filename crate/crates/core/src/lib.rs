//! Simulation and analysis of reward fairness in committee-based blockchains.
//!
//! A run drives `N` processes through repeated consensus: at each height a
//! selection mechanism picks a committee from the chain, the committee
//! agrees on a block, and the block at `h + k` allocates rewards for `h`.
//! The [`fairness`] module then grades the resulting reward matrix against
//! the behaviour schedules the scenario declared.

pub mod chain;
pub mod consensus;
pub mod engine;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod network;
pub mod reward;
pub mod selection;
pub mod types;

pub use chain::{chain_validate, simulated_hash, Block, Blockchain, GenesisConfig, PayloadId};
pub use engine::{run_height, simulate, SimConfig, SimOutput};
pub use error::{ChainError, FairnessError, HarnessError, SimError, ValidationError};
pub use fairness::{classify, grade_height, Classification, FairnessReport, GroundTruth};
pub use harness::{run_scenario, Scenario};
pub use network::{Message, MessageKind, NetworkModel, SimTime};
pub use reward::{RewardMatrix, RewardMechanismId, TimeoutPolicy};
pub use selection::{select, SelectionMechanismId, SelectionStats};
pub use types::{BehaviorKind, BehaviorSchedule, Height, ProcessId, ProcessSpec, Units};
