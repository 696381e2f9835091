use std::collections::BTreeMap;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::chain::GenesisConfig;
use crate::consensus::ProtocolParams;
use crate::engine::SimConfig;
use crate::error::{HarnessError, ValidationError};
use crate::network::{GstTrigger, NetworkModel};
use crate::reward::RewardMechanismId;
use crate::selection::{SelectionFairnessOptions, SelectionMechanismId};
use crate::types::{max_faulty, uniform_merits, BehaviorSchedule, Height, Merit, ProcessId, Units};

pub const SCHEMA_VERSION: u32 = 1;

/// How a scenario is executed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Full message-level simulation.
    #[default]
    Full,
    /// Chain growth driven by selection and stake feedback only; every
    /// height decides and the committee is rewarded.
    SelectionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub size: usize,
    /// `α_i` per process; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merits: Option<Vec<Merit>>,
    /// Initial stakes; all zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stakes: Option<Vec<Units>>,
    /// Behaviour schedules of the processes that are not always correct.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub behaviors: BTreeMap<ProcessId, BehaviorSchedule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisSpec {
    pub committee_size: usize,
    pub selection: SelectionMechanismId,
    pub reward: RewardMechanismId,
    #[serde(default = "one")]
    pub reward_per_member: Units,
    #[serde(default = "one")]
    pub reward_delay: u64,
}

fn one() -> u64 {
    1
}

fn one_u32() -> u32 {
    1
}

fn default_max_events() -> u64 {
    50_000_000
}

fn synchronous() -> NetworkModel {
    NetworkModel::Synchronous { delay: 0 }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Minimum clean-suffix length for eventual fairness; `H/2` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_window: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_slack: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub mode: RunMode,
    pub population: PopulationSpec,
    pub genesis: GenesisSpec,
    #[serde(default = "synchronous")]
    pub network: NetworkModel,
    #[serde(default)]
    pub protocol: ProtocolParams,
    pub max_height: Height,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_u32")]
    pub replications: u32,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    /// Skip the Byzantine-bound check (negative tests only).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_excess_faults: bool,
    #[serde(default = "default_max_events")]
    pub max_events: u64,
}

impl Scenario {
    /// A full-mode scenario with everything but the essentials defaulted.
    pub fn new(
        name: &str,
        population: usize,
        committee_size: usize,
        selection: SelectionMechanismId,
        reward: RewardMechanismId,
        network: NetworkModel,
        max_height: Height,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            mode: RunMode::Full,
            population: PopulationSpec {
                size: population,
                merits: None,
                stakes: None,
                behaviors: BTreeMap::new(),
            },
            genesis: GenesisSpec {
                committee_size,
                selection,
                reward,
                reward_per_member: 1,
                reward_delay: 1,
            },
            network,
            protocol: ProtocolParams::default(),
            max_height,
            seed: 0,
            replications: 1,
            analysis: AnalysisOptions::default(),
            allow_excess_faults: false,
            max_events: default_max_events(),
        }
    }

    pub fn with_behavior(mut self, p: u32, schedule: BehaviorSchedule) -> Self {
        self.population.behaviors.insert(ProcessId(p), schedule);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| HarnessError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios always serialize")
    }

    pub fn merits(&self) -> Vec<Merit> {
        self.population
            .merits
            .clone()
            .unwrap_or_else(|| uniform_merits(self.population.size))
    }

    pub fn stakes(&self) -> Vec<Units> {
        self.population
            .stakes
            .clone()
            .unwrap_or_else(|| vec![0; self.population.size])
    }

    pub fn behaviors(&self) -> Vec<BehaviorSchedule> {
        (0..self.population.size)
            .map(|i| {
                self.population
                    .behaviors
                    .get(&ProcessId(i as u32))
                    .cloned()
                    .unwrap_or_default()
            })
            .collect()
    }

    pub fn genesis_config(&self) -> GenesisConfig {
        GenesisConfig {
            committee_size: self.genesis.committee_size,
            population: self.population.size,
            selection: self.genesis.selection,
            reward: self.genesis.reward,
            initial_stakes: self.stakes(),
            reward_per_member: self.genesis.reward_per_member,
            reward_delay: self.genesis.reward_delay,
        }
    }

    /// Engine configuration for replication `index` of a run seeded with
    /// `seed`.
    pub fn sim_config(&self, seed: u64, index: u32, record_trace: bool) -> SimConfig {
        SimConfig {
            genesis: self.genesis_config(),
            behaviors: self.behaviors(),
            network: self.network.clone(),
            params: self.protocol,
            max_height: self.max_height,
            seed: replication_seed(seed, index),
            record_trace,
            max_events: self.max_events,
            allow_excess_faults: self.allow_excess_faults,
        }
    }

    pub fn window(&self) -> u64 {
        self.analysis.window.unwrap_or(self.max_height / 2).max(1)
    }

    pub fn selection_options(&self) -> SelectionFairnessOptions {
        let d = SelectionFairnessOptions::defaults_for(self.population.size, self.genesis.committee_size);
        SelectionFairnessOptions {
            window: self.analysis.selection_window.unwrap_or(d.window),
            slack: self.analysis.selection_slack.unwrap_or(d.slack),
        }
    }

    /// Checks everything the engine relies on; errors name the offending
    /// field by its JSON path.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let err = |field: &str, message: String| Err(ValidationError::new(field, message));
        if self.schema_version != SCHEMA_VERSION {
            return err(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            );
        }
        let big_n = self.population.size;
        let n = self.genesis.committee_size;
        if n < 4 {
            return err("genesis.committee_size", format!("must be at least 4, got {n}"));
        }
        if n > big_n {
            return err(
                "genesis.committee_size",
                format!("committee of {n} exceeds the population of {big_n}"),
            );
        }
        if big_n > u16::MAX as usize + 1 {
            return err("population.size", format!("at most 65536 processes, got {big_n}"));
        }
        if self.genesis.selection == SelectionMechanismId::SelectAll && n != big_n {
            return err(
                "genesis.selection",
                format!("select_all needs committee_size == population.size ({n} != {big_n})"),
            );
        }
        if self.max_height == 0 {
            return err("max_height", "must be positive".into());
        }
        if self.replications == 0 {
            return err("replications", "must be positive".into());
        }
        if self.mode == RunMode::Full && self.genesis.reward_delay == 0 {
            return err(
                "genesis.reward_delay",
                "full simulations allocate rewards in a later block; use at least 1".into(),
            );
        }
        if let Some(m) = &self.population.merits {
            if m.len() != big_n {
                return err(
                    "population.merits",
                    format!("{} entries for {big_n} processes", m.len()),
                );
            }
            let total = m.iter().fold(Ratio::from_integer(0u64), |acc, x| acc + x);
            if total != Ratio::from_integer(1) {
                return err("population.merits", format!("merits sum to {total}, not 1"));
            }
        }
        if let Some(s) = &self.population.stakes {
            if s.len() != big_n {
                return err(
                    "population.stakes",
                    format!("{} entries for {big_n} processes", s.len()),
                );
            }
        }
        for p in self.population.behaviors.keys() {
            if p.index() >= big_n {
                return err(
                    &format!("population.behaviors.{}", p.0),
                    format!("no process {p} in a population of {big_n}"),
                );
            }
        }
        if let Some(w) = self.analysis.window {
            if w == 0 || w > self.max_height {
                return err(
                    "analysis.window",
                    format!("must lie in 1..={}, got {w}", self.max_height),
                );
            }
        }
        self.validate_network()?;
        if self.mode == RunMode::Full && !self.allow_excess_faults {
            // conservative: counts every non-correct process, member or not
            let bound = max_faulty(n);
            let behaviors = self.behaviors();
            for h in 1..=self.max_height + self.genesis.reward_delay {
                let faulty = behaviors.iter().filter(|b| !b.at(h).is_correct()).count();
                if faulty > bound {
                    return err(
                        "population.behaviors",
                        format!("{faulty} non-correct processes at height {h}, bound for n={n} is {bound}"),
                    );
                }
            }
        }
        Ok(())
    }

    fn validate_network(&self) -> Result<(), ValidationError> {
        let range = |field: &str, (lo, hi): (u64, u64)| {
            if lo > hi {
                Err(ValidationError::new(field, format!("empty range ({lo}, {hi})")))
            } else {
                Ok(())
            }
        };
        match &self.network {
            NetworkModel::Synchronous { .. } => Ok(()),
            NetworkModel::GoodBad {
                good_len,
                bad_delay_range,
                laggards,
                ..
            } => {
                if *good_len == 0 {
                    return Err(ValidationError::new(
                        "network.good_bad.good_len",
                        "good periods must have positive length",
                    ));
                }
                if let Some(p) = laggards.keys().find(|p| p.index() >= self.population.size) {
                    return Err(ValidationError::new(
                        format!("network.good_bad.laggards.{}", p.0),
                        format!("no process {p}"),
                    ));
                }
                range("network.good_bad.bad_delay_range", *bad_delay_range)
            }
            NetworkModel::EventuallySynchronous {
                gst,
                post_gst_bound,
                post_gst_min,
                pre_gst_delay_range,
            } => {
                if let GstTrigger::AtHeight(0) = gst {
                    return Err(ValidationError::new(
                        "network.eventually_synchronous.gst",
                        "heights start at 1",
                    ));
                }
                range(
                    "network.eventually_synchronous.post_gst_min",
                    (*post_gst_min, *post_gst_bound),
                )?;
                range(
                    "network.eventually_synchronous.pre_gst_delay_range",
                    *pre_gst_delay_range,
                )
            }
            NetworkModel::Asynchronous {
                tail_index,
                adversary,
                ..
            } => {
                if !(tail_index.is_finite() && *tail_index > 0.0) {
                    return Err(ValidationError::new(
                        "network.asynchronous.tail_index",
                        format!("must be positive, got {tail_index}"),
                    ));
                }
                match adversary {
                    Some(a) if a.target.index() >= self.population.size => Err(ValidationError::new(
                        "network.asynchronous.adversary.target",
                        format!("no process {}", a.target),
                    )),
                    _ => Ok(()),
                }
            }
        }
    }
}

pub fn replication_seed(seed: u64, index: u32) -> u64 {
    seed ^ index as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::TimeoutPolicy;
    use crate::types::{BehaviorKind, HeightSet};

    fn base() -> Scenario {
        Scenario::new(
            "t",
            4,
            4,
            SelectionMechanismId::SelectAll,
            RewardMechanismId::SuspicionQuorum {
                timeout_policy: TimeoutPolicy::Fixed,
            },
            NetworkModel::Synchronous { delay: 0 },
            20,
        )
    }

    #[test]
    fn roundtrip() {
        let s = base().with_behavior(
            3,
            BehaviorSchedule::with(BehaviorKind::ByzantineEquivocate, HeightSet::Even),
        );
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert!(back.validate().is_ok());
    }

    #[test]
    fn unknown_field_reports_path() {
        let mut v: serde_json::Value = serde_json::from_str(&base().to_json()).unwrap();
        v["genesis"]["comittee_size"] = 4.into();
        let err = Scenario::from_json(&v.to_string()).unwrap_err();
        match err {
            HarnessError::Parse { path, message } => {
                assert_eq!(path, "genesis.comittee_size");
                assert!(message.contains("comittee_size"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn committee_larger_than_population() {
        let mut s = base();
        s.genesis.selection = SelectionMechanismId::LowestStake;
        s.genesis.committee_size = 5;
        assert_eq!(s.validate().unwrap_err().field, "genesis.committee_size");
    }

    #[test]
    fn select_all_needs_everyone() {
        let mut s = base();
        s.population.size = 7;
        assert_eq!(s.validate().unwrap_err().field, "genesis.selection");
    }

    #[test]
    fn byzantine_bound() {
        let s = base()
            .with_behavior(
                0,
                BehaviorSchedule::with(BehaviorKind::ByzantineSilent, HeightSet::All),
            )
            .with_behavior(
                1,
                BehaviorSchedule::with(BehaviorKind::ByzantineSilent, HeightSet::From(7)),
            );
        let e = s.validate().unwrap_err();
        assert_eq!(e.field, "population.behaviors");
        assert!(e.message.contains("height 7"), "{}", e.message);
        let mut s = s;
        s.allow_excess_faults = true;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn merits_must_sum_to_one() {
        let mut s = base();
        s.population.merits = Some(
            vec![Ratio::new(1, 4); 3]
                .into_iter()
                .chain([Ratio::new(1, 5)])
                .collect(),
        );
        assert_eq!(s.validate().unwrap_err().field, "population.merits");
    }

    #[test]
    fn seeds_differ_per_replication() {
        assert_eq!(replication_seed(10, 0), 10);
        assert_ne!(replication_seed(10, 1), replication_seed(10, 2));
    }
}
