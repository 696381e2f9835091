use rayon::prelude::*;

use super::aggregate::{aggregate, AggregateSeries};
use super::scenario::{replication_seed, RunMode, Scenario};
use crate::chain::Blockchain;
use crate::engine::simulate;
use crate::error::HarnessError;
use crate::fairness::{FairnessReport, GroundTruth};
use crate::network::Message;
use crate::selection::{simulate_selection, SelectionStats};
use crate::types::Height;

/// Command-line overrides of a scenario.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub replications: Option<u32>,
    /// Worker threads; all cores when `None`.
    pub jobs: Option<usize>,
    pub trace: bool,
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub index: u32,
    pub seed: u64,
    pub chain: Blockchain,
    pub report: FairnessReport,
    pub selection: SelectionStats,
    pub gst_height: Option<Height>,
    pub trace: Vec<Message>,
    pub events: u64,
}

impl Replication {
    /// Everything derivable from a finished chain.
    pub fn from_chain(
        scenario: &Scenario,
        index: u32,
        seed: u64,
        chain: Blockchain,
        gst_height: Option<Height>,
    ) -> Result<Self, HarnessError> {
        let truth = GroundTruth::new(scenario.behaviors());
        let report = FairnessReport::from_chain(&chain, &truth, scenario.max_height, scenario.window())?;
        let graded = chain.blocks.iter().take(scenario.max_height as usize);
        let selection =
            SelectionStats::from_committees(chain.genesis.population, graded.map(|b| b.committee.as_slice()));
        Ok(Self {
            index,
            seed,
            chain,
            report,
            selection,
            gst_height,
            trace: Vec::new(),
            events: 0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// The scenario as run, with overrides applied.
    pub scenario: Scenario,
    pub replications: Vec<Replication>,
    pub aggregate: AggregateSeries,
}

pub fn run_replication(
    scenario: &Scenario,
    base_seed: u64,
    index: u32,
    trace: bool,
) -> Result<Replication, HarnessError> {
    let seed = replication_seed(base_seed, index);
    match scenario.mode {
        RunMode::SelectionOnly => {
            let genesis = scenario.genesis_config();
            let chain = simulate_selection(&genesis, scenario.max_height + genesis.reward_delay);
            Replication::from_chain(scenario, index, seed, chain, None)
        }
        RunMode::Full => {
            let cfg = scenario.sim_config(base_seed, index, trace);
            let out = simulate(&cfg).map_err(|source| HarnessError::Replication {
                replication: index,
                source,
            })?;
            let mut rep = Replication::from_chain(scenario, index, seed, out.chain, out.gst_height)?;
            rep.trace = out.trace;
            rep.events = out.events;
            Ok(rep)
        }
    }
}

/// Validates `scenario`, runs its replications in parallel and aggregates
/// them. Results are ordered by replication index.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<RunOutput, HarnessError> {
    let mut s = scenario.clone();
    if let Some(seed) = opts.seed {
        s.seed = seed;
    }
    if let Some(r) = opts.replications {
        s.replications = r;
    }
    s.validate()?;
    let work = || -> Result<Vec<Replication>, HarnessError> {
        (0..s.replications)
            .into_par_iter()
            .map(|i| run_replication(&s, s.seed, i, opts.trace))
            .collect()
    };
    let replications = match opts.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| std::io::Error::other(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let chains: Vec<&Blockchain> = replications.iter().map(|r| &r.chain).collect();
    let aggregate = aggregate(&chains, s.max_height);
    Ok(RunOutput {
        scenario: s,
        replications,
        aggregate,
    })
}
