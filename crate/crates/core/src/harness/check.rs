//! Re-grades stored traces and compares the result with the stored outputs.

use std::io::BufReader;
use std::path::Path;

use serde::Serialize;

use super::aggregate::aggregate;
use super::output::{self, chain_file};
use super::runner::Replication;
use super::scenario::{replication_seed, Scenario};
use crate::chain::{chain_validate, Blockchain};
use crate::error::HarnessError;
use crate::fairness::Classification;
use crate::types::Height;

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub scenario: String,
    pub replications: u32,
    pub heights: Height,
    pub classifications: Vec<Classification>,
}

fn stored_gst_heights(dir: &Path, reps: u32) -> Result<Vec<Option<Height>>, HarnessError> {
    let text = std::fs::read_to_string(dir.join(output::FAIRNESS))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    (0..reps as usize)
        .map(|i| {
            let entry = v["replications"]
                .get(i)
                .ok_or_else(|| HarnessError::Inconsistent(format!("fairness.json lacks replication {i}")))?;
            Ok(entry["gst_height"].as_u64())
        })
        .collect()
}

fn compare(dir: &Path, name: &str, expected: &[u8]) -> Result<(), HarnessError> {
    let stored = std::fs::read(dir.join(name))?;
    if stored != expected {
        return Err(HarnessError::Inconsistent(format!(
            "{name} does not match the stored traces"
        )));
    }
    Ok(())
}

/// Reads `scenario-echo.json` and the chain traces from `dir`, validates
/// every chain, re-derives all analysis outputs and requires them to be
/// byte-identical to the stored ones.
pub fn check_outputs(dir: &Path) -> Result<CheckReport, HarnessError> {
    let scenario = Scenario::from_file(&dir.join(output::SCENARIO_ECHO))?;
    scenario.validate()?;
    let gst = stored_gst_heights(dir, scenario.replications)?;
    let mut reps = Vec::with_capacity(scenario.replications as usize);
    for i in 0..scenario.replications {
        let file = std::fs::File::open(dir.join(chain_file(i)))?;
        let chain = Blockchain::read_jsonl(BufReader::new(file))?;
        if !chain_validate(&chain) {
            return Err(HarnessError::Inconsistent(format!(
                "{} is not a valid chain",
                chain_file(i)
            )));
        }
        if chain.genesis != scenario.genesis_config() {
            return Err(HarnessError::Inconsistent(format!(
                "{} was produced by a different genesis",
                chain_file(i)
            )));
        }
        let seed = replication_seed(scenario.seed, i);
        reps.push(Replication::from_chain(
            &scenario,
            i,
            seed,
            chain,
            gst[i as usize],
        )?);
    }
    let chains: Vec<&Blockchain> = reps.iter().map(|r| &r.chain).collect();
    let agg = aggregate(&chains, scenario.max_height);
    compare(dir, output::FAIRNESS, &output::render_fairness(&scenario, &reps)?)?;
    compare(
        dir,
        output::REWARDS,
        &output::render_rewards(&reps, scenario.max_height)?,
    )?;
    compare(
        dir,
        output::SELECTION,
        &output::render_selection(&scenario, &reps)?,
    )?;
    compare(dir, output::AGGREGATE, &output::render_aggregate(&agg)?)?;
    compare(dir, output::TOTALS, &output::render_totals(&agg)?)?;
    Ok(CheckReport {
        scenario: scenario.name.clone(),
        replications: scenario.replications,
        heights: scenario.max_height,
        classifications: reps.iter().map(|r| r.report.classification).collect(),
    })
}
