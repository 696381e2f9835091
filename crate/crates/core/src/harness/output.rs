//! Output files of a run. Every file is rendered to bytes first and then
//! moved into place atomically, so a crashed run never leaves a half-written
//! file behind and two runs of the same scenario produce identical bytes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::aggregate::AggregateSeries;
use super::runner::{Replication, RunOutput};
use super::scenario::Scenario;
use crate::error::HarnessError;
use crate::fairness::{Classification, FairnessProperties, HeightGrade, Witness};
use crate::reward::RewardMatrix;
use crate::types::{Height, ProcessId};

pub const REWARDS: &str = "rewards.csv";
pub const SELECTION: &str = "selection.csv";
pub const TOTALS: &str = "totals.csv";
pub const AGGREGATE: &str = "aggregate.csv";
pub const FAIRNESS: &str = "fairness.json";
pub const SCENARIO_ECHO: &str = "scenario-echo.json";

pub fn chain_file(index: u32) -> String {
    format!("chain-{index}.jsonl")
}

pub fn events_file(index: u32) -> String {
    format!("events-{index}.jsonl")
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Serialize)]
struct RewardRow {
    replication: u32,
    height: Height,
    process_id: ProcessId,
    r: u8,
    amount: u64,
}

pub fn render_rewards(reps: &[Replication], max_height: Height) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for rep in reps {
        let m = RewardMatrix::from_chain(&rep.chain);
        for h in 1..=max_height {
            for i in 0..m.population() {
                let p = ProcessId(i as u32);
                w.serialize(RewardRow {
                    replication: rep.index,
                    height: h,
                    process_id: p,
                    r: u8::from(m.r(h, p)?),
                    amount: m.amount(h, p)?,
                })?;
            }
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

#[derive(Serialize)]
struct SelectionRow {
    replication: u32,
    process_id: ProcessId,
    count: u64,
    v_i: f64,
    alpha_i: f64,
}

pub fn render_selection(scenario: &Scenario, reps: &[Replication]) -> Result<Vec<u8>, HarnessError> {
    let merits = scenario.merits();
    let mut w = csv::Writer::from_writer(Vec::new());
    for rep in reps {
        let s = &rep.selection;
        for (i, count) in s.counts.iter().enumerate() {
            let alpha = merits[i];
            w.serialize(SelectionRow {
                replication: rep.index,
                process_id: ProcessId(i as u32),
                count: *count,
                v_i: *count as f64 / s.total_heights.max(1) as f64,
                alpha_i: *alpha.numer() as f64 / *alpha.denom() as f64,
            })?;
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn render_totals(agg: &AggregateSeries) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in &agg.totals {
        w.serialize(t)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn render_aggregate(agg: &AggregateSeries) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &agg.rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

#[derive(Debug, Serialize)]
pub struct ReplicationFairness<'a> {
    pub replication: u32,
    pub seed: u64,
    pub classification: Classification,
    pub h0: Option<Height>,
    pub gst_height: Option<Height>,
    /// How long after stabilization the clean suffix started.
    pub h0_minus_gst: Option<i64>,
    pub properties: FairnessProperties,
    pub rows: &'a [HeightGrade],
    pub witnesses: &'a [Witness],
}

#[derive(Debug, Serialize)]
pub struct FairnessFile<'a> {
    pub scenario: &'a str,
    pub window: u64,
    pub replications: Vec<ReplicationFairness<'a>>,
}

pub fn render_fairness(scenario: &Scenario, reps: &[Replication]) -> Result<Vec<u8>, HarnessError> {
    let file = FairnessFile {
        scenario: &scenario.name,
        window: scenario.window(),
        replications: reps
            .iter()
            .map(|rep| {
                let h0 = rep.report.properties.eventually_fair_from;
                ReplicationFairness {
                    replication: rep.index,
                    seed: rep.seed,
                    classification: rep.report.classification,
                    h0,
                    gst_height: rep.gst_height,
                    h0_minus_gst: h0.zip(rep.gst_height).map(|(a, b)| a as i64 - b as i64),
                    properties: rep.report.properties,
                    rows: &rep.report.rows,
                    witnesses: &rep.report.witnesses,
                }
            })
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&file)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn render_chain(rep: &Replication) -> Result<Vec<u8>, HarnessError> {
    let mut bytes = Vec::new();
    rep.chain.write_jsonl(&mut bytes)?;
    Ok(bytes)
}

pub fn render_events(rep: &Replication) -> Result<Vec<u8>, HarnessError> {
    let mut bytes = Vec::new();
    for m in &rep.trace {
        serde_json::to_writer(&mut bytes, m)?;
        bytes.push(b'\n');
    }
    Ok(bytes)
}

pub fn render_scenario(scenario: &Scenario) -> Vec<u8> {
    let mut bytes = scenario.to_json().into_bytes();
    bytes.push(b'\n');
    bytes
}

/// Writes every output of `run` into `dir`, creating it if needed. Returns
/// the written paths in a stable order.
pub fn write_run(dir: &Path, run: &RunOutput, trace: bool) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let s = &run.scenario;
    let reps = &run.replications;
    let mut files: Vec<(String, Vec<u8>)> = vec![
        (SCENARIO_ECHO.into(), render_scenario(s)),
        (REWARDS.into(), render_rewards(reps, s.max_height)?),
        (SELECTION.into(), render_selection(s, reps)?),
        (TOTALS.into(), render_totals(&run.aggregate)?),
        (AGGREGATE.into(), render_aggregate(&run.aggregate)?),
        (FAIRNESS.into(), render_fairness(s, reps)?),
    ];
    for rep in reps {
        files.push((chain_file(rep.index), render_chain(rep)?));
        if trace {
            files.push((events_file(rep.index), render_events(rep)?));
        }
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
