//! Plot-ready data for the selection-count and reward-evolution figures.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::builtin;
use super::output::{render_scenario, write_atomic};
use super::runner::{run_scenario, RunOptions, RunOutput};
use super::scenario::Scenario;
use crate::error::HarnessError;
use crate::types::Height;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    SelectionHighest,
    SelectionLowest,
    EvSyncRewards,
}

impl Figure {
    pub const ALL: [Figure; 3] = [
        Figure::SelectionHighest,
        Figure::SelectionLowest,
        Figure::EvSyncRewards,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::SelectionHighest => "selection-highest",
            Figure::SelectionLowest => "selection-lowest",
            Figure::EvSyncRewards => "ev-sync-rewards",
        }
    }

    pub fn scenario(self) -> Scenario {
        match self {
            Figure::SelectionHighest => builtin::selection_highest(),
            Figure::SelectionLowest => builtin::selection_lowest(),
            Figure::EvSyncRewards => builtin::ev_sync_rewards(),
        }
    }
}

impl FromStr for Figure {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| HarnessError::UnknownFigure(s.to_string()))
    }
}

#[derive(Serialize)]
struct CountRow {
    process_id: u32,
    count: u64,
}

#[derive(Serialize)]
struct RewardRow {
    height: Height,
    mean: f64,
    mean_minus_std: f64,
    mean_plus_std: f64,
}

/// Renders the figure's CSV from a finished run of its scenario.
pub fn render_figure(figure: Figure, run: &RunOutput) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match figure {
        Figure::SelectionHighest | Figure::SelectionLowest => {
            let rep = &run.replications[0];
            for (i, c) in rep.selection.counts.iter().enumerate() {
                w.serialize(CountRow {
                    process_id: i as u32,
                    count: *c,
                })?;
            }
        }
        Figure::EvSyncRewards => {
            for r in &run.aggregate.rows {
                w.serialize(RewardRow {
                    height: r.height,
                    mean: r.mean,
                    mean_minus_std: r.mean_minus_std,
                    mean_plus_std: r.mean_plus_std,
                })?;
            }
        }
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub struct FigureOutput {
    pub figure: Figure,
    pub data: PathBuf,
    pub run: RunOutput,
}

/// Runs the figure's built-in scenario and writes `<name>.csv` plus
/// `<name>.scenario.json` into `dir`.
pub fn reproduce_figure(name: &str, dir: &Path, jobs: Option<usize>) -> Result<FigureOutput, HarnessError> {
    let figure: Figure = name.parse()?;
    let opts = RunOptions {
        jobs,
        ..RunOptions::default()
    };
    let run = run_scenario(&figure.scenario(), &opts)?;
    std::fs::create_dir_all(dir)?;
    let data = dir.join(format!("{}.csv", figure.name()));
    write_atomic(&data, &render_figure(figure, &run)?)?;
    write_atomic(
        &dir.join(format!("{}.scenario.json", figure.name())),
        &render_scenario(&run.scenario),
    )?;
    Ok(FigureOutput { figure, data, run })
}
