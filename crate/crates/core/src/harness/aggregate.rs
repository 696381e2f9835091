//! Mean and spread of the reward parameter per height across replications.

use serde::Serialize;

use crate::chain::Blockchain;
use crate::reward::RewardMatrix;
use crate::types::{Height, ProcessId, Units};

/// One height of the aggregate series.
///
/// Samples are `r_i^h` for every committee member `i` of `V_h` in every
/// replication. `std` is the population standard deviation of those
/// samples; `std_between_reps` is the population standard deviation of the
/// per-replication means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub height: Height,
    pub mean: f64,
    pub std: f64,
    pub mean_minus_std: f64,
    pub mean_plus_std: f64,
    pub std_between_reps: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessTotal {
    pub replication: u32,
    pub process_id: ProcessId,
    /// Heights for which the process was rewarded.
    pub rewarded_heights: u64,
    pub amount: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateSeries {
    pub rows: Vec<AggregateRow>,
    pub totals: Vec<ProcessTotal>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates heights `1..=max_height` over the given chains, one per
/// replication in index order.
pub fn aggregate(chains: &[&Blockchain], max_height: Height) -> AggregateSeries {
    let matrices: Vec<RewardMatrix> = chains.iter().map(|c| RewardMatrix::from_chain(c)).collect();
    let mut rows = Vec::with_capacity(max_height as usize);
    for h in 1..=max_height {
        let mut all = Vec::new();
        let mut per_rep = Vec::new();
        for (bc, m) in chains.iter().zip(&matrices) {
            let Some(block) = bc.block(h) else { continue };
            let rs: Vec<f64> = block
                .committee
                .iter()
                .map(|p| if m.r(h, *p).unwrap_or(false) { 1.0 } else { 0.0 })
                .collect();
            if rs.is_empty() {
                continue;
            }
            per_rep.push(mean_std(&rs).0);
            all.extend(rs);
        }
        let (mean, std) = mean_std(&all);
        let (_, std_between_reps) = mean_std(&per_rep);
        rows.push(AggregateRow {
            height: h,
            mean,
            std,
            mean_minus_std: mean - std,
            mean_plus_std: mean + std,
            std_between_reps,
            samples: all.len(),
        });
    }
    let mut totals = Vec::new();
    for (rep, (bc, m)) in chains.iter().zip(&matrices).enumerate() {
        for i in 0..bc.genesis.population {
            let p = ProcessId(i as u32);
            let mut rewarded = 0;
            let mut amount = 0;
            for h in 1..=max_height {
                if m.r(h, p).unwrap_or(false) {
                    rewarded += 1;
                }
                amount += m.amount(h, p).unwrap_or(0);
            }
            totals.push(ProcessTotal {
                replication: rep as u32,
                process_id: p,
                rewarded_heights: rewarded,
                amount,
            });
        }
    }
    AggregateSeries { rows, totals }
}
