//! The aggregate series recomputed from the written files alone.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use fairsim_core::harness::{builtin, run_scenario, write_run, RunOptions};

type Key = (u32, u64); // (replication, height)

fn read_rewards(dir: &Path) -> BTreeMap<(u32, u64, u32), f64> {
    let mut rdr = csv::Reader::from_path(dir.join("rewards.csv")).unwrap();
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<u64>().unwrap();
        out.insert((f(0) as u32, f(1), f(2) as u32), f(3) as f64);
    }
    out
}

fn read_committees(dir: &Path, reps: u32) -> BTreeMap<Key, BTreeSet<u32>> {
    let mut out = BTreeMap::new();
    for rep in 0..reps {
        let text = std::fs::read_to_string(dir.join(format!("chain-{rep}.jsonl"))).unwrap();
        for line in text.lines().skip(1) {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let b = &v["block"];
            let members = b["committee"]
                .as_array()
                .unwrap()
                .iter()
                .map(|p| p.as_u64().unwrap() as u32)
                .collect();
            out.insert((rep, b["height"].as_u64().unwrap()), members);
        }
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() < 1e-12
}

#[test]
fn recomputed_mean_and_std_match() {
    let mut s = builtin::ev_sync_rewards();
    s.replications = 12;
    let run = run_scenario(&s, &RunOptions::default()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_run(tmp.path(), &run, false).unwrap();

    let rewards = read_rewards(tmp.path());
    let committees = read_committees(tmp.path(), 12);

    let mut rdr = csv::Reader::from_path(tmp.path().join("aggregate.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (hc, mc, sc, bc) = (col("height"), col("mean"), col("std"), col("std_between_reps"));
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let h: u64 = rec[hc].parse().unwrap();
        let mut samples = Vec::new();
        let mut rep_means = Vec::new();
        for rep in 0..12 {
            let xs: Vec<f64> = committees[&(rep, h)]
                .iter()
                .map(|p| rewards[&(rep, h, *p)])
                .collect();
            rep_means.push(xs.iter().sum::<f64>() / xs.len() as f64);
            samples.extend(xs);
        }
        let pop_std = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            (
                m,
                (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt(),
            )
        };
        let (mean, std) = pop_std(&samples);
        let (_, between) = pop_std(&rep_means);
        let got: f64 = rec[mc].parse().unwrap();
        assert!(close(got, mean), "h{h} mean {got} vs {mean}");
        let got: f64 = rec[sc].parse().unwrap();
        assert!(close(got, std), "h{h} std {got} vs {std}");
        let got: f64 = rec[bc].parse().unwrap();
        assert!(close(got, between), "h{h} between {got} vs {between}");
        assert!((0.0..=1.0).contains(&mean));
        rows += 1;
    }
    assert_eq!(rows, 30);
}

#[test]
fn totals_match_reward_rows() {
    let run = run_scenario(&builtin::good_bad_laggard(), &RunOptions::default()).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    write_run(tmp.path(), &run, false).unwrap();
    let rewards = read_rewards(tmp.path());
    for t in &run.aggregate.totals {
        let naive = rewards
            .iter()
            .filter(|((rep, _, p), r)| *rep == t.replication && *p == t.process_id.0 && **r > 0.0)
            .count() as u64;
        assert_eq!(t.rewarded_heights, naive);
    }
}

#[test]
fn sync_all_correct_is_flat() {
    let run = run_scenario(&builtin::sync_all_correct(), &RunOptions::default()).unwrap();
    assert_eq!(run.aggregate.rows.len(), 50);
    for r in &run.aggregate.rows {
        assert_eq!((r.mean, r.std), (1.0, 0.0), "height {}", r.height);
    }
}
