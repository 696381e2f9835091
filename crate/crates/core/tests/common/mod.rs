//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use fairsim_core::fairness::grade_height;
use fairsim_core::types::HeightSet;
use fairsim_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn genesis(
    population: usize,
    n: usize,
    selection: SelectionMechanismId,
    reward_delay: u64,
) -> GenesisConfig {
    GenesisConfig {
        committee_size: n,
        population,
        selection,
        reward: RewardMechanismId::RewardAllCommittee,
        initial_stakes: vec![0; population],
        reward_per_member: 1,
        reward_delay,
    }
}

/// Textbook rotation: the `h`-th committee is the next `n` ids after the
/// previous committee, wrapping around.
pub fn round_robin_oracle(population: usize, n: usize, heights: u64) -> Vec<BTreeSet<u32>> {
    let mut next = 0usize;
    (0..heights)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let p = next as u32;
                    next = (next + 1) % population;
                    p
                })
                .collect()
        })
        .collect()
}

pub fn committees(bc: &Blockchain) -> Vec<BTreeSet<u32>> {
    bc.blocks
        .iter()
        .map(|b| b.committee.iter().map(|p| p.0).collect())
        .collect()
}

/// Checks the three conditions straight from their statements, using set
/// algebra instead of a single classifying pass.
pub fn grade_oracle(
    population: usize,
    committee: &BTreeSet<u32>,
    rewarded: &BTreeSet<u32>,
    faulty: &BTreeSet<u32>,
) -> (bool, bool, bool) {
    let everyone: BTreeSet<u32> = (0..population as u32).collect();
    let outsiders: BTreeSet<u32> = everyone.difference(committee).copied().collect();
    let correct_members: BTreeSet<u32> = committee.difference(faulty).copied().collect();
    let faulty_members: BTreeSet<u32> = committee.intersection(faulty).copied().collect();
    (
        outsiders.is_disjoint(rewarded),
        correct_members.is_subset(rewarded),
        faulty_members.is_disjoint(rewarded),
    )
}

fn random_subset(rng: &mut ChaCha8Rng, population: usize, p: f64) -> BTreeSet<u32> {
    (0..population as u32).filter(|_| rng.random_bool(p)).collect()
}

/// One random grading instance: library verdict and oracle verdict.
pub struct GradeCase {
    pub got: (bool, bool, bool),
    pub want: (bool, bool, bool),
    pub description: String,
}

fn grade_case(rng: &mut ChaCha8Rng) -> GradeCase {
    let population = rng.random_range(1..=8);
    let h: Height = rng.random_range(1..=6);
    let committee = random_subset(rng, population, 0.6);
    let faulty = random_subset(rng, population, 0.3);
    // amounts, not flags: zero-amount entries must count as unrewarded
    let mut amounts = BTreeMap::new();
    for p in 0..population as u32 {
        if rng.random_bool(0.8) {
            amounts.insert(ProcessId(p), rng.random_range(0..3u64));
        }
    }
    let rewarded: BTreeSet<u32> = amounts
        .iter()
        .filter(|(_, a)| **a > 0)
        .map(|(p, _)| p.0)
        .collect();

    // the matrix is rebuilt from a raw chain, as it would be from a trace
    let mut bc = Blockchain::new(genesis(
        population,
        committee.len().max(1),
        SelectionMechanismId::RoundRobin,
        1,
    ));
    for height in 1..=h + 1 {
        let (rewards_for, reward_vector) = if height == h + 1 {
            (Some(h), amounts.clone())
        } else {
            (height.checked_sub(1).filter(|&x| x >= 1), BTreeMap::new())
        };
        let block = Block {
            height,
            committee: Vec::new(),
            rewards_for,
            reward_vector,
            payload_id: PayloadId::new(height, 0, ProcessId(0), 0),
            parent_link: bc.tip_hash(),
        };
        bc.append(block).expect("blocks in order");
    }
    let matrix = RewardMatrix::from_chain(&bc);

    let schedules = (0..population as u32)
        .map(|p| {
            if faulty.contains(&p) {
                BehaviorSchedule::with(BehaviorKind::ByzantineSilent, HeightSet::List(vec![h]))
            } else {
                BehaviorSchedule::correct()
            }
        })
        .collect();
    let truth = GroundTruth::new(schedules);
    let members: Vec<ProcessId> = committee.iter().map(|&p| ProcessId(p)).collect();

    GradeCase {
        got: grade_height(h, &matrix, &members, &truth).expect("height is allocated"),
        want: grade_oracle(population, &committee, &rewarded, &faulty),
        description: format!("pop {population} V {committee:?} R {rewarded:?} F {faulty:?}"),
    }
}

pub fn grade_cases(seed: u64, count: usize) -> Vec<GradeCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| grade_case(&mut rng)).collect()
}
