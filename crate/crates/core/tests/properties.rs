//! Engine-level properties over randomly drawn small scenarios.

use std::collections::BTreeMap;

use fairsim_core::fairness::GroundTruth;
use fairsim_core::harness::builtin;
use fairsim_core::network::{AsyncWindows, GstTrigger};
use fairsim_core::types::HeightSet;
use fairsim_core::*;
use proptest::prelude::*;

fn network(i: usize, seed: u64) -> NetworkModel {
    match i {
        0 => NetworkModel::Synchronous { delay: seed % 3 },
        1 => NetworkModel::GoodBad {
            good_len: 150,
            bad_len: 100,
            good_delay_bound: 3,
            bad_delay_range: (5, 40),
            laggards: BTreeMap::new(),
        },
        2 => NetworkModel::EventuallySynchronous {
            gst: GstTrigger::AtHeight(4),
            post_gst_bound: 20,
            post_gst_min: 0,
            pre_gst_delay_range: (5, 80),
        },
        _ => NetworkModel::Asynchronous {
            min_delay: 2,
            tail_index: 1.5,
            windows: Some(AsyncWindows {
                period: 1_000,
                len: 500,
                bound: 10,
            }),
            adversary: None,
        },
    }
}

fn kind(i: usize) -> Option<BehaviorKind> {
    [
        None,
        Some(BehaviorKind::ByzantineSilent),
        Some(BehaviorKind::ByzantineEquivocate),
        Some(BehaviorKind::ByzantineDecisionOnly),
    ][i]
}

fn heights(i: usize) -> HeightSet {
    [
        HeightSet::All,
        HeightSet::Even,
        HeightSet::Odd,
        HeightSet::From(5),
    ][i]
        .clone()
}

prop_compose! {
    fn config()(
        mech in 0usize..6,
        selection in 0usize..3,
        net in 0usize..4,
        population in 4usize..8,
        faulty in 0usize..4,
        faulty_at in 0usize..4,
        faulty_id in 0u32..4,
        seed in any::<u64>(),
    ) -> SimConfig {
        let selection = [
            SelectionMechanismId::LowestStake,
            SelectionMechanismId::RoundRobin,
            SelectionMechanismId::FewestSelections,
        ][selection];
        let genesis = GenesisConfig {
            committee_size: 4,
            population,
            selection,
            reward: RewardMechanismId::all()[mech],
            initial_stakes: vec![0; population],
            reward_per_member: 1,
            reward_delay: 1,
        };
        let mut cfg = SimConfig::new(genesis, network(net, seed), 15);
        cfg.params = builtin::ev_sync_protocol();
        cfg.seed = seed;
        if let Some(k) = kind(faulty) {
            cfg.behaviors[faulty_id as usize] = BehaviorSchedule::with(k, heights(faulty_at));
        }
        cfg
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chain_is_valid_deterministic_and_never_pays_outsiders(cfg in config()) {
        let a = simulate(&cfg).unwrap();
        prop_assert!(chain_validate(&a.chain));
        prop_assert!(a.chain.len() as u64 >= cfg.target_height());

        let truth = GroundTruth::new(cfg.behaviors.clone());
        let report = FairnessReport::from_chain(&a.chain, &truth, cfg.max_height, 1).unwrap();
        prop_assert!(report.rows.iter().all(|r| r.cond1));

        let b = simulate(&cfg).unwrap();
        let (mut ja, mut jb) = (Vec::new(), Vec::new());
        a.chain.write_jsonl(&mut ja).unwrap();
        b.chain.write_jsonl(&mut jb).unwrap();
        prop_assert_eq!(ja, jb);
        prop_assert_eq!(a.events, b.events);
    }

    /// Under synchrony, a suspicion quorum rewards exactly the correct
    /// members whatever a single equivocating or silent member does.
    #[test]
    fn suspicion_quorum_is_fair_under_synchrony(
        delay in 0u64..3,
        byz in 0u32..4,
        silent in any::<bool>(),
        at in 0usize..4,
        seed in any::<u64>(),
    ) {
        let genesis = GenesisConfig {
            committee_size: 4,
            population: 4,
            selection: SelectionMechanismId::SelectAll,
            reward: RewardMechanismId::SuspicionQuorum { timeout_policy: TimeoutPolicy::Fixed },
            initial_stakes: vec![0; 4],
            reward_per_member: 1,
            reward_delay: 1,
        };
        let mut cfg = SimConfig::new(genesis, NetworkModel::Synchronous { delay }, 30);
        cfg.seed = seed;
        let k = if silent { BehaviorKind::ByzantineSilent } else { BehaviorKind::ByzantineEquivocate };
        cfg.behaviors[byz as usize] = BehaviorSchedule::with(k, heights(at));
        let out = simulate(&cfg).unwrap();
        let truth = GroundTruth::new(cfg.behaviors.clone());
        let report = FairnessReport::from_chain(&out.chain, &truth, 30, 15).unwrap();
        prop_assert_eq!(report.classification, Classification::Fair, "{:?}", report.witnesses);
    }
}

#[test]
fn stored_chain_roundtrips() {
    let genesis = GenesisConfig {
        committee_size: 4,
        population: 6,
        selection: SelectionMechanismId::LowestStake,
        reward: RewardMechanismId::TendermintToReward {
            timeout_policy: TimeoutPolicy::Modulable,
        },
        initial_stakes: vec![0; 6],
        reward_per_member: 2,
        reward_delay: 1,
    };
    let out = simulate(&SimConfig::new(genesis, network(1, 0), 20)).unwrap();
    let mut bytes = Vec::new();
    out.chain.write_jsonl(&mut bytes).unwrap();
    let back = Blockchain::read_jsonl(bytes.as_slice()).unwrap();
    assert_eq!(back, out.chain);
    assert!(chain_validate(&back));
}
