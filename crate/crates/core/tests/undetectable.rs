//! A member that only sends its final decision looks correct to everyone
//! else. Mechanisms that reward on observed decisions pay it anyway, so
//! accuracy is violated at exactly its faulty heights and nowhere else.

use fairsim_core::harness::{builtin, run_scenario, RunOptions};
use fairsim_core::types::HeightSet;
use fairsim_core::*;

fn check(s: harness::Scenario, faulty: ProcessId) {
    let run = run_scenario(&s, &RunOptions::default()).unwrap();
    let schedule = &s.behaviors()[faulty.index()];
    for rep in &run.replications {
        let props = rep.report.properties;
        assert!(props.complete_fair, "{}: completeness broken", s.name);
        assert!(!props.accurate_fair, "{}: decision-only member was caught", s.name);
        for row in &rep.report.rows {
            let faulty_here = !schedule.at(row.height).is_correct();
            assert_eq!(row.accuracy, !faulty_here, "{} height {}", s.name, row.height);
        }
    }
}

#[test]
fn suspicion_quorum_pays_a_decision_only_member() {
    check(builtin::sync_decision_only(), ProcessId(2));
}

#[test]
fn tendermint_pays_a_decision_only_member() {
    for policy in [TimeoutPolicy::Fixed, TimeoutPolicy::Modulable] {
        let mut s = builtin::sync_decision_only();
        s.name = format!("decision-only-{policy:?}");
        s.genesis.reward = RewardMechanismId::TendermintToReward { timeout_policy: policy };
        s.population.behaviors.insert(
            ProcessId(2),
            BehaviorSchedule::with(BehaviorKind::ByzantineDecisionOnly, HeightSet::Odd),
        );
        check(s, ProcessId(2));
    }
}
