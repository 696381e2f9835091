//! Named scenarios shipped with the simulator.

use std::collections::BTreeMap;

use super::scenario::{RunMode, Scenario};
use crate::consensus::ProtocolParams;
use crate::error::HarnessError;
use crate::network::{AsyncWindows, GstTrigger, NetworkModel, Slowdown};
use crate::reward::{RewardMechanismId, TimeoutPolicy};
use crate::selection::SelectionMechanismId;
use crate::types::{BehaviorKind, BehaviorSchedule, HeightSet, ProcessId};

use RewardMechanismId::{NeverReward, RewardAllCommittee, SuspicionQuorum, TendermintToReward};
use TimeoutPolicy::{Fixed, Modulable};

/// Gst at the start of height 10; after it every delay is 60 or 61 ticks,
/// before it anything in 20..=120, far above the initial Δ of 10.
pub fn ev_sync_network() -> NetworkModel {
    NetworkModel::EventuallySynchronous {
        gst: GstTrigger::AtHeight(10),
        post_gst_bound: 61,
        post_gst_min: 60,
        pre_gst_delay_range: (20, 120),
    }
}

pub fn ev_sync_protocol() -> ProtocolParams {
    ProtocolParams {
        initial_delta: 10,
        delta_increment: 5,
        round_timeout: 200,
        round_timeout_increment: 100,
    }
}

fn four(name: &str, reward: RewardMechanismId, network: NetworkModel, h: u64) -> Scenario {
    Scenario::new(name, 4, 4, SelectionMechanismId::SelectAll, reward, network, h)
}

pub fn sync_equivocator() -> Scenario {
    let mut s = four(
        "sync-equivocator",
        SuspicionQuorum {
            timeout_policy: Fixed,
        },
        NetworkModel::Synchronous { delay: 0 },
        200,
    )
    .with_behavior(
        3,
        BehaviorSchedule::with(BehaviorKind::ByzantineEquivocate, HeightSet::Even),
    );
    s.replications = 20;
    s.seed = 1;
    s
}

pub fn good_bad_laggard() -> Scenario {
    let mut laggards = BTreeMap::new();
    laggards.insert(ProcessId(3), 1_000);
    let mut s = four(
        "goodbad-laggard",
        TendermintToReward {
            timeout_policy: Fixed,
        },
        NetworkModel::GoodBad {
            good_len: 200,
            bad_len: 100,
            good_delay_bound: 2,
            bad_delay_range: (5, 30),
            laggards,
        },
        500,
    );
    s.seed = 2;
    s
}

pub fn ev_sync(policy: TimeoutPolicy, max_height: u64) -> Scenario {
    let name = match policy {
        Fixed => "evsync-fixed",
        Modulable => "evsync-modulable",
    };
    let mut s = four(
        name,
        TendermintToReward {
            timeout_policy: policy,
        },
        ev_sync_network(),
        max_height,
    );
    s.protocol = ev_sync_protocol();
    s.seed = 3;
    s
}

pub fn ev_sync_rewards() -> Scenario {
    let mut s = ev_sync(Modulable, 30);
    s.name = "evsync-rewards".into();
    s.replications = 50;
    s
}

/// Suspicion quorum with a growing Δ and a detectable equivocator under
/// eventual synchrony.
pub fn ev_sync_suspicion() -> Scenario {
    let mut s = four(
        "evsync-suspicion",
        SuspicionQuorum {
            timeout_policy: Modulable,
        },
        ev_sync_network(),
        60,
    )
    .with_behavior(
        1,
        BehaviorSchedule::with(BehaviorKind::ByzantineEquivocate, HeightSet::Odd),
    );
    s.protocol = ev_sync_protocol();
    s.seed = 4;
    s.replications = 5;
    s
}

/// A member that only ever sends its final decision: under synchrony it
/// cannot be told apart from a correct one, so it gets rewarded.
pub fn sync_decision_only() -> Scenario {
    four(
        "sync-decision-only",
        SuspicionQuorum {
            timeout_policy: Fixed,
        },
        NetworkModel::Synchronous { delay: 0 },
        50,
    )
    .with_behavior(
        2,
        BehaviorSchedule::with(BehaviorKind::ByzantineDecisionOnly, HeightSet::All),
    )
}

pub fn sync_all_correct() -> Scenario {
    four(
        "sync-all-correct",
        TendermintToReward {
            timeout_policy: Fixed,
        },
        NetworkModel::Synchronous { delay: 0 },
        50,
    )
}

fn selection(name: &str, mech: SelectionMechanismId, heights: u64) -> Scenario {
    let mut s = Scenario::new(
        name,
        170,
        50,
        mech,
        RewardAllCommittee,
        NetworkModel::Synchronous { delay: 0 },
        heights,
    );
    s.mode = RunMode::SelectionOnly;
    // a committee's reward lands in its own block, so the next height
    // already sees the new stakes
    s.genesis.reward_delay = 0;
    s
}

pub fn selection_lowest() -> Scenario {
    selection("selection-lowest", SelectionMechanismId::LowestStake, 10_000)
}

pub fn selection_highest() -> Scenario {
    selection("selection-highest", SelectionMechanismId::HighestStake, 5_000)
}

/// Delays are heavy-tailed with periodic calm windows; the adversary, when
/// present, slows one process down more and more over time.
pub fn async_network(adversary: Option<Slowdown>) -> NetworkModel {
    NetworkModel::Asynchronous {
        min_delay: 2,
        tail_index: 1.5,
        windows: Some(AsyncWindows {
            period: 2_000,
            len: 1_000,
            bound: 10,
        }),
        adversary,
    }
}

/// One adversarial schedule per reward mechanism, each defeating it.
///
/// Mechanisms that ignore the network are defeated by the behaviour mix (a
/// silent member); the others by a correct member whose messages are
/// delayed by an ever-growing amount.
pub fn async_adversarial(mech: RewardMechanismId) -> Scenario {
    let name = format!("async-{}", mech.label().replace('_', "-"));
    match mech {
        RewardAllCommittee | NeverReward => {
            let mut s = four(&name, mech, async_network(None), 100).with_behavior(
                3,
                BehaviorSchedule::with(BehaviorKind::ByzantineSilent, HeightSet::All),
            );
            s.seed = 5;
            s
        }
        _ => {
            let slow = Slowdown {
                target: ProcessId(3),
                base: 50,
                factor: 1,
            };
            let mut s = four(&name, mech, async_network(Some(slow)), 100);
            s.seed = 5;
            s
        }
    }
}

const MIXES: [(&str, Option<BehaviorKind>); 4] = [
    ("correct", None),
    ("silent", Some(BehaviorKind::ByzantineSilent)),
    ("equivocate", Some(BehaviorKind::ByzantineEquivocate)),
    ("decision-only", Some(BehaviorKind::ByzantineDecisionOnly)),
];

fn matrix_networks() -> Vec<(&'static str, NetworkModel)> {
    vec![
        ("sync", NetworkModel::Synchronous { delay: 1 }),
        (
            "goodbad",
            NetworkModel::GoodBad {
                good_len: 200,
                bad_len: 100,
                good_delay_bound: 3,
                bad_delay_range: (5, 40),
                laggards: BTreeMap::new(),
            },
        ),
        ("evsync", ev_sync_network()),
        ("async", async_network(None)),
    ]
}

/// Every network model × behaviour mix, for one mechanism: 7 processes,
/// committees of 4 chosen by lowest stake, one faulty process at most.
pub fn matrix(mech: RewardMechanismId) -> Vec<Scenario> {
    let mut out = Vec::new();
    for (net_name, net) in matrix_networks() {
        for (mix_name, kind) in MIXES {
            let name = format!("matrix-{net_name}-{mix_name}-{}", mech.label().replace('_', "-"));
            let mut s = Scenario::new(
                &name,
                7,
                4,
                SelectionMechanismId::LowestStake,
                mech,
                net.clone(),
                60,
            );
            s.protocol = ev_sync_protocol();
            s.seed = 6;
            if let Some(kind) = kind {
                // odd heights only, so the faulty process alternates roles
                s = s.with_behavior(2, BehaviorSchedule::with(kind, HeightSet::Odd));
            }
            out.push(s);
        }
    }
    out
}

/// Every built-in scenario.
pub fn all() -> Vec<Scenario> {
    let mut v = vec![
        sync_all_correct(),
        sync_equivocator(),
        sync_decision_only(),
        good_bad_laggard(),
        ev_sync(Fixed, 60),
        ev_sync(Modulable, 60),
        ev_sync_rewards(),
        ev_sync_suspicion(),
        selection_lowest(),
        selection_highest(),
    ];
    v.extend(RewardMechanismId::all().into_iter().map(async_adversarial));
    v.extend(matrix(RewardAllCommittee));
    v.extend(matrix(NeverReward));
    v
}

pub fn names() -> Vec<String> {
    all().into_iter().map(|s| s.name).collect()
}

pub fn named(name: &str) -> Result<Scenario, HarnessError> {
    all()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| HarnessError::UnknownScenario(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_valid_and_uniquely_named() {
        let all = all();
        let mut names: Vec<_> = all.iter().map(|s| s.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), all.len());
        for s in &all {
            s.validate().unwrap_or_else(|e| panic!("{}: {e}", s.name));
        }
    }

    #[test]
    fn matrix_covers_every_model_and_mix() {
        assert_eq!(matrix(RewardAllCommittee).len(), 16);
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(named("nope"), Err(HarnessError::UnknownScenario(_))));
    }
}
