use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Message, SimTime};
use crate::types::{Height, ProcessId};

/// Ceiling applied to heavy-tailed samples so that arithmetic on simulated
/// time never overflows. Far beyond any horizon a run reaches.
const ASYNC_DELAY_CAP: u64 = 1 << 48;

/// When the global stabilization time happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GstTrigger {
    /// At a fixed tick.
    AtTime(SimTime),
    /// The moment the first process starts the given height.
    AtHeight(Height),
}

/// Periodic windows of bounded delay inside an otherwise asynchronous run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsyncWindows {
    pub period: u64,
    pub len: u64,
    pub bound: u64,
}

/// Adversarial schedule: every message from `target` sent at `t` is delayed
/// by `base + factor * t`, so the delay outgrows any fixed or additive
/// timeout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slowdown {
    pub target: ProcessId,
    pub base: u64,
    pub factor: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkModel {
    Synchronous {
        #[serde(default)]
        delay: u64,
    },
    /// Alternating good and bad periods, starting with a good one. Laggards
    /// get `extra_delay` added to every message they send.
    GoodBad {
        good_len: u64,
        bad_len: u64,
        good_delay_bound: u64,
        bad_delay_range: (u64, u64),
        #[serde(default)]
        laggards: BTreeMap<ProcessId, u64>,
    },
    /// Unbounded (uniform over `pre_gst_delay_range`) before GST, within
    /// `[post_gst_min, post_gst_bound]` for every message sent at or after it.
    EventuallySynchronous {
        gst: GstTrigger,
        post_gst_bound: u64,
        #[serde(default)]
        post_gst_min: u64,
        pre_gst_delay_range: (u64, u64),
    },
    /// Pareto-tailed delays `min_delay * U^(-1/tail_index)`.
    Asynchronous {
        min_delay: u64,
        tail_index: f64,
        #[serde(default)]
        windows: Option<AsyncWindows>,
        #[serde(default)]
        adversary: Option<Slowdown>,
    },
}

impl NetworkModel {
    pub fn is_synchronous(&self) -> bool {
        matches!(self, NetworkModel::Synchronous { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            NetworkModel::Synchronous { .. } => "synchronous",
            NetworkModel::GoodBad { .. } => "good_bad",
            NetworkModel::EventuallySynchronous { .. } => "eventually_synchronous",
            NetworkModel::Asynchronous { .. } => "asynchronous",
        }
    }

    pub fn fixed_gst(&self) -> Option<SimTime> {
        match self {
            NetworkModel::EventuallySynchronous {
                gst: GstTrigger::AtTime(t),
                ..
            } => Some(*t),
            _ => None,
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (u64, u64)) -> u64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Delivery time of `msg` under `model`.
///
/// `gst` is the resolved stabilization time for the eventually synchronous
/// model (`None` while it has not happened yet). Draws from `rng` only, so
/// results are reproducible for a given seed and message order.
pub fn assign_delay<R: Rng + ?Sized>(
    model: &NetworkModel,
    msg: &Message,
    gst: Option<SimTime>,
    rng: &mut R,
) -> SimTime {
    let t = msg.sent_at;
    let delay = match model {
        NetworkModel::Synchronous { delay } => *delay,
        NetworkModel::GoodBad {
            good_len,
            bad_len,
            good_delay_bound,
            bad_delay_range,
            laggards,
        } => {
            let cycle = (good_len + bad_len).max(1);
            let base = if t.0 % cycle < *good_len {
                uniform(rng, (0, *good_delay_bound))
            } else {
                uniform(rng, *bad_delay_range)
            };
            base + laggards.get(&msg.sender).copied().unwrap_or(0)
        }
        NetworkModel::EventuallySynchronous {
            post_gst_bound,
            post_gst_min,
            pre_gst_delay_range,
            ..
        } => match gst {
            Some(g) if t >= g => uniform(rng, (*post_gst_min, *post_gst_bound)),
            _ => uniform(rng, *pre_gst_delay_range),
        },
        NetworkModel::Asynchronous {
            min_delay,
            tail_index,
            windows,
            adversary,
        } => {
            if let Some(adv) = adversary.filter(|a| a.target == msg.sender) {
                adv.base.saturating_add(adv.factor.saturating_mul(t.0))
            } else if let Some(w) = windows.filter(|w| w.period > 0 && t.0 % w.period < w.len) {
                uniform(rng, (0, w.bound))
            } else {
                // 1 - U lies in (0, 1], so the power is finite
                let u = 1.0 - rng.random::<f64>();
                let sample = (*min_delay as f64) * u.powf(-1.0 / tail_index.max(1e-3));
                if sample >= ASYNC_DELAY_CAP as f64 {
                    ASYNC_DELAY_CAP
                } else {
                    sample as u64
                }
            }
        }
    };
    t.plus(delay)
}

/// Per-replication network state: the model, its RNG stream and the
/// resolved stabilization time.
#[derive(Debug, Clone)]
pub struct NetworkRuntime<R> {
    pub model: NetworkModel,
    gst: Option<SimTime>,
    rng: R,
}

impl<R: Rng> NetworkRuntime<R> {
    pub fn new(model: NetworkModel, rng: R) -> Self {
        let gst = model.fixed_gst();
        Self { model, gst, rng }
    }

    pub fn gst(&self) -> Option<SimTime> {
        self.gst
    }

    /// Called when a process starts height `h` at `now`; fires a height-based
    /// GST trigger the first time its height is reached.
    pub fn on_height_start(&mut self, h: Height, now: SimTime) {
        if let NetworkModel::EventuallySynchronous {
            gst: GstTrigger::AtHeight(g),
            ..
        } = self.model
        {
            if self.gst.is_none() && h >= g {
                self.gst = Some(now);
            }
        }
    }

    pub fn deliver_at(&mut self, msg: &Message) -> SimTime {
        assign_delay(&self.model, msg, self.gst, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{MessageKind, Recipient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn msg(sender: u32, sent: u64) -> Message {
        Message {
            sender: ProcessId(sender),
            recipient: Recipient::One(ProcessId(0)),
            height: 1,
            round: 0,
            kind: MessageKind::Suspicion {
                suspect: ProcessId(1),
            },
            sent_at: SimTime(sent),
            deliver_at: SimTime(sent),
        }
    }

    #[test]
    fn synchronous_zero_is_instant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = NetworkModel::Synchronous { delay: 0 };
        for t in [0, 5, 1000] {
            assert_eq!(assign_delay(&m, &msg(1, t), None, &mut rng), SimTime(t));
        }
    }

    #[test]
    fn post_gst_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = NetworkModel::EventuallySynchronous {
            gst: GstTrigger::AtTime(SimTime(100)),
            post_gst_bound: 7,
            post_gst_min: 0,
            pre_gst_delay_range: (50, 500),
        };
        for t in 100..2000 {
            let at = assign_delay(&m, &msg(1, t), Some(SimTime(100)), &mut rng);
            assert!(at.since(SimTime(t)) <= 7);
        }
        // before GST the pre-GST range applies
        let at = assign_delay(&m, &msg(1, 10), Some(SimTime(100)), &mut rng);
        assert!(at.since(SimTime(10)) >= 50);
    }

    #[test]
    fn laggard_always_slower_than_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = NetworkModel::GoodBad {
            good_len: 100,
            bad_len: 50,
            good_delay_bound: 2,
            bad_delay_range: (5, 20),
            laggards: [(ProcessId(3), 1_000)].into_iter().collect(),
        };
        for t in 0..3000 {
            let slow = assign_delay(&m, &msg(3, t), None, &mut rng).since(SimTime(t));
            assert!(slow >= 1_000);
            let fast = assign_delay(&m, &msg(1, t), None, &mut rng).since(SimTime(t));
            assert!(fast <= 20);
        }
    }

    #[test]
    fn good_bad_starts_good() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = NetworkModel::GoodBad {
            good_len: 10,
            bad_len: 10,
            good_delay_bound: 1,
            bad_delay_range: (100, 100),
            laggards: BTreeMap::new(),
        };
        assert!(assign_delay(&m, &msg(0, 0), None, &mut rng).0 <= 1);
        assert_eq!(assign_delay(&m, &msg(0, 10), None, &mut rng), SimTime(110));
        assert!(assign_delay(&m, &msg(0, 20), None, &mut rng).0 <= 21);
    }

    #[test]
    fn height_trigger_fires_once() {
        let m = NetworkModel::EventuallySynchronous {
            gst: GstTrigger::AtHeight(10),
            post_gst_bound: 5,
            post_gst_min: 0,
            pre_gst_delay_range: (50, 60),
        };
        let mut net = NetworkRuntime::new(m, ChaCha8Rng::seed_from_u64(0));
        net.on_height_start(9, SimTime(40));
        assert_eq!(net.gst(), None);
        net.on_height_start(10, SimTime(77));
        net.on_height_start(11, SimTime(90));
        assert_eq!(net.gst(), Some(SimTime(77)));
    }

    #[test]
    fn slowdown_outgrows_any_additive_timeout() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = NetworkModel::Asynchronous {
            min_delay: 1,
            tail_index: 1.5,
            windows: None,
            adversary: Some(Slowdown {
                target: ProcessId(2),
                base: 10,
                factor: 2,
            }),
        };
        assert_eq!(
            assign_delay(&m, &msg(2, 1000), None, &mut rng),
            SimTime(1000 + 10 + 2000)
        );
    }
}
