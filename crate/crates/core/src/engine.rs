//! The discrete-event world: processes, the shared chain, the network and the
//! event queue of one replication.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{Block, Blockchain, GenesisConfig, PayloadId};
use crate::consensus::{ConsensusOutcome, HeightRecord, Process, ProtocolParams, Timer};
use crate::error::SimError;
use crate::network::{EventQueue, Message, MessageKind, NetworkModel, NetworkRuntime, SimTime};
use crate::reward::{RewardMechanismId, TimeoutPolicy};
use crate::selection::{SelectionMechanismId, Selector};
use crate::types::{max_faulty, BehaviorKind, BehaviorSchedule, Height, ProcessId, Units};

/// Contents of a proposed block, registered by its author under the
/// payload id so that whoever decides first can append it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposalBody {
    pub height: Height,
    pub rewards_for: Option<Height>,
    pub reward_vector: BTreeMap<ProcessId, Units>,
    pub parent_link: u128,
}

#[derive(Debug, Clone)]
pub(crate) enum Event {
    Deliver(Message),
    Timer(ProcessId, Timer),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub genesis: GenesisConfig,
    /// One schedule per process, indexed by id.
    pub behaviors: Vec<BehaviorSchedule>,
    pub network: NetworkModel,
    pub params: ProtocolParams,
    /// Last height whose rewards must be allocated; the run continues to
    /// `max_height + reward_delay`.
    pub max_height: Height,
    pub seed: u64,
    pub record_trace: bool,
    /// Safety valve against non-terminating runs.
    pub max_events: u64,
    /// Lets negative tests exceed the Byzantine bound.
    pub allow_excess_faults: bool,
}

impl SimConfig {
    pub fn new(genesis: GenesisConfig, network: NetworkModel, max_height: Height) -> Self {
        let behaviors = vec![BehaviorSchedule::correct(); genesis.population];
        Self {
            genesis,
            behaviors,
            network,
            params: ProtocolParams::default(),
            max_height,
            seed: 0,
            record_trace: false,
            max_events: 50_000_000,
            allow_excess_faults: false,
        }
    }

    pub fn target_height(&self) -> Height {
        self.max_height + self.genesis.reward_delay
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub chain: Blockchain,
    /// Every delivered message in delivery order, when requested.
    pub trace: Vec<Message>,
    pub gst: Option<SimTime>,
    /// Height in progress when GST happened.
    pub gst_height: Option<Height>,
    pub records: BTreeMap<Height, BTreeMap<ProcessId, HeightRecord>>,
    /// First time any process started each height, index `h − 1`.
    pub height_starts: Vec<SimTime>,
    pub events: u64,
    pub end_time: SimTime,
}

impl SimOutput {
    /// Δ each process used at `h`.
    pub fn deltas(&self, h: Height) -> BTreeMap<ProcessId, u64> {
        self.records
            .get(&h)
            .map(|m| m.iter().map(|(p, r)| (*p, r.delta)).collect())
            .unwrap_or_default()
    }
}

/// State visible to every process handler: the agreed chain, committee
/// selection, the block registry, the network and the clock.
pub struct Shared {
    pub(crate) params: ProtocolParams,
    pub(crate) mechanism: RewardMechanismId,
    pub(crate) synchronous: bool,
    pub(crate) population: usize,
    pub(crate) reward_delay: u64,
    pub(crate) target_height: Height,
    pub(crate) chain: Blockchain,
    selector: Selector,
    registry: BTreeMap<PayloadId, ProposalBody>,
    net: NetworkRuntime<ChaCha8Rng>,
    queue: EventQueue<Event>,
    behaviors: Vec<BehaviorSchedule>,
    allow_excess_faults: bool,
    height_starts: Vec<SimTime>,
    records: BTreeMap<Height, BTreeMap<ProcessId, HeightRecord>>,
    error: Option<SimError>,
}

impl Shared {
    pub(crate) fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub(crate) fn committee(&mut self, h: Height) -> Option<&[ProcessId]> {
        self.selector.committee(&self.chain, h)
    }

    pub(crate) fn register(&mut self, payload: PayloadId, body: ProposalBody) {
        self.registry.entry(payload).or_insert(body);
    }

    /// Registers `alias` with the same body as `original`.
    pub(crate) fn register_alias(&mut self, alias: PayloadId, original: PayloadId) {
        if let Some(body) = self.registry.get(&original).cloned() {
            self.registry.entry(alias).or_insert(body);
        }
    }

    pub(crate) fn deliver(&mut self, mut msg: Message) {
        msg.deliver_at = if msg.to() == Some(msg.sender) {
            msg.sent_at
        } else {
            self.net.deliver_at(&msg)
        };
        let at = msg.deliver_at;
        self.push(at, Event::Deliver(msg));
    }

    pub(crate) fn set_timer(&mut self, p: ProcessId, at: SimTime, timer: Timer) {
        self.push(at, Event::Timer(p, timer));
    }

    fn push(&mut self, at: SimTime, event: Event) {
        if let Err(e) = self.queue.push(at, event) {
            self.fail(e.into());
        }
    }

    fn fail(&mut self, e: SimError) {
        self.error.get_or_insert(e);
    }

    pub(crate) fn height_started(&mut self, h: Height) {
        if (self.height_starts.len() as Height) >= h {
            return;
        }
        let now = self.now();
        self.height_starts.push(now);
        self.net.on_height_start(h, now);
        let committee = match self.selector.committee(&self.chain, h) {
            Some(c) => c.to_vec(),
            None => return,
        };
        let faulty = committee
            .iter()
            .filter(|p| !self.behaviors[p.index()].at(h).is_correct())
            .count();
        let bound = max_faulty(committee.len());
        if faulty > bound && !self.allow_excess_faults {
            self.fail(SimError::QuorumImpossible {
                height: h,
                faulty,
                bound,
            });
        }
    }

    /// First decision of a height appends its block; later ones must agree.
    pub(crate) fn decided(&mut self, p: ProcessId, h: Height, payload: PayloadId) {
        if let Some(block) = self.chain.block(h) {
            if block.payload_id != payload {
                let first = block.payload_id.0;
                self.fail(SimError::AgreementViolated {
                    height: h,
                    first,
                    second: payload.0,
                    process: p,
                });
            }
            return;
        }
        let Some(body) = self.registry.get(&payload).cloned() else {
            self.fail(SimError::UnknownPayload {
                height: h,
                payload: payload.0,
            });
            return;
        };
        let committee = self
            .selector
            .committee(&self.chain, h)
            .expect("committee of a running height")
            .to_vec();
        if body.height != h || !committee.contains(&payload.author()) {
            self.fail(SimError::UnknownPayload {
                height: h,
                payload: payload.0,
            });
            return;
        }
        let block = Block {
            height: h,
            committee,
            rewards_for: body.rewards_for,
            reward_vector: body.reward_vector,
            payload_id: payload,
            parent_link: body.parent_link,
        };
        if let Err(e) = self.chain.append(block) {
            self.fail(e.into());
        }
    }

    pub(crate) fn height_finished(&mut self, p: ProcessId, h: Height, record: HeightRecord) {
        self.records.entry(h).or_default().insert(p, record);
    }
}

/// Runs one replication to `max_height + reward_delay`.
pub fn simulate(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    let genesis = &cfg.genesis;
    let population = genesis.population;
    assert_eq!(
        cfg.behaviors.len(),
        population,
        "one behaviour schedule per process"
    );
    assert!(
        genesis.reward_delay >= 1,
        "the engine allocates rewards in a later block"
    );
    let target = cfg.target_height();
    let mut shared = Shared {
        params: cfg.params,
        mechanism: genesis.reward,
        synchronous: cfg.network.is_synchronous(),
        population,
        reward_delay: genesis.reward_delay,
        target_height: target,
        chain: Blockchain::new(genesis.clone()),
        selector: Selector::new(genesis),
        registry: BTreeMap::new(),
        net: NetworkRuntime::new(cfg.network.clone(), ChaCha8Rng::seed_from_u64(cfg.seed)),
        queue: EventQueue::new(),
        behaviors: cfg.behaviors.clone(),
        allow_excess_faults: cfg.allow_excess_faults,
        height_starts: Vec::new(),
        records: BTreeMap::new(),
        error: None,
    };
    let mut processes: Vec<Process> = (0..population)
        .map(|i| {
            Process::new(
                ProcessId(i as u32),
                cfg.behaviors[i].clone(),
                cfg.params.initial_delta,
            )
        })
        .collect();
    let mut trace = Vec::new();
    for p in processes.iter_mut() {
        p.start_height(1, &mut shared);
    }
    let mut unfinished = processes.iter().filter(|p| !p.is_finished()).count();
    while unfinished > 0 {
        if let Some(e) = shared.error.take() {
            return Err(e);
        }
        let Some((_, event)) = shared.queue.step() else {
            break;
        };
        if shared.queue.popped() > cfg.max_events {
            break;
        }
        let who = match event {
            Event::Deliver(msg) => {
                let to = msg.to().expect("point-to-point copies only");
                if cfg.record_trace {
                    trace.push(msg.clone());
                }
                let p = &mut processes[to.index()];
                p.on_message(msg, &mut shared);
                to
            }
            Event::Timer(who, timer) => {
                processes[who.index()].on_timer(timer, &mut shared);
                who
            }
        };
        if processes[who.index()].is_finished() {
            unfinished = processes.iter().filter(|p| !p.is_finished()).count();
        }
    }
    if let Some(e) = shared.error.take() {
        return Err(e);
    }
    if unfinished > 0 {
        let detail = processes
            .iter()
            .map(|p| format!("{}@{}", p.id(), p.height()))
            .collect::<Vec<_>>()
            .join(" ");
        return Err(SimError::Stalled {
            at: shared.queue.now(),
            events: shared.queue.popped(),
            detail,
        });
    }
    let gst = shared.net.gst();
    let gst_height = gst.map(|g| {
        shared
            .height_starts
            .iter()
            .rposition(|s| *s <= g)
            .map_or(1, |i| i as Height + 1)
    });
    Ok(SimOutput {
        gst,
        gst_height,
        events: shared.queue.popped(),
        end_time: shared.queue.now(),
        chain: shared.chain,
        trace,
        records: shared.records,
        height_starts: shared.height_starts,
    })
}

/// One consensus instance among `committee` (which must be `p0..p(n−1)`), in
/// isolation: every process is a member, there is no reward traffic of
/// interest, and the outcome reports who delivered which decisions.
pub fn run_height(
    committee: &[ProcessId],
    net: &NetworkModel,
    behaviors: &BTreeMap<ProcessId, BehaviorKind>,
    params: ProtocolParams,
    seed: u64,
) -> Result<ConsensusOutcome, SimError> {
    let n = committee.len();
    let contiguous = committee.iter().enumerate().all(|(i, p)| p.index() == i);
    assert!(contiguous, "run_height expects committee p0..p(n-1)");
    let faulty = behaviors.values().filter(|b| !b.is_correct()).count();
    if faulty > max_faulty(n) {
        return Err(SimError::QuorumImpossible {
            height: 1,
            faulty,
            bound: max_faulty(n),
        });
    }
    let genesis = GenesisConfig {
        committee_size: n,
        population: n,
        selection: SelectionMechanismId::SelectAll,
        reward: RewardMechanismId::TendermintToReward {
            timeout_policy: TimeoutPolicy::Fixed,
        },
        initial_stakes: vec![0; n],
        reward_per_member: 1,
        reward_delay: 1,
    };
    let mut cfg = SimConfig::new(genesis, net.clone(), 1);
    cfg.params = params;
    cfg.seed = seed;
    cfg.record_trace = true;
    for (p, kind) in behaviors {
        cfg.behaviors[p.index()] = BehaviorSchedule::with(*kind, crate::types::HeightSet::All);
    }
    let out = simulate(&cfg)?;
    let block = out.chain.block(1).expect("height 1 decided");
    let mut delivered: BTreeMap<ProcessId, Vec<(ProcessId, SimTime)>> = BTreeMap::new();
    for m in &out.trace {
        if m.height == 1 && matches!(m.kind, MessageKind::Decision { payload } if payload == block.payload_id)
        {
            delivered
                .entry(m.to().expect("point-to-point"))
                .or_default()
                .push((m.sender, m.deliver_at));
        }
    }
    let records = out.records.get(&1).cloned().unwrap_or_default();
    Ok(ConsensusOutcome {
        height: 1,
        decided: block.payload_id,
        decision_messages_delivered: delivered,
        decided_at: records.iter().map(|(p, r)| (*p, r.decided_at)).collect(),
        decision_round: records
            .iter()
            .filter_map(|(p, r)| r.decision_round.map(|round| (*p, round)))
            .collect(),
    })
}
