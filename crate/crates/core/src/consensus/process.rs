//! One simulated process: the per-height state machine plus a compact
//! propose/prevote/precommit instance with locking, used inside committees.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{collect_decisions, update_delta, wait_for_decision, HeightState};
use crate::chain::PayloadId;
use crate::engine::{ProposalBody, Shared};
use crate::network::{Message, MessageKind, Recipient, SimTime, VotePhase};
use crate::reward::{
    detect_h_correct, restrict_to_committee, reward_fn, ProposerView, RewardMechanismId, SuspicionState,
};
use crate::types::{evidence_threshold, quorum, BehaviorKind, BehaviorSchedule, Height, ProcessId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerKind {
    Propose,
    Prevote,
    Precommit,
    /// End of the decision-collection window.
    Collect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Timer {
    pub kind: TimerKind,
    pub height: Height,
    pub round: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Propose,
    Prevote,
    Precommit,
}

/// Consensus state for the current height.
#[derive(Debug, Clone)]
struct Instance {
    round: u32,
    step: Step,
    locked: Option<(PayloadId, u32)>,
    valid: Option<(PayloadId, u32)>,
    proposals: BTreeMap<u32, (PayloadId, Option<u32>)>,
    // first vote per sender counts
    votes: BTreeMap<(u32, VotePhase), BTreeMap<ProcessId, Option<PayloadId>>>,
    round_senders: BTreeMap<u32, BTreeSet<ProcessId>>,
    prevote_timer: BTreeSet<u32>,
    precommit_timer: BTreeSet<u32>,
    decisions: BTreeMap<ProcessId, PayloadId>,
    suspected: BTreeSet<ProcessId>,
}

impl Instance {
    fn new() -> Self {
        Self {
            round: 0,
            step: Step::Propose,
            locked: None,
            valid: None,
            proposals: BTreeMap::new(),
            votes: BTreeMap::new(),
            round_senders: BTreeMap::new(),
            prevote_timer: BTreeSet::new(),
            precommit_timer: BTreeSet::new(),
            decisions: BTreeMap::new(),
            suspected: BTreeSet::new(),
        }
    }

    fn count(&self, round: u32, phase: VotePhase) -> usize {
        self.votes.get(&(round, phase)).map_or(0, BTreeMap::len)
    }

    fn count_for(&self, round: u32, phase: VotePhase, value: Option<PayloadId>) -> usize {
        self.votes
            .get(&(round, phase))
            .map_or(0, |v| v.values().filter(|p| **p == value).count())
    }

    /// A value with a precommit quorum in any round.
    fn committed(&self, q: usize) -> Option<PayloadId> {
        for ((_, phase), votes) in &self.votes {
            if *phase != VotePhase::Precommit {
                continue;
            }
            let mut tally: BTreeMap<PayloadId, usize> = BTreeMap::new();
            for v in votes.values().flatten() {
                *tally.entry(*v).or_default() += 1;
            }
            if let Some((v, _)) = tally.into_iter().find(|(_, c)| *c >= q) {
                return Some(v);
            }
        }
        None
    }
}

/// What a process remembers about a finished height.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HeightRecord {
    pub decided: PayloadId,
    pub decided_at: SimTime,
    /// Δ in force while collecting decisions for this height.
    pub delta: u64,
    /// `toReward`: members whose decision arrived within Δ.
    pub to_reward: BTreeSet<ProcessId>,
    /// Round of the precommit quorum, `None` if accepted on evidence.
    pub decision_round: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct Process {
    id: ProcessId,
    schedule: BehaviorSchedule,
    height: Height,
    state: HeightState,
    delta: u64,
    committee: Vec<ProcessId>,
    member: bool,
    inst: Instance,
    decided: Option<PayloadId>,
    decided_at: SimTime,
    decision_round: Option<u32>,
    logs: BTreeMap<Height, Vec<Message>>,
    history: BTreeMap<Height, HeightRecord>,
}

#[derive(Clone, Copy)]
enum Audience {
    Committee,
    Everyone,
}

impl Process {
    pub fn new(id: ProcessId, schedule: BehaviorSchedule, initial_delta: u64) -> Self {
        Self {
            id,
            schedule,
            height: 0,
            state: HeightState::ComputeCommittee,
            delta: initial_delta,
            committee: Vec::new(),
            member: false,
            inst: Instance::new(),
            decided: None,
            decided_at: SimTime::ZERO,
            decision_round: None,
            logs: BTreeMap::new(),
            history: BTreeMap::new(),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.id
    }

    pub fn height(&self) -> Height {
        self.height
    }

    pub fn state(&self) -> HeightState {
        self.state
    }

    pub fn delta(&self) -> u64 {
        self.delta
    }

    pub fn history(&self) -> &BTreeMap<Height, HeightRecord> {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        self.state == HeightState::Finished
    }

    /// Messages of height `h` delivered so far (kept for the last few heights
    /// only).
    pub fn log(&self, h: Height) -> &[Message] {
        self.logs.get(&h).map_or(&[], Vec::as_slice)
    }

    fn proposer(&self, round: u32) -> ProcessId {
        let n = self.committee.len() as u64;
        let idx = (self.height - 1 + round as u64) % n;
        self.committee[idx as usize]
    }

    fn q(&self) -> usize {
        quorum(self.committee.len())
    }

    pub(crate) fn start_height(&mut self, h: Height, ctx: &mut Shared) {
        self.height = h;
        self.inst = Instance::new();
        self.decided = None;
        self.decision_round = None;
        self.state = HeightState::ComputeCommittee;
        ctx.height_started(h);
        let Some(committee) = ctx.committee(h) else {
            unreachable!("height {h} started before block {} exists", h - 1)
        };
        let mut committee = committee.to_vec();
        committee.sort();
        self.member = committee.contains(&self.id);
        self.committee = committee;
        // keep the logs the allocating proposer may still need
        let keep_from = h.saturating_sub(ctx.reward_delay + 1);
        self.logs = self.logs.split_off(&keep_from);
        self.history = self.history.split_off(&keep_from);

        if self.member {
            self.start_round(0, ctx);
        } else {
            self.state = HeightState::WaitForDecision;
        }
        let buffered = self.logs.get(&h).cloned().unwrap_or_default();
        for m in &buffered {
            self.handle_current(m, ctx);
        }
    }

    pub(crate) fn on_message(&mut self, msg: Message, ctx: &mut Shared) {
        if self.is_finished() || msg.height > ctx.target_height {
            return;
        }
        if msg.height + ctx.reward_delay + 1 < self.height {
            return;
        }
        let current = msg.height == self.height;
        self.logs.entry(msg.height).or_default().push(msg.clone());
        if current {
            self.handle_current(&msg, ctx);
        }
    }

    pub(crate) fn on_timer(&mut self, t: Timer, ctx: &mut Shared) {
        if t.height != self.height || self.is_finished() {
            return;
        }
        if t.kind == TimerKind::Collect {
            if self.decided.is_some() {
                self.finish_height(ctx);
            }
            return;
        }
        if self.decided.is_some() || !self.member || self.inst.round != t.round {
            return;
        }
        match t.kind {
            TimerKind::Propose if self.inst.step == Step::Propose => {
                self.vote(VotePhase::Prevote, None, ctx);
            }
            TimerKind::Prevote if self.inst.step == Step::Prevote => {
                self.vote(VotePhase::Precommit, None, ctx);
            }
            TimerKind::Precommit => {
                self.start_round(t.round + 1, ctx);
            }
            _ => return,
        }
        self.progress(ctx);
    }

    fn handle_current(&mut self, msg: &Message, ctx: &mut Shared) {
        let sender = msg.sender;
        let in_committee = self.committee.contains(&sender);
        match msg.kind {
            MessageKind::Suspicion { .. } => {}
            MessageKind::Decision { payload } => {
                if !in_committee {
                    return;
                }
                self.inst.decisions.entry(sender).or_insert(payload);
                match self.decided {
                    Some(d) => {
                        if payload != d {
                            self.suspect(sender, ctx);
                        }
                    }
                    None => {
                        let threshold = evidence_threshold(self.committee.len());
                        if let Some(v) = wait_for_decision(&self.inst.decisions, &self.committee, threshold) {
                            self.decide(v, false, ctx);
                        }
                    }
                }
            }
            MessageKind::Propose { payload, valid_round } => {
                if !self.member {
                    return;
                }
                if sender != self.proposer(msg.round) {
                    self.suspect(sender, ctx);
                    return;
                }
                self.inst
                    .proposals
                    .entry(msg.round)
                    .or_insert((payload, valid_round));
                self.inst
                    .round_senders
                    .entry(msg.round)
                    .or_default()
                    .insert(sender);
                let votes: Vec<(ProcessId, Option<PayloadId>)> = [VotePhase::Prevote, VotePhase::Precommit]
                    .iter()
                    .flat_map(|ph| self.inst.votes.get(&(msg.round, *ph)))
                    .flat_map(|v| v.iter().map(|(s, p)| (*s, *p)))
                    .collect();
                for (voter, vote) in votes {
                    self.audit_vote(voter, msg.round, vote, ctx);
                }
                self.progress(ctx);
            }
            MessageKind::Vote { phase, payload } => {
                if !self.member || !in_committee {
                    return;
                }
                self.inst
                    .votes
                    .entry((msg.round, phase))
                    .or_default()
                    .entry(sender)
                    .or_insert(payload);
                self.inst
                    .round_senders
                    .entry(msg.round)
                    .or_default()
                    .insert(sender);
                self.audit_vote(sender, msg.round, payload, ctx);
                self.progress(ctx);
            }
        }
    }

    /// A vote for anything but the round's proposal (or nil) is evidence of
    /// misbehaviour: of the proposer when the value carries its signature
    /// for that round, of the voter otherwise.
    fn audit_vote(&mut self, voter: ProcessId, round: u32, vote: Option<PayloadId>, ctx: &mut Shared) {
        let (Some(y), Some(&(x, _))) = (vote, self.inst.proposals.get(&round)) else {
            return;
        };
        if y == x {
            return;
        }
        let proposer = self.proposer(round);
        let culprit = if y.author() == proposer && y.round() == round && y.height() == self.height {
            proposer
        } else {
            voter
        };
        self.suspect(culprit, ctx);
    }

    fn suspect(&mut self, p: ProcessId, ctx: &mut Shared) {
        if !self.member || p == self.id || !self.inst.suspected.insert(p) {
            return;
        }
        let round = self.inst.round;
        self.send(
            MessageKind::Suspicion { suspect: p },
            round,
            Audience::Everyone,
            ctx,
        );
    }

    fn start_round(&mut self, round: u32, ctx: &mut Shared) {
        self.inst.round = round;
        self.inst.step = Step::Propose;
        self.state = HeightState::SolveConsensus { round };
        if self.proposer(round) == self.id {
            let (payload, valid_round) = match self.inst.valid {
                Some((v, vr)) => (v, Some(vr)),
                None => (self.new_proposal(round, ctx), None),
            };
            self.send(
                MessageKind::Propose { payload, valid_round },
                round,
                Audience::Committee,
                ctx,
            );
        } else {
            let at = ctx.now().plus(ctx.params.step_timeout(round));
            self.set_timer(TimerKind::Propose, round, at, ctx);
        }
    }

    /// Builds the block body this process proposes at the current height,
    /// including the reward allocation for height `h − k`.
    fn new_proposal(&self, round: u32, ctx: &mut Shared) -> PayloadId {
        let h = self.height;
        let payload = PayloadId::new(h, round, self.id, 0);
        let rewards_for = h.checked_sub(ctx.reward_delay).filter(|&r| r >= 1);
        let reward_vector = match rewards_for {
            Some(r) => {
                let record = self
                    .history
                    .get(&r)
                    .expect("a proposer has finished every earlier height");
                let view = ProposerView {
                    messages: self.log(r),
                    decided_at: record.decided_at,
                    delta: record.delta,
                    synchronous: ctx.synchronous,
                };
                let vector = reward_fn(&ctx.chain, &view, r, ctx.mechanism);
                let committee = &ctx.chain.block(r).expect("height r is decided").committee;
                restrict_to_committee(&vector, committee)
            }
            None => BTreeMap::new(),
        };
        let parent_link = ctx
            .chain
            .hash_at(h - 1)
            .expect("block h-1 exists while h is running");
        ctx.register(
            payload,
            ProposalBody {
                height: h,
                rewards_for,
                reward_vector,
                parent_link,
            },
        );
        payload
    }

    fn vote(&mut self, phase: VotePhase, value: Option<PayloadId>, ctx: &mut Shared) {
        self.inst.step = match phase {
            VotePhase::Prevote => Step::Prevote,
            VotePhase::Precommit => Step::Precommit,
        };
        if let (VotePhase::Precommit, Some(v)) = (phase, value) {
            self.inst.locked = Some((v, self.inst.round));
        }
        let round = self.inst.round;
        self.send(
            MessageKind::Vote {
                phase,
                payload: value,
            },
            round,
            Audience::Committee,
            ctx,
        );
    }

    /// Applies every enabled rule until none fires.
    fn progress(&mut self, ctx: &mut Shared) {
        let q = self.q();
        loop {
            if self.decided.is_some() || !self.member {
                return;
            }
            if let Some(v) = self.inst.committed(q) {
                self.decision_round = Some(self.inst.round);
                self.decide(v, true, ctx);
                return;
            }
            let r = self.inst.round;
            let skip_to = self
                .inst
                .round_senders
                .range(r + 1..)
                .find(|(_, s)| s.len() >= evidence_threshold(self.committee.len()))
                .map(|(round, _)| *round);
            if let Some(r2) = skip_to {
                self.start_round(r2, ctx);
                continue;
            }
            let proposal = self.inst.proposals.get(&r).copied();
            match self.inst.step {
                Step::Propose => {
                    if let Some((v, vr)) = proposal {
                        let acceptable = match vr {
                            None => Some(self.inst.locked.is_none_or(|(lv, _)| lv == v)),
                            Some(vr)
                                if vr < r && self.inst.count_for(vr, VotePhase::Prevote, Some(v)) >= q =>
                            {
                                Some(self.inst.locked.is_none_or(|(lv, lr)| lr <= vr || lv == v))
                            }
                            Some(_) => None,
                        };
                        if let Some(ok) = acceptable {
                            self.vote(VotePhase::Prevote, ok.then_some(v), ctx);
                            continue;
                        }
                    }
                }
                Step::Prevote => {
                    if let Some((v, _)) = proposal {
                        if self.inst.count_for(r, VotePhase::Prevote, Some(v)) >= q {
                            self.inst.valid = Some((v, r));
                            self.vote(VotePhase::Precommit, Some(v), ctx);
                            continue;
                        }
                    }
                    if self.inst.count_for(r, VotePhase::Prevote, None) >= q {
                        self.vote(VotePhase::Precommit, None, ctx);
                        continue;
                    }
                    if self.inst.count(r, VotePhase::Prevote) >= q && self.inst.prevote_timer.insert(r) {
                        let at = ctx.now().plus(ctx.params.step_timeout(r));
                        self.set_timer(TimerKind::Prevote, r, at, ctx);
                    }
                }
                Step::Precommit => {
                    if let Some((v, _)) = proposal {
                        if self.inst.count_for(r, VotePhase::Prevote, Some(v)) >= q {
                            self.inst.valid = Some((v, r));
                        }
                    }
                }
            }
            if self.inst.count(r, VotePhase::Precommit) >= q && self.inst.precommit_timer.insert(r) {
                let at = ctx.now().plus(ctx.params.step_timeout(r));
                self.set_timer(TimerKind::Precommit, r, at, ctx);
            }
            return;
        }
    }

    fn decide(&mut self, v: PayloadId, own_quorum: bool, ctx: &mut Shared) {
        if !own_quorum {
            self.decision_round = None;
        }
        let now = ctx.now();
        self.decided = Some(v);
        self.decided_at = now;
        let deadline = now.plus(self.delta);
        self.state = HeightState::CollectDecisions { deadline };
        ctx.decided(self.id, self.height, v);
        if self.member {
            let round = self.inst.round;
            self.send(
                MessageKind::Decision { payload: v },
                round,
                Audience::Everyone,
                ctx,
            );
            let conflicting: Vec<ProcessId> = self
                .inst
                .decisions
                .iter()
                .filter(|(_, p)| **p != v)
                .map(|(s, _)| *s)
                .collect();
            for s in conflicting {
                self.suspect(s, ctx);
            }
        }
        self.set_timer(TimerKind::Collect, self.inst.round, deadline, ctx);
    }

    fn finish_height(&mut self, ctx: &mut Shared) {
        let h = self.height;
        let decided = self.decided.expect("collection starts after a decision");
        let info = self.log(h);
        let to_reward = collect_decisions(info, h, &self.committee, decided, self.decided_at, self.delta);
        let collected = match ctx.mechanism {
            RewardMechanismId::SuspicionQuorum { .. } => {
                let suspicion = SuspicionState::from_messages(info, h, &self.committee);
                detect_h_correct(info, h, &self.committee, decided, &suspicion, ctx.synchronous).known()
            }
            _ => to_reward.clone(),
        };
        self.history.insert(
            h,
            HeightRecord {
                decided,
                decided_at: self.decided_at,
                delta: self.delta,
                to_reward,
                decision_round: self.decision_round,
            },
        );
        self.delta = update_delta(
            self.delta,
            &collected,
            &self.committee,
            ctx.mechanism.timeout_policy(),
            ctx.params.delta_increment,
        );
        ctx.height_finished(self.id, h, self.history[&h].clone());
        if h >= ctx.target_height {
            self.state = HeightState::Finished;
        } else {
            self.start_height(h + 1, ctx);
        }
    }

    fn set_timer(&self, kind: TimerKind, round: u32, at: SimTime, ctx: &mut Shared) {
        ctx.set_timer(
            self.id,
            at,
            Timer {
                kind,
                height: self.height,
                round,
            },
        );
    }

    /// Sends `kind` to the audience. The copies to others go through the
    /// behaviour filter for this height. The copy to self is honest, except
    /// that what a process withholds it withholds from itself too: a
    /// silent member must not later vouch for its own participation.
    fn send(&mut self, kind: MessageKind, round: u32, audience: Audience, ctx: &mut Shared) {
        let h = self.height;
        let peers: Vec<ProcessId> = match audience {
            Audience::Committee => self.committee.clone(),
            Audience::Everyone => (0..ctx.population as u32).map(ProcessId).collect(),
        };
        let now = ctx.now();
        let base = Message {
            sender: self.id,
            recipient: Recipient::One(self.id),
            height: h,
            round,
            kind,
            sent_at: now,
            deliver_at: now,
        };
        let behaviour = self.schedule.at(h);
        let keep_own = match behaviour {
            BehaviorKind::ByzantineSilent => false,
            BehaviorKind::ByzantineDecisionOnly => matches!(kind, MessageKind::Decision { .. }),
            _ => true,
        };
        if keep_own && peers.contains(&self.id) {
            ctx.deliver(base.clone());
        }
        let others: Vec<ProcessId> = peers.into_iter().filter(|p| *p != self.id).collect();
        let half = others.len() / 2;
        for (i, q) in others.iter().enumerate() {
            let side = u8::from(i >= half);
            let Some(kind) = self.filter(behaviour, kind, round, side, ctx) else {
                continue;
            };
            ctx.deliver(Message {
                recipient: Recipient::One(*q),
                kind,
                ..base.clone()
            });
        }
    }

    fn filter(
        &self,
        behaviour: BehaviorKind,
        kind: MessageKind,
        round: u32,
        side: u8,
        ctx: &mut Shared,
    ) -> Option<MessageKind> {
        let h = self.height;
        match behaviour {
            BehaviorKind::Correct => Some(kind),
            BehaviorKind::ByzantineSilent => None,
            BehaviorKind::ByzantineDecisionOnly => {
                matches!(kind, MessageKind::Decision { .. }).then_some(kind)
            }
            BehaviorKind::ByzantineEquivocate => match kind {
                MessageKind::Propose { payload, valid_round } => {
                    let forged = PayloadId::new(h, round, self.id, 1 + side);
                    ctx.register_alias(forged, payload);
                    Some(MessageKind::Propose {
                        payload: forged,
                        valid_round,
                    })
                }
                MessageKind::Vote { phase, .. } => Some(MessageKind::Vote {
                    phase,
                    payload: Some(PayloadId::new(h, round, self.id, 1 + side)),
                }),
                MessageKind::Decision { payload } => Some(MessageKind::Decision {
                    payload: PayloadId::new(h, payload.round(), self.id, 3 + side),
                }),
                MessageKind::Suspicion { .. } => None,
            },
        }
    }
}
