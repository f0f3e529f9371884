//! Deterministic discrete-event simulation of the key-distribution protocol.
//!
//! A central authority (CA) admits sensor nodes through a nonce challenge,
//! assigns their indices, sets up the scheme, serves key requests to both
//! ends of a pair, authorizes sessions, probes the network at a fixed
//! interval and isolates nodes that fail a probe. Every message travels with
//! a latency of one tick and is logged exactly once, at delivery time, with
//! its disposition.
//!
//! Fixed timeline for the start of every run:
//!
//! ```text
//! t=0  JoinRequest      candidate -> CA
//! t=1  JoinChallenge    CA -> candidate
//! t=2  JoinResponse     candidate -> CA
//! t=3  admitted; IdAssign CA -> candidate
//! t=4  IdAck            node -> CA
//! t=5  scheme set up (epoch 1)
//! ```
//!
//! Scripted requests, session attempts and data must come after t=5. Probe
//! rounds start at every multiple of `probe_interval` after t=5, up to the
//! scenario horizon.
//!
//! Rekeying: marking a node (or raising its intrusion count) rekeys at once.
//! A completed key-request pair only sets a pending flag; the rekey happens
//! when the next key request reaches the CA.

pub mod authority;
pub mod config;
pub mod log;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::blom::{self, BlomError, PrivateRow, PublicColumn, SchemeParams};
use crate::gfmat::Matrix;
use crate::rng;

pub use authority::{
    challenge_answer, Admission, CentralAuthority, Credential, IntrusionEntry, IntrusionTable,
    KeyGrant, Label, Marking, NodeId,
};
pub use config::{AdversarySpec, DataSpec, FixtureMatrices, PairSpec, ScenarioConfig};
pub use log::{
    Addr, Disposition, Event, EventLog, LogRecord, Message, MessageKind, Payload, RefusalReason,
    RejectReason, RekeyReason, SessionFailure,
};

/// Time at which the scheme is ready.
pub const SETUP_COMPLETE_TIME: u64 = 5;
pub const LATENCY: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetsimError {
    #[error("scenario field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("matrices requested before every node acknowledged its id")]
    MatricesBeforeIds,
    #[error("scheme has not been set up")]
    NotSetUp,
    #[error("node {0} is not registered")]
    UnknownNode(usize),
    #[error(transparent)]
    Scheme(#[from] BlomError),
}

impl From<crate::gfmat::GfError> for NetsimError {
    fn from(e: crate::gfmat::GfError) -> Self {
        NetsimError::Scheme(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorNode {
    pub index: usize,
    pub name: String,
    pub credential: Credential,
    pub private_row: Option<PrivateRow>,
    /// Public columns this node has seen (0-based owner keys).
    pub known_public: BTreeMap<usize, PublicColumn>,
    /// Set when the scenario turns this node adversarial.
    pub adversarial_since: Option<u64>,
    /// Peers the CA has authorized this node to send data to.
    pub authorized: BTreeSet<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Detection {
    pub node: usize,
    pub probe_round: u64,
    pub detected_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metrics {
    pub sessions_established: u64,
    pub session_failures: u64,
    pub detections: u64,
    pub markings: u64,
    pub intrusion_increments: u64,
    pub rekeys: u64,
    pub refused_requests: u64,
    pub delivered: u64,
    pub blocked: u64,
    pub dropped: u64,
    pub final_epoch: u64,
    pub violations: u64,
}

impl Metrics {
    fn from_log(log: &EventLog, final_epoch: u64, violations: u64) -> Self {
        let mut m = Metrics {
            final_epoch,
            violations,
            ..Default::default()
        };
        for r in log.iter() {
            match &r.event {
                Event::Message { disposition, .. } => match disposition {
                    Disposition::Delivered => m.delivered += 1,
                    Disposition::Blocked => m.blocked += 1,
                    Disposition::Dropped => m.dropped += 1,
                },
                Event::SessionEstablished { .. } => m.sessions_established += 1,
                Event::SessionFailed { .. } => m.session_failures += 1,
                Event::Detection { .. } => m.detections += 1,
                Event::Marked { first, .. } => {
                    m.intrusion_increments += 1;
                    if *first {
                        m.markings += 1;
                    }
                }
                Event::Rekey { .. } => m.rekeys += 1,
                Event::KeyRefused { .. } => m.refused_requests += 1,
                _ => {}
            }
        }
        m
    }

    pub fn to_csv(&self) -> String {
        let rows = [
            ("sessions_established", self.sessions_established),
            ("session_failures", self.session_failures),
            ("detections", self.detections),
            ("markings", self.markings),
            ("intrusion_increments", self.intrusion_increments),
            ("rekeys", self.rekeys),
            ("refused_requests", self.refused_requests),
            ("delivered", self.delivered),
            ("blocked", self.blocked),
            ("dropped", self.dropped),
            ("final_epoch", self.final_epoch),
            ("violations", self.violations),
        ];
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub log: EventLog,
    pub metrics: Metrics,
    pub intrusion_table: IntrusionTable,
    pub detections: Vec<Detection>,
    pub nodes: BTreeMap<usize, SensorNode>,
    pub authority: CentralAuthority,
}

#[derive(Debug, Clone)]
enum Action {
    AdversaryOn(usize),
    Deliver(Message),
    Request { i: usize, j: usize },
    Session { i: usize, j: usize },
    Data { src: usize, dst: usize },
    ProbeRound,
}

impl Action {
    /// Tie-break among actions at the same tick.
    fn class(&self) -> u8 {
        match self {
            Action::AdversaryOn(_) => 0,
            Action::Deliver(_) => 1,
            Action::Request { .. } | Action::Session { .. } | Action::Data { .. } => 2,
            Action::ProbeRound => 3,
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    credential: Credential,
}

#[derive(Debug, Clone)]
struct PairProgress {
    i: usize,
    j: usize,
    epoch: u64,
    delivered: u8,
}

struct Simulator<'a> {
    config: &'a ScenarioConfig,
    ca: CentralAuthority,
    candidates: Vec<Candidate>,
    nodes: BTreeMap<usize, SensorNode>,
    queue: BTreeMap<(u64, u8, u64), Action>,
    seq: u64,
    gen: rng::Generator,
    log: EventLog,
    decisions: usize,
    pairs: BTreeMap<u64, PairProgress>,
    next_request: u64,
    auth_queries: BTreeMap<(usize, usize), BTreeSet<usize>>,
    data_seq: u64,
    detections: Vec<Detection>,
}

/// Runs the scenario to completion. The result depends only on
/// `(config, seed)`; `config.seed` is ignored in favour of `seed`.
pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<ScenarioOutcome, NetsimError> {
    config.validate()?;
    let q = config.modulus()?;
    let params = SchemeParams::new(config.t, q, config.node_count, config.variant)?;

    let mut candidates = Vec::new();
    let mut issuer = BTreeMap::new();
    for c in 1..=config.node_count as u64 {
        let credential = Credential {
            id: rng::derive_seed(seed, "credential-id", c),
            secret: rng::derive_seed(seed, "credential-secret", c),
        };
        issuer.insert(credential.id, credential.secret);
        candidates.push(Candidate { credential });
    }
    for c in 0..config.impostors as u64 {
        candidates.push(Candidate {
            credential: Credential {
                id: rng::derive_seed(seed, "impostor-id", c),
                secret: rng::derive_seed(seed, "impostor-secret", c),
            },
        });
    }

    let reduce = |rows: &Vec<Vec<u64>>| Matrix::from_rows_reduced(rows, q);
    let mut ca = CentralAuthority::new(params, config.rekey_rule, seed, config.probe_interval, issuer);
    if let Some(fx) = &config.fixture_matrices {
        ca = ca.with_fixtures(
            fx.public.as_ref().map(reduce).transpose()?,
            fx.secret.as_ref().map(reduce).transpose()?,
            fx.secret_overrides.iter().map(reduce).collect::<Result<_, _>>()?,
        );
    }

    let mut sim = Simulator {
        config,
        ca,
        candidates,
        nodes: BTreeMap::new(),
        queue: BTreeMap::new(),
        seq: 0,
        gen: rng::seeded(rng::derive_seed(seed, "netsim", 0)),
        log: EventLog::default(),
        decisions: 0,
        pairs: BTreeMap::new(),
        next_request: 1,
        auth_queries: BTreeMap::new(),
        data_seq: 0,
        detections: Vec::new(),
    };
    sim.schedule_script();
    sim.run()?;

    let violations = audit(&sim.log);
    for v in &violations {
        let time = sim.log.records.last().map_or(0, |r| r.time);
        sim.log.push(time, Event::Violation { what: v.clone() });
    }
    let final_epoch = sim.ca.epoch().unwrap_or(0);
    let metrics = Metrics::from_log(&sim.log, final_epoch, violations.len() as u64);
    Ok(ScenarioOutcome {
        metrics,
        intrusion_table: sim.ca.intrusion_table().clone(),
        detections: sim.detections,
        nodes: sim.nodes,
        log: sim.log,
        authority: sim.ca,
    })
}

impl Simulator<'_> {
    fn push(&mut self, time: u64, action: Action) {
        self.seq += 1;
        self.queue.insert((time, action.class(), self.seq), action);
    }

    fn send(&mut self, now: u64, src: Addr, dst: Addr, payload: Payload) {
        let msg = Message {
            src,
            dst,
            sent: now,
            payload,
        };
        self.push(now + LATENCY, Action::Deliver(msg));
    }

    fn schedule_script(&mut self) {
        for c in 0..self.candidates.len() {
            let credential = self.candidates[c].credential.id;
            self.send(0, Addr::Candidate(c + 1), Addr::Ca, Payload::JoinRequest { credential });
        }
        let config = self.config;
        for a in &config.adversaries {
            self.push(a.time, Action::AdversaryOn(a.node));
        }
        for r in &config.requests {
            self.push(r.time, Action::Request { i: r.i, j: r.j });
        }
        for s in &config.sessions {
            self.push(s.time, Action::Session { i: s.i, j: s.j });
        }
        for d in &config.data {
            self.push(d.time, Action::Data { src: d.src, dst: d.dst });
        }
        let horizon = config.effective_horizon();
        let interval = config.probe_interval;
        let mut round = interval;
        while round <= horizon {
            if round > SETUP_COMPLETE_TIME {
                self.push(round, Action::ProbeRound);
            }
            round += interval;
        }
    }

    fn run(&mut self) -> Result<(), NetsimError> {
        while let Some(((now, _, _), action)) = self.queue.pop_first() {
            match action {
                Action::AdversaryOn(node) => {
                    if let Some(n) = self.nodes.get_mut(&node) {
                        n.adversarial_since.get_or_insert(now);
                    }
                }
                Action::Deliver(msg) => self.deliver(now, msg)?,
                Action::Request { i, j } => {
                    self.send(now, Addr::Node(i), Addr::Ca, Payload::KeyRequest { peer: j })
                }
                Action::Session { i, j } => self.establish_session(now, i, j)?,
                Action::Data { src, dst } => {
                    self.data_seq += 1;
                    let seq = self.data_seq;
                    self.send(now, Addr::Node(src), Addr::Node(dst), Payload::Data { seq });
                }
                Action::ProbeRound => self.probe_network(now),
            }
        }
        Ok(())
    }

    fn blocked_endpoint(&self, msg: &Message) -> bool {
        [msg.src, msg.dst]
            .iter()
            .filter_map(|a| a.node())
            .any(|n| self.ca.is_malicious(n))
    }

    fn deliver(&mut self, now: u64, msg: Message) -> Result<(), NetsimError> {
        if self.blocked_endpoint(&msg) {
            self.log.push(
                now,
                Event::Message {
                    msg: msg.clone(),
                    disposition: Disposition::Blocked,
                },
            );
            // anything a marked node sends after its marking is a new offense
            if let Some(src) = msg.src.node() {
                if self.ca.marked_at(src).is_some_and(|t| msg.sent >= t) {
                    self.mark(now, src)?;
                }
            }
            return Ok(());
        }
        if let Payload::Data { .. } = msg.payload {
            let (src, dst) = (msg.src.node().unwrap(), msg.dst.node().unwrap());
            let authorized = self.nodes.get(&src).is_some_and(|n| n.authorized.contains(&dst))
                && self.nodes.get(&dst).is_some_and(|n| n.authorized.contains(&src));
            let disposition = if authorized {
                Disposition::Delivered
            } else {
                Disposition::Dropped
            };
            self.log.push(now, Event::Message { msg, disposition });
            return Ok(());
        }
        self.log.push(
            now,
            Event::Message {
                msg: msg.clone(),
                disposition: Disposition::Delivered,
            },
        );
        match msg.dst {
            Addr::Ca => self.at_authority(now, msg),
            Addr::Candidate(c) => {
                self.at_candidate(now, c, msg);
                Ok(())
            }
            Addr::Node(i) => self.at_node(now, i, msg),
        }
    }

    fn at_authority(&mut self, now: u64, msg: Message) -> Result<(), NetsimError> {
        match (msg.src, msg.payload) {
            (Addr::Candidate(c), Payload::JoinRequest { .. }) => {
                let nonce: u64 = self.gen.gen();
                self.ca.issue_challenge(c, nonce);
                self.send(now, Addr::Ca, Addr::Candidate(c), Payload::JoinChallenge { nonce });
            }
            (
                Addr::Candidate(c),
                Payload::JoinResponse {
                    credential,
                    nonce,
                    answer,
                },
            ) => {
                let event = match self.ca.verify_join(c, credential, nonce, answer) {
                    Admission::Admitted => Event::Admitted {
                        candidate: c,
                        credential,
                    },
                    Admission::Rejected(reason) => Event::Rejected { candidate: c, reason },
                };
                self.log.push(now, event);
                self.decisions += 1;
                if self.decisions == self.candidates.len() {
                    for (c, index) in self.ca.assign_ids() {
                        self.send(now, Addr::Ca, Addr::Candidate(c), Payload::IdAssign { index });
                    }
                }
            }
            (Addr::Node(i), Payload::IdAck { .. }) => {
                self.ca.acknowledge_id(i);
                if self.ca.all_ids_acknowledged() && self.ca.scheme().is_none() {
                    let t = self.config.t;
                    let scheme = self.ca.setup_scheme()?;
                    let report = blom::verify_t_security_structure(scheme.public(), t, scheme.seed());
                    let event = Event::Setup {
                        epoch: scheme.epoch(),
                        nodes: scheme.params().nodes,
                        t_secure: report.passed(),
                    };
                    self.log.push(now, event);
                }
            }
            (Addr::Node(i), Payload::KeyRequest { peer }) => {
                if let Some(epoch) = self.ca.take_pending_rekey()? {
                    self.log.push(
                        now,
                        Event::Rekey {
                            epoch,
                            reason: RekeyReason::KeyRequest,
                        },
                    );
                }
                match self.ca.grant_keys(i, peer)? {
                    Ok(grant) => {
                        let request = self.next_request;
                        self.next_request += 1;
                        self.pairs.insert(
                            request,
                            PairProgress {
                                i,
                                j: peer,
                                epoch: grant.epoch,
                                delivered: 0,
                            },
                        );
                        let epoch = grant.epoch;
                        self.send(
                            now,
                            Addr::Ca,
                            Addr::Node(i),
                            Payload::KeyReply {
                                request,
                                row: grant.requester_row,
                                peer_column: grant.requester_peer_column,
                                epoch,
                            },
                        );
                        self.send(
                            now,
                            Addr::Ca,
                            Addr::Node(peer),
                            Payload::KeyReply {
                                request,
                                row: grant.peer_row,
                                peer_column: grant.peer_peer_column,
                                epoch,
                            },
                        );
                    }
                    Err(reason) => self.log.push(
                        now,
                        Event::KeyRefused {
                            requester: i,
                            peer,
                            reason,
                        },
                    ),
                }
            }
            (Addr::Node(i), Payload::AuthQuery { peer }) => {
                let key = (i.min(peer), i.max(peer));
                let asked = self.auth_queries.entry(key).or_default();
                asked.insert(i);
                if asked.len() == 2 {
                    self.auth_queries.remove(&key);
                    let allow = self.ca.authenticate(i, peer);
                    self.send(now, Addr::Ca, Addr::Node(i), Payload::AuthVerdict { peer, allow });
                    self.send(now, Addr::Ca, Addr::Node(peer), Payload::AuthVerdict { peer: i, allow });
                }
            }
            (
                Addr::Node(i),
                Payload::ProbeReply {
                    round,
                    nonce,
                    answer,
                },
            )
                if !self.ca.verify_probe(i, round, nonce, answer) => {
                    self.detections.push(Detection {
                        node: i,
                        probe_round: round,
                        detected_at: now,
                    });
                    self.log.push(
                        now,
                        Event::Detection {
                            node: i,
                            probe_round: round,
                        },
                    );
                    self.mark(now, i)?;
                }
            _ => {}
        }
        Ok(())
    }

    fn at_candidate(&mut self, now: u64, c: usize, msg: Message) {
        match msg.payload {
            Payload::JoinChallenge { nonce } => {
                let cred = self.candidates[c - 1].credential;
                let answer = challenge_answer(cred.secret, nonce);
                self.send(
                    now,
                    Addr::Candidate(c),
                    Addr::Ca,
                    Payload::JoinResponse {
                        credential: cred.id,
                        nonce,
                        answer,
                    },
                );
            }
            Payload::IdAssign { index } => {
                let node = SensorNode {
                    index,
                    name: self.config.name_of(index),
                    credential: self.candidates[c - 1].credential,
                    private_row: None,
                    known_public: BTreeMap::new(),
                    adversarial_since: None,
                    authorized: BTreeSet::new(),
                };
                self.nodes.insert(index, node);
                self.send(now, Addr::Node(index), Addr::Ca, Payload::IdAck { index });
            }
            _ => {}
        }
    }

    fn at_node(&mut self, now: u64, i: usize, msg: Message) -> Result<(), NetsimError> {
        match msg.payload {
            Payload::KeyReply {
                request,
                row,
                peer_column,
                ..
            } => {
                let node = self.nodes.get_mut(&i).ok_or(NetsimError::UnknownNode(i))?;
                node.private_row = Some(row);
                node.known_public.insert(peer_column.owner, peer_column);
                let done = self.pairs.get_mut(&request).map(|p| {
                    p.delivered += 1;
                    p.delivered == 2
                });
                if done == Some(true) {
                    let p = self.pairs.remove(&request).expect("tracked pair");
                    self.log.push(
                        now,
                        Event::PairServed {
                            request,
                            i: p.i,
                            j: p.j,
                            epoch: p.epoch,
                        },
                    );
                    self.ca.note_pair_completed();
                    self.establish_session(now, p.i, p.j)?;
                }
            }
            Payload::AuthVerdict { peer, allow } => {
                if allow {
                    if let Some(node) = self.nodes.get_mut(&i) {
                        node.authorized.insert(peer);
                    }
                }
            }
            Payload::Probe { round, nonce } => {
                let node = self.nodes.get(&i).ok_or(NetsimError::UnknownNode(i))?;
                let mut answer = challenge_answer(node.credential.secret, nonce);
                if node.adversarial_since.is_some_and(|t| t <= now) {
                    answer ^= 0x5a5a_5a5a;
                }
                self.send(
                    now,
                    Addr::Node(i),
                    Addr::Ca,
                    Payload::ProbeReply {
                        round,
                        nonce,
                        answer,
                    },
                );
            }
            Payload::MaliciousNotice { node: bad, .. } => {
                if let Some(node) = self.nodes.get_mut(&i) {
                    node.authorized.remove(&bad);
                    node.known_public.remove(&(bad - 1));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn mark(&mut self, now: u64, node: usize) -> Result<(), NetsimError> {
        let marking = self.ca.mark_malicious(node, now)?;
        self.log.push(
            now,
            Event::Marked {
                node,
                label: marking.label.clone(),
                count: marking.count,
                first: marking.first,
            },
        );
        for &peer in &marking.notify {
            self.send(
                now,
                Addr::Ca,
                Addr::Node(peer),
                Payload::MaliciousNotice {
                    node,
                    label: marking.label.clone(),
                },
            );
        }
        self.log.push(
            now,
            Event::Rekey {
                epoch: marking.epoch,
                reason: RekeyReason::Intrusion(node),
            },
        );
        Ok(())
    }

    /// Both nodes compute the key from the rows they hold; equal epochs give
    /// equal keys, mismatched epochs are reported as stale.
    fn establish_session(&mut self, now: u64, i: usize, j: usize) -> Result<(), NetsimError> {
        if self.ca.is_malicious(i) || self.ca.is_malicious(j) || self.ca.is_blocked(i, j) {
            self.log.push(
                now,
                Event::SessionFailed {
                    i,
                    j,
                    failure: SessionFailure::Blocked,
                },
            );
            return Ok(());
        }
        let scheme = self.ca.scheme().ok_or(NetsimError::NotSetUp)?;
        let q = scheme.params().modulus;
        let (col_for_i, col_for_j) = (scheme.public_column(j - 1)?, scheme.public_column(i - 1)?);
        let mut keys = Vec::with_capacity(2);
        for (me, col) in [(i, col_for_i), (j, col_for_j)] {
            let node = self.nodes.get_mut(&me).ok_or(NetsimError::UnknownNode(me))?;
            let Some(row) = node.private_row.clone() else {
                self.log.push(
                    now,
                    Event::SessionFailed {
                        i,
                        j,
                        failure: SessionFailure::MissingRow(me),
                    },
                );
                return Ok(());
            };
            let col = node.known_public.entry(col.owner).or_insert(col).clone();
            keys.push(blom::shared_key(&row, &col, q)?);
        }
        let (ki, kj) = (keys[0], keys[1]);
        if ki.epoch != kj.epoch {
            self.log.push(
                now,
                Event::SessionFailed {
                    i,
                    j,
                    failure: SessionFailure::StaleEpoch {
                        key_i: ki.value,
                        key_j: kj.value,
                        epoch_i: ki.epoch,
                        epoch_j: kj.epoch,
                    },
                },
            );
            return Ok(());
        }
        self.log.push(
            now,
            Event::SessionEstablished {
                i,
                j,
                key_i: ki.value,
                key_j: kj.value,
                epoch: ki.epoch,
            },
        );
        self.send(now, Addr::Node(i), Addr::Ca, Payload::AuthQuery { peer: j });
        self.send(now, Addr::Node(j), Addr::Ca, Payload::AuthQuery { peer: i });
        Ok(())
    }

    fn probe_network(&mut self, now: u64) {
        if self.ca.scheme().is_none() {
            return;
        }
        for node in self.ca.trusted_nodes() {
            let nonce: u64 = self.gen.gen();
            self.ca.issue_probe(node, now, nonce);
            self.send(now, Addr::Ca, Addr::Node(node), Payload::Probe { round: now, nonce });
        }
    }
}

/// Checks a finished log for protocol violations: out-of-order timestamps,
/// sessions whose two sides disagree, delivered traffic touching a marked
/// node, and scheme setup before every id was acknowledged.
pub fn audit(log: &EventLog) -> Vec<String> {
    let mut out = Vec::new();
    let mut last = 0;
    let mut marked = BTreeSet::new();
    let mut assigned = BTreeSet::new();
    let mut acked = BTreeSet::new();
    for r in log.iter() {
        if r.time < last {
            out.push(format!("timestamp {} after {}", r.time, last));
        }
        last = r.time;
        match &r.event {
            Event::SessionEstablished {
                i, j, key_i, key_j, ..
            } if key_i != key_j => {
                out.push(format!("session N{i}-N{j} keys differ: {key_i} vs {key_j}"));
            }
            Event::Marked { node, first: true, .. } => {
                marked.insert(*node);
            }
            Event::Message {
                msg,
                disposition: Disposition::Delivered,
            } => {
                if let Some(v) = marked.iter().find(|&&v| msg.involves(v)) {
                    out.push(format!("{} delivered to/from marked node N{v} at t={}", msg.kind(), r.time));
                }
                match &msg.payload {
                    Payload::IdAssign { index } => {
                        assigned.insert(*index);
                    }
                    Payload::IdAck { index } => {
                        acked.insert(*index);
                    }
                    _ => {}
                }
            }
            Event::Setup { .. } if assigned.is_empty() || assigned != acked => {
                out.push("scheme set up before all ids were acknowledged".into());
            }
            Event::Violation { what } => out.push(what.clone()),
            _ => {}
        }
    }
    out
}

/// Scenarios shipped with the crate, by name.
pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    match name {
        "paper_demo" => Some(include_str!("../../scenarios/paper_demo.toml")),
        "intrusion" => Some(include_str!("../../scenarios/intrusion.toml")),
        "stale_epoch" => Some(include_str!("../../scenarios/stale_epoch.toml")),
        _ => None,
    }
}

pub const BUNDLED_SCENARIOS: [&str; 3] = ["paper_demo", "intrusion", "stale_epoch"];

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> ScenarioConfig {
        ScenarioConfig::parse(&format!(
            "q = 31\nt = 2\nnode_count = 5\nvariant = \"original\"\nprobe_interval = 5\nseed = 3\n{extra}"
        ))
        .unwrap()
    }

    fn kinds(log: &EventLog) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for r in log.iter() {
            *m.entry(r.event.name()).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn empty_script_only_sets_up() {
        let out = run_scenario(&config(""), 3).unwrap();
        let k = kinds(&out.log);
        let expected: BTreeMap<String, usize> = [
            ("JoinRequest", 5),
            ("JoinChallenge", 5),
            ("JoinResponse", 5),
            ("Admitted", 5),
            ("IdAssign", 5),
            ("IdAck", 5),
            ("Setup", 1),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        assert_eq!(k, expected);
        assert_eq!(out.log.records.last().unwrap().time, SETUP_COMPLETE_TIME);
        assert_eq!(out.metrics.final_epoch, 1);
    }

    #[test]
    fn ids_follow_admission_order() {
        let out = run_scenario(&config(""), 3).unwrap();
        let assigned: Vec<(Addr, usize)> = out
            .log
            .messages()
            .filter_map(|(_, m, _)| match m.payload {
                Payload::IdAssign { index } => Some((m.dst, index)),
                _ => None,
            })
            .collect();
        assert_eq!(
            assigned,
            (1..=5).map(|i| (Addr::Candidate(i), i)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn impostors_are_rejected() {
        let out = run_scenario(&config("impostors = 2"), 3).unwrap();
        let rejected: Vec<_> = out
            .log
            .iter()
            .filter_map(|r| match r.event {
                Event::Rejected { candidate, reason } => Some((candidate, reason)),
                _ => None,
            })
            .collect();
        assert_eq!(
            rejected,
            vec![(6, RejectReason::UnknownCredential), (7, RejectReason::UnknownCredential)]
        );
        assert_eq!(out.authority.registry().len(), 5);
    }

    #[test]
    fn detection_at_probe_round() {
        let out = run_scenario(&config("[[adversaries]]\nnode = 4\ntime = 10\n"), 3).unwrap();
        assert_eq!(out.detections.len(), 1);
        assert_eq!(out.detections[0].node, 4);
        assert_eq!(out.detections[0].probe_round, 10);
        assert_eq!(out.detections[0].detected_at, 12);
        assert_eq!(out.intrusion_table.count_for_label("MN1"), Some(1));
        assert_eq!(out.metrics.rekeys, 1);
    }

    #[test]
    fn no_adversaries_no_detections() {
        let out = run_scenario(&config("horizon = 30"), 3).unwrap();
        assert!(out.detections.is_empty());
        assert!(kinds(&out.log)["Probe"] > 0);
    }

    #[test]
    fn refused_and_dropped_traffic() {
        let extra = "\
[[adversaries]]
node = 5
time = 8
[[requests]]
i = 1
j = 5
time = 15
[[data]]
src = 1
dst = 2
time = 16
";
        let out = run_scenario(&config(extra), 3).unwrap();
        let refused = out.log.iter().any(|r| {
            matches!(
                r.event,
                Event::KeyRefused {
                    requester: 1,
                    peer: 5,
                    reason: RefusalReason::MaliciousPeer
                }
            )
        });
        assert!(refused);
        let dropped = out
            .log
            .messages()
            .any(|(_, m, d)| m.kind() == MessageKind::Data && d == Disposition::Dropped);
        assert!(dropped);
        assert!(audit(&out.log).is_empty());
    }

    #[test]
    fn session_then_data_is_delivered() {
        let extra = "\
[[requests]]
i = 1
j = 2
time = 6
[[data]]
src = 1
dst = 2
time = 20
";
        let out = run_scenario(&config(extra), 3).unwrap();
        let data: Vec<_> = out
            .log
            .messages()
            .filter(|(_, m, _)| m.kind() == MessageKind::Data)
            .map(|(_, _, d)| d)
            .collect();
        assert_eq!(data, vec![Disposition::Delivered]);
        assert_eq!(out.metrics.sessions_established, 1);
    }

    #[test]
    fn metrics_csv_shape() {
        let out = run_scenario(&config(""), 3).unwrap();
        let csv = out.metrics.to_csv();
        assert!(csv.starts_with("metric,value\n"));
        assert!(csv.contains("final_epoch,1\n"));
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn bundled_scenarios_parse() {
        for name in BUNDLED_SCENARIOS {
            let text = bundled_scenario(name).unwrap();
            ScenarioConfig::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(bundled_scenario("nope").is_none());
    }
}
