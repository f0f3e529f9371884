//! Messages and the event log.

use std::fmt;

use crate::blom::{PrivateRow, PublicColumn};

/// Message endpoint. Candidates are addressed by join order until the
/// authority assigns them a node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Addr {
    Ca,
    Candidate(usize),
    Node(usize),
}

impl Addr {
    pub fn node(self) -> Option<usize> {
        match self {
            Addr::Node(i) => Some(i),
            _ => None,
        }
    }
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addr::Ca => f.write_str("CA"),
            Addr::Candidate(c) => write!(f, "C{c}"),
            Addr::Node(i) => write!(f, "N{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    JoinRequest,
    JoinChallenge,
    JoinResponse,
    IdAssign,
    IdAck,
    KeyRequest,
    KeyReply,
    AuthQuery,
    AuthVerdict,
    Probe,
    ProbeReply,
    MaliciousNotice,
    Data,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    JoinRequest { credential: u64 },
    JoinChallenge { nonce: u64 },
    JoinResponse { credential: u64, nonce: u64, answer: u64 },
    IdAssign { index: usize },
    IdAck { index: usize },
    KeyRequest { peer: usize },
    /// Private row (0-based owner) and the peer's public column.
    KeyReply {
        request: u64,
        row: PrivateRow,
        peer_column: PublicColumn,
        epoch: u64,
    },
    AuthQuery { peer: usize },
    AuthVerdict { peer: usize, allow: bool },
    Probe { round: u64, nonce: u64 },
    ProbeReply { round: u64, nonce: u64, answer: u64 },
    MaliciousNotice { node: usize, label: String },
    Data { seq: u64 },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::JoinRequest { .. } => MessageKind::JoinRequest,
            Payload::JoinChallenge { .. } => MessageKind::JoinChallenge,
            Payload::JoinResponse { .. } => MessageKind::JoinResponse,
            Payload::IdAssign { .. } => MessageKind::IdAssign,
            Payload::IdAck { .. } => MessageKind::IdAck,
            Payload::KeyRequest { .. } => MessageKind::KeyRequest,
            Payload::KeyReply { .. } => MessageKind::KeyReply,
            Payload::AuthQuery { .. } => MessageKind::AuthQuery,
            Payload::AuthVerdict { .. } => MessageKind::AuthVerdict,
            Payload::Probe { .. } => MessageKind::Probe,
            Payload::ProbeReply { .. } => MessageKind::ProbeReply,
            Payload::MaliciousNotice { .. } => MessageKind::MaliciousNotice,
            Payload::Data { .. } => MessageKind::Data,
        }
    }
}

fn join(values: &[u64]) -> String {
    values
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::JoinRequest { credential } => write!(f, "credential={credential}"),
            Payload::JoinChallenge { nonce } => write!(f, "nonce={nonce}"),
            Payload::JoinResponse {
                credential,
                nonce,
                answer,
            } => write!(f, "credential={credential} nonce={nonce} answer={answer}"),
            Payload::IdAssign { index } | Payload::IdAck { index } => write!(f, "index={index}"),
            Payload::KeyRequest { peer } => write!(f, "peer=N{peer}"),
            Payload::KeyReply {
                request,
                row,
                peer_column,
                epoch,
            } => write!(
                f,
                "request={request} epoch={epoch} row=[{}] peer=N{} peer_column=[{}]",
                join(&row.row),
                peer_column.owner + 1,
                join(&peer_column.col)
            ),
            Payload::AuthQuery { peer } => write!(f, "peer=N{peer}"),
            Payload::AuthVerdict { peer, allow } => write!(
                f,
                "peer=N{peer} verdict={}",
                if *allow { "allow" } else { "deny" }
            ),
            Payload::Probe { round, nonce } => write!(f, "round={round} nonce={nonce}"),
            Payload::ProbeReply {
                round,
                nonce,
                answer,
            } => write!(f, "round={round} nonce={nonce} answer={answer}"),
            Payload::MaliciousNotice { node, label } => write!(f, "node=N{node} label={label}"),
            Payload::Data { seq } => write!(f, "seq={seq}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub src: Addr,
    pub dst: Addr,
    pub sent: u64,
    pub payload: Payload,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    pub fn involves(&self, node: usize) -> bool {
        self.src == Addr::Node(node) || self.dst == Addr::Node(node)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Delivered,
    /// Stopped because an endpoint is a marked malicious node.
    Blocked,
    /// Discarded by the receiver (e.g. data without an authorized session).
    Dropped,
}

impl fmt::Display for Disposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Disposition::Delivered => "delivered",
            Disposition::Blocked => "blocked",
            Disposition::Dropped => "dropped",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    UnknownCredential,
    WrongAnswer,
    NoChallenge,
    Replay,
    DuplicateCredential,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::UnknownCredential => "unknown-credential",
            RejectReason::WrongAnswer => "wrong-answer",
            RejectReason::NoChallenge => "no-challenge",
            RejectReason::Replay => "replayed-nonce",
            RejectReason::DuplicateCredential => "duplicate-credential",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RekeyReason {
    /// A key-request pair completed before this request arrived.
    KeyRequest,
    /// The intrusion count of this node was incremented.
    Intrusion(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefusalReason {
    MaliciousPeer,
    BlockedPath,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionFailure {
    /// The two rows come from different epochs, so the keys disagree.
    StaleEpoch {
        key_i: u64,
        key_j: u64,
        epoch_i: u64,
        epoch_j: u64,
    },
    MissingRow(usize),
    Blocked,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Message {
        msg: Message,
        disposition: Disposition,
    },
    Admitted {
        candidate: usize,
        credential: u64,
    },
    Rejected {
        candidate: usize,
        reason: RejectReason,
    },
    Setup {
        epoch: u64,
        nodes: usize,
        t_secure: bool,
    },
    Rekey {
        epoch: u64,
        reason: RekeyReason,
    },
    KeyRefused {
        requester: usize,
        peer: usize,
        reason: RefusalReason,
    },
    /// Both key replies of one request were delivered.
    PairServed {
        request: u64,
        i: usize,
        j: usize,
        epoch: u64,
    },
    SessionEstablished {
        i: usize,
        j: usize,
        key_i: u64,
        key_j: u64,
        epoch: u64,
    },
    SessionFailed {
        i: usize,
        j: usize,
        failure: SessionFailure,
    },
    Detection {
        node: usize,
        probe_round: u64,
    },
    Marked {
        node: usize,
        label: String,
        count: u32,
        first: bool,
    },
    Violation {
        what: String,
    },
}

impl Event {
    pub fn name(&self) -> String {
        match self {
            Event::Message { msg, .. } => msg.kind().to_string(),
            Event::Admitted { .. } => "Admitted".into(),
            Event::Rejected { .. } => "Rejected".into(),
            Event::Setup { .. } => "Setup".into(),
            Event::Rekey { .. } => "Rekey".into(),
            Event::KeyRefused { .. } => "KeyRefused".into(),
            Event::PairServed { .. } => "PairServed".into(),
            Event::SessionEstablished { .. } => "SessionEstablished".into(),
            Event::SessionFailed { .. } => "SessionFailed".into(),
            Event::Detection { .. } => "Detection".into(),
            Event::Marked { .. } => "Marked".into(),
            Event::Violation { .. } => "Violation".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub time: u64,
    pub event: Event,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.time;
        let name = self.event.name();
        match &self.event {
            Event::Message { msg, disposition } => write!(
                f,
                "{t} {name} {} {} status={disposition} sent={} {}",
                msg.src, msg.dst, msg.sent, msg.payload
            ),
            Event::Admitted {
                candidate,
                credential,
            } => write!(f, "{t} {name} CA C{candidate} credential={credential}"),
            Event::Rejected { candidate, reason } => {
                write!(f, "{t} {name} CA C{candidate} reason={reason}")
            }
            Event::Setup {
                epoch,
                nodes,
                t_secure,
            } => write!(
                f,
                "{t} {name} CA - epoch={epoch} nodes={nodes} t_structure={}",
                if *t_secure { "pass" } else { "fail" }
            ),
            Event::Rekey { epoch, reason } => match reason {
                RekeyReason::KeyRequest => write!(f, "{t} {name} CA - epoch={epoch} reason=key-request"),
                RekeyReason::Intrusion(n) => {
                    write!(f, "{t} {name} CA - epoch={epoch} reason=intrusion node=N{n}")
                }
            },
            Event::KeyRefused {
                requester,
                peer,
                reason,
            } => write!(
                f,
                "{t} {name} CA N{requester} peer=N{peer} reason={}",
                match reason {
                    RefusalReason::MaliciousPeer => "malicious-peer",
                    RefusalReason::BlockedPath => "blocked-path",
                }
            ),
            Event::PairServed {
                request,
                i,
                j,
                epoch,
            } => write!(f, "{t} {name} CA - request={request} pair=N{i},N{j} epoch={epoch}"),
            Event::SessionEstablished {
                i,
                j,
                key_i,
                key_j,
                epoch,
            } => write!(
                f,
                "{t} {name} N{i} N{j} key_i={key_i} key_j={key_j} epoch={epoch}"
            ),
            Event::SessionFailed { i, j, failure } => match failure {
                SessionFailure::StaleEpoch {
                    key_i,
                    key_j,
                    epoch_i,
                    epoch_j,
                } => write!(
                    f,
                    "{t} {name} N{i} N{j} reason=stale-epoch key_i={key_i} key_j={key_j} epoch_i={epoch_i} epoch_j={epoch_j}"
                ),
                SessionFailure::MissingRow(n) => {
                    write!(f, "{t} {name} N{i} N{j} reason=missing-row node=N{n}")
                }
                SessionFailure::Blocked => write!(f, "{t} {name} N{i} N{j} reason=blocked"),
            },
            Event::Detection { node, probe_round } => {
                write!(f, "{t} {name} CA N{node} probe_round={probe_round}")
            }
            Event::Marked {
                node,
                label,
                count,
                first,
            } => write!(
                f,
                "{t} {name} CA N{node} label={label} count={count} first={first}"
            ),
            Event::Violation { what } => write!(f, "{t} {name} - - {what}"),
        }
    }
}

/// Time-ordered record of everything that happened in one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    pub records: Vec<LogRecord>,
}

impl EventLog {
    pub fn push(&mut self, time: u64, event: Event) {
        debug_assert!(self.records.last().is_none_or(|r| r.time <= time));
        self.records.push(LogRecord { time, event });
    }

    pub fn iter(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Delivered/blocked/dropped messages in log order.
    pub fn messages(&self) -> impl Iterator<Item = (u64, &Message, Disposition)> {
        self.records.iter().filter_map(|r| match &r.event {
            Event::Message { msg, disposition } => Some((r.time, msg, *disposition)),
            _ => None,
        })
    }

    /// One `time kind src dst detail` line per record.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# time kind src dst detail\n");
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}
