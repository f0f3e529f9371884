//! The central authority: admission, ID assignment, key distribution,
//! intrusion tracking and rekeying.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::blom::{
    self, PrivateRow, PublicColumn, RekeyRule, SchemeParams, SchemeState, INITIAL_EPOCH,
};
use crate::gfmat::Matrix;
use crate::rng;

use super::log::{RefusalReason, RejectReason};
use super::NetsimError;

/// Answer to an admission or probe challenge, bound to a credential secret.
pub fn challenge_answer(secret: u64, nonce: u64) -> u64 {
    rng::derive_seed(secret, "challenge", nonce)
}

/// Credential issued by the network a node was authenticated in before it
/// joins this one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Credential {
    pub id: u64,
    pub secret: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label {
    Trusted,
    /// Ordinal `m`, shown as `MN{m}`.
    Malicious(u32),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Trusted => f.write_str("trusted"),
            Label::Malicious(m) => write!(f, "MN{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeId {
    pub index: usize,
    pub label: Label,
}

impl NodeId {
    pub fn is_malicious(&self) -> bool {
        matches!(self.label, Label::Malicious(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntrusionEntry {
    pub node: usize,
    pub count: u32,
}

/// Malicious-node registry keyed by `MN` ordinal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntrusionTable {
    entries: BTreeMap<u32, IntrusionEntry>,
}

impl IntrusionTable {
    pub fn get(&self, ordinal: u32) -> Option<&IntrusionEntry> {
        self.entries.get(&ordinal)
    }

    pub fn count_for_label(&self, label: &str) -> Option<u32> {
        let ordinal: u32 = label.strip_prefix("MN")?.parse().ok()?;
        self.entries.get(&ordinal).map(|e| e.count)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (String, IntrusionEntry)> + '_ {
        self.entries.iter().map(|(m, e)| (format!("MN{m}"), *e))
    }

    pub fn total_increments(&self) -> u64 {
        self.entries.values().map(|e| u64::from(e.count)).sum()
    }
}

impl fmt::Display for IntrusionTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>5} {:>15}", "ID", "NODE", "INTRUSION COUNT")?;
        for (label, e) in self.iter() {
            writeln!(f, "{label:<8} {:>5} {:>15}", format!("N{}", e.node), e.count)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    Rejected(RejectReason),
}

/// Rows handed to both ends of a key request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyGrant {
    pub epoch: u64,
    pub requester_row: PrivateRow,
    pub requester_peer_column: PublicColumn,
    pub peer_row: PrivateRow,
    pub peer_peer_column: PublicColumn,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marking {
    pub label: String,
    pub count: u32,
    pub first: bool,
    /// Trusted nodes that receive the multicast notice (first marking only).
    pub notify: Vec<usize>,
    pub epoch: u64,
}

#[derive(Debug, Clone)]
pub struct CentralAuthority {
    params: SchemeParams,
    rekey_rule: RekeyRule,
    seed: u64,
    probe_interval: u64,
    scheme: Option<SchemeState>,
    fixture_public: Option<Matrix>,
    fixture_secret: Option<Matrix>,
    secret_overrides: BTreeMap<u64, Matrix>,
    issuer: BTreeMap<u64, u64>,
    challenges: BTreeMap<usize, u64>,
    used_nonces: BTreeSet<u64>,
    admitted: Vec<(usize, u64)>,
    probes: BTreeMap<(usize, u64), u64>,
    admitted_credentials: BTreeSet<u64>,
    registry: BTreeMap<usize, NodeId>,
    candidate_of: BTreeMap<usize, usize>,
    acked: BTreeSet<usize>,
    intrusion_table: IntrusionTable,
    marked_at: BTreeMap<usize, u64>,
    blocked_paths: BTreeSet<(usize, usize)>,
    pending_rekey: bool,
    rekeys: u64,
}

impl CentralAuthority {
    /// `issuer` maps the credential ids vouched for by the prior network to
    /// their secrets.
    pub fn new(
        params: SchemeParams,
        rekey_rule: RekeyRule,
        seed: u64,
        probe_interval: u64,
        issuer: BTreeMap<u64, u64>,
    ) -> Self {
        Self {
            params,
            rekey_rule,
            seed,
            probe_interval,
            scheme: None,
            fixture_public: None,
            fixture_secret: None,
            secret_overrides: BTreeMap::new(),
            issuer,
            challenges: BTreeMap::new(),
            used_nonces: BTreeSet::new(),
            admitted: Vec::new(),
            probes: BTreeMap::new(),
            admitted_credentials: BTreeSet::new(),
            registry: BTreeMap::new(),
            candidate_of: BTreeMap::new(),
            acked: BTreeSet::new(),
            intrusion_table: IntrusionTable::default(),
            marked_at: BTreeMap::new(),
            blocked_paths: BTreeSet::new(),
            pending_rekey: false,
            rekeys: 0,
        }
    }

    /// Injects fixed matrices: `P` and `S` for setup, and the secret to use
    /// for each listed later epoch.
    pub fn with_fixtures(
        mut self,
        public: Option<Matrix>,
        secret: Option<Matrix>,
        overrides: Vec<Matrix>,
    ) -> Self {
        self.fixture_public = public;
        self.fixture_secret = secret;
        self.secret_overrides = overrides
            .into_iter()
            .enumerate()
            .map(|(i, m)| (INITIAL_EPOCH + 1 + i as u64, m))
            .collect();
        self
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn probe_interval(&self) -> u64 {
        self.probe_interval
    }

    pub fn scheme(&self) -> Option<&SchemeState> {
        self.scheme.as_ref()
    }

    pub fn epoch(&self) -> Option<u64> {
        self.scheme.as_ref().map(SchemeState::epoch)
    }

    pub fn rekeys(&self) -> u64 {
        self.rekeys
    }

    pub fn pending_rekey(&self) -> bool {
        self.pending_rekey
    }

    pub fn intrusion_table(&self) -> &IntrusionTable {
        &self.intrusion_table
    }

    pub fn registry(&self) -> &BTreeMap<usize, NodeId> {
        &self.registry
    }

    pub fn blocked_paths(&self) -> &BTreeSet<(usize, usize)> {
        &self.blocked_paths
    }

    pub fn is_malicious(&self, index: usize) -> bool {
        self.registry.get(&index).is_some_and(NodeId::is_malicious)
    }

    pub fn marked_at(&self, index: usize) -> Option<u64> {
        self.marked_at.get(&index).copied()
    }

    pub fn is_blocked(&self, i: usize, j: usize) -> bool {
        self.blocked_paths.contains(&(i.min(j), i.max(j)))
    }

    pub fn trusted_nodes(&self) -> Vec<usize> {
        self.registry
            .values()
            .filter(|n| !n.is_malicious())
            .map(|n| n.index)
            .collect()
    }

    /// First message of the join handshake: hand the candidate a fresh nonce.
    pub fn issue_challenge(&mut self, candidate: usize, nonce: u64) {
        self.challenges.insert(candidate, nonce);
    }

    /// Checks a join response against the outstanding challenge. A nonce is
    /// accepted at most once.
    pub fn verify_join(
        &mut self,
        candidate: usize,
        credential: u64,
        nonce: u64,
        answer: u64,
    ) -> Admission {
        if !self.used_nonces.insert(nonce) {
            return Admission::Rejected(RejectReason::Replay);
        }
        if self.challenges.get(&candidate) != Some(&nonce) {
            return Admission::Rejected(RejectReason::NoChallenge);
        }
        self.challenges.remove(&candidate);
        let Some(&secret) = self.issuer.get(&credential) else {
            return Admission::Rejected(RejectReason::UnknownCredential);
        };
        if challenge_answer(secret, nonce) != answer {
            return Admission::Rejected(RejectReason::WrongAnswer);
        }
        if !self.admitted_credentials.insert(credential) {
            return Admission::Rejected(RejectReason::DuplicateCredential);
        }
        self.admitted.push((candidate, credential));
        Admission::Admitted
    }

    /// Gives every admitted candidate a node index (1-based, in admission
    /// order). Returns `(candidate, index)` pairs.
    pub fn assign_ids(&mut self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (pos, &(candidate, _)) in self.admitted.iter().enumerate() {
            let index = pos + 1;
            self.registry.insert(
                index,
                NodeId {
                    index,
                    label: Label::Trusted,
                },
            );
            self.candidate_of.insert(index, candidate);
            out.push((candidate, index));
        }
        out
    }

    pub fn acknowledge_id(&mut self, index: usize) {
        if self.registry.contains_key(&index) {
            self.acked.insert(index);
        }
    }

    pub fn all_ids_acknowledged(&self) -> bool {
        !self.registry.is_empty() && self.acked.len() == self.registry.len()
    }

    /// Builds the scheme for the registered nodes. IDs must be assigned and
    /// acknowledged first.
    pub fn setup_scheme(&mut self) -> Result<&SchemeState, NetsimError> {
        if !self.all_ids_acknowledged() {
            return Err(NetsimError::MatricesBeforeIds);
        }
        if self.registry.len() != self.params.nodes {
            return Err(NetsimError::Config {
                field: "node_count".into(),
                message: format!(
                    "{} nodes registered but the scheme expects {}",
                    self.registry.len(),
                    self.params.nodes
                ),
            });
        }
        let public = match &self.fixture_public {
            Some(p) => p.clone(),
            None => blom::setup_public(&self.params, rng::derive_seed(self.seed, "public", 0), None)?,
        };
        let secret = match &self.fixture_secret {
            Some(s) => s.clone(),
            None => blom::generate_secret(&self.params, rng::derive_seed(self.seed, "secret", 0), None)?,
        };
        let state = SchemeState::from_parts(self.params, public, secret, INITIAL_EPOCH, self.seed)?;
        Ok(self.scheme.insert(state))
    }

    fn scheme_ref(&self) -> Result<&SchemeState, NetsimError> {
        self.scheme.as_ref().ok_or(NetsimError::NotSetUp)
    }

    /// Moves to the next epoch, using an injected secret when one is listed.
    pub fn rekey(&mut self) -> Result<u64, NetsimError> {
        let current = self.scheme_ref()?;
        let next_epoch = current.epoch() + 1;
        let next = match self.secret_overrides.get(&next_epoch) {
            Some(s) => current.rekey_with_secret(s.clone())?,
            None => current.rekey(
                self.rekey_rule,
                rng::derive_seed(self.seed, "rekey", next_epoch),
            )?,
        };
        self.scheme = Some(next);
        self.rekeys += 1;
        Ok(next_epoch)
    }

    /// Applies a rekey owed to an earlier completed key-request pair.
    pub fn take_pending_rekey(&mut self) -> Result<Option<u64>, NetsimError> {
        if !std::mem::take(&mut self.pending_rekey) {
            return Ok(None);
        }
        self.rekey().map(Some)
    }

    /// Both replies of a key request were delivered; the next request gets a
    /// fresh secret.
    pub fn note_pair_completed(&mut self) {
        self.pending_rekey = true;
    }

    /// Serves a key request from trusted node `i` for peer `j`.
    pub fn grant_keys(&self, i: usize, j: usize) -> Result<Result<KeyGrant, RefusalReason>, NetsimError> {
        let scheme = self.scheme_ref()?;
        if self.is_malicious(j) || self.is_malicious(i) {
            return Ok(Err(RefusalReason::MaliciousPeer));
        }
        if self.is_blocked(i, j) {
            return Ok(Err(RefusalReason::BlockedPath));
        }
        Ok(Ok(KeyGrant {
            epoch: scheme.epoch(),
            requester_row: scheme.private_row(i - 1)?,
            requester_peer_column: scheme.public_column(j - 1)?,
            peer_row: scheme.private_row(j - 1)?,
            peer_peer_column: scheme.public_column(i - 1)?,
        }))
    }

    /// Records the nonce sent to `index` in the probe round starting at `round`.
    pub fn issue_probe(&mut self, index: usize, round: u64, nonce: u64) {
        self.probes.insert((index, round), nonce);
    }

    /// True iff the reply answers the outstanding probe with the credential
    /// the node was admitted under.
    pub fn verify_probe(&mut self, index: usize, round: u64, nonce: u64, answer: u64) -> bool {
        if self.probes.remove(&(index, round)) != Some(nonce) {
            return false;
        }
        let Some(&(_, credential)) = index.checked_sub(1).and_then(|p| self.admitted.get(p)) else {
            return false;
        };
        self.issuer
            .get(&credential)
            .is_some_and(|&secret| challenge_answer(secret, nonce) == answer)
    }

    /// Allow iff neither party is malicious and the path is open.
    pub fn authenticate(&self, i: usize, j: usize) -> bool {
        !self.is_malicious(i) && !self.is_malicious(j) && !self.is_blocked(i, j)
    }

    /// Relabels the node `MN{m}` on first detection (later detections only
    /// raise its count), blocks every path touching it, and rekeys.
    pub fn mark_malicious(&mut self, index: usize, time: u64) -> Result<Marking, NetsimError> {
        let node = self
            .registry
            .get(&index)
            .ok_or(NetsimError::UnknownNode(index))?
            .clone();
        let (ordinal, first) = match node.label {
            Label::Malicious(m) => (m, false),
            Label::Trusted => (self.intrusion_table.len() as u32 + 1, true),
        };
        let entry = self
            .intrusion_table
            .entries
            .entry(ordinal)
            .or_insert(IntrusionEntry { node: index, count: 0 });
        entry.count += 1;
        let count = entry.count;
        let mut notify = Vec::new();
        if first {
            self.registry.get_mut(&index).expect("registered").label = Label::Malicious(ordinal);
            self.marked_at.insert(index, time);
            for &other in self.registry.keys() {
                if other != index {
                    self.blocked_paths.insert((other.min(index), other.max(index)));
                }
            }
            notify = self.trusted_nodes();
        }
        let epoch = self.rekey()?;
        Ok(Marking {
            label: format!("MN{ordinal}"),
            count,
            first,
            notify,
            epoch,
        })
    }
}
