//! Vehicle-side state shared by both handshakes: registered devices, the
//! nonce ledger, and the single open session.

use super::aead::{self, OpenError};
use super::backend::{BackendVerifier, CommitOffer};
use super::wire::HandshakeMessage;
use super::{Identity, NonceLedger, OpCounts, RejectReason, Role, SymmetricKey, TimingPolicy, ID_LEN};
use crate::edr::MobilityPattern;
use crate::group::Scalar;
use crate::hash::{self, Digest32};
use crate::protocol::{Nonce, CHALLENGE_LEN};

pub const DEFAULT_PROCESSING_US: i64 = 1_000;
pub const DEFAULT_SESSION_TIMEOUT_US: i64 = 10_000_000;

/// A device bound to the vehicle at registration.
#[derive(Clone, Debug)]
pub struct Registration {
    pub identity: Identity,
    pub key: SymmetricKey,
    pub verifier: Option<BackendVerifier>,
}

#[derive(Clone, Debug)]
pub(crate) enum Phase {
    Basic,
    Keyfob {
        t_kf_send: i64,
        /// Start of the current gait window in keyfob clock.
        anchor: i64,
        t_v_receive: i64,
        t_v_send: i64,
        reinits: u32,
    },
}

#[derive(Clone, Debug)]
pub(crate) struct OpenSession {
    pub device: usize,
    pub nonce: Nonce,
    pub challenge: [u8; CHALLENGE_LEN],
    pub opened_at: i64,
    pub offer: Option<CommitOffer>,
    pub commit_challenge: Option<Scalar>,
    pub commitment_checked: bool,
    pub phase: Phase,
}

#[derive(Clone, Debug)]
pub struct Vehicle {
    pub identity: Identity,
    pub pattern: MobilityPattern,
    pub policy: TimingPolicy,
    /// Time between receiving a request and sending the challenge.
    pub processing_us: i64,
    /// Reject requests whose nonce was already seen. Disabling it exists only
    /// to demonstrate the replayed-session attack on the trace checker.
    pub replay_protection: bool,
    pub session_timeout_us: i64,
    /// Number of re-initializations allowed after a gait mismatch.
    pub reinit_budget: u32,
    pub ops: OpCounts,
    pub(crate) devices: Vec<Registration>,
    pub(crate) seen: NonceLedger,
    pub(crate) session: Option<OpenSession>,
}

impl Vehicle {
    pub fn new(label: impl Into<String>, pattern: MobilityPattern, policy: TimingPolicy) -> Self {
        Vehicle {
            identity: Identity::new(Role::Vehicle, label),
            pattern,
            policy,
            processing_us: DEFAULT_PROCESSING_US,
            replay_protection: true,
            session_timeout_us: DEFAULT_SESSION_TIMEOUT_US,
            reinit_budget: 1,
            ops: OpCounts::default(),
            devices: Vec::new(),
            seen: NonceLedger::default(),
            session: None,
        }
    }

    pub fn register(&mut self, identity: Identity, key: SymmetricKey, verifier: Option<BackendVerifier>) {
        self.devices.push(Registration { identity, key, verifier });
    }

    pub fn registrations(&self) -> &[Registration] {
        &self.devices
    }

    /// `H(id_v)` as carried in keyfob challenges.
    pub fn hashed_id(&self) -> Digest32 {
        hash::digest(&[&self.identity.id])
    }

    pub fn has_open_session(&self) -> bool {
        self.session.is_some()
    }

    /// Identity of the device in the open session, if any.
    pub fn session_peer(&self) -> Option<&Identity> {
        self.session.as_ref().map(|s| &self.devices[s.device].identity)
    }

    /// Try every registered key. Returns the index of the device whose key
    /// authenticated the envelope.
    pub fn open(&self, envelope: &[u8]) -> Result<(usize, HandshakeMessage), RejectReason> {
        let mut malformed = false;
        for (i, reg) in self.devices.iter().enumerate() {
            match aead::open_message(&reg.key, envelope) {
                Ok(msg) => return Ok((i, msg)),
                Err(OpenError::Malformed(_)) => malformed = true,
                Err(OpenError::Integrity) => {}
            }
        }
        Err(if malformed { RejectReason::MalformedMessage } else { RejectReason::IntegrityFailure })
    }

    pub fn device_key(&self, device: usize) -> &SymmetricKey {
        &self.devices[device].key
    }

    pub fn device_by_id(&self, id: &[u8; ID_LEN]) -> Option<usize> {
        self.devices.iter().position(|r| &r.identity.id == id)
    }

    /// Checks common to every request: no session already open, fresh nonce.
    pub(crate) fn admit(&mut self, nonce: Nonce, now: i64) -> Result<(), RejectReason> {
        if let Some(open) = &self.session {
            if now - open.opened_at <= self.session_timeout_us {
                return Err(RejectReason::SessionBusy);
            }
            self.session = None;
        }
        if self.replay_protection && !self.seen.insert(nonce) {
            return Err(RejectReason::NonceReplay);
        }
        Ok(())
    }

    pub(crate) fn pattern_digest(&mut self) -> Digest32 {
        let mut ops = self.ops;
        let d = super::metered(&mut ops, || self.pattern.digest().0);
        self.ops = ops;
        d
    }

    /// Drop the open session without a verdict.
    pub fn abandon(&mut self) {
        self.session = None;
    }
}
