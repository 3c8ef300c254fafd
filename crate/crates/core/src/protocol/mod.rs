//! The two three-message handshakes.
//!
//! * [`basic`]: peripheral device to vehicle. The device proves it shares the
//!   vehicle's EDR digest, then answers the vehicle's challenge with `H(C_v)`.
//! * [`keyfob`]: keyfob to vehicle. Adds sender timestamps so both ends can
//!   bound per-hop propagation, a keyed response `PRF_K(C_v || nonce)`, and a
//!   gait observation the vehicle cross-checks against its own timing.
//!
//! Every message travels inside an [`aead`] envelope under the pairing key.
//! Either handshake can carry a Schnorr or Pedersen exchange ([`backend`]) in
//! the same three messages.

pub mod aead;
pub mod backend;
pub mod basic;
pub mod keyfob;
pub mod vehicle;
pub mod wire;

use std::collections::HashSet;
use std::fmt;
use std::ops::AddAssign;

use rand::RngCore;

use crate::hash::{self, OpSnapshot};

pub const KEY_LEN: usize = 16;
pub const NONCE_LEN: usize = 16;
pub const ID_LEN: usize = 16;
pub const CHALLENGE_LEN: usize = 16;

/// Pairing key `K`, installed at setup.
#[derive(Clone, PartialEq, Eq)]
pub struct SymmetricKey(pub [u8; KEY_LEN]);

impl SymmetricKey {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut k = [0u8; KEY_LEN];
        rng.fill_bytes(&mut k);
        SymmetricKey(k)
    }
}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Vehicle,
    Peripheral,
    Keyfob,
    User,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Vehicle => "vehicle",
            Role::Peripheral => "peripheral",
            Role::Keyfob => "keyfob",
            Role::User => "user",
        }
    }
}

/// A registered party. `id` is derived from `label`, which is what traces print.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Identity {
    pub role: Role,
    pub id: [u8; ID_LEN],
    pub label: String,
}

impl Identity {
    pub fn new(role: Role, label: impl Into<String>) -> Self {
        let label = label.into();
        let seed = hash::derive_seed(&[b"perimeter/identity", role.as_str().as_bytes(), label.as_bytes()]);
        let mut id = [0u8; ID_LEN];
        id.copy_from_slice(&seed[..ID_LEN]);
        Identity { role, id, label }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Nonce(pub [u8; NONCE_LEN]);

impl Nonce {
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut n = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut n);
        Nonce(n)
    }
}

impl fmt::Debug for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonce({})", hex::encode(&self.0[..6]))
    }
}

impl fmt::Display for Nonce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// Nonces an initiator has already used; guarantees no reuse within a scenario.
#[derive(Clone, Debug, Default)]
pub struct NonceLedger {
    used: HashSet<Nonce>,
}

impl NonceLedger {
    pub fn fresh<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Nonce {
        loop {
            let n = Nonce::random(rng);
            if self.used.insert(n) {
                return n;
            }
        }
    }

    /// Record `nonce`, returning false if it was already seen.
    pub fn insert(&mut self, nonce: Nonce) -> bool {
        self.used.insert(nonce)
    }

    pub fn contains(&self, nonce: &Nonce) -> bool {
        self.used.contains(nonce)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RejectReason {
    DigestMismatch,
    UnknownIdentity,
    NonceReplay,
    NonceMismatch,
    VehicleIdMismatch,
    BadResponse,
    PropagationExcess,
    TimestampImplausible,
    GaitMismatch,
    IntegrityFailure,
    CommitmentFailed,
    MalformedMessage,
    UnexpectedMessage,
    SessionBusy,
    Timeout,
}

impl RejectReason {
    pub const ALL: [RejectReason; 15] = [
        RejectReason::DigestMismatch,
        RejectReason::UnknownIdentity,
        RejectReason::NonceReplay,
        RejectReason::NonceMismatch,
        RejectReason::VehicleIdMismatch,
        RejectReason::BadResponse,
        RejectReason::PropagationExcess,
        RejectReason::TimestampImplausible,
        RejectReason::GaitMismatch,
        RejectReason::IntegrityFailure,
        RejectReason::CommitmentFailed,
        RejectReason::MalformedMessage,
        RejectReason::UnexpectedMessage,
        RejectReason::SessionBusy,
        RejectReason::Timeout,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::DigestMismatch => "digest-mismatch",
            RejectReason::UnknownIdentity => "unknown-identity",
            RejectReason::NonceReplay => "nonce-replay",
            RejectReason::NonceMismatch => "nonce-mismatch",
            RejectReason::VehicleIdMismatch => "vehicle-id-mismatch",
            RejectReason::BadResponse => "bad-response",
            RejectReason::PropagationExcess => "propagation-excess",
            RejectReason::TimestampImplausible => "timestamp-implausible",
            RejectReason::GaitMismatch => "gait-mismatch",
            RejectReason::IntegrityFailure => "integrity-failure",
            RejectReason::CommitmentFailed => "commitment-failed",
            RejectReason::MalformedMessage => "malformed-message",
            RejectReason::UnexpectedMessage => "unexpected-message",
            RejectReason::SessionBusy => "session-busy",
            RejectReason::Timeout => "timeout",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        RejectReason::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accept => f.write_str("accept"),
            Verdict::Reject(r) => write!(f, "reject({r})"),
        }
    }
}

/// Thresholds the vehicle and keyfob apply to timestamps and gait.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingPolicy {
    /// Largest honest one-hop propagation.
    pub t_travel_max_us: i64,
    /// Smallest physically possible one-hop propagation; guards early responses.
    pub t_travel_min_us: i64,
    pub t_epsilon_us: i64,
    /// Gait comparison tolerance in m/s.
    pub vel_epsilon: f64,
    pub clock_drift_bound_us: i64,
    pub propagation_check: bool,
    pub gait_check: bool,
}

impl Default for TimingPolicy {
    fn default() -> Self {
        TimingPolicy {
            t_travel_max_us: 5_000,
            t_travel_min_us: 0,
            t_epsilon_us: 1_000,
            vel_epsilon: 0.1,
            clock_drift_bound_us: 0,
            propagation_check: true,
            gait_check: true,
        }
    }
}

impl TimingPolicy {
    /// Per-hop bound on `receive - send` timestamps.
    pub fn check_hop(&self, propagation_us: i64) -> Result<(), RejectReason> {
        if propagation_us < -self.clock_drift_bound_us {
            return Err(RejectReason::TimestampImplausible);
        }
        if self.propagation_check
            && propagation_us > self.t_travel_max_us + self.t_epsilon_us + self.clock_drift_bound_us
        {
            return Err(RejectReason::PropagationExcess);
        }
        Ok(())
    }
}

/// Exponentiations and hash digests charged to one party.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub exponentiations: u64,
    pub digests: u64,
}

impl AddAssign<OpSnapshot> for OpCounts {
    fn add_assign(&mut self, used: OpSnapshot) {
        self.exponentiations += used.exponentiations;
        self.digests += used.digests;
    }
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, other: OpCounts) {
        self.exponentiations += other.exponentiations;
        self.digests += other.digests;
    }
}

impl fmt::Display for OpCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp={} hash={}", self.exponentiations, self.digests)
    }
}

/// Run `f`, charging every counted operation it performs to `counts`.
pub(crate) fn metered<T>(counts: &mut OpCounts, f: impl FnOnce() -> T) -> T {
    let start = OpSnapshot::now();
    let out = f();
    *counts += start.elapsed();
    out
}

/// Data both ends agree on for a completed run: nonce, challenge and
/// response digest. Claim events carry it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SessionData {
    pub nonce: Nonce,
    pub challenge: [u8; CHALLENGE_LEN],
    pub response: [u8; 32],
}

impl fmt::Display for SessionData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nonce={} challenge={} resp={}",
            self.nonce,
            hex::encode(self.challenge),
            hex::encode(self.response)
        )
    }
}

pub(crate) fn random_challenge<R: RngCore + ?Sized>(rng: &mut R) -> [u8; CHALLENGE_LEN] {
    let mut c = [0u8; CHALLENGE_LEN];
    rng.fill_bytes(&mut c);
    c
}
