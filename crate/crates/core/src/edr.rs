//! Event data recorder: a rolling log of recent vehicle dynamics and its digest.
//!
//! The digest is the proactive shared secret between the vehicle and the
//! keyfob that was in use during the last drive, so its input encoding must be
//! bit-exact on both sides:
//!
//! ```text
//! count: u64 BE
//! repeat count times:
//!     t_us:  i64 BE  (microseconds)
//!     kind:  u8
//!     value: i64 BE  (fixed point, 3 fractional decimal digits)
//! ```

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::hash::{self, Digest32};

pub const DEFAULT_WINDOW_US: i64 = 30_000_000;
pub const DEFAULT_CAPACITY: usize = 4096;

/// Fixed-point scale for event values.
pub const VALUE_SCALE: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum EventKind {
    Acceleration = 1,
    Deceleration = 2,
    SteeringAngle = 3,
    Velocity = 4,
    SeatPosition = 5,
    Temperature = 6,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::Acceleration,
        EventKind::Deceleration,
        EventKind::SteeringAngle,
        EventKind::Velocity,
        EventKind::SeatPosition,
        EventKind::Temperature,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::Acceleration => "acceleration",
            EventKind::Deceleration => "deceleration",
            EventKind::SteeringAngle => "steering-angle",
            EventKind::Velocity => "velocity",
            EventKind::SeatPosition => "seat-position",
            EventKind::Temperature => "temperature",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = EdrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| EdrError::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EdrError {
    #[error("event at t={event_us}us precedes last recorded t={last_us}us")]
    TimeRegression { event_us: i64, last_us: i64 },
    #[error("unknown event kind `{0}`")]
    UnknownKind(String),
    #[error("guess space counts must all be at least 1")]
    EmptyGuessSpace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventRecord {
    pub t_us: i64,
    pub kind: EventKind,
    /// Units per kind (m/s^2, degrees, m/s, index, degC), scaled by [`VALUE_SCALE`].
    pub value_milli: i64,
}

impl EventRecord {
    pub fn new(t_us: i64, kind: EventKind, value: f64) -> Self {
        EventRecord { t_us, kind, value_milli: quantize(value) }
    }

    pub fn value(&self) -> f64 {
        self.value_milli as f64 / VALUE_SCALE
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.t_us.to_be_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&self.value_milli.to_be_bytes());
    }
}

pub fn quantize(value: f64) -> i64 {
    (value * VALUE_SCALE).round() as i64
}

/// 256-bit digest of a mobility pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdrDigest(pub Digest32);

impl fmt::Debug for EdrDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EdrDigest({})", hex::encode(&self.0[..8]))
    }
}

impl fmt::Display for EdrDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// Bounded, time-ordered log of the most recent vehicle dynamics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MobilityPattern {
    window_us: i64,
    capacity: usize,
    records: VecDeque<EventRecord>,
}

impl Default for MobilityPattern {
    fn default() -> Self {
        MobilityPattern::new(DEFAULT_WINDOW_US, DEFAULT_CAPACITY)
    }
}

impl MobilityPattern {
    pub fn new(window_us: i64, capacity: usize) -> Self {
        MobilityPattern { window_us, capacity: capacity.max(1), records: VecDeque::new() }
    }

    pub fn window_us(&self) -> i64 {
        self.window_us
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &EventRecord> {
        self.records.iter()
    }

    pub fn latest_us(&self) -> Option<i64> {
        self.records.back().map(|r| r.t_us)
    }

    /// Append `event` and evict everything older than the window or beyond capacity.
    pub fn record_event(&mut self, event: EventRecord) -> Result<(), EdrError> {
        if let Some(last_us) = self.latest_us() {
            if event.t_us < last_us {
                return Err(EdrError::TimeRegression { event_us: event.t_us, last_us });
            }
        }
        self.records.push_back(event);
        let horizon = event.t_us.saturating_sub(self.window_us);
        while self.records.front().is_some_and(|r| r.t_us < horizon) {
            self.records.pop_front();
        }
        while self.records.len() > self.capacity {
            self.records.pop_front();
        }
        Ok(())
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.records.len() * 17);
        out.extend_from_slice(&(self.records.len() as u64).to_be_bytes());
        for record in &self.records {
            record.encode_into(&mut out);
        }
        out
    }

    pub fn digest(&self) -> EdrDigest {
        EdrDigest(hash::digest(&[&self.canonical_bytes()]))
    }

    /// Copy handed to the paired device that is in use during the drive.
    pub fn replicate(&self) -> MobilityPattern {
        self.clone()
    }
}

/// Size of the brute-force space over `slots` records of `kinds` kinds and
/// `levels` quantization levels: `(kinds * levels)^slots`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GuessSpace {
    Exact(u64),
    ExceedsU64,
}

impl fmt::Display for GuessSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuessSpace::Exact(n) => n.fmt(f),
            GuessSpace::ExceedsU64 => f.write_str("exceeds 2^64"),
        }
    }
}

pub fn guess_space_size(kinds: u64, levels: u64, slots: u32) -> Result<GuessSpace, EdrError> {
    if kinds == 0 || levels == 0 || slots == 0 {
        return Err(EdrError::EmptyGuessSpace);
    }
    Ok(kinds
        .checked_mul(levels)
        .and_then(|per_slot| per_slot.checked_pow(slots))
        .map_or(GuessSpace::ExceedsU64, GuessSpace::Exact))
}
