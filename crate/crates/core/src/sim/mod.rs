//! Deterministic discrete-event simulation of the handshakes under attack.
//!
//! Time is virtual (integer microseconds). Every random choice comes from a
//! per-actor ChaCha20 stream derived from the scenario's root seed, so a
//! scenario and seed fix the trace byte for byte.

mod engine;
pub mod montecarlo;
pub mod trace;
pub mod world;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::commitments::Scheme;
use crate::edr::EventRecord;
use crate::group::GroupParams;
use crate::hash;
use crate::protocol::keyfob::{GaitCheck, DEFAULT_GAIT_WINDOW_US};
use crate::protocol::vehicle::DEFAULT_PROCESSING_US;
use crate::protocol::{OpCounts, RejectReason, TimingPolicy, Verdict};

pub use engine::run_scenario;
pub use trace::{Trace, TraceEvent, TraceKind};
pub use world::{Point, Trajectory, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Handshake {
    Keyfob,
    Basic,
}

impl Handshake {
    pub fn as_str(self) -> &'static str {
        match self {
            Handshake::Keyfob => "keyfob",
            Handshake::Basic => "basic",
        }
    }
}

impl FromStr for Handshake {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "keyfob" => Ok(Handshake::Keyfob),
            "basic" => Ok(Handshake::Basic),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryMode {
    None,
    BruteForceRelay,
    PureRelay,
    DistanceFraudEarly,
    MafiaFraud,
    TerroristFraud,
    EdrGuess,
}

impl AdversaryMode {
    pub const ALL: [AdversaryMode; 7] = [
        AdversaryMode::None,
        AdversaryMode::BruteForceRelay,
        AdversaryMode::PureRelay,
        AdversaryMode::DistanceFraudEarly,
        AdversaryMode::MafiaFraud,
        AdversaryMode::TerroristFraud,
        AdversaryMode::EdrGuess,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AdversaryMode::None => "none",
            AdversaryMode::BruteForceRelay => "brute_force_relay",
            AdversaryMode::PureRelay => "pure_relay",
            AdversaryMode::DistanceFraudEarly => "distance_fraud_early",
            AdversaryMode::MafiaFraud => "mafia_fraud",
            AdversaryMode::TerroristFraud => "terrorist_fraud",
            AdversaryMode::EdrGuess => "edr_guess",
        }
    }
}

impl FromStr for AdversaryMode {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        AdversaryMode::ALL.into_iter().find(|m| m.as_str() == s).ok_or(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Consistency {
    Consistent,
    Inconsistent,
}

impl FromStr for Consistency {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "consistent" => Ok(Consistency::Consistent),
            "inconsistent" => Ok(Consistency::Inconsistent),
            _ => Err(()),
        }
    }
}

/// What an injecting adversary puts on the air.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Forgery {
    /// Uniformly random bytes shaped like an envelope.
    RandomCiphertext,
    /// Ideal-cipher idealization: a body with a random response delivered as
    /// if it had decrypted. The adversary is granted the session nonce so
    /// only the response itself is guessed.
    RandomBody,
    /// The authentic response envelope from an earlier session.
    Replay,
}

impl FromStr for Forgery {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "random_ciphertext" => Ok(Forgery::RandomCiphertext),
            "random_body" => Ok(Forgery::RandomBody),
            "replay" => Ok(Forgery::Replay),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdversaryConfig {
    pub mode: AdversaryMode,
    /// Added delay per relayed hop.
    pub t_relay_us: i64,
    pub consistency: Consistency,
    /// Explicit per-hop added delays; overrides `t_relay_us`/`consistency`.
    pub schedule_us: Option<Vec<i64>>,
    /// Relay position; for mafia fraud this is the leech next to the vehicle.
    pub pos: Point,
    /// Mafia fraud: the ghost next to the keyfob. Defaults to the holder's start.
    pub ghost_pos: Option<Point>,
    pub forgery: Forgery,
    /// Mafia fraud: after the relayed session, replay its request to open a
    /// second session and bridge the new challenge to the keyfob.
    pub splice: bool,
    /// Terrorist fraud: the colluder walks with a pedometer (otherwise it
    /// reports a canned gait and answers at once).
    pub pedometer: bool,
    /// Terrorist fraud: the colluder's EDR copy misses the latest event.
    pub stale_digest: bool,
    /// Speed claimed by a canned gait, m/s.
    pub canned_speed: f64,
    /// EDR guess: number of quantization levels per guessed value.
    pub guess_levels: u64,
}

impl Default for AdversaryConfig {
    fn default() -> Self {
        AdversaryConfig {
            mode: AdversaryMode::None,
            t_relay_us: 0,
            consistency: Consistency::Consistent,
            schedule_us: None,
            pos: Point::new(5.0, 0.0),
            ghost_pos: None,
            forgery: Forgery::RandomCiphertext,
            splice: false,
            pedometer: true,
            stale_digest: false,
            canned_speed: 1.5,
            guess_levels: 8,
        }
    }
}

impl AdversaryConfig {
    /// Added delay on hop `hop` (0 = request, 1 = challenge, 2 = response, ...).
    pub fn hop_delay_us(&self, hop: u32) -> i64 {
        if let Some(s) = &self.schedule_us {
            return if s.is_empty() { 0 } else { s[hop as usize % s.len()] };
        }
        match self.consistency {
            Consistency::Consistent => self.t_relay_us,
            Consistency::Inconsistent if hop % 2 == 1 => 2 * self.t_relay_us,
            Consistency::Inconsistent => 0,
        }
    }
}

/// Expected outcome recorded in a scenario file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Expectation {
    Accept,
    Reject(Option<RejectReason>),
    /// At least one re-initialization, whatever the final verdict.
    Reinit,
}

impl Expectation {
    pub fn matches(&self, outcome: &Outcome) -> bool {
        match self {
            Expectation::Accept => outcome.verdict.is_accept(),
            Expectation::Reject(None) => !outcome.verdict.is_accept(),
            Expectation::Reject(Some(r)) => outcome.verdict == Verdict::Reject(*r),
            Expectation::Reinit => outcome.reinits > 0,
        }
    }
}

impl FromStr for Expectation {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "accept" => Ok(Expectation::Accept),
            "reject" => Ok(Expectation::Reject(None)),
            "reinit" => Ok(Expectation::Reinit),
            _ => {
                let inner = s.strip_prefix("reject(").and_then(|r| r.strip_suffix(')')).ok_or(())?;
                RejectReason::parse(inner).map(|r| Expectation::Reject(Some(r))).ok_or(())
            }
        }
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Accept => f.write_str("accept"),
            Expectation::Reject(None) => f.write_str("reject"),
            Expectation::Reject(Some(r)) => write!(f, "reject({r})"),
            Expectation::Reinit => f.write_str("reinit"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub group: GroupParams,
    pub handshake: Handshake,
    pub backend: Option<Scheme>,
    pub timing: TimingPolicy,
    pub processing_us: i64,
    pub gait_window_us: i64,
    /// Keyfob clock minus vehicle clock.
    pub clock_drift_us: i64,
    /// Upper bound of uniform per-hop jitter.
    pub jitter_us: i64,
    pub world: World,
    pub adversary: AdversaryConfig,
    pub drive_script: Vec<EventRecord>,
    /// The keyfob's EDR copy misses this many of the latest events.
    pub stale_events: usize,
    pub sessions: u32,
    pub session_start_us: i64,
    pub session_gap_us: i64,
    pub replay_protection: bool,
    pub reinit_budget: u32,
    pub trials: u64,
    pub seed: u64,
    pub expect: Option<Expectation>,
    /// Response width for the advantage game.
    pub response_bits: u32,
}

impl Scenario {
    /// Honest keyfob scenario: vehicle at the origin, holder standing 100 m away.
    pub fn new(id: impl Into<String>) -> Self {
        Scenario {
            id: id.into(),
            group: GroupParams::demo(),
            handshake: Handshake::Keyfob,
            backend: None,
            timing: TimingPolicy::default(),
            processing_us: DEFAULT_PROCESSING_US,
            gait_window_us: DEFAULT_GAIT_WINDOW_US,
            clock_drift_us: 0,
            jitter_us: 0,
            world: World {
                vehicle_pos: Point::new(0.0, 0.0),
                holder: Trajectory::stationary(Point::new(100.0, 0.0)),
                signal_speed: world::DEFAULT_SIGNAL_SPEED,
            },
            adversary: AdversaryConfig::default(),
            drive_script: default_drive_script(),
            stale_events: 0,
            sessions: 1,
            session_start_us: 10_000_000,
            session_gap_us: 20_000_000,
            replay_protection: true,
            reinit_budget: 1,
            trials: 1,
            seed: 1,
            expect: None,
            response_bits: 256,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |key: &str, msg: &str| Err(ScenarioError::Invalid { key: key.into(), message: msg.into() });
        let t = &self.timing;
        if t.t_travel_max_us < 0 {
            return bad("timing.t_travel_max", "must be >= 0");
        }
        if t.t_travel_min_us < 0 || t.t_travel_min_us > t.t_travel_max_us {
            return bad("timing.t_travel_min", "must be within [0, t_travel_max]");
        }
        if t.t_epsilon_us < 0 {
            return bad("timing.t_epsilon", "must be >= 0");
        }
        if !(t.vel_epsilon >= 0.0) {
            return bad("timing.vel_epsilon", "must be >= 0");
        }
        if t.clock_drift_bound_us < 0 {
            return bad("timing.drift", "must be >= 0");
        }
        if self.processing_us < 0 {
            return bad("timing.processing", "must be >= 0");
        }
        if self.gait_window_us < 0 {
            return bad("timing.gait_window", "must be >= 0");
        }
        if self.jitter_us < 0 {
            return bad("timing.jitter", "must be >= 0");
        }
        if !(self.world.signal_speed > 0.0) {
            return bad("world.signal_speed", "must be > 0");
        }
        let a = &self.adversary;
        if a.t_relay_us < 0 {
            return bad("adversary.t_relay", "must be >= 0");
        }
        if let Some(s) = &a.schedule_us {
            if s.len() < 3 {
                return bad("adversary.schedule", "needs a delay for each of the three hops");
            }
            if s.iter().any(|d| *d < 0) {
                return bad("adversary.schedule", "delays must be >= 0");
            }
        }
        if a.mode == AdversaryMode::EdrGuess && a.guess_levels == 0 {
            return bad("adversary.levels", "must be >= 1");
        }
        if self.backend == Some(Scheme::Pedersen) && !self.group.has_h() {
            return bad("group.h", "pedersen backend needs a second generator");
        }
        if self.sessions == 0 {
            return bad("sessions", "must be >= 1");
        }
        if self.stale_events > self.drive_script.len() {
            return bad("keyfob.stale_events", "exceeds the drive script length");
        }
        if self.drive_script.windows(2).any(|w| w[1].t_us < w[0].t_us) {
            return bad("drive_script", "event times must be non-decreasing");
        }
        if self.response_bits == 0 || self.response_bits > 256 {
            return bad("response_bits", "must be within 1..=256");
        }
        Ok(())
    }

    /// Root seed for trial `i`; trial 0 uses the scenario seed itself.
    pub fn trial_seed(&self, i: u64) -> u64 {
        if i == 0 {
            return self.seed;
        }
        let d = hash::derive_seed(&[b"perimeter/trial", &self.seed.to_be_bytes(), &i.to_be_bytes()]);
        u64::from_be_bytes(d[..8].try_into().expect("8 bytes"))
    }
}

fn default_drive_script() -> Vec<EventRecord> {
    use crate::edr::EventKind::*;
    vec![
        EventRecord::new(0, Velocity, 13.9),
        EventRecord::new(1_500_000, Deceleration, 2.4),
        EventRecord::new(3_000_000, SteeringAngle, -12.0),
        EventRecord::new(4_000_000, Velocity, 0.0),
        EventRecord::new(5_000_000, SeatPosition, 3.0),
    ]
}

/// Per-actor random stream for a root seed.
pub fn actor_rng(seed: u64, actor: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(hash::derive_seed(&[b"perimeter/actor", &seed.to_be_bytes(), actor.as_bytes()]))
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

/// Final verdict of a session plus how many re-initializations preceded it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub verdict: Verdict,
    pub reinits: u32,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for _ in 0..self.reinits {
            f.write_str("reinit-then-")?;
        }
        write!(f, "{}", self.verdict)
    }
}

/// One message crossing.
#[derive(Clone, Debug, PartialEq)]
pub struct HopRecord {
    pub session: usize,
    pub hop: u32,
    pub from: String,
    pub to: String,
    pub sent_us: i64,
    pub arrived_us: i64,
    /// Delay beyond the direct sender-to-receiver propagation.
    pub added_us: i64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SessionMetrics {
    /// Propagation measured by the receiving party from the sender's
    /// timestamps, in hop order (p1, p2, p3, then re-initialization hops).
    pub measured_us: Vec<(u32, i64)>,
    pub gait_checks: Vec<GaitCheck>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionRecord {
    pub index: usize,
    pub outcome: Option<Outcome>,
    pub metrics: SessionMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub trace: Trace,
    /// Outcome of the last session.
    pub outcome: Outcome,
    pub sessions: Vec<SessionRecord>,
    pub hops: Vec<HopRecord>,
    /// Cost counters per party label.
    pub ops: Vec<(String, OpCounts)>,
    pub transcript: Option<String>,
}

impl RunResult {
    pub fn last_session(&self) -> &SessionRecord {
        self.sessions.last().expect("at least one session")
    }

    /// First gait check of the last session.
    pub fn gait(&self) -> Option<&GaitCheck> {
        self.last_session().metrics.gait_checks.first()
    }

    pub fn added_delays_us(&self, session: usize) -> Vec<i64> {
        self.hops.iter().filter(|h| h.session == session).map(|h| h.added_us).collect()
    }

    pub fn ops_of(&self, label: &str) -> OpCounts {
        self.ops.iter().find(|(l, _)| l == label).map(|(_, o)| *o).unwrap_or_default()
    }
}
