//! Event loop: actors, channel routing, and the adversaries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;

use super::trace::{TraceEvent, TraceKind};
use super::world::PathPedometer;
use super::{
    actor_rng, AdversaryMode, Forgery, Handshake, HopRecord, Outcome, Point, RunResult, Scenario,
    ScenarioError, SessionMetrics, SessionRecord, Trace,
};
use crate::edr::{EventRecord, MobilityPattern, DEFAULT_CAPACITY, DEFAULT_WINDOW_US};
use crate::protocol::aead::{self, open_message, seal_message};
use crate::protocol::backend::BackendProver;
use crate::protocol::basic::PeripheralDevice;
use crate::protocol::keyfob::{GaitObservation, Keyfob, KeyfobOutcome, Pedometer, Stationary};
use crate::protocol::vehicle::Vehicle;
use crate::protocol::wire::{BasicResponse, HandshakeMessage, KeyfobResponse};
use crate::protocol::{Identity, Nonce, RejectReason, Role, SymmetricKey, Verdict};

const VEHICLE: &str = "vehicle";
const MAX_EVENTS: usize = 100_000;
const SPLICE_DELAY_US: i64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Node {
    Vehicle,
    Prover,
}

#[derive(Debug)]
enum Ev {
    Initiate { session: usize },
    Transmit { from: Node, env: Vec<u8>, hop: u32, session: usize, kind: &'static str, nonce: Nonce },
    Arrive { to: Node, from: String, env: Vec<u8>, hop: u32, session: usize, kind: &'static str },
    /// Forged body accepted by the idealized cipher.
    InjectBody { msg: HandshakeMessage, session: usize },
    Splice,
}

struct Pending {
    t: i64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        (self.t, self.seq) == (o.t, o.seq)
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Pending {
    // min-heap on (t, seq)
    fn cmp(&self, o: &Self) -> Ordering {
        (o.t, o.seq).cmp(&(self.t, self.seq))
    }
}

enum Device {
    Keyfob(Keyfob),
    Peripheral(PeripheralDevice),
}

struct Prover {
    device: Device,
    label: String,
    /// Honest devices emit claims; colluders do not.
    honest: bool,
    fixed_pos: Option<Point>,
    drift_us: i64,
    seq: u32,
}

impl Prover {
    fn key(&self) -> &SymmetricKey {
        match &self.device {
            Device::Keyfob(k) => k.key(),
            Device::Peripheral(p) => p.key(),
        }
    }

    fn ops(&self) -> crate::protocol::OpCounts {
        match &self.device {
            Device::Keyfob(k) => k.ops,
            Device::Peripheral(p) => p.ops,
        }
    }
}

struct Engine<'a> {
    sc: &'a Scenario,
    vehicle: Vehicle,
    prover: Prover,
    rng_v: ChaCha20Rng,
    rng_p: ChaCha20Rng,
    rng_a: ChaCha20Rng,
    rng_c: ChaCha20Rng,
    queue: BinaryHeap<Pending>,
    seq: u64,
    events: Vec<TraceEvent>,
    sessions: Vec<SessionRecord>,
    nonces: Vec<Option<Nonce>>,
    reinits: Vec<u32>,
    hops: Vec<HopRecord>,
    v_seq: u32,
    v_open: Option<usize>,
    captured_requests: Vec<(usize, Vec<u8>)>,
    captured_responses: Vec<(usize, Vec<u8>)>,
    spliced: bool,
    transcript: Option<String>,
    attacked: usize,
}

/// Run one scenario with its own seed.
pub fn run_scenario(sc: &Scenario) -> Result<RunResult, ScenarioError> {
    sc.validate()?;
    let mut engine = Engine::new(sc)?;
    engine.run();
    Ok(engine.finish())
}

fn build_pattern(events: &[EventRecord]) -> MobilityPattern {
    let mut p = MobilityPattern::new(DEFAULT_WINDOW_US, DEFAULT_CAPACITY);
    for e in events {
        p.record_event(*e).expect("validated non-decreasing");
    }
    p
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario) -> Result<Self, ScenarioError> {
        let seed = sc.seed;
        let mut setup = actor_rng(seed, "setup");
        let key = SymmetricKey::random(&mut setup);
        let backend = match sc.backend {
            Some(scheme) => Some(BackendProver::generate(scheme, sc.group.clone(), &mut setup).map_err(|e| {
                ScenarioError::Invalid { key: "group".into(), message: e.to_string() }
            })?),
            None => None,
        };
        let full = &sc.drive_script[..];
        let synced = &full[..full.len() - sc.stale_events];
        let mut vehicle = Vehicle::new(VEHICLE, build_pattern(full), sc.timing);
        vehicle.processing_us = sc.processing_us;
        vehicle.replay_protection = sc.replay_protection;
        vehicle.reinit_budget = sc.reinit_budget;

        let mode = sc.adversary.mode;
        let honest_label = match sc.handshake {
            Handshake::Keyfob => "keyfob",
            Handshake::Basic => "peripheral",
        };
        let role = match sc.handshake {
            Handshake::Keyfob => Role::Keyfob,
            Handshake::Basic => Role::Peripheral,
        };
        vehicle.register(Identity::new(role, honest_label), key.clone(), backend.as_ref().map(|b| b.verifier()));

        let colluding = matches!(mode, AdversaryMode::TerroristFraud | AdversaryMode::EdrGuess);
        let pattern = match mode {
            AdversaryMode::TerroristFraud if sc.adversary.stale_digest => {
                build_pattern(&synced[..synced.len().saturating_sub(1)])
            }
            AdversaryMode::TerroristFraud => build_pattern(full),
            AdversaryMode::EdrGuess => {
                let mut guess = actor_rng(seed, "adversary-guess");
                let levels = sc.adversary.guess_levels;
                let guessed: Vec<EventRecord> = full
                    .iter()
                    .map(|e| EventRecord::new(e.t_us, e.kind, guess.random_range(0..levels) as f64))
                    .collect();
                build_pattern(&guessed)
            }
            _ => build_pattern(synced),
        };
        let device = match sc.handshake {
            Handshake::Keyfob => {
                let mut kf = Keyfob::new(honest_label, &vehicle.identity, key, pattern, sc.timing, backend);
                kf.gait_window_us = sc.gait_window_us;
                kf.max_challenges = sc.reinit_budget + 1;
                if mode == AdversaryMode::TerroristFraud && !sc.adversary.pedometer {
                    let w = sc.gait_window_us.max(1);
                    kf.gait_override = Some(GaitObservation::measure(sc.adversary.canned_speed * w as f64 / 1e6, w));
                }
                Device::Keyfob(kf)
            }
            Handshake::Basic => {
                Device::Peripheral(PeripheralDevice::new(honest_label, &vehicle.identity, key, pattern, backend))
            }
        };
        let prover = Prover {
            device,
            label: if colluding { "colluder".into() } else { honest_label.into() },
            honest: !colluding,
            fixed_pos: colluding.then_some(sc.adversary.pos),
            drift_us: if colluding { 0 } else { sc.clock_drift_us },
            seq: 0,
        };

        let mut sessions = sc.sessions as usize;
        if mode == AdversaryMode::DistanceFraudEarly && sc.adversary.forgery == Forgery::Replay {
            sessions = sessions.max(2);
        }
        let mut engine = Engine {
            sc,
            vehicle,
            rng_v: actor_rng(seed, VEHICLE),
            rng_p: actor_rng(seed, &prover.label),
            rng_a: actor_rng(seed, "adversary"),
            rng_c: actor_rng(seed, "channel"),
            prover,
            queue: BinaryHeap::new(),
            seq: 0,
            events: Vec::new(),
            sessions: (0..sessions)
                .map(|index| SessionRecord { index, outcome: None, metrics: SessionMetrics::default() })
                .collect(),
            nonces: vec![None; sessions],
            reinits: vec![0; sessions],
            hops: Vec::new(),
            v_seq: 0,
            v_open: None,
            captured_requests: Vec::new(),
            captured_responses: Vec::new(),
            spliced: false,
            transcript: None,
            attacked: sessions - 1,
        };
        for s in 0..sessions {
            engine.schedule(sc.session_start_us + s as i64 * sc.session_gap_us, Ev::Initiate { session: s });
        }
        Ok(engine)
    }

    fn schedule(&mut self, t: i64, ev: Ev) {
        self.seq += 1;
        self.queue.push(Pending { t, seq: self.seq, ev });
    }

    fn log(&mut self, t_us: i64, actor: &str, kind: TraceKind, payload: String) {
        self.events.push(TraceEvent { t_us, actor: actor.to_string(), kind, payload });
    }

    fn adv_label(&self) -> &'static str {
        "adversary"
    }

    fn prover_pos(&self, t: i64) -> Point {
        self.prover.fixed_pos.unwrap_or_else(|| self.sc.world.holder.position(t))
    }

    fn pos(&self, node: Node, t: i64) -> Point {
        match node {
            Node::Vehicle => self.sc.world.vehicle_pos,
            Node::Prover => self.prover_pos(t),
        }
    }

    fn label(&self, node: Node) -> String {
        match node {
            Node::Vehicle => VEHICLE.to_string(),
            Node::Prover => self.prover.label.clone(),
        }
    }

    fn prop(&self, a: Point, b: Point) -> i64 {
        self.sc.world.propagation_us(a, b)
    }

    fn run(&mut self) {
        let mut processed = 0;
        while let Some(Pending { t, ev, .. }) = self.queue.pop() {
            processed += 1;
            if processed > MAX_EVENTS {
                break;
            }
            match ev {
                Ev::Initiate { session } => self.initiate(t, session),
                Ev::Transmit { from, env, hop, session, kind, nonce } => {
                    self.transmit(t, from, env, hop, session, kind, nonce)
                }
                Ev::Arrive { to: Node::Vehicle, from, env, hop, session, kind } => {
                    self.log(t, VEHICLE, TraceKind::Receive, format!("{kind} from={from} hop={hop} len={}", env.len()));
                    match self.vehicle.open(&env) {
                        Ok((dev, msg)) => self.vehicle_handle(t, dev, msg, hop, session),
                        Err(r) => self.vehicle_unopenable(t, r),
                    }
                }
                Ev::Arrive { to: Node::Prover, from, env, hop, session, kind } => {
                    let label = self.prover.label.clone();
                    self.log(t, &label, TraceKind::Receive, format!("{kind} from={from} hop={hop} len={}", env.len()));
                    self.prover_handle(t, env, hop, session);
                }
                Ev::InjectBody { msg, session } => {
                    let hop = 2;
                    self.log(
                        t,
                        VEHICLE,
                        TraceKind::Receive,
                        format!("{} from={} hop={hop} forged-body", msg.kind().as_str(), self.adv_label()),
                    );
                    self.vehicle_handle(t, 0, msg, hop, session);
                }
                Ev::Splice => self.splice(t),
            }
        }
    }

    fn initiate(&mut self, t: i64, session: usize) {
        let local = t + self.prover.drift_us;
        let msg = match &mut self.prover.device {
            Device::Keyfob(kf) => HandshakeMessage::KeyfobRequest(kf.initiate(local, &mut self.rng_p)),
            Device::Peripheral(pd) => HandshakeMessage::BasicRequest(pd.initiate(&mut self.rng_p)),
        };
        self.nonces[session] = Some(msg.nonce());
        let env = self.prover_seal(&msg);
        self.transmit(t, Node::Prover, env, 0, session, msg.kind().as_str(), msg.nonce());
    }

    fn prover_seal(&mut self, msg: &HandshakeMessage) -> Vec<u8> {
        self.prover.seq += 1;
        seal_message(self.prover.key(), msg, self.prover.seq).expect("encodable")
    }

    fn vehicle_seal(&mut self, dev: usize, msg: &HandshakeMessage) -> Vec<u8> {
        self.v_seq += 1;
        seal_message(self.vehicle.device_key(dev), msg, self.v_seq).expect("encodable")
    }

    #[allow(clippy::too_many_arguments)]
    fn transmit(&mut self, t: i64, from: Node, env: Vec<u8>, hop: u32, session: usize, kind: &'static str, nonce: Nonce) {
        let (sender, receiver) = match from {
            Node::Vehicle => (VEHICLE.to_string(), self.prover.label.clone()),
            Node::Prover => (self.prover.label.clone(), VEHICLE.to_string()),
        };
        self.log(
            t,
            &sender,
            TraceKind::Send,
            format!("{kind} to={receiver} nonce={nonce} hop={hop} len={}", env.len()),
        );
        let to = match from {
            Node::Vehicle => Node::Prover,
            Node::Prover => Node::Vehicle,
        };
        if from == Node::Prover {
            if hop == 0 {
                self.captured_requests.push((session, env.clone()));
            } else {
                self.captured_responses.push((session, env.clone()));
            }
        }
        if self.sc.adversary.mode == AdversaryMode::DistanceFraudEarly
            && from == Node::Vehicle
            && hop == 1
            && session == self.attacked
        {
            let adv = self.sc.adversary.pos;
            let v = self.sc.world.vehicle_pos;
            let at = t + 2 * self.prop(v, adv);
            self.forge(at, session, env.len());
        }
        self.route(t, from, to, env, hop, session, kind);
    }

    #[allow(clippy::too_many_arguments)]
    fn route(&mut self, t: i64, from: Node, to: Node, env: Vec<u8>, hop: u32, session: usize, kind: &'static str) {
        let (pf, pt) = (self.pos(from, t), self.pos(to, t));
        let direct = self.prop(pf, pt);
        let jitter = if self.sc.jitter_us > 0 { self.rng_c.random_range(0..=self.sc.jitter_us) } else { 0 };
        let sc = self.sc;
        let adv = &sc.adversary;
        let from_label = self.label(from);
        let to_label = self.label(to);
        let (arrival, sender_seen) = match adv.mode {
            AdversaryMode::PureRelay | AdversaryMode::BruteForceRelay => {
                let added = adv.hop_delay_us(hop);
                let arrival = t + direct + added + jitter;
                if adv.mode == AdversaryMode::BruteForceRelay && to == Node::Vehicle && hop >= 2 {
                    self.log(arrival, self.adv_label(), TraceKind::Relay, format!("drop {kind} from={from_label} hop={hop}"));
                    self.record_hop(session, hop, &from_label, &to_label, t, arrival, added + jitter);
                    self.forge(arrival, session, env.len());
                    return;
                }
                self.log(
                    arrival,
                    self.adv_label(),
                    TraceKind::Relay,
                    format!("{kind} from={from_label} to={to_label} hop={hop} added={added}"),
                );
                (arrival, self.adv_label().to_string())
            }
            AdversaryMode::MafiaFraud => {
                let leech = adv.pos;
                let ghost = adv.ghost_pos.unwrap_or_else(|| self.sc.world.holder.position(self.sc.session_start_us));
                let (first, second, a, b) = match from {
                    Node::Prover => ("ghost", "leech", ghost, leech),
                    Node::Vehicle => ("leech", "ghost", leech, ghost),
                };
                let relay = adv.t_relay_us;
                let t_first = t + self.prop(pf, a) + relay;
                let t_second = t_first + self.prop(a, b) + relay;
                let arrival = t_second + self.prop(b, pt) + jitter;
                self.log(t_first, first, TraceKind::Relay, format!("{kind} from={from_label} to={second} hop={hop}"));
                self.log(t_second, second, TraceKind::Relay, format!("{kind} from={first} to={to_label} hop={hop}"));
                (arrival, second.to_string())
            }
            _ => (t + direct + jitter, from_label.clone()),
        };
        self.record_hop(session, hop, &from_label, &to_label, t, arrival, arrival - t - direct);
        self.schedule(arrival, Ev::Arrive { to, from: sender_seen, env, hop, session, kind });
    }

    #[allow(clippy::too_many_arguments)]
    fn record_hop(&mut self, session: usize, hop: u32, from: &str, to: &str, sent: i64, arrived: i64, added: i64) {
        self.hops.push(HopRecord {
            session,
            hop,
            from: from.to_string(),
            to: to.to_string(),
            sent_us: sent,
            arrived_us: arrived,
            added_us: added,
        });
    }

    /// Put a forged response on the air, arriving at the vehicle at `at`.
    fn forge(&mut self, at: i64, session: usize, len: usize) {
        let adv = self.adv_label();
        let forgery = self.sc.adversary.forgery;
        let replay = self.captured_responses.iter().rev().find(|(s, _)| *s != session).map(|(_, e)| e.clone());
        match (forgery, replay) {
            (Forgery::Replay, Some(env)) => {
                self.log(at, adv, TraceKind::Relay, format!("inject replayed-response source=replay hop=2 len={}", env.len()));
                self.schedule(at, Ev::Arrive { to: Node::Vehicle, from: adv.into(), env, hop: 2, session, kind: "replayed-response" });
            }
            (Forgery::RandomBody, _) => {
                let nonce = self.nonces[session].unwrap_or(Nonce([0; 16]));
                let mut response = [0u8; 32];
                self.rng_a.fill_bytes(&mut response);
                let msg = match self.sc.handshake {
                    Handshake::Keyfob => {
                        let w = self.sc.gait_window_us.max(1);
                        HandshakeMessage::KeyfobResponse(KeyfobResponse {
                            hashed_response: response,
                            gait: GaitObservation::measure(self.sc.adversary.canned_speed * w as f64 / 1e6, w),
                            t_kf_cur: at,
                            nonce,
                            commit_answer: None,
                        })
                    }
                    Handshake::Basic => HandshakeMessage::BasicResponse(BasicResponse { response, nonce, commit_answer: None }),
                };
                self.log(at, adv, TraceKind::Relay, format!("inject {} source=random-body hop=2", msg.kind().as_str()));
                self.schedule(at, Ev::InjectBody { msg, session });
            }
            _ => {
                let mut env = vec![0u8; len.max(aead::IV_LEN + aead::TAG_LEN)];
                self.rng_a.fill_bytes(&mut env);
                self.log(at, adv, TraceKind::Relay, format!("inject forged-response source=random-ciphertext hop=2 len={}", env.len()));
                self.schedule(at, Ev::Arrive { to: Node::Vehicle, from: adv.into(), env, hop: 2, session, kind: "forged-response" });
            }
        }
    }

    fn splice(&mut self, t: i64) {
        let Some((session, env)) = self.captured_requests.first().cloned() else { return };
        let leech = self.sc.adversary.pos;
        let at = t + self.prop(leech, self.sc.world.vehicle_pos);
        self.log(t, "leech", TraceKind::Relay, format!("replay keyfob-request to={VEHICLE} hop=0 len={}", env.len()));
        self.schedule(at, Ev::Arrive { to: Node::Vehicle, from: "leech".into(), env, hop: 0, session, kind: "keyfob-request" });
    }

    fn verdict(&mut self, t: i64, actor: &str, session: usize, verdict: Verdict) {
        let nonce = self.nonces[session].map(|n| n.to_string()).unwrap_or_else(|| "-".into());
        self.log(t, actor, TraceKind::Verdict, format!("{verdict} nonce={nonce} session={session}"));
        let rec = &mut self.sessions[session];
        if rec.outcome.is_none() {
            rec.outcome = Some(Outcome { verdict, reinits: self.reinits[session] });
        }
    }

    fn vehicle_unopenable(&mut self, t: i64, reason: RejectReason) {
        match self.v_open.take() {
            Some(session) => {
                self.vehicle.abandon();
                self.verdict(t, VEHICLE, session, Verdict::Reject(reason));
            }
            None => self.log(t, VEHICLE, TraceKind::Verdict, format!("drop({reason})")),
        }
    }

    fn vehicle_handle(&mut self, t: i64, dev: usize, msg: HandshakeMessage, hop: u32, session: usize) {
        let peer = self.vehicle.registrations()[dev].identity.label.clone();
        match msg {
            HandshakeMessage::KeyfobRequest(req) => {
                self.sessions[session].metrics.measured_us.push((hop, t - req.t_kf_send));
                match self.vehicle.on_keyfob_request(dev, &req, t, &mut self.rng_v) {
                    Ok(reply) => {
                        self.v_open = Some(session);
                        let msg = HandshakeMessage::KeyfobChallenge(reply.challenge);
                        let env = self.vehicle_seal(dev, &msg);
                        self.schedule(
                            reply.send_at,
                            Ev::Transmit { from: Node::Vehicle, env, hop: hop + 1, session, kind: "keyfob-challenge", nonce: req.nonce },
                        );
                    }
                    Err(r) => self.verdict(t, VEHICLE, session, Verdict::Reject(r)),
                }
            }
            HandshakeMessage::BasicRequest(req) => match self.vehicle.on_basic_request(dev, &req, t, &mut self.rng_v) {
                Ok(ch) => {
                    self.v_open = Some(session);
                    let msg = HandshakeMessage::BasicChallenge(ch);
                    let env = self.vehicle_seal(dev, &msg);
                    self.schedule(
                        t + self.sc.processing_us,
                        Ev::Transmit { from: Node::Vehicle, env, hop: hop + 1, session, kind: "basic-challenge", nonce: req.nonce },
                    );
                }
                Err(r) => self.verdict(t, VEHICLE, session, Verdict::Reject(r)),
            },
            HandshakeMessage::KeyfobResponse(resp) => {
                if !self.vehicle.has_open_session() {
                    self.log(t, VEHICLE, TraceKind::Verdict, format!("drop({})", RejectReason::UnexpectedMessage));
                    return;
                }
                let d = self.vehicle.verify_keyfob(&resp, t, &mut self.rng_v);
                if let Some(g) = d.gait {
                    let m = &mut self.sessions[session].metrics;
                    m.measured_us.push((hop, g.p3_us));
                    m.gait_checks.push(g);
                }
                if let Some(tr) = &d.transcript {
                    self.transcript = Some(tr.to_string());
                    self.log(t, VEHICLE, TraceKind::CommitmentTranscript, tr.to_string());
                }
                match d.outcome {
                    KeyfobOutcome::Accept { data, .. } => {
                        self.v_open = None;
                        self.log(t, VEHICLE, TraceKind::ClaimCommit, format!("peer={peer} {data}"));
                        self.verdict(t, VEHICLE, session, Verdict::Accept);
                        self.after_accept(t);
                    }
                    KeyfobOutcome::Reinit { challenge, send_at } => {
                        self.reinits[session] += 1;
                        self.log(
                            t,
                            VEHICLE,
                            TraceKind::Verdict,
                            format!("reinit({}) nonce={} session={session}", RejectReason::GaitMismatch, challenge.nonce),
                        );
                        let nonce = challenge.nonce;
                        let msg = HandshakeMessage::KeyfobChallenge(challenge);
                        let env = self.vehicle_seal(dev, &msg);
                        self.schedule(
                            send_at,
                            Ev::Transmit { from: Node::Vehicle, env, hop: hop + 1, session, kind: "keyfob-challenge", nonce },
                        );
                    }
                    KeyfobOutcome::Reject(r) => {
                        self.v_open = None;
                        self.verdict(t, VEHICLE, session, Verdict::Reject(r));
                    }
                }
            }
            HandshakeMessage::BasicResponse(resp) => {
                if !self.vehicle.has_open_session() {
                    self.log(t, VEHICLE, TraceKind::Verdict, format!("drop({})", RejectReason::UnexpectedMessage));
                    return;
                }
                let d = self.vehicle.verify_basic(&resp);
                self.v_open = None;
                if let Some(tr) = &d.transcript {
                    self.transcript = Some(tr.to_string());
                    self.log(t, VEHICLE, TraceKind::CommitmentTranscript, tr.to_string());
                }
                if let Some(data) = d.data {
                    self.log(t, VEHICLE, TraceKind::ClaimCommit, format!("peer={peer} {data}"));
                }
                self.verdict(t, VEHICLE, session, d.verdict);
                if d.verdict.is_accept() {
                    self.after_accept(t);
                }
            }
            other => {
                self.log(t, VEHICLE, TraceKind::Verdict, format!("drop({}) kind={}", RejectReason::UnexpectedMessage, other.kind().as_str()));
            }
        }
    }

    fn after_accept(&mut self, t: i64) {
        if self.sc.adversary.mode == AdversaryMode::MafiaFraud && self.sc.adversary.splice && !self.spliced {
            self.spliced = true;
            self.schedule(t + SPLICE_DELAY_US, Ev::Splice);
        }
    }

    fn prover_handle(&mut self, t: i64, env: Vec<u8>, hop: u32, session: usize) {
        let label = self.prover.label.clone();
        let msg = match open_message(self.prover.key(), &env) {
            Ok(m) => m,
            Err(_) => {
                self.verdict(t, &label, session, Verdict::Reject(RejectReason::IntegrityFailure));
                return;
            }
        };
        let local = t + self.prover.drift_us;
        let drift = self.prover.drift_us;
        let path_pedometer = PathPedometer { path: &self.sc.world.holder, drift_us: drift };
        let pedometer: &dyn Pedometer = if self.prover.fixed_pos.is_some() { &Stationary } else { &path_pedometer };
        let reply = match (&mut self.prover.device, msg) {
            (Device::Keyfob(kf), HandshakeMessage::KeyfobChallenge(ch)) => {
                self.sessions[session].metrics.measured_us.push((hop, local - ch.t_v_send));
                kf.on_challenge(&ch, local, pedometer)
                    .map(|r| (HandshakeMessage::KeyfobResponse(r.response), r.data, r.send_at - drift))
            }
            (Device::Peripheral(pd), HandshakeMessage::BasicChallenge(ch)) => {
                pd.respond(&ch).map(|(resp, data)| (HandshakeMessage::BasicResponse(resp), data, t))
            }
            _ => Err(RejectReason::UnexpectedMessage),
        };
        match reply {
            Ok((msg, data, send_at)) => {
                if self.prover.honest {
                    self.log(send_at, &label, TraceKind::ClaimRunning, format!("peer={VEHICLE} {data}"));
                }
                let env = self.prover_seal(&msg);
                let kind = msg.kind().as_str();
                self.schedule(send_at, Ev::Transmit { from: Node::Prover, env, hop: hop + 1, session, kind, nonce: msg.nonce() });
            }
            Err(r) => self.verdict(t, &label, session, Verdict::Reject(r)),
        }
    }

    fn finish(mut self) -> RunResult {
        let end = self.events.iter().map(|e| e.t_us).max().unwrap_or(0);
        for s in 0..self.sessions.len() {
            if self.sessions[s].outcome.is_none() {
                self.verdict(end, VEHICLE, s, Verdict::Reject(RejectReason::Timeout));
            }
        }
        self.events.sort_by_key(|e| e.t_us);
        let outcome = self.sessions.last().and_then(|s| s.outcome).expect("every session decided");
        let ops = vec![(VEHICLE.to_string(), self.vehicle.ops), (self.prover.label.clone(), self.prover.ops())];
        RunResult {
            scenario: self.sc.id.clone(),
            seed: self.sc.seed,
            trace: Trace { events: self.events },
            outcome,
            sessions: self.sessions,
            hops: self.hops,
            ops,
            transcript: self.transcript,
        }
    }
}
