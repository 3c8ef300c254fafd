//! Vehicle to keyfob handshake with timestamps and gait cross-check.
//!
//! ```text
//! kf -> v : [H(ed), t_kf_send, nonce]
//! v -> kf : [H(id_v), C_v, t_v_receive, t_v_send, nonce]
//! kf -> v : [H(PRF_K(C_v || nonce)), gait, t_kf_cur, nonce]
//! ```
//!
//! The keyfob holds its response until the gait window has elapsed since it
//! sent the request, so `gait.duration = t_kf_cur - t_kf_send`. The vehicle
//! rebuilds the same window from its own arrival time minus its processing
//! delay and compares the two velocities.

use rand::RngCore;

use super::backend::BackendProver;
use super::vehicle::{OpenSession, Phase, Vehicle};
use super::wire::{KeyfobChallenge, KeyfobRequest, KeyfobResponse};
use super::{
    metered, random_challenge, Identity, Nonce, NonceLedger, OpCounts, RejectReason, Role,
    SessionData, SymmetricKey, TimingPolicy, CHALLENGE_LEN,
};
use crate::commitments::CommitmentTranscript;
use crate::edr::MobilityPattern;
use crate::hash::{self, Digest32};

pub const DEFAULT_GAIT_WINDOW_US: i64 = 2_000_000;

/// Gait as measured by the keyfob, in micro-units (um, us, um/s).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaitObservation {
    pub displacement_um: i64,
    pub duration_us: i64,
    pub velocity_umps: i64,
}

impl GaitObservation {
    /// Quantize a displacement over a window. `duration_us` must be positive.
    pub fn measure(displacement_m: f64, duration_us: i64) -> Self {
        assert!(duration_us > 0, "gait window must be positive");
        let displacement_um = (displacement_m * 1e6).round() as i64;
        let velocity_umps = (displacement_um as f64 * 1e6 / duration_us as f64).round() as i64;
        GaitObservation { displacement_um, duration_us, velocity_umps }
    }

    pub fn displacement_m(&self) -> f64 {
        self.displacement_um as f64 / 1e6
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_us as f64 / 1e6
    }

    pub fn velocity(&self) -> f64 {
        self.velocity_umps as f64 / 1e6
    }
}

/// Source of the holder's walked distance between two keyfob clock readings.
pub trait Pedometer {
    fn displacement_m(&self, from_us: i64, to_us: i64) -> f64;
}

/// A holder who does not move.
pub struct Stationary;

impl Pedometer for Stationary {
    fn displacement_m(&self, _from_us: i64, _to_us: i64) -> f64 {
        0.0
    }
}

/// Constant walking speed in m/s.
pub struct ConstantSpeed(pub f64);

impl Pedometer for ConstantSpeed {
    fn displacement_m(&self, from_us: i64, to_us: i64) -> f64 {
        self.0 * (to_us - from_us) as f64 / 1e6
    }
}

#[derive(Clone, Debug)]
struct KfSession {
    nonce: Nonce,
    anchor: i64,
    answered: u32,
}

/// Keyfob response plus the local time at which it must be sent.
#[derive(Clone, Debug)]
pub struct KeyfobReply {
    pub response: KeyfobResponse,
    pub data: SessionData,
    pub send_at: i64,
}

#[derive(Clone, Debug)]
pub struct Keyfob {
    pub identity: Identity,
    pub pattern: MobilityPattern,
    pub policy: TimingPolicy,
    pub gait_window_us: i64,
    /// Challenges answered per session: the first plus any re-initializations.
    pub max_challenges: u32,
    /// Report this gait and answer immediately instead of walking the
    /// window. Only a device without a pedometer feed does this.
    pub gait_override: Option<GaitObservation>,
    pub ops: OpCounts,
    key: SymmetricKey,
    vehicle_id: [u8; super::ID_LEN],
    prover: Option<BackendProver>,
    ledger: NonceLedger,
    session: Option<KfSession>,
}

impl Keyfob {
    pub fn new(
        label: impl Into<String>,
        vehicle: &Identity,
        key: SymmetricKey,
        pattern: MobilityPattern,
        policy: TimingPolicy,
        prover: Option<BackendProver>,
    ) -> Self {
        Keyfob {
            identity: Identity::new(Role::Keyfob, label),
            pattern,
            policy,
            gait_window_us: DEFAULT_GAIT_WINDOW_US,
            max_challenges: 2,
            gait_override: None,
            ops: OpCounts::default(),
            key,
            vehicle_id: vehicle.id,
            prover,
            ledger: NonceLedger::default(),
            session: None,
        }
    }

    pub fn key(&self) -> &SymmetricKey {
        &self.key
    }

    pub fn session_nonce(&self) -> Option<Nonce> {
        self.session.as_ref().map(|s| s.nonce)
    }

    /// Step 1. `now` is the keyfob's clock reading.
    pub fn initiate<R: RngCore + ?Sized>(&mut self, now: i64, rng: &mut R) -> KeyfobRequest {
        let nonce = self.ledger.fresh(rng);
        let mut ops = self.ops;
        let (edr_digest, commitment) = metered(&mut ops, || {
            (self.pattern.digest(), self.prover.as_mut().map(|p| p.commit(rng)))
        });
        self.ops = ops;
        self.session = Some(KfSession { nonce, anchor: now, answered: 0 });
        KeyfobRequest { edr_digest, t_kf_send: now, nonce, commitment }
    }

    /// Step 3. `now` is the keyfob's clock reading at reception.
    pub fn on_challenge(
        &mut self,
        ch: &KeyfobChallenge,
        now: i64,
        pedometer: &dyn Pedometer,
    ) -> Result<KeyfobReply, RejectReason> {
        let mut ops = self.ops;
        let out = metered(&mut ops, || self.answer(ch, now, pedometer));
        self.ops = ops;
        if out.is_err() {
            self.session = None;
        }
        out
    }

    fn answer(
        &mut self,
        ch: &KeyfobChallenge,
        now: i64,
        pedometer: &dyn Pedometer,
    ) -> Result<KeyfobReply, RejectReason> {
        if ch.hashed_vehicle_id != hash::digest(&[&self.vehicle_id]) {
            return Err(RejectReason::VehicleIdMismatch);
        }
        let session = self.session.as_ref().ok_or(RejectReason::NonceMismatch)?;
        if session.nonce != ch.nonce {
            return Err(RejectReason::NonceMismatch);
        }
        if session.answered >= self.max_challenges {
            return Err(RejectReason::UnexpectedMessage);
        }
        self.policy.check_hop(now - ch.t_v_send)?;
        let anchor = session.anchor;
        let (t_kf_cur, gait) = match self.gait_override {
            Some(g) => (now, g),
            None => {
                let t = now.max(anchor + self.gait_window_us).max(anchor + 1);
                (t, GaitObservation::measure(pedometer.displacement_m(anchor, t), t - anchor))
            }
        };
        let hashed_response = keyfob_response(&self.key, &ch.challenge, &ch.nonce);
        let commit_answer = match (&ch.commit_challenge, self.prover.as_mut()) {
            (Some(k), Some(p)) => Some(p.answer(k)?),
            (Some(_), None) => return Err(RejectReason::CommitmentFailed),
            (None, _) => None,
        };
        let session = self.session.as_mut().expect("checked above");
        session.answered += 1;
        session.anchor = t_kf_cur;
        let nonce = session.nonce;
        Ok(KeyfobReply {
            response: KeyfobResponse { hashed_response, gait, t_kf_cur, nonce, commit_answer },
            data: SessionData { nonce, challenge: ch.challenge, response: hashed_response },
            send_at: t_kf_cur,
        })
    }
}

/// `H(PRF_K(C_v || nonce))`.
pub fn keyfob_response(key: &SymmetricKey, challenge: &[u8; CHALLENGE_LEN], nonce: &Nonce) -> Digest32 {
    let r = hash::prf(&key.0, &[challenge.as_slice(), nonce.0.as_slice()].concat());
    hash::digest(&[&r])
}

/// Timing and gait figures the vehicle derived from one response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaitCheck {
    pub w_kf_us: i64,
    pub w_v_us: i64,
    pub displacement_m: f64,
    pub vel_kf: f64,
    pub vel_v: f64,
    pub p3_us: i64,
}

impl GaitCheck {
    pub fn delta_vel(&self) -> f64 {
        (self.vel_v - self.vel_kf).abs()
    }

    pub fn mismatch(&self, policy: &TimingPolicy) -> bool {
        self.delta_vel() > policy.vel_epsilon
    }
}

#[derive(Clone, Debug)]
pub enum KeyfobOutcome {
    Accept { data: SessionData, transcript: Option<CommitmentTranscript> },
    /// Gait mismatch with retry budget left; send the new challenge at `send_at`.
    Reinit { challenge: KeyfobChallenge, send_at: i64 },
    Reject(RejectReason),
}

/// What the vehicle decided on one response, with whatever it measured.
#[derive(Clone, Debug)]
pub struct KeyfobDecision {
    pub outcome: KeyfobOutcome,
    pub gait: Option<GaitCheck>,
    pub transcript: Option<CommitmentTranscript>,
}

/// Vehicle reply to a request: the challenge and the local time to send it.
#[derive(Clone, Debug)]
pub struct ChallengeReply {
    pub challenge: KeyfobChallenge,
    pub send_at: i64,
    /// Hop-1 propagation `t_v_receive - t_kf_send`.
    pub p1_us: i64,
}

impl Vehicle {
    /// Step 2. `device` is the registration whose key opened the envelope;
    /// `now` is the vehicle clock at reception.
    pub fn on_keyfob_request<R: RngCore + ?Sized>(
        &mut self,
        device: usize,
        req: &KeyfobRequest,
        now: i64,
        rng: &mut R,
    ) -> Result<ChallengeReply, RejectReason> {
        self.admit(req.nonce, now)?;
        if req.edr_digest.0 != self.pattern_digest() {
            return Err(RejectReason::DigestMismatch);
        }
        let p1_us = now - req.t_kf_send;
        self.policy.check_hop(p1_us)?;
        let commit_challenge = self.devices[device].verifier.as_ref().map(|v| v.challenge(rng));
        let challenge = random_challenge(rng);
        let t_v_send = now + self.processing_us;
        let mut ops = self.ops;
        let hashed_vehicle_id = metered(&mut ops, || self.hashed_id());
        self.ops = ops;
        self.session = Some(OpenSession {
            device,
            nonce: req.nonce,
            challenge,
            opened_at: now,
            offer: req.commitment.clone(),
            commit_challenge: commit_challenge.clone(),
            commitment_checked: false,
            phase: Phase::Keyfob { t_kf_send: req.t_kf_send, anchor: req.t_kf_send, t_v_receive: now, t_v_send, reinits: 0 },
        });
        Ok(ChallengeReply {
            challenge: KeyfobChallenge {
                hashed_vehicle_id,
                challenge,
                t_v_receive: now,
                t_v_send,
                nonce: req.nonce,
                commit_challenge: commit_challenge.map(|k| k.value().clone()),
            },
            send_at: t_v_send,
            p1_us,
        })
    }

    /// Step 4. `now` is the vehicle clock at reception of the response.
    pub fn verify_keyfob<R: RngCore + ?Sized>(
        &mut self,
        resp: &KeyfobResponse,
        now: i64,
        rng: &mut R,
    ) -> KeyfobDecision {
        let mut ops = self.ops;
        let decision = metered(&mut ops, || self.decide_keyfob(resp, now, rng));
        self.ops = ops;
        if !matches!(decision.outcome, KeyfobOutcome::Reinit { .. }) {
            self.session = None;
        }
        decision
    }

    fn decide_keyfob<R: RngCore + ?Sized>(
        &mut self,
        resp: &KeyfobResponse,
        now: i64,
        rng: &mut R,
    ) -> KeyfobDecision {
        let reject = |r| KeyfobDecision { outcome: KeyfobOutcome::Reject(r), gait: None, transcript: None };
        let Some(session) = self.session.as_ref() else {
            return reject(RejectReason::UnexpectedMessage);
        };
        let Phase::Keyfob { t_kf_send, anchor, t_v_receive, t_v_send, reinits } = session.phase else {
            return reject(RejectReason::UnexpectedMessage);
        };
        if resp.nonce != session.nonce {
            return reject(RejectReason::NonceMismatch);
        }
        let key = &self.devices[session.device].key;
        if resp.hashed_response != keyfob_response(key, &session.challenge, &session.nonce) {
            return reject(RejectReason::BadResponse);
        }
        let mut transcript = None;
        if !session.commitment_checked {
            if let Some(verifier) = &self.devices[session.device].verifier {
                let k = session.commit_challenge.as_ref().expect("challenge issued with verifier");
                match verifier.verify(session.offer.as_ref(), k, resp.commit_answer.as_ref()) {
                    Ok(t) => transcript = Some(t),
                    Err(r) => return reject(r),
                }
            }
        }
        let processing = t_v_send - t_v_receive;
        let drift = self.policy.clock_drift_bound_us;
        let p3_us = now - resp.t_kf_cur;
        let earliest = t_kf_send + 2 * self.policy.t_travel_min_us + processing;
        if now < earliest || p3_us < -drift || resp.t_kf_cur - t_v_send < -drift {
            return KeyfobDecision { transcript, ..reject(RejectReason::TimestampImplausible) };
        }
        let w_v_us = now - anchor - processing;
        if w_v_us <= 0 || resp.gait.duration_us <= 0 {
            return KeyfobDecision { transcript, ..reject(RejectReason::TimestampImplausible) };
        }
        let displacement_m = resp.gait.displacement_m();
        let gait = GaitCheck {
            w_kf_us: resp.gait.duration_us,
            w_v_us,
            displacement_m,
            vel_kf: resp.gait.velocity(),
            vel_v: displacement_m / (w_v_us as f64 / 1e6),
            p3_us,
        };
        if let Err(r) = self.policy.check_hop(p3_us) {
            return KeyfobDecision { outcome: KeyfobOutcome::Reject(r), gait: Some(gait), transcript };
        }
        let session = self.session.as_mut().expect("checked above");
        session.commitment_checked = true;
        if self.policy.gait_check && gait.mismatch(&self.policy) {
            if reinits >= self.reinit_budget {
                return KeyfobDecision {
                    outcome: KeyfobOutcome::Reject(RejectReason::GaitMismatch),
                    gait: Some(gait),
                    transcript,
                };
            }
            let challenge = random_challenge(rng);
            let send_at = now + self.processing_us;
            session.challenge = challenge;
            session.phase = Phase::Keyfob {
                t_kf_send,
                anchor: resp.t_kf_cur,
                t_v_receive: now,
                t_v_send: send_at,
                reinits: reinits + 1,
            };
            let nonce = session.nonce;
            let hashed_vehicle_id = self.hashed_id();
            return KeyfobDecision {
                outcome: KeyfobOutcome::Reinit {
                    challenge: KeyfobChallenge {
                        hashed_vehicle_id,
                        challenge,
                        t_v_receive: now,
                        t_v_send: send_at,
                        nonce,
                        commit_challenge: None,
                    },
                    send_at,
                },
                gait: Some(gait),
                transcript,
            };
        }
        let data = SessionData { nonce: session.nonce, challenge: session.challenge, response: resp.hashed_response };
        KeyfobDecision {
            outcome: KeyfobOutcome::Accept { data, transcript: transcript.clone() },
            gait: Some(gait),
            transcript,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edr::{EventKind, EventRecord};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn pattern() -> MobilityPattern {
        let mut p = MobilityPattern::new(30_000_000, 64);
        p.record_event(EventRecord::new(0, EventKind::Velocity, 12.5)).unwrap();
        p.record_event(EventRecord::new(1_000, EventKind::Deceleration, 0.4)).unwrap();
        p
    }

    fn pair(policy: TimingPolicy) -> (Vehicle, Keyfob) {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let key = SymmetricKey::random(&mut rng);
        let mut v = Vehicle::new("car", pattern(), policy);
        let kf = Keyfob::new("fob", &v.identity, key.clone(), pattern(), policy, None);
        v.register(kf.identity.clone(), key, None);
        (v, kf)
    }

    /// Honest run with symmetric one-hop delay `hop`, holder at `speed` m/s.
    fn run(v: &mut Vehicle, kf: &mut Keyfob, hop: i64, speed: f64, rng: &mut ChaCha20Rng) -> KeyfobDecision {
        let req = kf.initiate(0, rng);
        let ch = v.on_keyfob_request(0, &req, hop, rng).unwrap();
        let reply = kf.on_challenge(&ch.challenge, ch.send_at + hop, &ConstantSpeed(speed)).unwrap();
        v.verify_keyfob(&reply.response, reply.send_at + hop, rng)
    }

    #[test]
    fn gait_measurement_examples() {
        let g = GaitObservation::measure(3.0, 2_000_000);
        assert_eq!(g.velocity(), 1.5);
        let still = GaitObservation::measure(0.0, 2_000_000);
        assert_eq!((still.displacement_um, still.velocity_umps), (0, 0));
    }

    #[test]
    fn honest_run_accepts_with_small_gait_error() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (mut v, mut kf) = pair(TimingPolicy::default());
        let d = run(&mut v, &mut kf, 2_000, 1.5, &mut rng);
        assert!(matches!(d.outcome, KeyfobOutcome::Accept { .. }), "{:?}", d.outcome);
        let g = d.gait.unwrap();
        assert_eq!(g.w_kf_us, 2_000_000);
        // window seen by the vehicle: 2 s + hop 3 (2 ms) - processing (1 ms)
        assert_eq!(g.w_v_us, 2_001_000);
        assert!(g.delta_vel() < 0.01);
    }

    #[test]
    fn send_timestamp_is_carried() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (_, mut kf) = pair(TimingPolicy::default());
        let a = kf.initiate(0, &mut rng);
        let b = kf.initiate(0, &mut rng);
        assert_eq!(a.t_kf_send, 0);
        assert_ne!(a.nonce, b.nonce);
    }

    #[test]
    fn relayed_first_hop_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (mut v, mut kf) = pair(TimingPolicy::default());
        let req = kf.initiate(0, &mut rng);
        assert_eq!(v.on_keyfob_request(0, &req, 12_000, &mut rng).unwrap_err(), RejectReason::PropagationExcess);
        let req = kf.initiate(0, &mut rng);
        assert_eq!(v.on_keyfob_request(0, &req, -3_000, &mut rng).unwrap_err(), RejectReason::TimestampImplausible);
    }

    #[test]
    fn relayed_second_hop_is_rejected_by_keyfob() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (mut v, mut kf) = pair(TimingPolicy::default());
        let req = kf.initiate(0, &mut rng);
        let ch = v.on_keyfob_request(0, &req, 2_000, &mut rng).unwrap();
        let err = kf.on_challenge(&ch.challenge, ch.send_at + 12_000, &Stationary).unwrap_err();
        assert_eq!(err, RejectReason::PropagationExcess);
    }

    #[test]
    fn wrong_vehicle_or_nonce_is_rejected_by_keyfob() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let (mut v, mut kf) = pair(TimingPolicy::default());
        let req = kf.initiate(0, &mut rng);
        let ch = v.on_keyfob_request(0, &req, 2_000, &mut rng).unwrap();
        let mut other = ch.challenge.clone();
        other.hashed_vehicle_id[0] ^= 1;
        assert_eq!(kf.on_challenge(&other, 5_000, &Stationary).unwrap_err(), RejectReason::VehicleIdMismatch);
        kf.initiate(0, &mut rng);
        let mut stale = ch.challenge.clone();
        stale.nonce = Nonce([0; 16]);
        assert_eq!(kf.on_challenge(&stale, 5_000, &Stationary).unwrap_err(), RejectReason::NonceMismatch);
    }

    #[test]
    fn forged_response_is_rejected_regardless_of_timing() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (mut v, mut kf) = pair(TimingPolicy::default());
        let req = kf.initiate(0, &mut rng);
        let ch = v.on_keyfob_request(0, &req, 2_000, &mut rng).unwrap();
        let mut reply = kf.on_challenge(&ch.challenge, ch.send_at + 2_000, &Stationary).unwrap();
        reply.response.hashed_response[31] ^= 0x80;
        let d = v.verify_keyfob(&reply.response, reply.send_at + 2_000, &mut rng);
        assert!(matches!(d.outcome, KeyfobOutcome::Reject(RejectReason::BadResponse)));
        assert!(!v.has_open_session());
    }

    #[test]
    fn late_last_hop_inflates_vehicle_window() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let policy = TimingPolicy { propagation_check: false, ..TimingPolicy::default() };
        let (mut v, mut kf) = pair(policy);
        let req = kf.initiate(0, &mut rng);
        let ch = v.on_keyfob_request(0, &req, 500_000, &mut rng).unwrap();
        let reply = kf.on_challenge(&ch.challenge, ch.send_at + 500_000, &ConstantSpeed(1.5)).unwrap();
        let d = v.verify_keyfob(&reply.response, reply.send_at + 500_000, &mut rng);
        let g = d.gait.unwrap();
        // 3.0 m over the keyfob's 2 s window; the vehicle sees 2 s + 0.5 s - 1 ms
        assert_eq!(g.w_v_us, 2_499_000);
        assert!((g.vel_v - 3.0 / 2.499).abs() < 1e-9);
        assert!(g.vel_v < g.vel_kf);
        assert!(matches!(d.outcome, KeyfobOutcome::Reinit { .. }));
    }

    #[test]
    fn second_gait_mismatch_rejects() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let policy = TimingPolicy { propagation_check: false, ..TimingPolicy::default() };
        let (mut v, mut kf) = pair(policy);
        let hop = 400_000;
        let req = kf.initiate(0, &mut rng);
        let ch = v.on_keyfob_request(0, &req, hop, &mut rng).unwrap();
        let reply = kf.on_challenge(&ch.challenge, ch.send_at + hop, &ConstantSpeed(2.0)).unwrap();
        let d = v.verify_keyfob(&reply.response, reply.send_at + hop, &mut rng);
        let KeyfobOutcome::Reinit { challenge, send_at } = d.outcome else { panic!("{:?}", d.outcome) };
        assert_eq!(challenge.nonce, req.nonce);
        let reply = kf.on_challenge(&challenge, send_at + hop, &ConstantSpeed(2.0)).unwrap();
        let d = v.verify_keyfob(&reply.response, reply.send_at + hop, &mut rng);
        assert!(matches!(d.outcome, KeyfobOutcome::Reject(RejectReason::GaitMismatch)));
    }

    #[test]
    fn busy_vehicle_refuses_second_request() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let (mut v, mut kf) = pair(TimingPolicy::default());
        let req = kf.initiate(0, &mut rng);
        v.on_keyfob_request(0, &req, 2_000, &mut rng).unwrap();
        let req2 = kf.initiate(10, &mut rng);
        assert_eq!(v.on_keyfob_request(0, &req2, 2_010, &mut rng).unwrap_err(), RejectReason::SessionBusy);
        assert_eq!(v.on_keyfob_request(0, &req, 2_010, &mut rng).unwrap_err(), RejectReason::SessionBusy);
    }

    #[test]
    fn replayed_nonce_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (mut v, mut kf) = pair(TimingPolicy::default());
        let req = kf.initiate(0, &mut rng);
        v.on_keyfob_request(0, &req, 2_000, &mut rng).unwrap();
        v.abandon();
        assert_eq!(v.on_keyfob_request(0, &req, 2_000, &mut rng).unwrap_err(), RejectReason::NonceReplay);
    }

    #[test]
    fn response_is_deterministic_in_challenge_and_nonce() {
        let key = SymmetricKey([9; 16]);
        let a = keyfob_response(&key, &[1; 16], &Nonce([2; 16]));
        assert_eq!(a, keyfob_response(&key, &[1; 16], &Nonce([2; 16])));
        assert_ne!(a, keyfob_response(&key, &[1; 16], &Nonce([3; 16])));
        assert_ne!(a, keyfob_response(&SymmetricKey([8; 16]), &[1; 16], &Nonce([2; 16])));
    }

    #[test]
    fn answered_exchange_carries_commitment() {
        use crate::commitments::Scheme;
        use crate::group::GroupParams;
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for scheme in [Scheme::Schnorr, Scheme::Pedersen] {
            let key = SymmetricKey::random(&mut rng);
            let prover = BackendProver::generate(scheme, GroupParams::desk(), &mut rng).unwrap();
            let mut v = Vehicle::new("car", pattern(), TimingPolicy::default());
            let mut kf = Keyfob::new("fob", &v.identity, key.clone(), pattern(), TimingPolicy::default(), Some(prover.clone()));
            v.register(kf.identity.clone(), key, Some(prover.verifier()));
            let d = run(&mut v, &mut kf, 2_000, 1.0, &mut rng);
            let KeyfobOutcome::Accept { transcript, .. } = d.outcome else { panic!("{:?}", d.outcome) };
            assert_eq!(transcript.unwrap().scheme(), scheme);
        }
    }

    #[test]
    fn missing_commitment_answer_fails() {
        use crate::commitments::Scheme;
        use crate::group::GroupParams;
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let key = SymmetricKey::random(&mut rng);
        let prover = BackendProver::generate(Scheme::Schnorr, GroupParams::desk(), &mut rng).unwrap();
        let mut v = Vehicle::new("car", pattern(), TimingPolicy::default());
        let mut kf = Keyfob::new("fob", &v.identity, key.clone(), pattern(), TimingPolicy::default(), None);
        v.register(kf.identity.clone(), key, Some(prover.verifier()));
        let req = kf.initiate(0, &mut rng);
        let ch = v.on_keyfob_request(0, &req, 2_000, &mut rng).unwrap();
        assert_eq!(
            kf.on_challenge(&ch.challenge, ch.send_at + 2_000, &Stationary).unwrap_err(),
            RejectReason::CommitmentFailed
        );
    }
}
