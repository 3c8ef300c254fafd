//! Peripheral device to vehicle handshake.
//!
//! ```text
//! pd -> v : [H(ed), id_pd, nonce]
//! v -> pd : [C_v, id_v, nonce]
//! pd -> v : [H(C_v), nonce]
//! ```
//!
//! The response is an unkeyed hash of the challenge; only the AEAD envelope
//! keeps it from being computed by anyone who sees `C_v`.

use rand::RngCore;

use super::backend::BackendProver;
use super::vehicle::{OpenSession, Phase, Vehicle};
use super::wire::{BasicChallenge, BasicRequest, BasicResponse};
use super::{
    metered, random_challenge, Identity, Nonce, NonceLedger, OpCounts, RejectReason, Role,
    SessionData, SymmetricKey, Verdict, CHALLENGE_LEN, ID_LEN,
};
use crate::commitments::CommitmentTranscript;
use crate::edr::MobilityPattern;
use crate::hash::{self, Digest32};

/// `R_pd = H(C_v)`.
pub fn basic_response(challenge: &[u8; CHALLENGE_LEN]) -> Digest32 {
    hash::digest(&[challenge])
}

#[derive(Clone, Debug)]
pub struct PeripheralDevice {
    pub identity: Identity,
    pub pattern: MobilityPattern,
    pub ops: OpCounts,
    key: SymmetricKey,
    vehicle_id: [u8; ID_LEN],
    prover: Option<BackendProver>,
    ledger: NonceLedger,
    session: Option<Nonce>,
}

impl PeripheralDevice {
    pub fn new(
        label: impl Into<String>,
        vehicle: &Identity,
        key: SymmetricKey,
        pattern: MobilityPattern,
        prover: Option<BackendProver>,
    ) -> Self {
        PeripheralDevice {
            identity: Identity::new(Role::Peripheral, label),
            pattern,
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

    pub fn initiate<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> BasicRequest {
        let nonce = self.ledger.fresh(rng);
        let mut ops = self.ops;
        let (edr_digest, commitment) = metered(&mut ops, || {
            (self.pattern.digest(), self.prover.as_mut().map(|p| p.commit(rng)))
        });
        self.ops = ops;
        self.session = Some(nonce);
        BasicRequest { edr_digest, id_pd: self.identity.id, nonce, commitment }
    }

    pub fn respond(&mut self, ch: &BasicChallenge) -> Result<(BasicResponse, SessionData), RejectReason> {
        let nonce = self.session.take().ok_or(RejectReason::NonceMismatch)?;
        if ch.id_v != self.vehicle_id {
            return Err(RejectReason::VehicleIdMismatch);
        }
        if ch.nonce != nonce {
            return Err(RejectReason::NonceMismatch);
        }
        let mut ops = self.ops;
        let out = metered(&mut ops, || {
            let response = basic_response(&ch.challenge);
            let commit_answer = match (&ch.commit_challenge, self.prover.as_mut()) {
                (Some(k), Some(p)) => Some(p.answer(k)?),
                (Some(_), None) => return Err(RejectReason::CommitmentFailed),
                (None, _) => None,
            };
            Ok((
                BasicResponse { response, nonce, commit_answer },
                SessionData { nonce, challenge: ch.challenge, response },
            ))
        });
        self.ops = ops;
        out
    }
}

/// Vehicle verdict on a basic response.
#[derive(Clone, Debug)]
pub struct BasicDecision {
    pub verdict: Verdict,
    pub data: Option<SessionData>,
    pub transcript: Option<CommitmentTranscript>,
}

impl Vehicle {
    pub fn on_basic_request<R: RngCore + ?Sized>(
        &mut self,
        device: usize,
        req: &BasicRequest,
        now: i64,
        rng: &mut R,
    ) -> Result<BasicChallenge, RejectReason> {
        if self.devices[device].identity.id != req.id_pd {
            return Err(RejectReason::UnknownIdentity);
        }
        self.admit(req.nonce, now)?;
        if req.edr_digest.0 != self.pattern_digest() {
            return Err(RejectReason::DigestMismatch);
        }
        let commit_challenge = self.devices[device].verifier.as_ref().map(|v| v.challenge(rng));
        let challenge = random_challenge(rng);
        self.session = Some(OpenSession {
            device,
            nonce: req.nonce,
            challenge,
            opened_at: now,
            offer: req.commitment.clone(),
            commit_challenge: commit_challenge.clone(),
            commitment_checked: false,
            phase: Phase::Basic,
        });
        Ok(BasicChallenge {
            challenge,
            id_v: self.identity.id,
            nonce: req.nonce,
            commit_challenge: commit_challenge.map(|k| k.value().clone()),
        })
    }

    pub fn verify_basic(&mut self, resp: &BasicResponse) -> BasicDecision {
        let mut ops = self.ops;
        let d = metered(&mut ops, || self.decide_basic(resp));
        self.ops = ops;
        self.session = None;
        d
    }

    fn decide_basic(&self, resp: &BasicResponse) -> BasicDecision {
        let reject = |r| BasicDecision { verdict: Verdict::Reject(r), data: None, transcript: None };
        let Some(session) = &self.session else {
            return reject(RejectReason::UnexpectedMessage);
        };
        if !matches!(session.phase, Phase::Basic) {
            return reject(RejectReason::UnexpectedMessage);
        }
        if resp.nonce != session.nonce {
            return reject(RejectReason::NonceMismatch);
        }
        if resp.response != basic_response(&session.challenge) {
            return reject(RejectReason::BadResponse);
        }
        let mut transcript = None;
        if let Some(verifier) = &self.devices[session.device].verifier {
            let k = session.commit_challenge.as_ref().expect("challenge issued with verifier");
            match verifier.verify(session.offer.as_ref(), k, resp.commit_answer.as_ref()) {
                Ok(t) => transcript = Some(t),
                Err(r) => return reject(r),
            }
        }
        BasicDecision {
            verdict: Verdict::Accept,
            data: Some(SessionData { nonce: session.nonce, challenge: session.challenge, response: resp.response }),
            transcript,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edr::{EventKind, EventRecord};
    use crate::protocol::TimingPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn pattern() -> MobilityPattern {
        let mut p = MobilityPattern::new(30_000_000, 64);
        p.record_event(EventRecord::new(0, EventKind::SteeringAngle, -3.5)).unwrap();
        p
    }

    fn pair(rng: &mut ChaCha20Rng) -> (Vehicle, PeripheralDevice) {
        let key = SymmetricKey::random(rng);
        let mut v = Vehicle::new("car", pattern(), TimingPolicy::default());
        let pd = PeripheralDevice::new("phone", &v.identity, key.clone(), pattern(), None);
        v.register(pd.identity.clone(), key, None);
        (v, pd)
    }

    #[test]
    fn honest_flow_accepts() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (mut v, mut pd) = pair(&mut rng);
        let req = pd.initiate(&mut rng);
        assert_eq!(req.edr_digest, v.pattern.digest());
        let ch = v.on_basic_request(0, &req, 0, &mut rng).unwrap();
        let (resp, data) = pd.respond(&ch).unwrap();
        assert_eq!(resp.response, basic_response(&ch.challenge));
        let d = v.verify_basic(&resp);
        assert_eq!(d.verdict, Verdict::Accept);
        assert_eq!(d.data, Some(data));
    }

    #[test]
    fn stale_pattern_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (mut v, mut pd) = pair(&mut rng);
        v.pattern.record_event(EventRecord::new(5, EventKind::Velocity, 1.0)).unwrap();
        let req = pd.initiate(&mut rng);
        assert_eq!(v.on_basic_request(0, &req, 0, &mut rng).unwrap_err(), RejectReason::DigestMismatch);
    }

    #[test]
    fn unknown_identity_and_replay() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (mut v, mut pd) = pair(&mut rng);
        let mut req = pd.initiate(&mut rng);
        let real = req.id_pd;
        req.id_pd = [0; 16];
        assert_eq!(v.on_basic_request(0, &req, 0, &mut rng).unwrap_err(), RejectReason::UnknownIdentity);
        req.id_pd = real;
        v.on_basic_request(0, &req, 0, &mut rng).unwrap();
        v.abandon();
        assert_eq!(v.on_basic_request(0, &req, 0, &mut rng).unwrap_err(), RejectReason::NonceReplay);
    }

    #[test]
    fn device_checks_nonce_and_vehicle() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (mut v, mut pd) = pair(&mut rng);
        let req = pd.initiate(&mut rng);
        let mut ch = v.on_basic_request(0, &req, 0, &mut rng).unwrap();
        ch.nonce = Nonce([1; 16]);
        assert_eq!(pd.respond(&ch).unwrap_err(), RejectReason::NonceMismatch);
        pd.initiate(&mut rng);
        ch.id_v = [7; 16];
        assert_eq!(pd.respond(&ch).unwrap_err(), RejectReason::VehicleIdMismatch);
    }

    #[test]
    fn distinct_challenges_give_distinct_responses() {
        assert_ne!(basic_response(&[0; 16]), basic_response(&[1; 16]));
    }

    #[test]
    fn stale_nonce_with_correct_response_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let (mut v, mut pd) = pair(&mut rng);
        let req = pd.initiate(&mut rng);
        let ch = v.on_basic_request(0, &req, 0, &mut rng).unwrap();
        let (mut resp, _) = pd.respond(&ch).unwrap();
        resp.nonce = Nonce([3; 16]);
        assert_eq!(v.verify_basic(&resp).verdict, Verdict::Reject(RejectReason::NonceMismatch));
    }

    #[test]
    fn random_responses_never_accepted() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let (mut v, mut pd) = pair(&mut rng);
        for _ in 0..200 {
            let req = pd.initiate(&mut rng);
            let ch = v.on_basic_request(0, &req, 0, &mut rng).unwrap();
            let mut response = [0u8; 32];
            rng.fill_bytes(&mut response);
            let d = v.verify_basic(&BasicResponse { response, nonce: ch.nonce, commit_answer: None });
            assert_eq!(d.verdict, Verdict::Reject(RejectReason::BadResponse));
        }
    }
}
