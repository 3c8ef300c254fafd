//! Schnorr / Pedersen exchange carried inside the handshake messages.
//!
//! The request carries the prover's commitment, the challenge message carries
//! the verifier's scalar challenge, and the response carries the answer. A
//! commitment is consumed by the first answer so one ephemeral secret never
//! answers two challenges.

use num_bigint::BigUint;
use rand::RngCore;

use super::RejectReason;
use crate::commitments::{
    pedersen_commit, pedersen_respond, pedersen_verify, schnorr_commit, schnorr_respond,
    schnorr_verify, CommitmentTranscript, PedersenCommitment, PedersenKeypair, SchnorrCommitment,
    SchnorrKeypair, Scheme,
};
use crate::group::{GroupElement, GroupError, GroupParams, Scalar};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommitOffer {
    Schnorr { x: BigUint },
    Pedersen { c: BigUint },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommitAnswer {
    Schnorr { rho: BigUint },
    Pedersen { rho1: BigUint, rho2: BigUint },
}

#[derive(Clone, Debug)]
enum ProverKey {
    Schnorr(SchnorrKeypair),
    Pedersen(PedersenKeypair),
}

#[derive(Clone, Debug)]
enum Pending {
    Schnorr(SchnorrCommitment),
    Pedersen(PedersenCommitment),
}

/// Prover half, held by the keyfob or peripheral.
#[derive(Clone, Debug)]
pub struct BackendProver {
    params: GroupParams,
    key: ProverKey,
    pending: Option<Pending>,
}

impl BackendProver {
    pub fn generate<R: RngCore + ?Sized>(
        scheme: Scheme,
        params: GroupParams,
        rng: &mut R,
    ) -> Result<Self, GroupError> {
        let key = match scheme {
            Scheme::Schnorr => ProverKey::Schnorr(SchnorrKeypair::generate(&params, rng)),
            Scheme::Pedersen => ProverKey::Pedersen(PedersenKeypair::generate(&params, rng)?),
        };
        Ok(BackendProver { params, key, pending: None })
    }

    pub fn scheme(&self) -> Scheme {
        match self.key {
            ProverKey::Schnorr(_) => Scheme::Schnorr,
            ProverKey::Pedersen(_) => Scheme::Pedersen,
        }
    }

    pub fn public_key(&self) -> GroupElement {
        match &self.key {
            ProverKey::Schnorr(k) => k.public.clone(),
            ProverKey::Pedersen(k) => k.public.clone(),
        }
    }

    /// Verifier half matching this prover's long-term public key.
    pub fn verifier(&self) -> BackendVerifier {
        BackendVerifier { params: self.params.clone(), scheme: self.scheme(), public: self.public_key() }
    }

    pub fn commit<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> CommitOffer {
        match &self.key {
            ProverKey::Schnorr(_) => {
                let com = schnorr_commit(&self.params, rng);
                let offer = CommitOffer::Schnorr { x: com.public.value().clone() };
                self.pending = Some(Pending::Schnorr(com));
                offer
            }
            ProverKey::Pedersen(_) => {
                let com = pedersen_commit(&self.params, rng).expect("pedersen prover holds h");
                let offer = CommitOffer::Pedersen { c: com.c.value().clone() };
                self.pending = Some(Pending::Pedersen(com));
                offer
            }
        }
    }

    pub fn answer(&mut self, challenge: &BigUint) -> Result<CommitAnswer, RejectReason> {
        if challenge >= self.params.q() {
            return Err(RejectReason::CommitmentFailed);
        }
        let k = self.params.scalar(challenge.clone());
        match (&self.key, self.pending.take()) {
            (ProverKey::Schnorr(key), Some(Pending::Schnorr(com))) => {
                let rho = schnorr_respond(&self.params, key, &com, &k);
                Ok(CommitAnswer::Schnorr { rho: rho.value().clone() })
            }
            (ProverKey::Pedersen(key), Some(Pending::Pedersen(com))) => {
                let (rho1, rho2) = pedersen_respond(&self.params, key, &com, &k);
                Ok(CommitAnswer::Pedersen { rho1: rho1.value().clone(), rho2: rho2.value().clone() })
            }
            _ => Err(RejectReason::UnexpectedMessage),
        }
    }
}

/// Verifier half, held by the vehicle.
#[derive(Clone, Debug)]
pub struct BackendVerifier {
    params: GroupParams,
    scheme: Scheme,
    public: GroupElement,
}

impl BackendVerifier {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn params(&self) -> &GroupParams {
        &self.params
    }

    pub fn challenge<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar {
        self.params.random_scalar(rng)
    }

    fn scalar(&self, v: &BigUint) -> Result<Scalar, RejectReason> {
        if v >= self.params.q() {
            return Err(RejectReason::CommitmentFailed);
        }
        Ok(self.params.scalar(v.clone()))
    }

    fn element(&self, v: &BigUint) -> Result<GroupElement, RejectReason> {
        self.params.element(v.clone()).map_err(|_| RejectReason::CommitmentFailed)
    }

    /// Check a full exchange. Range and membership failures count as a failed commitment.
    pub fn verify(
        &self,
        offer: Option<&CommitOffer>,
        challenge: &Scalar,
        answer: Option<&CommitAnswer>,
    ) -> Result<CommitmentTranscript, RejectReason> {
        let (Some(offer), Some(answer)) = (offer, answer) else {
            return Err(RejectReason::CommitmentFailed);
        };
        let transcript = match (self.scheme, offer, answer) {
            (Scheme::Schnorr, CommitOffer::Schnorr { x }, CommitAnswer::Schnorr { rho }) => {
                let x = self.element(x)?;
                let rho = self.scalar(rho)?;
                if !schnorr_verify(&self.params, &self.public, &x, challenge, &rho) {
                    return Err(RejectReason::CommitmentFailed);
                }
                CommitmentTranscript::Schnorr { commitment: x, challenge: challenge.clone(), response: rho }
            }
            (Scheme::Pedersen, CommitOffer::Pedersen { c }, CommitAnswer::Pedersen { rho1, rho2 }) => {
                let c = self.element(c)?;
                let rho1 = self.scalar(rho1)?;
                let rho2 = self.scalar(rho2)?;
                let ok = pedersen_verify(&self.params, &self.public, &c, challenge, &rho1, &rho2)
                    .map_err(|_| RejectReason::CommitmentFailed)?;
                if !ok {
                    return Err(RejectReason::CommitmentFailed);
                }
                CommitmentTranscript::Pedersen { commitment: c, challenge: challenge.clone(), rho1, rho2 }
            }
            _ => return Err(RejectReason::CommitmentFailed),
        };
        Ok(transcript)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn honest_exchange_verifies_for_both_schemes() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for scheme in [Scheme::Schnorr, Scheme::Pedersen] {
            for _ in 0..50 {
                let mut prover = BackendProver::generate(scheme, GroupParams::desk(), &mut rng).unwrap();
                let verifier = prover.verifier();
                let offer = prover.commit(&mut rng);
                let k = verifier.challenge(&mut rng);
                let answer = prover.answer(k.value()).unwrap();
                let t = verifier.verify(Some(&offer), &k, Some(&answer)).unwrap();
                assert_eq!(t.scheme(), scheme);
            }
        }
    }

    #[test]
    fn commitment_is_single_use() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut prover = BackendProver::generate(Scheme::Schnorr, GroupParams::desk(), &mut rng).unwrap();
        prover.commit(&mut rng);
        prover.answer(&BigUint::from(3u32)).unwrap();
        assert_eq!(prover.answer(&BigUint::from(4u32)), Err(RejectReason::UnexpectedMessage));
    }

    #[test]
    fn mismatched_or_missing_parts_fail() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut prover = BackendProver::generate(Scheme::Schnorr, GroupParams::desk(), &mut rng).unwrap();
        let verifier = prover.verifier();
        let offer = prover.commit(&mut rng);
        let k = verifier.challenge(&mut rng);
        let answer = prover.answer(k.value()).unwrap();
        assert_eq!(verifier.verify(None, &k, Some(&answer)), Err(RejectReason::CommitmentFailed));
        let wrong = CommitAnswer::Pedersen { rho1: 1u32.into(), rho2: 1u32.into() };
        assert_eq!(verifier.verify(Some(&offer), &k, Some(&wrong)), Err(RejectReason::CommitmentFailed));
        // 5 is not in the order-11 subgroup mod 23
        let outside = CommitOffer::Schnorr { x: 5u32.into() };
        assert_eq!(verifier.verify(Some(&outside), &k, Some(&answer)), Err(RejectReason::CommitmentFailed));
        let too_big = CommitAnswer::Schnorr { rho: 11u32.into() };
        assert_eq!(verifier.verify(Some(&offer), &k, Some(&too_big)), Err(RejectReason::CommitmentFailed));
    }
}
