//! Schnorr identification and Pedersen commitment, three-move interactive form.
//!
//! Both run over [`GroupParams`]: the prover commits, the verifier draws a
//! challenge from its own random stream, and the prover answers with a
//! response linear in the challenge.
//!
//! Pedersen verification checks `g^rho1 * h^rho2 == C * X^k`. That is the
//! identity the honest responses `rho1 = s1 + k*x`, `rho2 = s2 + k*y` actually
//! satisfy; the transposed form `X * C^k` rejects honest runs.

use std::fmt;

use rand::RngCore;

use crate::group::{GroupElement, GroupError, GroupParams, Scalar};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchnorrKeypair {
    pub secret: Scalar,
    pub public: GroupElement,
}

impl SchnorrKeypair {
    pub fn generate<R: RngCore + ?Sized>(params: &GroupParams, rng: &mut R) -> Self {
        Self::from_secret(params, params.random_scalar(rng))
    }

    pub fn from_secret(params: &GroupParams, secret: Scalar) -> Self {
        let public = params.modexp(&params.g(), &secret);
        SchnorrKeypair { secret, public }
    }
}

/// Ephemeral `x` stays with the prover; only `public = g^x` is sent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchnorrCommitment {
    pub secret: Scalar,
    pub public: GroupElement,
}

pub fn schnorr_commit<R: RngCore + ?Sized>(params: &GroupParams, rng: &mut R) -> SchnorrCommitment {
    schnorr_commit_with(params, params.random_scalar(rng))
}

pub fn schnorr_commit_with(params: &GroupParams, x: Scalar) -> SchnorrCommitment {
    let public = params.modexp(&params.g(), &x);
    SchnorrCommitment { secret: x, public }
}

/// `rho = x + a*k mod q`
pub fn schnorr_respond(
    params: &GroupParams,
    keypair: &SchnorrKeypair,
    commitment: &SchnorrCommitment,
    challenge: &Scalar,
) -> Scalar {
    params.scalar_add(&commitment.secret, &params.scalar_mul(&keypair.secret, challenge))
}

/// Accept iff `g^rho == X * A^k`.
pub fn schnorr_verify(
    params: &GroupParams,
    public_key: &GroupElement,
    commitment: &GroupElement,
    challenge: &Scalar,
    response: &Scalar,
) -> bool {
    let lhs = params.modexp(&params.g(), response);
    let rhs = params.mul(commitment, &params.modexp(public_key, challenge));
    lhs == rhs
}

/// Recover the long-term secret from two accepting transcripts that share a
/// commitment but differ in challenge: `a = (rho - rho') / (k - k')`.
pub fn schnorr_extract(
    params: &GroupParams,
    first: (&Scalar, &Scalar),
    second: (&Scalar, &Scalar),
) -> Option<Scalar> {
    let (k1, rho1) = first;
    let (k2, rho2) = second;
    let dk = params.scalar_inv(&params.scalar_sub(k1, k2))?;
    Some(params.scalar_mul(&params.scalar_sub(rho1, rho2), &dk))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PedersenKeypair {
    pub x: Scalar,
    pub y: Scalar,
    /// `g^x * h^y`
    pub public: GroupElement,
}

impl PedersenKeypair {
    pub fn generate<R: RngCore + ?Sized>(params: &GroupParams, rng: &mut R) -> Result<Self, GroupError> {
        let x = params.random_scalar(rng);
        let y = params.random_scalar(rng);
        Self::from_secrets(params, x, y)
    }

    pub fn from_secrets(params: &GroupParams, x: Scalar, y: Scalar) -> Result<Self, GroupError> {
        let h = params.h()?;
        let public = params.mul(&params.modexp(&params.g(), &x), &params.modexp(&h, &y));
        Ok(PedersenKeypair { x, y, public })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PedersenCommitment {
    pub s1: Scalar,
    pub s2: Scalar,
    /// `g^s1`
    pub a: GroupElement,
    /// `h^s2`
    pub b: GroupElement,
    /// `a * b`, the value sent to the verifier.
    pub c: GroupElement,
}

pub fn pedersen_commit<R: RngCore + ?Sized>(
    params: &GroupParams,
    rng: &mut R,
) -> Result<PedersenCommitment, GroupError> {
    let s1 = params.random_scalar(rng);
    let s2 = params.random_scalar(rng);
    pedersen_commit_with(params, s1, s2)
}

pub fn pedersen_commit_with(
    params: &GroupParams,
    s1: Scalar,
    s2: Scalar,
) -> Result<PedersenCommitment, GroupError> {
    let h = params.h()?;
    let a = params.modexp(&params.g(), &s1);
    let b = params.modexp(&h, &s2);
    let c = params.mul(&a, &b);
    Ok(PedersenCommitment { s1, s2, a, b, c })
}

/// `(s1 + k*x, s2 + k*y) mod q`
pub fn pedersen_respond(
    params: &GroupParams,
    keypair: &PedersenKeypair,
    commitment: &PedersenCommitment,
    challenge: &Scalar,
) -> (Scalar, Scalar) {
    (
        params.scalar_add(&commitment.s1, &params.scalar_mul(challenge, &keypair.x)),
        params.scalar_add(&commitment.s2, &params.scalar_mul(challenge, &keypair.y)),
    )
}

/// Accept iff `g^rho1 * h^rho2 == C * X^k`. With `k = 0` this is plain opening of `C`.
pub fn pedersen_verify(
    params: &GroupParams,
    public_key: &GroupElement,
    commitment: &GroupElement,
    challenge: &Scalar,
    rho1: &Scalar,
    rho2: &Scalar,
) -> Result<bool, GroupError> {
    let h = params.h()?;
    let lhs = params.mul(&params.modexp(&params.g(), rho1), &params.modexp(&h, rho2));
    let rhs = params.mul(commitment, &params.modexp(public_key, challenge));
    Ok(lhs == rhs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Schnorr,
    Pedersen,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Schnorr => "schnorr",
            Scheme::Pedersen => "pedersen",
        }
    }
}

/// Public view of one complete commit/challenge/response exchange.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommitmentTranscript {
    Schnorr {
        commitment: GroupElement,
        challenge: Scalar,
        response: Scalar,
    },
    Pedersen {
        commitment: GroupElement,
        challenge: Scalar,
        rho1: Scalar,
        rho2: Scalar,
    },
}

impl CommitmentTranscript {
    pub fn scheme(&self) -> Scheme {
        match self {
            CommitmentTranscript::Schnorr { .. } => Scheme::Schnorr,
            CommitmentTranscript::Pedersen { .. } => Scheme::Pedersen,
        }
    }
}

/// Fixed field order, decimal integers: `scheme=.. commit=.. challenge=.. response=..`
impl fmt::Display for CommitmentTranscript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommitmentTranscript::Schnorr { commitment, challenge, response } => write!(
                f,
                "scheme=schnorr commit={commitment} challenge={challenge} response={response}"
            ),
            CommitmentTranscript::Pedersen { commitment, challenge, rho1, rho2 } => write!(
                f,
                "scheme=pedersen commit={commitment} challenge={challenge} response={rho1},{rho2}"
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn desk() -> GroupParams {
        GroupParams::desk()
    }

    fn n(v: u32) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn schnorr_commit_examples() {
        let g = desk();
        assert_eq!(schnorr_commit_with(&g, g.scalar(4u32)).public.value(), &n(16));
        assert_eq!(schnorr_commit_with(&g, g.scalar(0u32)).public.value(), &n(1));
    }

    #[test]
    fn schnorr_commit_draws_fresh_secrets() {
        let g = desk();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let trials = 1000;
        let equal = (0..trials)
            .filter(|_| schnorr_commit(&g, &mut rng).secret == schnorr_commit(&g, &mut rng).secret)
            .count();
        // Collisions happen at rate 1/q; 3 sigma band around 1000/11.
        let mean = trials as f64 / 11.0;
        let sigma = (trials as f64 * (1.0 / 11.0) * (10.0 / 11.0)).sqrt();
        assert!((equal as f64 - mean).abs() <= 3.0 * sigma, "{equal}");
    }

    #[test]
    fn schnorr_respond_examples() {
        let g = desk();
        let key = SchnorrKeypair::from_secret(&g, g.scalar(3u32));
        let com = schnorr_commit_with(&g, g.scalar(4u32));
        assert_eq!(schnorr_respond(&g, &key, &com, &g.scalar(5u32)).value(), &n(8));
        assert_eq!(schnorr_respond(&g, &key, &com, &g.scalar(0u32)), com.secret);
        let zero = SchnorrKeypair::from_secret(&g, g.scalar(0u32));
        let zcom = schnorr_commit_with(&g, g.scalar(0u32));
        assert!(schnorr_respond(&g, &zero, &zcom, &g.scalar(7u32)).is_zero());
    }

    #[test]
    fn schnorr_verify_examples() {
        let g = desk();
        let a = g.element(8u32).unwrap();
        let x = g.element(16u32).unwrap();
        assert!(schnorr_verify(&g, &a, &x, &g.scalar(5u32), &g.scalar(8u32)));
        assert!(!schnorr_verify(&g, &a, &x, &g.scalar(5u32), &g.scalar(7u32)));
        // zero challenge: accept iff g^rho == X
        assert!(schnorr_verify(&g, &a, &x, &g.scalar(0u32), &g.scalar(4u32)));
        assert!(!schnorr_verify(&g, &a, &x, &g.scalar(0u32), &g.scalar(3u32)));
    }

    #[test]
    fn schnorr_extractor_recovers_key() {
        let g = desk();
        let key = SchnorrKeypair::from_secret(&g, g.scalar(6u32));
        let com = schnorr_commit_with(&g, g.scalar(9u32));
        let (k1, k2) = (g.scalar(2u32), g.scalar(7u32));
        let r1 = schnorr_respond(&g, &key, &com, &k1);
        let r2 = schnorr_respond(&g, &key, &com, &k2);
        assert_eq!(schnorr_extract(&g, (&k1, &r1), (&k2, &r2)), Some(key.secret));
        assert_eq!(schnorr_extract(&g, (&k1, &r1), (&k1, &r1)), None);
    }

    #[test]
    fn pedersen_commit_examples() {
        let g = desk();
        let com = pedersen_commit_with(&g, g.scalar(5u32), g.scalar(6u32)).unwrap();
        assert_eq!((com.a.value(), com.b.value(), com.c.value()), (&n(9), &n(16), &n(6)));
        let zero = pedersen_commit_with(&g, g.scalar(0u32), g.scalar(0u32)).unwrap();
        assert_eq!(zero.c.value(), &n(1));
    }

    #[test]
    fn pedersen_commitment_hides_openings() {
        // Every commitment value in the q=11 group has exactly q openings (s1, s2).
        let g = desk();
        let mut preimages = std::collections::HashMap::<BigUint, u32>::new();
        for s1 in 0u32..11 {
            for s2 in 0u32..11 {
                let c = pedersen_commit_with(&g, g.scalar(s1), g.scalar(s2)).unwrap().c;
                *preimages.entry(c.value().clone()).or_default() += 1;
            }
        }
        assert_eq!(preimages.len(), 11);
        assert!(preimages.values().all(|&count| count == 11));
    }

    #[test]
    fn pedersen_respond_examples() {
        let g = desk();
        let key = PedersenKeypair::from_secrets(&g, g.scalar(2u32), g.scalar(3u32)).unwrap();
        let com = pedersen_commit_with(&g, g.scalar(5u32), g.scalar(6u32)).unwrap();
        let (r1, r2) = pedersen_respond(&g, &key, &com, &g.scalar(7u32));
        assert_eq!((r1.value(), r2.value()), (&n(8), &n(5)));
        let (z1, z2) = pedersen_respond(&g, &key, &com, &g.scalar(0u32));
        assert_eq!((z1, z2), (com.s1.clone(), com.s2.clone()));
        let zkey = PedersenKeypair::from_secrets(&g, g.scalar(0u32), g.scalar(0u32)).unwrap();
        let (w1, w2) = pedersen_respond(&g, &zkey, &com, &g.scalar(9u32));
        assert_eq!((w1, w2), (com.s1, com.s2));
    }

    #[test]
    fn pedersen_verify_examples() {
        let g = desk();
        let key = PedersenKeypair::from_secrets(&g, g.scalar(2u32), g.scalar(3u32)).unwrap();
        assert_eq!(key.public.value(), &n(16));
        let c = g.element(6u32).unwrap();
        let k = g.scalar(7u32);
        assert!(pedersen_verify(&g, &key.public, &c, &k, &g.scalar(8u32), &g.scalar(5u32)).unwrap());
        assert!(!pedersen_verify(&g, &key.public, &c, &k, &g.scalar(8u32), &g.scalar(4u32)).unwrap());
        // zero challenge opens C: 2^5 * 3^6 = 6
        let zero = g.scalar(0u32);
        assert!(pedersen_verify(&g, &key.public, &c, &zero, &g.scalar(5u32), &g.scalar(6u32)).unwrap());
        assert!(!pedersen_verify(&g, &key.public, &c, &zero, &g.scalar(6u32), &g.scalar(6u32)).unwrap());
    }

    #[test]
    fn printed_pedersen_equation_rejects_honest_run() {
        // X * C^k for the same honest transcript: 16 * 6^7 mod 23 = 2, while lhs = 16.
        let g = desk();
        let x = g.element(16u32).unwrap();
        let c = g.element(6u32).unwrap();
        let transposed = g.mul(&x, &g.modexp(&c, &g.scalar(7u32)));
        let lhs = g.mul(
            &g.modexp(&g.g(), &g.scalar(8u32)),
            &g.modexp(&g.h().unwrap(), &g.scalar(5u32)),
        );
        assert_ne!(lhs, transposed);
    }

    #[test]
    fn pedersen_needs_h() {
        let g = GroupParams::new(n(23), n(11), n(2), None).unwrap();
        assert_eq!(pedersen_commit_with(&g, g.scalar(1u32), g.scalar(1u32)), Err(GroupError::MissingH));
    }

    #[test]
    fn transcript_text_has_fixed_field_order() {
        let g = desk();
        let t = CommitmentTranscript::Pedersen {
            commitment: g.element(6u32).unwrap(),
            challenge: g.scalar(7u32),
            rho1: g.scalar(8u32),
            rho2: g.scalar(5u32),
        };
        assert_eq!(t.to_string(), "scheme=pedersen commit=6 challenge=7 response=8,5");
        assert_eq!(t.scheme(), Scheme::Pedersen);
    }
}
