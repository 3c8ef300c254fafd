//! Prime-order subgroup of `Z_p^*` backing the Schnorr and Pedersen adaptations.
//!
//! Scalars are always reduced mod `q` and elements are checked for subgroup
//! membership when constructed, so every other module can rely on both.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;
use thiserror::Error;

use crate::hash;

/// An exponent in `[0, q)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A member of the order-`q` subgroup.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement(BigUint);

impl GroupElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The first group invariant that a parameter set breaks.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ParamViolation {
    #[error("p not prime")]
    PNotPrime,
    #[error("q not prime")]
    QNotPrime,
    #[error("q does not divide p-1")]
    QNotDividing,
    #[error("g out of range")]
    GOutOfRange,
    #[error("g trivial")]
    GTrivial,
    #[error("g order not q")]
    GOrder,
    #[error("h out of range")]
    HOutOfRange,
    #[error("h trivial")]
    HTrivial,
    #[error("h order not q")]
    HOrder,
    #[error("h equals g")]
    HEqualsG,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("invalid group parameters: {0}")]
    Params(#[from] ParamViolation),
    #[error("value {0} is not in the order-q subgroup")]
    NotInSubgroup(BigUint),
    #[error("pedersen requires a second generator h")]
    MissingH,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    g: BigUint,
    h: Option<BigUint>,
}

/// 256-bit safe prime `p = 2q + 1`; `g = 4` generates the quadratic residues.
const DEMO_P: &str = "BA1EF1704E4227B9E7715846203EC36338C2CA34FB26A2FF39702E389C198D17";
const DEMO_Q: &str = "5D0F78B8272113DCF3B8AC23101F61B19C61651A7D93517F9CB8171C4E0CC68B";

/// Domain tag hashed into the subgroup to obtain the demo group's `h`.
pub const H_DOMAIN_TAG: &[u8] = b"perimeter/pedersen-h/v1";

impl GroupParams {
    pub fn new(p: BigUint, q: BigUint, g: BigUint, h: Option<BigUint>) -> Result<Self, GroupError> {
        validate_params(&p, &q, &g, h.as_ref())?;
        Ok(GroupParams { p, q, g, h })
    }

    /// p=23, q=11, g=2, h=3. Small enough that soundness rates of 1/q are observable.
    pub fn desk() -> Self {
        GroupParams::new(23u32.into(), 11u32.into(), 2u32.into(), Some(3u32.into()))
            .expect("desk group is valid")
    }

    /// 256-bit group with `h` derived from [`H_DOMAIN_TAG`].
    pub fn demo() -> Self {
        let p = BigUint::parse_bytes(DEMO_P.as_bytes(), 16).expect("demo p");
        let q = BigUint::parse_bytes(DEMO_Q.as_bytes(), 16).expect("demo q");
        let g = BigUint::from(4u32);
        let h = hash_to_subgroup(&p, &q, &g, H_DOMAIN_TAG);
        GroupParams::new(p, q, g, Some(h)).expect("demo group is valid")
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> GroupElement {
        GroupElement(self.g.clone())
    }

    pub fn h(&self) -> Result<GroupElement, GroupError> {
        self.h.clone().map(GroupElement).ok_or(GroupError::MissingH)
    }

    pub fn has_h(&self) -> bool {
        self.h.is_some()
    }

    /// Byte length of `p`, used for fixed-width encodings.
    pub fn element_len(&self) -> usize {
        ((self.p.bits() + 7) / 8) as usize
    }

    pub fn scalar(&self, value: impl Into<BigUint>) -> Scalar {
        Scalar(value.into() % &self.q)
    }

    pub fn element(&self, value: impl Into<BigUint>) -> Result<GroupElement, GroupError> {
        let value = value.into();
        if value.is_zero() || value >= self.p || !self.in_subgroup(&value) {
            return Err(GroupError::NotInSubgroup(value));
        }
        Ok(GroupElement(value))
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(BigUint::one())
    }

    fn in_subgroup(&self, value: &BigUint) -> bool {
        value.modpow(&self.q, &self.p).is_one()
    }

    /// `base^exp mod p`. Counted as one exponentiation.
    pub fn modexp(&self, base: &GroupElement, exp: &Scalar) -> GroupElement {
        hash::count_exponentiation();
        GroupElement(base.0.modpow(&exp.0, &self.p))
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        GroupElement((&a.0 * &b.0) % &self.p)
    }

    pub fn scalar_add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn scalar_sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &self.q - &b.0) % &self.q)
    }

    pub fn scalar_mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 * &b.0) % &self.q)
    }

    /// Multiplicative inverse mod q, `None` for zero.
    pub fn scalar_inv(&self, a: &Scalar) -> Option<Scalar> {
        if a.is_zero() {
            return None;
        }
        let two = BigUint::from(2u32);
        Some(Scalar(a.0.modpow(&(&self.q - two), &self.q)))
    }

    /// Uniform scalar in `[0, q)` by rejection sampling.
    pub fn random_scalar<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar {
        Scalar(uniform_below(&self.q, rng))
    }
}

fn uniform_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    let bits = bound.bits();
    let nbytes = bits.div_ceil(8) as usize;
    let excess = nbytes as u64 * 8 - bits;
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= 0xffu8 >> excess;
        let candidate = BigUint::from_bytes_be(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

/// Check every [`GroupParams`] invariant, reporting the first one violated.
pub fn validate_params(
    p: &BigUint,
    q: &BigUint,
    g: &BigUint,
    h: Option<&BigUint>,
) -> Result<(), ParamViolation> {
    if !is_probable_prime(p) {
        return Err(ParamViolation::PNotPrime);
    }
    if !is_probable_prime(q) {
        return Err(ParamViolation::QNotPrime);
    }
    if !(p - 1u32).is_multiple_of(q) {
        return Err(ParamViolation::QNotDividing);
    }
    check_generator(p, q, g).map_err(|v| match v {
        GenFault::Range => ParamViolation::GOutOfRange,
        GenFault::Trivial => ParamViolation::GTrivial,
        GenFault::Order => ParamViolation::GOrder,
    })?;
    if let Some(h) = h {
        check_generator(p, q, h).map_err(|v| match v {
            GenFault::Range => ParamViolation::HOutOfRange,
            GenFault::Trivial => ParamViolation::HTrivial,
            GenFault::Order => ParamViolation::HOrder,
        })?;
        if h == g {
            return Err(ParamViolation::HEqualsG);
        }
    }
    Ok(())
}

enum GenFault {
    Range,
    Trivial,
    Order,
}

fn check_generator(p: &BigUint, q: &BigUint, x: &BigUint) -> Result<(), GenFault> {
    if x.is_zero() || x >= p {
        return Err(GenFault::Range);
    }
    if x.is_one() {
        return Err(GenFault::Trivial);
    }
    // q prime and x != 1, so x^q == 1 means the order is exactly q.
    if !x.modpow(q, p).is_one() {
        return Err(GenFault::Order);
    }
    Ok(())
}

/// Map a domain tag into the order-q subgroup with no known log relation to `g`.
pub fn hash_to_subgroup(p: &BigUint, q: &BigUint, g: &BigUint, tag: &[u8]) -> BigUint {
    let cofactor = (p - 1u32) / q;
    let width = ((p.bits() + 7) / 8) as usize + 16;
    for counter in 0u32.. {
        let mut wide = Vec::with_capacity(width);
        let mut block = 0u32;
        while wide.len() < width {
            wide.extend_from_slice(&hash::derive_seed(&[
                tag,
                &counter.to_be_bytes(),
                &block.to_be_bytes(),
            ]));
            block += 1;
        }
        let candidate = (BigUint::from_bytes_be(&wide[..width]) % p).modpow(&cofactor, p);
        if !candidate.is_zero() && !candidate.is_one() && &candidate != g {
            return candidate;
        }
    }
    unreachable!("counter space exhausted")
}

const SMALL_PRIMES: [u32; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// Miller-Rabin. Deterministic below 3.3e24 (first 13 prime bases); larger
/// inputs add 24 hash-derived bases.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &sp in &SMALL_PRIMES {
        let sp = BigUint::from(sp);
        if n == &sp {
            return true;
        }
        if (n % &sp).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let witness = |a: &BigUint| -> bool {
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            return true;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                return true;
            }
        }
        false
    };

    if !SMALL_PRIMES.iter().all(|&a| witness(&BigUint::from(a))) {
        return false;
    }
    if n.bits() <= 81 {
        return true;
    }
    let span = n - 3u32;
    (0u32..24).all(|i| {
        let seed = hash::derive_seed(&[b"perimeter/miller-rabin", &n.to_bytes_be(), &i.to_be_bytes()]);
        let a = BigUint::from_bytes_be(&seed) % &span + &two;
        witness(&a)
    })
}
