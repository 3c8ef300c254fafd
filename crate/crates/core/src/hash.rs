//! SHA-256 helpers shared by every party, with per-thread operation counters.
//!
//! Protocol code calls [`digest`] and [`prf`] for every hash it is charged
//! for; seed derivation and AEAD internals go through [`derive_seed`] and are
//! not counted.

use std::cell::Cell;

use sha2::{Digest, Sha256};

/// Name written into trace and report headers.
pub const HASH_NAME: &str = "sha-256";

pub const DIGEST_LEN: usize = 32;

pub type Digest32 = [u8; DIGEST_LEN];

thread_local! {
    static DIGESTS: Cell<u64> = const { Cell::new(0) };
    static EXPONENTIATIONS: Cell<u64> = const { Cell::new(0) };
}

/// Hash the concatenation of `parts`. Counted.
pub fn digest(parts: &[&[u8]]) -> Digest32 {
    DIGESTS.with(|c| c.set(c.get() + 1));
    uncounted(parts)
}

/// Keyed PRF: `SHA-256(key || input)`. Counted as one digest.
pub fn prf(key: &[u8], input: &[u8]) -> Digest32 {
    digest(&[key, input])
}

/// Domain-separated hash used for seeds and IV derivation. Not counted.
pub fn derive_seed(parts: &[&[u8]]) -> Digest32 {
    uncounted(parts)
}

fn uncounted(parts: &[&[u8]]) -> Digest32 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}

pub(crate) fn count_exponentiation() {
    EXPONENTIATIONS.with(|c| c.set(c.get() + 1));
}

/// Snapshot of this thread's operation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpSnapshot {
    pub exponentiations: u64,
    pub digests: u64,
}

impl OpSnapshot {
    pub fn now() -> Self {
        OpSnapshot {
            exponentiations: EXPONENTIATIONS.with(Cell::get),
            digests: DIGESTS.with(Cell::get),
        }
    }

    /// Operations performed on this thread since `self` was taken.
    pub fn elapsed(self) -> OpSnapshot {
        let now = OpSnapshot::now();
        OpSnapshot {
            exponentiations: now.exponentiations - self.exponentiations,
            digests: now.digests - self.digests,
        }
    }
}
