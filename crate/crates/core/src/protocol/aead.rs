//! AES-128-GCM envelope: `iv (12 bytes) || ciphertext || tag (16 bytes)`.
//!
//! The IV is derived from the session nonce and a per-message sequence number,
//! so each (session, message) pair gets its own IV without extra randomness.

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes128Gcm, Nonce as GcmNonce};
use thiserror::Error;

use super::wire::{HandshakeMessage, WireError};
use super::{Nonce, SymmetricKey};
use crate::hash;

pub const IV_LEN: usize = 12;
pub const TAG_LEN: usize = 16;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum OpenError {
    #[error("integrity failure")]
    Integrity,
    #[error("malformed body: {0}")]
    Malformed(#[from] WireError),
}

fn cipher(key: &SymmetricKey) -> Aes128Gcm {
    Aes128Gcm::new_from_slice(&key.0).expect("16-byte key")
}

pub fn seal(key: &SymmetricKey, plaintext: &[u8], session_nonce: &Nonce, seq: u32) -> Vec<u8> {
    let derived = hash::derive_seed(&[b"perimeter/aead-iv", &session_nonce.0, &seq.to_be_bytes()]);
    let mut iv = [0u8; IV_LEN];
    iv.copy_from_slice(&derived[..IV_LEN]);
    let body = cipher(key)
        .encrypt(&GcmNonce::from(iv), plaintext)
        .expect("AES-GCM encryption is infallible for small messages");
    let mut out = Vec::with_capacity(IV_LEN + body.len());
    out.extend_from_slice(&iv);
    out.extend_from_slice(&body);
    out
}

pub fn open(key: &SymmetricKey, envelope: &[u8]) -> Result<Vec<u8>, OpenError> {
    if envelope.len() < IV_LEN + TAG_LEN {
        return Err(OpenError::Integrity);
    }
    let (iv, body) = envelope.split_at(IV_LEN);
    let iv: [u8; IV_LEN] = iv.try_into().expect("split at IV_LEN");
    cipher(key).decrypt(&GcmNonce::from(iv), body).map_err(|_| OpenError::Integrity)
}

/// Sequence number for the `round`-th message of `kind` within a session.
pub fn sequence(kind: u8, round: u32) -> u32 {
    (round << 8) | kind as u32
}

pub fn seal_message(key: &SymmetricKey, msg: &HandshakeMessage, round: u32) -> Result<Vec<u8>, WireError> {
    let body = msg.encode()?;
    Ok(seal(key, &body, &msg.nonce(), sequence(msg.kind() as u8, round)))
}

pub fn open_message(key: &SymmetricKey, envelope: &[u8]) -> Result<HandshakeMessage, OpenError> {
    let body = open(key, envelope)?;
    Ok(HandshakeMessage::decode(&body)?)
}
