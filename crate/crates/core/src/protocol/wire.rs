//! Binary bodies of the handshake messages (the plaintext inside the AEAD envelope).
//!
//! One kind byte, then the fields in declaration order, big-endian:
//! timestamps are `i64` microseconds, digests 32 bytes, nonces, identities and
//! challenges 16 bytes, gait three `i64` fixed-point values (micro-units).
//! An optional commitment extension trails the fixed fields:
//!
//! ```text
//! offer:     0x00 | 0x01 X | 0x02 C
//! challenge: 0x00 | 0x01 k
//! answer:    0x00 | 0x01 rho | 0x02 rho1 rho2
//! ```
//!
//! with each integer written as a `u16` byte length followed by its big-endian bytes.

use num_bigint::BigUint;
use thiserror::Error;

use super::backend::{CommitAnswer, CommitOffer};
use super::keyfob::GaitObservation;
use super::{Nonce, CHALLENGE_LEN, ID_LEN, NONCE_LEN};
use crate::edr::EdrDigest;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    BasicRequest = 0x01,
    BasicChallenge = 0x02,
    BasicResponse = 0x03,
    KeyfobRequest = 0x04,
    KeyfobChallenge = 0x05,
    KeyfobResponse = 0x06,
}

impl MessageKind {
    pub fn from_byte(b: u8) -> Option<Self> {
        Some(match b {
            0x01 => MessageKind::BasicRequest,
            0x02 => MessageKind::BasicChallenge,
            0x03 => MessageKind::BasicResponse,
            0x04 => MessageKind::KeyfobRequest,
            0x05 => MessageKind::KeyfobChallenge,
            0x06 => MessageKind::KeyfobResponse,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::BasicRequest => "basic-request",
            MessageKind::BasicChallenge => "basic-challenge",
            MessageKind::BasicResponse => "basic-response",
            MessageKind::KeyfobRequest => "keyfob-request",
            MessageKind::KeyfobChallenge => "keyfob-challenge",
            MessageKind::KeyfobResponse => "keyfob-response",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicRequest {
    pub edr_digest: EdrDigest,
    pub id_pd: [u8; ID_LEN],
    pub nonce: Nonce,
    pub commitment: Option<CommitOffer>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicChallenge {
    pub challenge: [u8; CHALLENGE_LEN],
    pub id_v: [u8; ID_LEN],
    pub nonce: Nonce,
    pub commit_challenge: Option<BigUint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicResponse {
    pub response: [u8; 32],
    pub nonce: Nonce,
    pub commit_answer: Option<CommitAnswer>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyfobRequest {
    pub edr_digest: EdrDigest,
    pub t_kf_send: i64,
    pub nonce: Nonce,
    pub commitment: Option<CommitOffer>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyfobChallenge {
    pub hashed_vehicle_id: [u8; 32],
    pub challenge: [u8; CHALLENGE_LEN],
    pub t_v_receive: i64,
    pub t_v_send: i64,
    pub nonce: Nonce,
    pub commit_challenge: Option<BigUint>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyfobResponse {
    pub hashed_response: [u8; 32],
    pub gait: GaitObservation,
    pub t_kf_cur: i64,
    pub nonce: Nonce,
    pub commit_answer: Option<CommitAnswer>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HandshakeMessage {
    BasicRequest(BasicRequest),
    BasicChallenge(BasicChallenge),
    BasicResponse(BasicResponse),
    KeyfobRequest(KeyfobRequest),
    KeyfobChallenge(KeyfobChallenge),
    KeyfobResponse(KeyfobResponse),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("message truncated")]
    Truncated,
    #[error("unknown message kind 0x{0:02x}")]
    UnknownKind(u8),
    #[error("unknown extension tag 0x{0:02x}")]
    UnknownExtension(u8),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("integer field longer than 65535 bytes")]
    IntegerTooLong,
}

impl HandshakeMessage {
    pub fn kind(&self) -> MessageKind {
        match self {
            HandshakeMessage::BasicRequest(_) => MessageKind::BasicRequest,
            HandshakeMessage::BasicChallenge(_) => MessageKind::BasicChallenge,
            HandshakeMessage::BasicResponse(_) => MessageKind::BasicResponse,
            HandshakeMessage::KeyfobRequest(_) => MessageKind::KeyfobRequest,
            HandshakeMessage::KeyfobChallenge(_) => MessageKind::KeyfobChallenge,
            HandshakeMessage::KeyfobResponse(_) => MessageKind::KeyfobResponse,
        }
    }

    pub fn nonce(&self) -> Nonce {
        match self {
            HandshakeMessage::BasicRequest(m) => m.nonce,
            HandshakeMessage::BasicChallenge(m) => m.nonce,
            HandshakeMessage::BasicResponse(m) => m.nonce,
            HandshakeMessage::KeyfobRequest(m) => m.nonce,
            HandshakeMessage::KeyfobChallenge(m) => m.nonce,
            HandshakeMessage::KeyfobResponse(m) => m.nonce,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut w = Writer(vec![self.kind() as u8]);
        match self {
            HandshakeMessage::BasicRequest(m) => {
                w.bytes(&m.edr_digest.0);
                w.bytes(&m.id_pd);
                w.bytes(&m.nonce.0);
                w.offer(m.commitment.as_ref())?;
            }
            HandshakeMessage::BasicChallenge(m) => {
                w.bytes(&m.challenge);
                w.bytes(&m.id_v);
                w.bytes(&m.nonce.0);
                w.challenge(m.commit_challenge.as_ref())?;
            }
            HandshakeMessage::BasicResponse(m) => {
                w.bytes(&m.response);
                w.bytes(&m.nonce.0);
                w.answer(m.commit_answer.as_ref())?;
            }
            HandshakeMessage::KeyfobRequest(m) => {
                w.bytes(&m.edr_digest.0);
                w.i64(m.t_kf_send);
                w.bytes(&m.nonce.0);
                w.offer(m.commitment.as_ref())?;
            }
            HandshakeMessage::KeyfobChallenge(m) => {
                w.bytes(&m.hashed_vehicle_id);
                w.bytes(&m.challenge);
                w.i64(m.t_v_receive);
                w.i64(m.t_v_send);
                w.bytes(&m.nonce.0);
                w.challenge(m.commit_challenge.as_ref())?;
            }
            HandshakeMessage::KeyfobResponse(m) => {
                w.bytes(&m.hashed_response);
                w.i64(m.gait.displacement_um);
                w.i64(m.gait.duration_us);
                w.i64(m.gait.velocity_umps);
                w.i64(m.t_kf_cur);
                w.bytes(&m.nonce.0);
                w.answer(m.commit_answer.as_ref())?;
            }
        }
        Ok(w.0)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader(bytes);
        let kind_byte = r.u8()?;
        let kind = MessageKind::from_byte(kind_byte).ok_or(WireError::UnknownKind(kind_byte))?;
        let msg = match kind {
            MessageKind::BasicRequest => HandshakeMessage::BasicRequest(BasicRequest {
                edr_digest: EdrDigest(r.array()?),
                id_pd: r.array()?,
                nonce: Nonce(r.array::<NONCE_LEN>()?),
                commitment: r.offer()?,
            }),
            MessageKind::BasicChallenge => HandshakeMessage::BasicChallenge(BasicChallenge {
                challenge: r.array()?,
                id_v: r.array()?,
                nonce: Nonce(r.array()?),
                commit_challenge: r.challenge()?,
            }),
            MessageKind::BasicResponse => HandshakeMessage::BasicResponse(BasicResponse {
                response: r.array()?,
                nonce: Nonce(r.array()?),
                commit_answer: r.answer()?,
            }),
            MessageKind::KeyfobRequest => HandshakeMessage::KeyfobRequest(KeyfobRequest {
                edr_digest: EdrDigest(r.array()?),
                t_kf_send: r.i64()?,
                nonce: Nonce(r.array()?),
                commitment: r.offer()?,
            }),
            MessageKind::KeyfobChallenge => HandshakeMessage::KeyfobChallenge(KeyfobChallenge {
                hashed_vehicle_id: r.array()?,
                challenge: r.array()?,
                t_v_receive: r.i64()?,
                t_v_send: r.i64()?,
                nonce: Nonce(r.array()?),
                commit_challenge: r.challenge()?,
            }),
            MessageKind::KeyfobResponse => HandshakeMessage::KeyfobResponse(KeyfobResponse {
                hashed_response: r.array()?,
                gait: GaitObservation {
                    displacement_um: r.i64()?,
                    duration_us: r.i64()?,
                    velocity_umps: r.i64()?,
                },
                t_kf_cur: r.i64()?,
                nonce: Nonce(r.array()?),
                commit_answer: r.answer()?,
            }),
        };
        if !r.0.is_empty() {
            return Err(WireError::TrailingBytes(r.0.len()));
        }
        Ok(msg)
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_be_bytes());
    }

    fn int(&mut self, v: &BigUint) -> Result<(), WireError> {
        let bytes = v.to_bytes_be();
        let len = u16::try_from(bytes.len()).map_err(|_| WireError::IntegerTooLong)?;
        self.0.extend_from_slice(&len.to_be_bytes());
        self.0.extend_from_slice(&bytes);
        Ok(())
    }

    fn offer(&mut self, offer: Option<&CommitOffer>) -> Result<(), WireError> {
        match offer {
            None => self.0.push(0),
            Some(CommitOffer::Schnorr { x }) => {
                self.0.push(1);
                self.int(x)?;
            }
            Some(CommitOffer::Pedersen { c }) => {
                self.0.push(2);
                self.int(c)?;
            }
        }
        Ok(())
    }

    fn challenge(&mut self, k: Option<&BigUint>) -> Result<(), WireError> {
        match k {
            None => self.0.push(0),
            Some(k) => {
                self.0.push(1);
                self.int(k)?;
            }
        }
        Ok(())
    }

    fn answer(&mut self, answer: Option<&CommitAnswer>) -> Result<(), WireError> {
        match answer {
            None => self.0.push(0),
            Some(CommitAnswer::Schnorr { rho }) => {
                self.0.push(1);
                self.int(rho)?;
            }
            Some(CommitAnswer::Pedersen { rho1, rho2 }) => {
                self.0.push(2);
                self.int(rho1)?;
                self.int(rho2)?;
            }
        }
        Ok(())
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], WireError> {
        if self.0.len() < n {
            return Err(WireError::Truncated);
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    fn i64(&mut self) -> Result<i64, WireError> {
        Ok(i64::from_be_bytes(self.array()?))
    }

    fn int(&mut self) -> Result<BigUint, WireError> {
        let len = u16::from_be_bytes(self.array()?) as usize;
        Ok(BigUint::from_bytes_be(self.take(len)?))
    }

    fn offer(&mut self) -> Result<Option<CommitOffer>, WireError> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(CommitOffer::Schnorr { x: self.int()? })),
            2 => Ok(Some(CommitOffer::Pedersen { c: self.int()? })),
            t => Err(WireError::UnknownExtension(t)),
        }
    }

    fn challenge(&mut self) -> Result<Option<BigUint>, WireError> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.int()?)),
            t => Err(WireError::UnknownExtension(t)),
        }
    }

    fn answer(&mut self) -> Result<Option<CommitAnswer>, WireError> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(CommitAnswer::Schnorr { rho: self.int()? })),
            2 => Ok(Some(CommitAnswer::Pedersen { rho1: self.int()?, rho2: self.int()? })),
            t => Err(WireError::UnknownExtension(t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_response() -> HandshakeMessage {
        HandshakeMessage::KeyfobResponse(KeyfobResponse {
            hashed_response: [7u8; 32],
            gait: GaitObservation { displacement_um: 3_000_000, duration_us: 2_000_000, velocity_umps: 1_500_000 },
            t_kf_cur: 2_000_000,
            nonce: Nonce([9u8; 16]),
            commit_answer: Some(CommitAnswer::Pedersen { rho1: 8u32.into(), rho2: 5u32.into() }),
        })
    }

    #[test]
    fn keyfob_request_layout() {
        let msg = HandshakeMessage::KeyfobRequest(KeyfobRequest {
            edr_digest: EdrDigest([1u8; 32]),
            t_kf_send: 258,
            nonce: Nonce([2u8; 16]),
            commitment: None,
        });
        let bytes = msg.encode().unwrap();
        assert_eq!(bytes.len(), 1 + 32 + 8 + 16 + 1);
        assert_eq!(bytes[0], 0x04);
        assert_eq!(&bytes[33..41], &258i64.to_be_bytes());
        assert_eq!(bytes[57], 0);
        assert_eq!(HandshakeMessage::decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn response_with_extension_round_trips() {
        let msg = sample_response();
        let bytes = msg.encode().unwrap();
        // 1 + 32 + 24 + 8 + 16, then tag 2 and two 1-byte integers with u16 lengths
        assert_eq!(&bytes[81..], &[2, 0, 1, 8, 0, 1, 5]);
        assert_eq!(HandshakeMessage::decode(&bytes).unwrap(), msg);
    }

    #[test]
    fn decode_errors() {
        let bytes = sample_response().encode().unwrap();
        assert_eq!(HandshakeMessage::decode(&bytes[..40]), Err(WireError::Truncated));
        assert_eq!(HandshakeMessage::decode(&[0x09]), Err(WireError::UnknownKind(9)));
        let mut extra = bytes.clone();
        extra.push(0);
        assert_eq!(HandshakeMessage::decode(&extra), Err(WireError::TrailingBytes(1)));
        let mut bad_ext = bytes[..81].to_vec();
        bad_ext.push(7);
        assert_eq!(HandshakeMessage::decode(&bad_ext), Err(WireError::UnknownExtension(7)));
    }

    proptest! {
        #[test]
        fn challenge_round_trip(
            challenge in any::<[u8; 16]>(),
            recv in any::<i64>(),
            send in any::<i64>(),
            nonce in any::<[u8; 16]>(),
            k in proptest::option::of(any::<u64>()),
        ) {
            let msg = HandshakeMessage::KeyfobChallenge(KeyfobChallenge {
                hashed_vehicle_id: [3u8; 32],
                challenge,
                t_v_receive: recv,
                t_v_send: send,
                nonce: Nonce(nonce),
                commit_challenge: k.map(BigUint::from),
            });
            prop_assert_eq!(HandshakeMessage::decode(&msg.encode().unwrap()).unwrap(), msg);
        }
    }
}
