use std::fmt;

use serde::{Deserialize, Serialize};

use super::{put_quote, read_quote, CodecError, Reader};
use crate::identity::{ActivationKey, ChallengeNonce, Credentials};
use crate::tpm::{AikPublic, AttestationQuote, Digest, DigestAlg};

/// Message kind byte.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WireKind {
    RegistrationRequest,
    LoginRequest1,
    LoginRequest2,
    CredentialLogin,
    Challenge,
    Grant,
    Deny,
    /// Server authentication, first frame of every session.
    ServerHello,
    /// Quote and optional AIK public key accompanying a request.
    Evidence,
}

impl WireKind {
    pub const ALL: [WireKind; 9] = [
        WireKind::RegistrationRequest,
        WireKind::LoginRequest1,
        WireKind::LoginRequest2,
        WireKind::CredentialLogin,
        WireKind::Challenge,
        WireKind::Grant,
        WireKind::Deny,
        WireKind::ServerHello,
        WireKind::Evidence,
    ];

    pub const fn code(self) -> u8 {
        match self {
            WireKind::RegistrationRequest => 0x01,
            WireKind::LoginRequest1 => 0x02,
            WireKind::LoginRequest2 => 0x03,
            WireKind::CredentialLogin => 0x04,
            WireKind::Challenge => 0x05,
            WireKind::Grant => 0x06,
            WireKind::Deny => 0x07,
            WireKind::ServerHello => 0x10,
            WireKind::Evidence => 0x11,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub const fn name(self) -> &'static str {
        match self {
            WireKind::RegistrationRequest => "RegistrationRequest",
            WireKind::LoginRequest1 => "LoginRequest1",
            WireKind::LoginRequest2 => "LoginRequest2",
            WireKind::CredentialLogin => "CredentialLogin",
            WireKind::Challenge => "Challenge",
            WireKind::Grant => "Grant",
            WireKind::Deny => "Deny",
            WireKind::ServerHello => "ServerHello",
            WireKind::Evidence => "Evidence",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Payload length for fixed-layout kinds given the bank's digest length;
    /// `None` for `Evidence`, whose length depends on the quote.
    pub const fn payload_len(self, digest_len: usize) -> Option<usize> {
        match self {
            WireKind::RegistrationRequest => {
                Some(ActivationKey::LEN + digest_len + Credentials::LEN)
            }
            WireKind::LoginRequest1 => Some(digest_len + ChallengeNonce::LEN),
            WireKind::LoginRequest2 => Some(digest_len + ChallengeNonce::LEN + Credentials::LEN),
            WireKind::CredentialLogin => Some(Credentials::LEN),
            WireKind::Challenge => Some(ChallengeNonce::LEN),
            WireKind::Grant => Some(32),
            WireKind::Deny => Some(1),
            WireKind::ServerHello => Some(32),
            WireKind::Evidence => None,
        }
    }
}

impl fmt::Display for WireKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Why the bank refused a request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DenyReason {
    BadSignature,
    UnknownComposite,
    Revoked,
    StaleNonce,
    BadCredentials,
    UnknownActivationKey,
    DuplicateRegistration,
    MissingEvidence,
    Malformed,
}

impl DenyReason {
    const ALL: [DenyReason; 9] = [
        DenyReason::BadSignature,
        DenyReason::UnknownComposite,
        DenyReason::Revoked,
        DenyReason::StaleNonce,
        DenyReason::BadCredentials,
        DenyReason::UnknownActivationKey,
        DenyReason::DuplicateRegistration,
        DenyReason::MissingEvidence,
        DenyReason::Malformed,
    ];

    pub const fn code(self) -> u8 {
        match self {
            DenyReason::BadSignature => 1,
            DenyReason::UnknownComposite => 2,
            DenyReason::Revoked => 3,
            DenyReason::StaleNonce => 4,
            DenyReason::BadCredentials => 5,
            DenyReason::UnknownActivationKey => 6,
            DenyReason::DuplicateRegistration => 7,
            DenyReason::MissingEvidence => 8,
            DenyReason::Malformed => 9,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// activation key (20) | PIN digest | credential block (44)
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegistrationPayload {
    pub activation_key: ActivationKey,
    pub pin_digest: Digest,
    pub credentials: Credentials,
}

/// PCR composite | qualifying nonce (20)
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoginAttestation {
    pub composite: Digest,
    pub nonce: ChallengeNonce,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub quote: AttestationQuote,
    /// Sent at registration only; logins use the key the bank registered.
    pub aik_public: Option<AikPublic>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireMessage {
    RegistrationRequest(RegistrationPayload),
    LoginRequest1(LoginAttestation),
    LoginRequest2(LoginAttestation, Credentials),
    CredentialLogin(Credentials),
    Challenge(ChallengeNonce),
    Grant([u8; 32]),
    Deny(DenyReason),
    /// SHA-256 fingerprint of the server's authentication token.
    ServerHello([u8; 32]),
    Evidence(Evidence),
}

impl WireMessage {
    pub fn kind(&self) -> WireKind {
        match self {
            WireMessage::RegistrationRequest(_) => WireKind::RegistrationRequest,
            WireMessage::LoginRequest1(_) => WireKind::LoginRequest1,
            WireMessage::LoginRequest2(..) => WireKind::LoginRequest2,
            WireMessage::CredentialLogin(_) => WireKind::CredentialLogin,
            WireMessage::Challenge(_) => WireKind::Challenge,
            WireMessage::Grant(_) => WireKind::Grant,
            WireMessage::Deny(_) => WireKind::Deny,
            WireMessage::ServerHello(_) => WireKind::ServerHello,
            WireMessage::Evidence(_) => WireKind::Evidence,
        }
    }

    /// Application payload, the part counted by byte accounting.
    pub fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            WireMessage::RegistrationRequest(p) => {
                out.extend_from_slice(p.activation_key.as_bytes());
                out.extend_from_slice(p.pin_digest.as_bytes());
                out.extend_from_slice(&p.credentials.to_bytes());
            }
            WireMessage::LoginRequest1(a) => put_attestation(&mut out, a),
            WireMessage::LoginRequest2(a, c) => {
                put_attestation(&mut out, a);
                out.extend_from_slice(&c.to_bytes());
            }
            WireMessage::CredentialLogin(c) => out.extend_from_slice(&c.to_bytes()),
            WireMessage::Challenge(n) => out.extend_from_slice(n.as_bytes()),
            WireMessage::Grant(t) | WireMessage::ServerHello(t) => out.extend_from_slice(t),
            WireMessage::Deny(r) => out.push(r.code()),
            WireMessage::Evidence(e) => {
                put_quote(&mut out, &e.quote);
                match &e.aik_public {
                    None => out.push(0),
                    Some(pk) => {
                        out.push(1);
                        out.extend_from_slice(pk.as_bytes());
                    }
                }
            }
        }
        out
    }
}

fn put_attestation(out: &mut Vec<u8>, a: &LoginAttestation) {
    out.extend_from_slice(a.composite.as_bytes());
    out.extend_from_slice(a.nonce.as_bytes());
}

/// kind (1) | payload
pub fn encode_wire(msg: &WireMessage) -> Vec<u8> {
    let payload = msg.payload();
    let mut out = Vec::with_capacity(1 + payload.len());
    out.push(msg.kind().code());
    out.extend_from_slice(&payload);
    out
}

/// Decode with the default SHA-1 layouts.
pub fn decode_wire(buf: &[u8]) -> Result<WireMessage, CodecError> {
    decode_wire_with(buf, DigestAlg::Sha1)
}

/// Decode with layouts sized for `alg` digests.
pub fn decode_wire_with(buf: &[u8], alg: DigestAlg) -> Result<WireMessage, CodecError> {
    let (&code, payload) = buf.split_first().ok_or(CodecError::Truncated)?;
    let kind = WireKind::from_code(code).ok_or(CodecError::UnknownKind(code))?;
    if let Some(expected) = kind.payload_len(alg.len()) {
        if payload.len() != expected {
            return Err(CodecError::WrongLength {
                kind: kind.name(),
                expected,
                actual: payload.len(),
            });
        }
    }
    let mut r = Reader::new(payload);
    let d = alg.len();
    let msg = match kind {
        WireKind::RegistrationRequest => WireMessage::RegistrationRequest(RegistrationPayload {
            activation_key: ActivationKey(r.array()?),
            pin_digest: Digest::from_bytes(r.bytes(d)?),
            credentials: read_credentials(&mut r)?,
        }),
        WireKind::LoginRequest1 => WireMessage::LoginRequest1(read_attestation(&mut r, d)?),
        WireKind::LoginRequest2 => {
            let a = read_attestation(&mut r, d)?;
            WireMessage::LoginRequest2(a, read_credentials(&mut r)?)
        }
        WireKind::CredentialLogin => WireMessage::CredentialLogin(read_credentials(&mut r)?),
        WireKind::Challenge => WireMessage::Challenge(ChallengeNonce(r.array()?)),
        WireKind::Grant => WireMessage::Grant(r.array()?),
        WireKind::Deny => WireMessage::Deny(
            DenyReason::from_code(r.u8()?).ok_or(CodecError::BadField("deny reason"))?,
        ),
        WireKind::ServerHello => WireMessage::ServerHello(r.array()?),
        WireKind::Evidence => {
            let quote = read_quote(&mut r)?;
            let aik_public = match r.u8()? {
                0 => None,
                1 => Some(AikPublic(r.array()?)),
                _ => return Err(CodecError::BadField("evidence key flag")),
            };
            WireMessage::Evidence(Evidence { quote, aik_public })
        }
    };
    r.finish()?;
    Ok(msg)
}

fn read_credentials(r: &mut Reader<'_>) -> Result<Credentials, CodecError> {
    Credentials::from_bytes(r.bytes(Credentials::LEN)?).ok_or(CodecError::BadField("credentials"))
}

fn read_attestation(r: &mut Reader<'_>, digest_len: usize) -> Result<LoginAttestation, CodecError> {
    Ok(LoginAttestation {
        composite: Digest::from_bytes(r.bytes(digest_len)?),
        nonce: ChallengeNonce(r.array()?),
    })
}
