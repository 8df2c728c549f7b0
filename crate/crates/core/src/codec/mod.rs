//! Big-endian marshaling of TPM commands and responses, and of the messages
//! exchanged between the app and the bank.
//!
//! Every decoder is strict: a buffer decodes only if it is exactly the
//! encoding of some value, so `encode(decode(buf)) == buf` whenever decoding
//! succeeds. Byte layouts are documented in `FORMATS.md`.

mod command;
mod response;
mod wire;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::tpm::{
    AikPublic, AttestationQuote, Digest, KeyHandle, KeyId, KeyKind, NonceTag, PcrIndex, PcrPolicy,
    SealedBlob, PCR_COUNT,
};

pub use command::{
    decode_command, encode_command, CommandCode, CommandHeader, CommandParams, TpmCommand,
    COMMAND_HEADER_LEN, TAG_NO_SESSIONS,
};
pub use response::{decode_response, encode_response, ResponseBody, ResponseKind};
pub use wire::{
    decode_wire, decode_wire_with, encode_wire, DenyReason, Evidence, LoginAttestation,
    RegistrationPayload, WireKind, WireMessage,
};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("buffer truncated")]
    Truncated,
    #[error("size field {declared} does not match buffer length {actual}")]
    SizeMismatch { declared: u32, actual: usize },
    #[error("unknown command code {0:#x}")]
    UnknownCode(u32),
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("unexpected tag {0:#06x}")]
    BadTag(u16),
    #[error("unsupported locality {0}")]
    BadLocality(u8),
    #[error("invalid field: {0}")]
    BadField(&'static str),
    #[error("unknown message kind {0:#04x}")]
    UnknownKind(u8),
    #[error("{kind} payload must be {expected} bytes, got {actual}")]
    WrongLength {
        kind: &'static str,
        expected: usize,
        actual: usize,
    },
}

/// Cursor over an input buffer.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated);
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.bytes(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_be_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    /// `u16` length followed by that many bytes (a TPM2B).
    pub fn sized(&mut self) -> Result<&'a [u8], CodecError> {
        let n = self.u16()? as usize;
        self.bytes(n)
    }

    pub fn finish(self) -> Result<(), CodecError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

pub(crate) fn put_sized(out: &mut Vec<u8>, bytes: &[u8]) {
    let len = u16::try_from(bytes.len()).expect("sized field longer than u16::MAX");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(bytes);
}

const SELECT_BYTES: usize = PCR_COUNT / 8;

/// Three-byte bitmap, bit `i % 8` of byte `i / 8` selects PCR `i`.
pub(crate) fn put_selection<'a>(
    out: &mut Vec<u8>,
    selection: impl IntoIterator<Item = &'a PcrIndex>,
) {
    let mut map = [0u8; SELECT_BYTES];
    for i in selection {
        let v = i.value() as usize;
        map[v / 8] |= 1 << (v % 8);
    }
    out.extend_from_slice(&map);
}

pub(crate) fn read_selection(r: &mut Reader<'_>) -> Result<BTreeSet<PcrIndex>, CodecError> {
    let map: [u8; SELECT_BYTES] = r.array()?;
    Ok(PcrIndex::all()
        .filter(|i| {
            let v = i.value() as usize;
            map[v / 8] & (1 << (v % 8)) != 0
        })
        .collect())
}

pub(crate) fn put_policy(out: &mut Vec<u8>, policy: &PcrPolicy) {
    put_selection(out, policy.expected().keys());
    for digest in policy.expected().values() {
        put_sized(out, digest.as_bytes());
    }
}

pub(crate) fn read_policy(r: &mut Reader<'_>) -> Result<PcrPolicy, CodecError> {
    let selection = read_selection(r)?;
    let mut expected = std::collections::BTreeMap::new();
    for index in selection {
        expected.insert(index, Digest::from_bytes(r.sized()?));
    }
    Ok(PcrPolicy::new(expected))
}

pub(crate) fn put_blob(out: &mut Vec<u8>, blob: &SealedBlob) {
    put_sized(out, &blob.ciphertext);
    put_policy(out, &blob.policy);
    out.extend_from_slice(&blob.nonce_tag.0);
    out.extend_from_slice(&blob.sk_id.0.to_be_bytes());
}

pub(crate) fn read_blob(r: &mut Reader<'_>) -> Result<SealedBlob, CodecError> {
    let ciphertext = r.sized()?.to_vec();
    let policy = read_policy(r)?;
    let nonce_tag = NonceTag(r.array()?);
    let sk_id = KeyId(r.u32()?);
    Ok(SealedBlob {
        ciphertext,
        policy,
        nonce_tag,
        sk_id,
    })
}

/// Standalone encoding of a sealed blob, as stored on the device.
pub fn encode_sealed_blob(blob: &SealedBlob) -> Vec<u8> {
    let mut out = Vec::new();
    put_blob(&mut out, blob);
    out
}

pub fn decode_sealed_blob(buf: &[u8]) -> Result<SealedBlob, CodecError> {
    let mut r = Reader::new(buf);
    let blob = read_blob(&mut r)?;
    r.finish()?;
    Ok(blob)
}

pub(crate) fn put_quote(out: &mut Vec<u8>, quote: &AttestationQuote) {
    put_selection(out, &quote.selection);
    put_sized(out, quote.composite.as_bytes());
    put_sized(out, &quote.qualifying_nonce);
    put_sized(out, &quote.signature);
}

pub(crate) fn read_quote(r: &mut Reader<'_>) -> Result<AttestationQuote, CodecError> {
    let selection = read_selection(r)?;
    if selection.is_empty() {
        return Err(CodecError::BadField("empty PCR selection"));
    }
    Ok(AttestationQuote {
        selection,
        composite: Digest::from_bytes(r.sized()?),
        qualifying_nonce: r.sized()?.to_vec(),
        signature: r.sized()?.to_vec(),
    })
}

pub(crate) fn put_key(out: &mut Vec<u8>, key: &KeyHandle) {
    out.extend_from_slice(&key.id.0.to_be_bytes());
    out.push(key.kind.code());
    put_sized(out, key.public.as_ref().map(|p| &p.0[..]).unwrap_or(&[]));
}

pub(crate) fn read_key(r: &mut Reader<'_>) -> Result<KeyHandle, CodecError> {
    let id = KeyId(r.u32()?);
    let kind = KeyKind::from_code(r.u8()?).ok_or(CodecError::BadField("key kind"))?;
    let public = r.sized()?;
    let public = match (kind, public.len()) {
        (KeyKind::Storage, 0) => None,
        (KeyKind::Attestation, AikPublic::LEN) => {
            Some(AikPublic(public.try_into().expect("length checked")))
        }
        _ => return Err(CodecError::BadField("key public area")),
    };
    Ok(KeyHandle { id, kind, public })
}
