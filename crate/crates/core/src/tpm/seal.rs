use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};

use super::{Digest, KeyId, PcrBank, PcrIndex, TpmError};

/// Expected register values a blob is bound to. One digest per selected index
/// holds by construction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PcrPolicy {
    expected: BTreeMap<PcrIndex, Digest>,
}

impl PcrPolicy {
    pub fn new(expected: BTreeMap<PcrIndex, Digest>) -> Self {
        PcrPolicy { expected }
    }

    /// Snapshot the current values of `selection` from `bank`.
    pub fn from_bank(bank: &PcrBank, selection: &[PcrIndex]) -> Self {
        PcrPolicy {
            expected: selection
                .iter()
                .map(|i| (*i, bank.read(*i).clone()))
                .collect(),
        }
    }

    pub fn selection(&self) -> BTreeSet<PcrIndex> {
        self.expected.keys().copied().collect()
    }

    pub fn expected(&self) -> &BTreeMap<PcrIndex, Digest> {
        &self.expected
    }

    pub fn includes(&self, index: PcrIndex) -> bool {
        self.expected.contains_key(&index)
    }

    pub fn is_satisfied_by(&self, bank: &PcrBank) -> bool {
        self.expected.iter().all(|(i, d)| bank.read(*i) == d)
    }

    /// Bytes bound into the ciphertext as associated data.
    pub(crate) fn binding_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (index, digest) in &self.expected {
            out.push(index.value());
            out.push(digest.len() as u8);
            out.extend_from_slice(digest.as_bytes());
        }
        out
    }
}

/// Per-seal random token tying a blob to the TPM that produced it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NonceTag(pub [u8; 20]);

impl NonceTag {
    pub const LEN: usize = 20;
}

impl fmt::Debug for NonceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NonceTag({})", hex::encode(self.0))
    }
}

/// Output of `seal`: authenticated ciphertext plus everything the TPM needs to
/// decide whether to release it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedBlob {
    pub ciphertext: Vec<u8>,
    pub policy: PcrPolicy,
    pub nonce_tag: NonceTag,
    pub sk_id: KeyId,
}

fn associated_data(policy: &PcrPolicy, tag: &NonceTag, sk_id: KeyId) -> Vec<u8> {
    let mut aad = policy.binding_bytes();
    aad.extend_from_slice(&tag.0);
    aad.extend_from_slice(&sk_id.0.to_be_bytes());
    aad
}

fn aead_nonce(tag: &NonceTag) -> Nonce {
    *Nonce::from_slice(&tag.0[..12])
}

pub(crate) fn encrypt(
    secret: &[u8; 32],
    policy: &PcrPolicy,
    tag: &NonceTag,
    sk_id: KeyId,
    plaintext: &[u8],
) -> Vec<u8> {
    let cipher = ChaCha20Poly1305::new(Key::from_slice(secret));
    let aad = associated_data(policy, tag, sk_id);
    cipher
        .encrypt(
            &aead_nonce(tag),
            Payload {
                msg: plaintext,
                aad: &aad,
            },
        )
        .expect("in-memory encryption cannot fail")
}

pub(crate) fn decrypt(secret: &[u8; 32], blob: &SealedBlob) -> Result<Vec<u8>, TpmError> {
    let cipher = ChaCha20Poly1305::new(Key::from_slice(secret));
    let aad = associated_data(&blob.policy, &blob.nonce_tag, blob.sk_id);
    cipher
        .decrypt(
            &aead_nonce(&blob.nonce_tag),
            Payload {
                msg: &blob.ciphertext,
                aad: &aad,
            },
        )
        .map_err(|_| TpmError::IntegrityFailure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tpm::DigestAlg;

    fn blob(secret: &[u8; 32]) -> SealedBlob {
        let policy =
            PcrPolicy::from_bank(&PcrBank::new(DigestAlg::Sha1), &[PcrIndex::from_const(20)]);
        let tag = NonceTag([3; 20]);
        let ciphertext = encrypt(secret, &policy, &tag, KeyId(1), b"secret data");
        SealedBlob {
            ciphertext,
            policy,
            nonce_tag: tag,
            sk_id: KeyId(1),
        }
    }

    #[test]
    fn round_trip() {
        let b = blob(&[7; 32]);
        assert_eq!(decrypt(&[7; 32], &b).unwrap(), b"secret data");
    }

    #[test]
    fn wrong_key_fails_authentication() {
        let b = blob(&[7; 32]);
        assert_eq!(decrypt(&[8; 32], &b), Err(TpmError::IntegrityFailure));
    }

    #[test]
    fn policy_is_bound() {
        let mut b = blob(&[7; 32]);
        b.policy = PcrPolicy::default();
        assert_eq!(decrypt(&[7; 32], &b), Err(TpmError::IntegrityFailure));
    }
}
