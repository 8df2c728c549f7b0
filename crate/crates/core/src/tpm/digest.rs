use std::fmt;

use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::{Digest as _, Sha256};

/// Hash algorithm of a PCR bank.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DigestAlg {
    #[default]
    Sha1,
    Sha256,
}

#[allow(clippy::len_without_is_empty)]
impl DigestAlg {
    pub const fn len(self) -> usize {
        match self {
            DigestAlg::Sha1 => 20,
            DigestAlg::Sha256 => 32,
        }
    }

    /// TCG algorithm identifier (`TPM_ALG_ID`).
    pub const fn tpm_id(self) -> u16 {
        match self {
            DigestAlg::Sha1 => 0x0004,
            DigestAlg::Sha256 => 0x000B,
        }
    }

    pub fn from_tpm_id(id: u16) -> Option<Self> {
        match id {
            0x0004 => Some(DigestAlg::Sha1),
            0x000B => Some(DigestAlg::Sha256),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DigestAlg::Sha1 => "Sha1",
            DigestAlg::Sha256 => "Sha256",
        }
    }

    /// All-zero digest, the reset value of every PCR.
    pub fn zero(self) -> Digest {
        Digest(vec![0; self.len()])
    }

    pub fn digest(self, data: &[u8]) -> Digest {
        self.digest_parts(&[data])
    }

    /// Digest of the concatenation of `parts`.
    pub fn digest_parts(self, parts: &[&[u8]]) -> Digest {
        match self {
            DigestAlg::Sha1 => {
                let mut h = Sha1::new();
                for p in parts {
                    h.update(p);
                }
                Digest(h.finalize().to_vec())
            }
            DigestAlg::Sha256 => {
                let mut h = Sha256::new();
                for p in parts {
                    h.update(p);
                }
                Digest(h.finalize().to_vec())
            }
        }
    }

    /// One extend step: `H(old || H(data))`.
    pub fn extend(self, old: &Digest, data: &[u8]) -> Digest {
        let inner = self.digest(data);
        self.digest_parts(&[old.as_bytes(), inner.as_bytes()])
    }
}

impl fmt::Display for DigestAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A hash value. Length is whatever the producing algorithm emits.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digest(Vec<u8>);

impl Digest {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        Digest(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }
}

impl AsRef<[u8]> for Digest {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_match_algorithm() {
        assert_eq!(DigestAlg::Sha1.digest(b"x").len(), 20);
        assert_eq!(DigestAlg::Sha256.digest(b"x").len(), 32);
        assert_eq!(DigestAlg::Sha1.zero().len(), 20);
        assert!(DigestAlg::Sha256.zero().is_zero());
    }

    #[test]
    fn parts_equal_concatenation() {
        let alg = DigestAlg::Sha1;
        assert_eq!(alg.digest_parts(&[b"ab", b"c"]), alg.digest(b"abc"));
    }

    #[test]
    fn alg_ids_round_trip() {
        for alg in [DigestAlg::Sha1, DigestAlg::Sha256] {
            assert_eq!(DigestAlg::from_tpm_id(alg.tpm_id()), Some(alg));
        }
        assert_eq!(DigestAlg::from_tpm_id(0x0012), None);
    }
}
