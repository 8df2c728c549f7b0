use std::collections::BTreeMap;
use std::fmt;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use serde::{Deserialize, Serialize};

use super::TpmError;

/// Handle value of a key held by the TPM.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KeyId(pub u32);

impl fmt::Display for KeyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#010x}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeyKind {
    /// Seals data; never signs.
    Storage,
    /// Signs quotes (an AIK); never seals.
    Attestation,
}

impl KeyKind {
    pub const fn code(self) -> u8 {
        match self {
            KeyKind::Storage => 1,
            KeyKind::Attestation => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(KeyKind::Storage),
            2 => Some(KeyKind::Attestation),
            _ => None,
        }
    }
}

/// Public half of an attestation identity key.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct AikPublic(pub [u8; 32]);

impl AikPublic {
    pub const LEN: usize = 32;

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Strict Ed25519 verification; malformed keys or signatures verify false.
    pub fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.0) else {
            return false;
        };
        let Ok(sig) = Signature::from_slice(signature) else {
            return false;
        };
        key.verify_strict(message, &sig).is_ok()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for AikPublic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AikPublic({})", self.to_hex())
    }
}

/// Reference to a TPM key as seen by callers.
///
/// A handle is only a name: the TPM checks `id` and the key's real kind against
/// its own registry on every command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyHandle {
    pub id: KeyId,
    pub kind: KeyKind,
    /// Exported verification key, present for attestation keys.
    pub public: Option<AikPublic>,
}

impl KeyHandle {
    /// A bare reference, e.g. rebuilt from a persisted id.
    pub fn reference(id: KeyId, kind: KeyKind) -> Self {
        KeyHandle {
            id,
            kind,
            public: None,
        }
    }
}

pub(crate) enum KeyMaterial {
    Storage([u8; 32]),
    Attestation(SigningKey),
}

impl KeyMaterial {
    fn kind(&self) -> KeyKind {
        match self {
            KeyMaterial::Storage(_) => KeyKind::Storage,
            KeyMaterial::Attestation(_) => KeyKind::Attestation,
        }
    }
}

const FIRST_HANDLE: u32 = 0x8100_0000;

#[derive(Default)]
pub(crate) struct KeyRegistry {
    keys: BTreeMap<KeyId, KeyMaterial>,
    next: u32,
}

impl KeyRegistry {
    pub fn clear(&mut self) {
        self.keys.clear();
        self.next = 0;
    }

    pub fn insert(&mut self, kind: KeyKind, seed: [u8; 32]) -> KeyHandle {
        let id = KeyId(FIRST_HANDLE + self.next);
        self.next += 1;
        let material = match kind {
            KeyKind::Storage => KeyMaterial::Storage(seed),
            KeyKind::Attestation => KeyMaterial::Attestation(SigningKey::from_bytes(&seed)),
        };
        self.keys.insert(id, material);
        self.handle(id).expect("just inserted")
    }

    pub fn handle(&self, id: KeyId) -> Result<KeyHandle, TpmError> {
        let material = self.keys.get(&id).ok_or(TpmError::UnknownKey)?;
        let public = match material {
            KeyMaterial::Storage(_) => None,
            KeyMaterial::Attestation(sk) => Some(AikPublic(sk.verifying_key().to_bytes())),
        };
        Ok(KeyHandle {
            id,
            kind: material.kind(),
            public,
        })
    }

    pub fn storage_secret(&self, id: KeyId) -> Result<&[u8; 32], TpmError> {
        match self.keys.get(&id) {
            Some(KeyMaterial::Storage(secret)) => Ok(secret),
            Some(KeyMaterial::Attestation(_)) => Err(TpmError::WrongKeyKind),
            None => Err(TpmError::UnknownKey),
        }
    }

    pub fn sign(&self, id: KeyId, message: &[u8]) -> Result<[u8; 64], TpmError> {
        match self.keys.get(&id) {
            Some(KeyMaterial::Attestation(sk)) => Ok(sk.sign(message).to_bytes()),
            Some(KeyMaterial::Storage(_)) => Err(TpmError::WrongKeyKind),
            None => Err(TpmError::UnknownKey),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_are_separated() {
        let mut reg = KeyRegistry::default();
        let sk = reg.insert(KeyKind::Storage, [1; 32]);
        let aik = reg.insert(KeyKind::Attestation, [2; 32]);
        assert_ne!(sk.id, aik.id);
        assert!(sk.public.is_none());
        assert!(aik.public.is_some());
        assert_eq!(reg.sign(sk.id, b"m"), Err(TpmError::WrongKeyKind));
        assert_eq!(
            reg.storage_secret(aik.id).err(),
            Some(TpmError::WrongKeyKind)
        );
        assert_eq!(reg.sign(KeyId(7), b"m"), Err(TpmError::UnknownKey));
    }

    #[test]
    fn signature_verifies_under_exported_public() {
        let mut reg = KeyRegistry::default();
        let aik = reg.insert(KeyKind::Attestation, [9; 32]);
        let sig = reg.sign(aik.id, b"hello").unwrap();
        let public = aik.public.unwrap();
        assert!(public.verify(b"hello", &sig));
        assert!(!public.verify(b"hellp", &sig));
        assert!(!public.verify(b"hello", &sig[..63]));
    }
}
