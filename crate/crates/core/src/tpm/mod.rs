//! Software TPM 2.0 subset.
//!
//! [`Tpm`] owns all device state: one PCR bank, the key registry, the record of
//! nonces issued by `seal`, the dictionary-attack counter and the random
//! source. Commands take `&mut self`, so a single instance executes them one at
//! a time; [`TpmDevice`] wraps it behind a mutex and a binary command interface
//! for callers on other threads.

mod api;
mod device;
mod digest;
mod error;
mod keys;
mod lockout;
mod pcr;
mod quote;
mod seal;

use std::collections::{BTreeSet, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub use api::TpmApi;
pub use device::{DeviceClient, TpmDevice};
pub use digest::{Digest, DigestAlg};
pub use error::TpmError;
pub use keys::{AikPublic, KeyHandle, KeyId, KeyKind};
pub use lockout::LockoutState;
pub use pcr::{Locality, PcrBank, PcrIndex, FIRST_DYNAMIC_PCR, PCR_COUNT};
pub use quote::AttestationQuote;
pub use seal::{NonceTag, PcrPolicy, SealedBlob};

use keys::KeyRegistry;

/// Default lockout-reset authorization of a simulated TPM.
pub const DEFAULT_ADMIN_TOKEN: &[u8] = b"attest-sim-lockout-admin";

#[derive(Clone, Debug)]
pub struct TpmConfig {
    pub alg: DigestAlg,
    /// Consecutive policy failures before unseal locks.
    pub max_tries: u32,
    /// Fixed seed for the random source; `None` draws from OS entropy.
    pub seed: Option<u64>,
    pub admin_token: Vec<u8>,
}

impl Default for TpmConfig {
    fn default() -> Self {
        TpmConfig {
            alg: DigestAlg::Sha1,
            max_tries: LockoutState::DEFAULT_MAX_TRIES,
            seed: None,
            admin_token: DEFAULT_ADMIN_TOKEN.to_vec(),
        }
    }
}

impl TpmConfig {
    pub fn seeded(seed: u64) -> Self {
        TpmConfig {
            seed: Some(seed),
            ..Self::default()
        }
    }
}

pub struct Tpm {
    config: TpmConfig,
    pcrs: PcrBank,
    keys: KeyRegistry,
    seal_nonces: HashSet<NonceTag>,
    lockout: LockoutState,
    rng: ChaCha20Rng,
}

impl Tpm {
    pub fn new(config: TpmConfig) -> Self {
        let rng = match config.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => ChaCha20Rng::from_entropy(),
        };
        Tpm {
            pcrs: PcrBank::new(config.alg),
            keys: KeyRegistry::default(),
            seal_nonces: HashSet::new(),
            lockout: LockoutState::new(config.max_tries),
            rng,
            config,
        }
    }

    pub fn alg(&self) -> DigestAlg {
        self.config.alg
    }

    pub fn config(&self) -> &TpmConfig {
        &self.config
    }

    pub fn lockout(&self) -> LockoutState {
        self.lockout
    }

    pub fn pcrs(&self) -> &PcrBank {
        &self.pcrs
    }

    /// TPM reset: zero every PCR and forget keys, seal nonces and lockout.
    /// The random stream continues.
    pub fn reset(&mut self) {
        self.pcrs = PcrBank::new(self.config.alg);
        self.keys.clear();
        self.seal_nonces.clear();
        self.lockout = LockoutState::new(self.config.max_tries);
    }

    pub fn get_random(&mut self, n: usize) -> Vec<u8> {
        let mut out = vec![0; n];
        self.rng.fill_bytes(&mut out);
        out
    }

    pub fn hash(&self, data: &[u8], alg: DigestAlg) -> Digest {
        alg.digest(data)
    }

    pub fn pcr_read(&self, index: PcrIndex) -> Digest {
        self.pcrs.read(index).clone()
    }

    pub fn pcr_extend(
        &mut self,
        index: PcrIndex,
        data: &[u8],
        locality: Locality,
    ) -> Result<Digest, TpmError> {
        if !pcr::may_extend(index, locality) {
            return Err(TpmError::LocalityDenied);
        }
        Ok(self.pcrs.extend(index, data).clone())
    }

    pub fn pcr_reset(&mut self, index: PcrIndex, locality: Locality) -> Result<(), TpmError> {
        pcr::check_reset(index, locality)?;
        self.pcrs.reset_slot(index);
        Ok(())
    }

    pub fn create_key(&mut self, kind: KeyKind) -> KeyHandle {
        let mut seed = [0u8; 32];
        self.rng.fill_bytes(&mut seed);
        self.keys.insert(kind, seed)
    }

    pub fn load_key(&self, id: KeyId) -> Result<KeyHandle, TpmError> {
        self.keys.handle(id)
    }

    /// Seal `data` under `sk`. Current PCR values are not compared with the
    /// policy here; that happens on unseal.
    pub fn seal(
        &mut self,
        data: &[u8],
        policy: &PcrPolicy,
        sk: KeyId,
    ) -> Result<SealedBlob, TpmError> {
        let secret = *self.keys.storage_secret(sk)?;
        let alg_len = self.config.alg.len();
        if policy.expected().values().any(|d| d.len() != alg_len) {
            return Err(TpmError::BadPolicy);
        }
        let tag = loop {
            let mut t = [0u8; NonceTag::LEN];
            self.rng.fill_bytes(&mut t);
            let t = NonceTag(t);
            if !self.seal_nonces.contains(&t) {
                break t;
            }
        };
        self.seal_nonces.insert(tag);
        let ciphertext = seal::encrypt(&secret, policy, &tag, sk, data);
        Ok(SealedBlob {
            ciphertext,
            policy: policy.clone(),
            nonce_tag: tag,
            sk_id: sk,
        })
    }

    /// Release a blob's plaintext.
    ///
    /// Checks run in a fixed order: lockout, TPM binding (nonce record), storage
    /// key, PCR policy, ciphertext integrity. Only a policy failure counts
    /// towards lockout; the failure that reaches the threshold already reports
    /// [`TpmError::Lockout`].
    pub fn unseal(&mut self, blob: &SealedBlob, sk: KeyId) -> Result<Vec<u8>, TpmError> {
        if self.lockout.is_locked() {
            return Err(TpmError::Lockout);
        }
        if !self.seal_nonces.contains(&blob.nonce_tag) {
            return Err(TpmError::ForeignTpm);
        }
        let secret = *self.keys.storage_secret(sk)?;
        if sk != blob.sk_id {
            return Err(TpmError::WrongKey);
        }
        if !blob.policy.is_satisfied_by(&self.pcrs) {
            return Err(if self.lockout.record_failure() {
                TpmError::Lockout
            } else {
                TpmError::PolicyMismatch
            });
        }
        let plain = seal::decrypt(&secret, blob)?;
        self.lockout.clear();
        Ok(plain)
    }

    pub fn quote(
        &mut self,
        selection: &BTreeSet<PcrIndex>,
        qualifying_nonce: &[u8],
        aik: KeyId,
    ) -> Result<AttestationQuote, TpmError> {
        if selection.is_empty() {
            return Err(TpmError::EmptySelection);
        }
        let composite = self.pcrs.composite(selection);
        let message = AttestationQuote::signed_message(selection, &composite, qualifying_nonce);
        let signature = self.keys.sign(aik, &message)?;
        Ok(AttestationQuote {
            selection: selection.clone(),
            composite,
            qualifying_nonce: qualifying_nonce.to_vec(),
            signature: signature.to_vec(),
        })
    }

    pub fn reset_lockout(&mut self, token: &[u8]) -> Result<(), TpmError> {
        if token != self.config.admin_token.as_slice() {
            return Err(TpmError::BadAuthorization);
        }
        self.lockout.clear();
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn has_seal_nonce(&self, tag: &NonceTag) -> bool {
        self.seal_nonces.contains(tag)
    }
}
