use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::tpm::{
    AttestationQuote, Digest, DigestAlg, KeyHandle, KeyKind, Locality, PcrIndex, PcrPolicy,
    SealedBlob, TpmApi, TpmError,
};

/// Per-flow tally of TPM calls, in the five categories the operation-count
/// report uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlowCounters {
    pub sealing: u32,
    pub hashing: u32,
    pub unsealing: u32,
    /// Attestation key creations and loads.
    pub aik: u32,
    pub extend: u32,
}

impl FlowCounters {
    pub const fn new(sealing: u32, hashing: u32, unsealing: u32, aik: u32, extend: u32) -> Self {
        FlowCounters {
            sealing,
            hashing,
            unsealing,
            aik,
            extend,
        }
    }

    /// `(sealing, hashing, unsealing, aik, extend)`
    pub fn as_tuple(&self) -> (u32, u32, u32, u32, u32) {
        (
            self.sealing,
            self.hashing,
            self.unsealing,
            self.aik,
            self.extend,
        )
    }
}

impl fmt::Display for FlowCounters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sealing={} hashing={} unsealing={} aik={} extend={}",
            self.sealing, self.hashing, self.unsealing, self.aik, self.extend
        )
    }
}

/// Wraps a [`TpmApi`] and counts every call that falls in a counted category.
///
/// Only explicit `hash` calls count as hashing; the digest an extend computes
/// internally does not. Loading an attestation key counts in the same column
/// as creating one.
pub struct CountingTpm<T> {
    inner: T,
    counters: FlowCounters,
}

impl<T: TpmApi> CountingTpm<T> {
    pub fn new(inner: T) -> Self {
        CountingTpm {
            inner,
            counters: FlowCounters::default(),
        }
    }

    pub fn counters(&self) -> FlowCounters {
        self.counters
    }

    pub fn reset_counters(&mut self) {
        self.counters = FlowCounters::default();
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }

    /// Uncounted access to the wrapped TPM.
    pub fn inner_mut(&mut self) -> &mut T {
        &mut self.inner
    }

    pub fn into_inner(self) -> T {
        self.inner
    }
}

impl<T: TpmApi> TpmApi for CountingTpm<T> {
    fn alg(&self) -> DigestAlg {
        self.inner.alg()
    }

    fn get_random(&mut self, n: usize) -> Result<Vec<u8>, TpmError> {
        self.inner.get_random(n)
    }

    fn hash(&mut self, data: &[u8], alg: DigestAlg) -> Result<Digest, TpmError> {
        self.counters.hashing += 1;
        self.inner.hash(data, alg)
    }

    fn pcr_read(&mut self, index: u8) -> Result<Digest, TpmError> {
        self.inner.pcr_read(index)
    }

    fn pcr_extend(
        &mut self,
        index: u8,
        data: &[u8],
        locality: Locality,
    ) -> Result<Digest, TpmError> {
        self.counters.extend += 1;
        self.inner.pcr_extend(index, data, locality)
    }

    fn pcr_reset(&mut self, index: u8, locality: Locality) -> Result<(), TpmError> {
        self.inner.pcr_reset(index, locality)
    }

    fn create_key(&mut self, kind: KeyKind) -> Result<KeyHandle, TpmError> {
        if kind == KeyKind::Attestation {
            self.counters.aik += 1;
        }
        self.inner.create_key(kind)
    }

    fn load_key(&mut self, handle: &KeyHandle) -> Result<KeyHandle, TpmError> {
        if handle.kind == KeyKind::Attestation {
            self.counters.aik += 1;
        }
        self.inner.load_key(handle)
    }

    fn seal(
        &mut self,
        data: &[u8],
        policy: &PcrPolicy,
        sk: &KeyHandle,
    ) -> Result<SealedBlob, TpmError> {
        self.counters.sealing += 1;
        self.inner.seal(data, policy, sk)
    }

    fn unseal(&mut self, blob: &SealedBlob, sk: &KeyHandle) -> Result<Vec<u8>, TpmError> {
        self.counters.unsealing += 1;
        self.inner.unseal(blob, sk)
    }

    fn quote(
        &mut self,
        selection: &BTreeSet<PcrIndex>,
        qualifying_nonce: &[u8],
        aik: &KeyHandle,
    ) -> Result<AttestationQuote, TpmError> {
        self.inner.quote(selection, qualifying_nonce, aik)
    }

    fn reset_lockout(&mut self, token: &[u8]) -> Result<(), TpmError> {
        self.inner.reset_lockout(token)
    }
}
