use std::collections::BTreeSet;

use super::{
    AttestationQuote, Digest, DigestAlg, KeyHandle, KeyKind, Locality, PcrIndex, PcrPolicy,
    SealedBlob, Tpm, TpmError,
};

/// The command set clients use, independent of how commands reach the TPM.
///
/// Implemented directly by [`Tpm`] (in-process calls) and by
/// [`DeviceClient`](super::DeviceClient) (marshaled binary commands).
pub trait TpmApi {
    /// Algorithm of the PCR bank.
    fn alg(&self) -> DigestAlg;
    fn get_random(&mut self, n: usize) -> Result<Vec<u8>, TpmError>;
    fn hash(&mut self, data: &[u8], alg: DigestAlg) -> Result<Digest, TpmError>;
    fn pcr_read(&mut self, index: u8) -> Result<Digest, TpmError>;
    fn pcr_extend(
        &mut self,
        index: u8,
        data: &[u8],
        locality: Locality,
    ) -> Result<Digest, TpmError>;
    fn pcr_reset(&mut self, index: u8, locality: Locality) -> Result<(), TpmError>;
    fn create_key(&mut self, kind: KeyKind) -> Result<KeyHandle, TpmError>;
    fn load_key(&mut self, handle: &KeyHandle) -> Result<KeyHandle, TpmError>;
    fn seal(
        &mut self,
        data: &[u8],
        policy: &PcrPolicy,
        sk: &KeyHandle,
    ) -> Result<SealedBlob, TpmError>;
    fn unseal(&mut self, blob: &SealedBlob, sk: &KeyHandle) -> Result<Vec<u8>, TpmError>;
    fn quote(
        &mut self,
        selection: &BTreeSet<PcrIndex>,
        qualifying_nonce: &[u8],
        aik: &KeyHandle,
    ) -> Result<AttestationQuote, TpmError>;
    fn reset_lockout(&mut self, token: &[u8]) -> Result<(), TpmError>;
}

impl TpmApi for Tpm {
    fn alg(&self) -> DigestAlg {
        Tpm::alg(self)
    }

    fn get_random(&mut self, n: usize) -> Result<Vec<u8>, TpmError> {
        Ok(Tpm::get_random(self, n))
    }

    fn hash(&mut self, data: &[u8], alg: DigestAlg) -> Result<Digest, TpmError> {
        Ok(Tpm::hash(self, data, alg))
    }

    fn pcr_read(&mut self, index: u8) -> Result<Digest, TpmError> {
        Ok(Tpm::pcr_read(self, PcrIndex::new(index)?))
    }

    fn pcr_extend(
        &mut self,
        index: u8,
        data: &[u8],
        locality: Locality,
    ) -> Result<Digest, TpmError> {
        Tpm::pcr_extend(self, PcrIndex::new(index)?, data, locality)
    }

    fn pcr_reset(&mut self, index: u8, locality: Locality) -> Result<(), TpmError> {
        Tpm::pcr_reset(self, PcrIndex::new(index)?, locality)
    }

    fn create_key(&mut self, kind: KeyKind) -> Result<KeyHandle, TpmError> {
        Ok(Tpm::create_key(self, kind))
    }

    fn load_key(&mut self, handle: &KeyHandle) -> Result<KeyHandle, TpmError> {
        Tpm::load_key(self, handle.id)
    }

    fn seal(
        &mut self,
        data: &[u8],
        policy: &PcrPolicy,
        sk: &KeyHandle,
    ) -> Result<SealedBlob, TpmError> {
        Tpm::seal(self, data, policy, sk.id)
    }

    fn unseal(&mut self, blob: &SealedBlob, sk: &KeyHandle) -> Result<Vec<u8>, TpmError> {
        Tpm::unseal(self, blob, sk.id)
    }

    fn quote(
        &mut self,
        selection: &BTreeSet<PcrIndex>,
        qualifying_nonce: &[u8],
        aik: &KeyHandle,
    ) -> Result<AttestationQuote, TpmError> {
        Tpm::quote(self, selection, qualifying_nonce, aik.id)
    }

    fn reset_lockout(&mut self, token: &[u8]) -> Result<(), TpmError> {
        Tpm::reset_lockout(self, token)
    }
}
