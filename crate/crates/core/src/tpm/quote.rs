use std::collections::BTreeSet;

use super::{AikPublic, Digest, PcrIndex, PCR_COUNT};

/// Signed report of selected PCR values bound to a verifier's nonce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttestationQuote {
    pub selection: BTreeSet<PcrIndex>,
    /// Digest over the selected values concatenated in ascending index order.
    pub composite: Digest,
    pub qualifying_nonce: Vec<u8>,
    /// Ed25519 signature over `selection bitmap || composite || qualifying_nonce`.
    pub signature: Vec<u8>,
}

impl AttestationQuote {
    pub(crate) fn signed_message(
        selection: &BTreeSet<PcrIndex>,
        composite: &Digest,
        nonce: &[u8],
    ) -> Vec<u8> {
        let mut map = [0u8; PCR_COUNT / 8];
        for i in selection {
            let v = i.value() as usize;
            map[v / 8] |= 1 << (v % 8);
        }
        let mut msg = Vec::with_capacity(map.len() + composite.len() + nonce.len());
        msg.extend_from_slice(&map);
        msg.extend_from_slice(composite.as_bytes());
        msg.extend_from_slice(nonce);
        msg
    }

    pub fn verify(&self, aik: &AikPublic) -> bool {
        aik.verify(
            &Self::signed_message(&self.selection, &self.composite, &self.qualifying_nonce),
            &self.signature,
        )
    }
}
