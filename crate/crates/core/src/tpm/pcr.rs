use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Digest, DigestAlg, TpmError};

pub const PCR_COUNT: usize = 24;

/// First index of the dynamic (run-time resettable) range.
pub const FIRST_DYNAMIC_PCR: u8 = 17;

/// Index of a platform configuration register, `0..=23`.
///
/// Indices 0-16 are static and return to zero only on TPM reset; 17-23 are
/// dynamic and may be reset at run time by a permitted locality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PcrIndex(u8);

impl PcrIndex {
    pub fn new(index: u8) -> Result<Self, TpmError> {
        if (index as usize) < PCR_COUNT {
            Ok(PcrIndex(index))
        } else {
            Err(TpmError::BadIndex)
        }
    }

    /// For compile-time constants; panics (at const-eval) when out of range.
    pub const fn from_const(index: u8) -> Self {
        assert!((index as usize) < PCR_COUNT, "PCR index out of range");
        PcrIndex(index)
    }

    pub const fn value(self) -> u8 {
        self.0
    }

    pub const fn is_dynamic(self) -> bool {
        self.0 >= FIRST_DYNAMIC_PCR
    }

    pub fn all() -> impl Iterator<Item = PcrIndex> {
        (0..PCR_COUNT as u8).map(PcrIndex)
    }
}

impl fmt::Display for PcrIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PCR{}", self.0)
    }
}

/// Caller identity attached to a command.
///
/// 0 is the boot-time caller, 2 the OS acting as measured launch environment,
/// 32 and 33 callers resident in the TEE next to the TPM.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Locality {
    Boot,
    Os,
    Tee,
    TeeApplication,
}

impl Locality {
    pub const fn value(self) -> u8 {
        match self {
            Locality::Boot => 0,
            Locality::Os => 2,
            Locality::Tee => 32,
            Locality::TeeApplication => 33,
        }
    }

    fn may_touch_dynamic(self) -> bool {
        matches!(
            self,
            Locality::Os | Locality::Tee | Locality::TeeApplication
        )
    }
}

impl TryFrom<u8> for Locality {
    type Error = TpmError;

    fn try_from(value: u8) -> Result<Self, TpmError> {
        match value {
            0 => Ok(Locality::Boot),
            2 => Ok(Locality::Os),
            32 => Ok(Locality::Tee),
            33 => Ok(Locality::TeeApplication),
            _ => Err(TpmError::UnsupportedLocality),
        }
    }
}

/// Whether `locality` may extend `index`.
pub fn may_extend(index: PcrIndex, locality: Locality) -> bool {
    if index.is_dynamic() {
        locality.may_touch_dynamic()
    } else {
        locality == Locality::Boot
    }
}

/// Check a run-time reset request against the access table.
pub fn check_reset(index: PcrIndex, locality: Locality) -> Result<(), TpmError> {
    if !index.is_dynamic() {
        return Err(TpmError::StaticPcr);
    }
    if !locality.may_touch_dynamic() {
        return Err(TpmError::LocalityDenied);
    }
    Ok(())
}

/// One bank of 24 registers sharing a hash algorithm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PcrBank {
    alg: DigestAlg,
    slots: Vec<Digest>,
}

impl PcrBank {
    pub fn new(alg: DigestAlg) -> Self {
        PcrBank {
            alg,
            slots: vec![alg.zero(); PCR_COUNT],
        }
    }

    pub fn alg(&self) -> DigestAlg {
        self.alg
    }

    pub fn read(&self, index: PcrIndex) -> &Digest {
        &self.slots[index.0 as usize]
    }

    pub fn extend(&mut self, index: PcrIndex, data: &[u8]) -> &Digest {
        let slot = &mut self.slots[index.0 as usize];
        *slot = self.alg.extend(slot, data);
        slot
    }

    pub fn reset_slot(&mut self, index: PcrIndex) {
        self.slots[index.0 as usize] = self.alg.zero();
    }

    /// Digest over the selected registers concatenated in ascending index order.
    pub fn composite<'a>(&self, selection: impl IntoIterator<Item = &'a PcrIndex>) -> Digest {
        let parts: Vec<&[u8]> = selection
            .into_iter()
            .map(|i| self.read(*i).as_bytes())
            .collect();
        self.alg.digest_parts(&parts)
    }
}
