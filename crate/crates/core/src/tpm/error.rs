use thiserror::Error;

/// Failure of a TPM command.
///
/// Every variant maps to a stable response code so errors survive the binary
/// command interface unchanged.
#[derive(Debug, Clone, Copy, Error, PartialEq, Eq, Hash)]
pub enum TpmError {
    #[error("PCR index out of range")]
    BadIndex,
    #[error("locality not supported")]
    UnsupportedLocality,
    #[error("locality not permitted for this PCR")]
    LocalityDenied,
    #[error("static PCRs are reset only by a TPM reset")]
    StaticPcr,
    #[error("unknown key handle")]
    UnknownKey,
    #[error("key kind does not permit this operation")]
    WrongKeyKind,
    #[error("blob was sealed under a different storage key")]
    WrongKey,
    #[error("PCR values do not satisfy the blob policy")]
    PolicyMismatch,
    #[error("blob was not sealed by this TPM")]
    ForeignTpm,
    #[error("TPM is in dictionary-attack lockout")]
    Lockout,
    #[error("sealed blob failed integrity check")]
    IntegrityFailure,
    #[error("PCR selection is empty")]
    EmptySelection,
    #[error("bad lockout authorization")]
    BadAuthorization,
    #[error("policy digest length does not match the PCR bank")]
    BadPolicy,
    #[error("malformed command")]
    BadCommand,
    #[error("malformed response")]
    BadResponse,
}

impl TpmError {
    const ALL: [TpmError; 16] = [
        TpmError::BadIndex,
        TpmError::UnsupportedLocality,
        TpmError::LocalityDenied,
        TpmError::StaticPcr,
        TpmError::UnknownKey,
        TpmError::WrongKeyKind,
        TpmError::WrongKey,
        TpmError::PolicyMismatch,
        TpmError::ForeignTpm,
        TpmError::Lockout,
        TpmError::IntegrityFailure,
        TpmError::EmptySelection,
        TpmError::BadAuthorization,
        TpmError::BadPolicy,
        TpmError::BadCommand,
        TpmError::BadResponse,
    ];

    /// Response code carried in the response header. Zero is success.
    pub const fn response_code(self) -> u32 {
        0x0000_0900
            + match self {
                TpmError::BadIndex => 1,
                TpmError::UnsupportedLocality => 2,
                TpmError::LocalityDenied => 3,
                TpmError::StaticPcr => 4,
                TpmError::UnknownKey => 5,
                TpmError::WrongKeyKind => 6,
                TpmError::WrongKey => 7,
                TpmError::PolicyMismatch => 8,
                TpmError::ForeignTpm => 9,
                TpmError::Lockout => 10,
                TpmError::IntegrityFailure => 11,
                TpmError::EmptySelection => 12,
                TpmError::BadAuthorization => 13,
                TpmError::BadPolicy => 14,
                TpmError::BadCommand => 15,
                TpmError::BadResponse => 16,
            }
    }

    pub fn from_response_code(code: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.response_code() == code)
    }
}
