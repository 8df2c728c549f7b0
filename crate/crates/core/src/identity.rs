//! Fixed-size identifiers and secrets exchanged between the app and the bank.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

macro_rules! fixed_bytes {
    ($(#[$m:meta])* $name:ident, $len:expr) => {
        $(#[$m])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub struct $name(pub [u8; $len]);

        impl $name {
            pub const LEN: usize = $len;

            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn from_slice(bytes: &[u8]) -> Option<Self> {
                bytes.try_into().ok().map($name)
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($name), "({})"), self.to_hex())
            }
        }
    };
}

fixed_bytes!(
    /// Bank-side account identifier.
    UserId,
    12
);

fixed_bytes!(
    /// Per-user token the bank hands out of band to unlock a fresh app install.
    ActivationKey,
    20
);

fixed_bytes!(
    /// Verifier challenge, used as the quote's qualifying nonce.
    ChallengeNonce,
    20
);

fixed_bytes!(
    /// Token the bank issues on successful registration.
    AccessCertificate,
    32
);

impl UserId {
    /// Left-aligned, zero-padded; `None` if `name` exceeds 12 bytes.
    pub fn from_name(name: &str) -> Option<Self> {
        let bytes = name.as_bytes();
        if bytes.len() > Self::LEN {
            return None;
        }
        let mut id = [0u8; Self::LEN];
        id[..bytes.len()].copy_from_slice(bytes);
        Some(UserId(id))
    }
}

/// Account credentials in their wire form: user id plus SHA-256 of the secret.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Credentials {
    pub user_id: UserId,
    pub secret_digest: [u8; 32],
}

impl Credentials {
    pub const LEN: usize = UserId::LEN + 32;

    pub fn from_secret(user_id: UserId, secret: &[u8]) -> Self {
        Credentials {
            user_id,
            secret_digest: Sha256::digest(secret).into(),
        }
    }

    pub fn to_bytes(&self) -> [u8; Self::LEN] {
        let mut out = [0u8; Self::LEN];
        out[..UserId::LEN].copy_from_slice(&self.user_id.0);
        out[UserId::LEN..].copy_from_slice(&self.secret_digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != Self::LEN {
            return None;
        }
        Some(Credentials {
            user_id: UserId::from_slice(&bytes[..UserId::LEN])?,
            secret_digest: bytes[UserId::LEN..].try_into().ok()?,
        })
    }
}

impl fmt::Debug for Credentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Credentials")
            .field("user_id", &self.user_id)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("PIN must be 4 to 12 decimal digits")]
pub struct InvalidPin;

/// User PIN. The digits are handed only to the TPM's hash command.
#[derive(Clone, PartialEq, Eq)]
pub struct Pin(String);

impl Pin {
    pub fn new(digits: &str) -> Result<Self, InvalidPin> {
        if (4..=12).contains(&digits.len()) && digits.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Pin(digits.to_owned()))
        } else {
            Err(InvalidPin)
        }
    }

    pub(crate) fn digits(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl fmt::Debug for Pin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Pin(****)")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pin_format() {
        assert!(Pin::new("1234").is_ok());
        assert!(Pin::new("123456789012").is_ok());
        assert_eq!(Pin::new("123"), Err(InvalidPin));
        assert_eq!(Pin::new("1234567890123"), Err(InvalidPin));
        assert_eq!(Pin::new("12a4"), Err(InvalidPin));
        assert_eq!(format!("{:?}", Pin::new("9876").unwrap()), "Pin(****)");
    }

    #[test]
    fn credentials_are_44_bytes() {
        let c = Credentials::from_secret(UserId::from_name("alice").unwrap(), b"hunter2");
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), 44);
        assert_eq!(Credentials::from_bytes(&bytes), Some(c));
        assert_eq!(Credentials::from_bytes(&bytes[..43]), None);
    }

    #[test]
    fn user_id_from_name() {
        assert_eq!(&UserId::from_name("bob").unwrap().0[..4], b"bob\0");
        assert!(UserId::from_name("thirteen-char").is_none());
    }
}
