//! Device store file: `ATDS` | version (1) | three sections, each a u32
//! big-endian length followed by its bytes: activation blob, credential blob,
//! AIK handle id (4 bytes).

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::codec::{decode_sealed_blob, encode_sealed_blob};
use crate::lma::DeviceStore;
use crate::tpm::KeyId;

pub const STORE_MAGIC: [u8; 4] = *b"ATDS";
pub const STORE_VERSION: u8 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("not a device store file")]
    BadMagic,
    #[error("unsupported device store version {0}")]
    BadVersion(u8),
    #[error("device store is truncated or malformed")]
    Corrupt,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode_device_store(store: &DeviceStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&STORE_MAGIC);
    out.push(STORE_VERSION);
    for section in [
        encode_sealed_blob(&store.activation_blob),
        encode_sealed_blob(&store.credential_blob),
        store.aik.0.to_be_bytes().to_vec(),
    ] {
        out.extend_from_slice(&(section.len() as u32).to_be_bytes());
        out.extend_from_slice(&section);
    }
    out
}

pub fn decode_device_store(buf: &[u8]) -> Result<DeviceStore, StoreError> {
    if buf.len() < STORE_MAGIC.len() || buf[..4] != STORE_MAGIC {
        return Err(StoreError::BadMagic);
    }
    let (&version, mut rest) = buf[4..].split_first().ok_or(StoreError::Corrupt)?;
    if version != STORE_VERSION {
        return Err(StoreError::BadVersion(version));
    }
    let mut section = || -> Result<&[u8], StoreError> {
        if rest.len() < 4 {
            return Err(StoreError::Corrupt);
        }
        let len = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
        let body = rest[4..].get(..len).ok_or(StoreError::Corrupt)?;
        rest = &rest[4 + len..];
        Ok(body)
    };
    let activation_blob = decode_sealed_blob(section()?).map_err(|_| StoreError::Corrupt)?;
    let credential_blob = decode_sealed_blob(section()?).map_err(|_| StoreError::Corrupt)?;
    let aik: [u8; 4] = section()?.try_into().map_err(|_| StoreError::Corrupt)?;
    if !rest.is_empty() {
        return Err(StoreError::Corrupt);
    }
    Ok(DeviceStore {
        activation_blob,
        credential_blob,
        aik: KeyId(u32::from_be_bytes(aik)),
    })
}

pub fn persist_device(store: &DeviceStore, path: &Path) -> Result<(), StoreError> {
    fs::write(path, encode_device_store(store))?;
    Ok(())
}

pub fn load_device(path: &Path) -> Result<DeviceStore, StoreError> {
    decode_device_store(&fs::read(path)?)
}
