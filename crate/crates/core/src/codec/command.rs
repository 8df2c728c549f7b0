use std::collections::BTreeSet;

use super::{
    put_blob, put_policy, put_selection, put_sized, read_blob, read_policy, read_selection,
    CodecError, Reader,
};
use crate::tpm::{DigestAlg, KeyId, KeyKind, Locality, PcrIndex, PcrPolicy, SealedBlob};

/// `TPM_ST_NO_SESSIONS`, the only tag this simulator speaks.
pub const TAG_NO_SESSIONS: u16 = 0x8001;

/// tag (2) + size (4) + code (4)
pub const COMMAND_HEADER_LEN: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CommandCode {
    Startup,
    GetRandom,
    Hash,
    PcrRead,
    PcrExtend,
    PcrReset,
    CreateKey,
    LoadKey,
    Seal,
    Unseal,
    Quote,
    ResetLockout,
}

impl CommandCode {
    pub const ALL: [CommandCode; 12] = [
        CommandCode::Startup,
        CommandCode::GetRandom,
        CommandCode::Hash,
        CommandCode::PcrRead,
        CommandCode::PcrExtend,
        CommandCode::PcrReset,
        CommandCode::CreateKey,
        CommandCode::LoadKey,
        CommandCode::Seal,
        CommandCode::Unseal,
        CommandCode::Quote,
        CommandCode::ResetLockout,
    ];

    /// Wire value. TCG command codes where one exists; `Seal` takes a value
    /// from the vendor range.
    pub const fn value(self) -> u32 {
        match self {
            CommandCode::Startup => 0x0000_0144,
            CommandCode::GetRandom => 0x0000_017B,
            CommandCode::Hash => 0x0000_017D,
            CommandCode::PcrRead => 0x0000_017E,
            CommandCode::PcrExtend => 0x0000_0182,
            CommandCode::PcrReset => 0x0000_013D,
            CommandCode::CreateKey => 0x0000_0153,
            CommandCode::LoadKey => 0x0000_0157,
            CommandCode::Seal => 0x2000_0001,
            CommandCode::Unseal => 0x0000_015E,
            CommandCode::Quote => 0x0000_0158,
            CommandCode::ResetLockout => 0x0000_0139,
        }
    }

    pub fn from_value(v: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.value() == v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CommandHeader {
    pub tag: u16,
    /// Total encoded length including the header.
    pub size: u32,
    pub code: u32,
}

/// Parameters of one command; one variant per TPM operation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommandParams {
    /// Full TPM reset.
    Startup,
    GetRandom {
        count: u16,
    },
    Hash {
        alg: DigestAlg,
        data: Vec<u8>,
    },
    /// Indices are carried raw; the TPM range-checks them.
    PcrRead {
        index: u8,
    },
    PcrExtend {
        index: u8,
        data: Vec<u8>,
    },
    PcrReset {
        index: u8,
    },
    CreateKey {
        kind: KeyKind,
    },
    LoadKey {
        id: KeyId,
    },
    Seal {
        sk: KeyId,
        policy: PcrPolicy,
        data: Vec<u8>,
    },
    Unseal {
        sk: KeyId,
        blob: SealedBlob,
    },
    Quote {
        aik: KeyId,
        selection: BTreeSet<PcrIndex>,
        nonce: Vec<u8>,
    },
    ResetLockout {
        token: Vec<u8>,
    },
}

impl CommandParams {
    pub fn code(&self) -> CommandCode {
        match self {
            CommandParams::Startup => CommandCode::Startup,
            CommandParams::GetRandom { .. } => CommandCode::GetRandom,
            CommandParams::Hash { .. } => CommandCode::Hash,
            CommandParams::PcrRead { .. } => CommandCode::PcrRead,
            CommandParams::PcrExtend { .. } => CommandCode::PcrExtend,
            CommandParams::PcrReset { .. } => CommandCode::PcrReset,
            CommandParams::CreateKey { .. } => CommandCode::CreateKey,
            CommandParams::LoadKey { .. } => CommandCode::LoadKey,
            CommandParams::Seal { .. } => CommandCode::Seal,
            CommandParams::Unseal { .. } => CommandCode::Unseal,
            CommandParams::Quote { .. } => CommandCode::Quote,
            CommandParams::ResetLockout { .. } => CommandCode::ResetLockout,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TpmCommand {
    pub locality: Locality,
    pub params: CommandParams,
}

impl TpmCommand {
    pub fn new(locality: Locality, params: CommandParams) -> Self {
        TpmCommand { locality, params }
    }

    /// Header this command encodes with.
    pub fn header(&self) -> CommandHeader {
        CommandHeader {
            tag: TAG_NO_SESSIONS,
            size: encode_command(self).len() as u32,
            code: self.params.code().value(),
        }
    }
}

pub fn encode_command(cmd: &TpmCommand) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(&TAG_NO_SESSIONS.to_be_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&cmd.params.code().value().to_be_bytes());
    out.push(cmd.locality.value());
    match &cmd.params {
        CommandParams::Startup => {}
        CommandParams::GetRandom { count } => out.extend_from_slice(&count.to_be_bytes()),
        CommandParams::Hash { alg, data } => {
            out.extend_from_slice(&alg.tpm_id().to_be_bytes());
            put_sized(&mut out, data);
        }
        CommandParams::PcrRead { index } | CommandParams::PcrReset { index } => out.push(*index),
        CommandParams::PcrExtend { index, data } => {
            out.push(*index);
            put_sized(&mut out, data);
        }
        CommandParams::CreateKey { kind } => out.push(kind.code()),
        CommandParams::LoadKey { id } => out.extend_from_slice(&id.0.to_be_bytes()),
        CommandParams::Seal { sk, policy, data } => {
            out.extend_from_slice(&sk.0.to_be_bytes());
            put_policy(&mut out, policy);
            put_sized(&mut out, data);
        }
        CommandParams::Unseal { sk, blob } => {
            out.extend_from_slice(&sk.0.to_be_bytes());
            put_blob(&mut out, blob);
        }
        CommandParams::Quote {
            aik,
            selection,
            nonce,
        } => {
            out.extend_from_slice(&aik.0.to_be_bytes());
            put_selection(&mut out, selection);
            put_sized(&mut out, nonce);
        }
        CommandParams::ResetLockout { token } => put_sized(&mut out, token),
    }
    let size = out.len() as u32;
    out[2..6].copy_from_slice(&size.to_be_bytes());
    out
}

pub fn decode_command(buf: &[u8]) -> Result<TpmCommand, CodecError> {
    if buf.len() < COMMAND_HEADER_LEN {
        return Err(CodecError::Truncated);
    }
    let mut r = Reader::new(buf);
    let tag = r.u16()?;
    let size = r.u32()?;
    let code = r.u32()?;
    if size as usize != buf.len() {
        return Err(CodecError::SizeMismatch {
            declared: size,
            actual: buf.len(),
        });
    }
    if tag != TAG_NO_SESSIONS {
        return Err(CodecError::BadTag(tag));
    }
    let code = CommandCode::from_value(code).ok_or(CodecError::UnknownCode(code))?;
    let raw_locality = r.u8()?;
    let locality =
        Locality::try_from(raw_locality).map_err(|_| CodecError::BadLocality(raw_locality))?;
    let params = match code {
        CommandCode::Startup => CommandParams::Startup,
        CommandCode::GetRandom => CommandParams::GetRandom { count: r.u16()? },
        CommandCode::Hash => {
            let alg = DigestAlg::from_tpm_id(r.u16()?).ok_or(CodecError::BadField("hash alg"))?;
            CommandParams::Hash {
                alg,
                data: r.sized()?.to_vec(),
            }
        }
        CommandCode::PcrRead => CommandParams::PcrRead { index: r.u8()? },
        CommandCode::PcrExtend => CommandParams::PcrExtend {
            index: r.u8()?,
            data: r.sized()?.to_vec(),
        },
        CommandCode::PcrReset => CommandParams::PcrReset { index: r.u8()? },
        CommandCode::CreateKey => CommandParams::CreateKey {
            kind: KeyKind::from_code(r.u8()?).ok_or(CodecError::BadField("key kind"))?,
        },
        CommandCode::LoadKey => CommandParams::LoadKey {
            id: KeyId(r.u32()?),
        },
        CommandCode::Seal => CommandParams::Seal {
            sk: KeyId(r.u32()?),
            policy: read_policy(&mut r)?,
            data: r.sized()?.to_vec(),
        },
        CommandCode::Unseal => CommandParams::Unseal {
            sk: KeyId(r.u32()?),
            blob: read_blob(&mut r)?,
        },
        CommandCode::Quote => CommandParams::Quote {
            aik: KeyId(r.u32()?),
            selection: read_selection(&mut r)?,
            nonce: r.sized()?.to_vec(),
        },
        CommandCode::ResetLockout => CommandParams::ResetLockout {
            token: r.sized()?.to_vec(),
        },
    };
    r.finish()?;
    Ok(TpmCommand { locality, params })
}
