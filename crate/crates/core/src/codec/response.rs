use super::{
    put_blob, put_key, put_quote, put_sized, read_blob, read_key, read_quote, CodecError,
    CommandCode, Reader, COMMAND_HEADER_LEN, TAG_NO_SESSIONS,
};
use crate::tpm::{AttestationQuote, Digest, KeyHandle, SealedBlob, TpmError};

/// Shape of a successful response body, fixed by the command code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResponseKind {
    Empty,
    Bytes,
    Digest,
    Key,
    Blob,
    Quote,
}

impl ResponseKind {
    pub fn for_command(code: CommandCode) -> Self {
        match code {
            CommandCode::Startup | CommandCode::PcrReset | CommandCode::ResetLockout => {
                ResponseKind::Empty
            }
            CommandCode::GetRandom | CommandCode::Unseal => ResponseKind::Bytes,
            CommandCode::Hash | CommandCode::PcrRead | CommandCode::PcrExtend => {
                ResponseKind::Digest
            }
            CommandCode::CreateKey | CommandCode::LoadKey => ResponseKind::Key,
            CommandCode::Seal => ResponseKind::Blob,
            CommandCode::Quote => ResponseKind::Quote,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResponseBody {
    Empty,
    Bytes(Vec<u8>),
    Digest(Digest),
    Key(KeyHandle),
    Blob(SealedBlob),
    Quote(AttestationQuote),
}

impl ResponseBody {
    pub fn kind(&self) -> ResponseKind {
        match self {
            ResponseBody::Empty => ResponseKind::Empty,
            ResponseBody::Bytes(_) => ResponseKind::Bytes,
            ResponseBody::Digest(_) => ResponseKind::Digest,
            ResponseBody::Key(_) => ResponseKind::Key,
            ResponseBody::Blob(_) => ResponseKind::Blob,
            ResponseBody::Quote(_) => ResponseKind::Quote,
        }
    }
}

/// tag (2) | size (4) | response code (4) | body, where the body is present
/// only when the response code is zero.
pub fn encode_response(result: &Result<ResponseBody, TpmError>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(&TAG_NO_SESSIONS.to_be_bytes());
    out.extend_from_slice(&[0; 4]);
    match result {
        Err(e) => out.extend_from_slice(&e.response_code().to_be_bytes()),
        Ok(body) => {
            out.extend_from_slice(&0u32.to_be_bytes());
            match body {
                ResponseBody::Empty => {}
                ResponseBody::Bytes(b) => put_sized(&mut out, b),
                ResponseBody::Digest(d) => put_sized(&mut out, d.as_bytes()),
                ResponseBody::Key(k) => put_key(&mut out, k),
                ResponseBody::Blob(b) => put_blob(&mut out, b),
                ResponseBody::Quote(q) => put_quote(&mut out, q),
            }
        }
    }
    let size = out.len() as u32;
    out[2..6].copy_from_slice(&size.to_be_bytes());
    out
}

/// Decode the response to a command with code `code`.
pub fn decode_response(
    code: CommandCode,
    buf: &[u8],
) -> Result<Result<ResponseBody, TpmError>, CodecError> {
    if buf.len() < COMMAND_HEADER_LEN {
        return Err(CodecError::Truncated);
    }
    let mut r = Reader::new(buf);
    let tag = r.u16()?;
    let size = r.u32()?;
    let rc = r.u32()?;
    if size as usize != buf.len() {
        return Err(CodecError::SizeMismatch {
            declared: size,
            actual: buf.len(),
        });
    }
    if tag != TAG_NO_SESSIONS {
        return Err(CodecError::BadTag(tag));
    }
    if rc != 0 {
        let err = TpmError::from_response_code(rc).ok_or(CodecError::BadField("response code"))?;
        r.finish()?;
        return Ok(Err(err));
    }
    let body = match ResponseKind::for_command(code) {
        ResponseKind::Empty => ResponseBody::Empty,
        ResponseKind::Bytes => ResponseBody::Bytes(r.sized()?.to_vec()),
        ResponseKind::Digest => ResponseBody::Digest(Digest::from_bytes(r.sized()?)),
        ResponseKind::Key => ResponseBody::Key(read_key(&mut r)?),
        ResponseKind::Blob => ResponseBody::Blob(read_blob(&mut r)?),
        ResponseKind::Quote => ResponseBody::Quote(read_quote(&mut r)?),
    };
    r.finish()?;
    Ok(Ok(body))
}
