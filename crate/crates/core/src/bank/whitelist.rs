use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::identity::UserId;
use crate::tpm::{AikPublic, Digest};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WhitelistEntry {
    pub user_id: UserId,
    pub expected_composite: Digest,
    pub aik_public: AikPublic,
    pub revoked: bool,
}

#[derive(Debug, Error)]
pub enum WhitelistFileError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: &'static str },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// One line per entry: `user-hex composite-hex aik-hex 0|1`.
pub fn format_whitelist(entries: &[WhitelistEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{} {} {} {}\n",
            e.user_id.to_hex(),
            e.expected_composite.to_hex(),
            e.aik_public.to_hex(),
            u8::from(e.revoked)
        ));
    }
    out
}

pub fn parse_whitelist(text: &str) -> Result<Vec<WhitelistEntry>, WhitelistFileError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let err = |reason| WhitelistFileError::Parse {
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split(' ').collect();
        let [user, composite, aik, revoked] = fields[..] else {
            return Err(err("expected four space-separated fields"));
        };
        let user_id = hex::decode(user)
            .ok()
            .and_then(|b| UserId::from_slice(&b))
            .ok_or_else(|| err("bad user id"))?;
        let composite = hex::decode(composite).map_err(|_| err("bad composite"))?;
        if composite.is_empty() {
            return Err(err("bad composite"));
        }
        let aik: [u8; 32] = hex::decode(aik)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| err("bad AIK public key"))?;
        let revoked = match revoked {
            "0" => false,
            "1" => true,
            _ => return Err(err("revoked flag must be 0 or 1")),
        };
        entries.push(WhitelistEntry {
            user_id,
            expected_composite: Digest::from_bytes(composite),
            aik_public: AikPublic(aik),
            revoked,
        });
    }
    Ok(entries)
}

/// Write via a sibling temporary file and rename, so readers see either the
/// old or the new whitelist.
pub fn write_whitelist_file(path: &Path, entries: &[WhitelistEntry]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(format_whitelist(entries).as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

pub fn read_whitelist_file(path: &Path) -> Result<Vec<WhitelistEntry>, WhitelistFileError> {
    match fs::read_to_string(path) {
        Ok(text) => parse_whitelist(&text),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}
