//! Seeded generators and codec property checks shared by integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use attest_sim::codec::{
    decode_command, decode_wire, encode_command, encode_wire, CodecError, CommandCode,
    CommandParams, DenyReason, Evidence, LoginAttestation, RegistrationPayload, TpmCommand,
    WireKind, WireMessage,
};
use attest_sim::identity::{ActivationKey, ChallengeNonce, Credentials, UserId};
use attest_sim::tpm::{
    AikPublic, AttestationQuote, Digest, DigestAlg, KeyId, KeyKind, Locality, NonceTag, PcrIndex,
    PcrPolicy, SealedBlob,
};

pub const ROUND_TRIPS: usize = 10_000;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn bytes(rng: &mut impl Rng, max: usize) -> Vec<u8> {
    let mut v = vec![0u8; rng.gen_range(0..=max)];
    rng.fill_bytes(&mut v);
    v
}

fn array<const N: usize>(rng: &mut impl Rng) -> [u8; N] {
    let mut a = [0u8; N];
    rng.fill_bytes(&mut a);
    a
}

fn selection(rng: &mut impl Rng, non_empty: bool) -> BTreeSet<PcrIndex> {
    loop {
        let mask: u32 = rng.gen::<u32>() & 0x00ff_ffff;
        let sel: BTreeSet<_> = (0..24u8)
            .filter(|i| mask & (1 << i) != 0)
            .map(PcrIndex::from_const)
            .collect();
        if !non_empty || !sel.is_empty() {
            return sel;
        }
    }
}

fn digest(rng: &mut impl Rng) -> Digest {
    let alg = if rng.gen() {
        DigestAlg::Sha1
    } else {
        DigestAlg::Sha256
    };
    let mut v = vec![0u8; alg.len()];
    rng.fill_bytes(&mut v);
    Digest::from_bytes(v)
}

fn policy(rng: &mut impl Rng) -> PcrPolicy {
    let expected: BTreeMap<_, _> = selection(rng, false)
        .into_iter()
        .map(|i| (i, digest(rng)))
        .collect();
    PcrPolicy::new(expected)
}

fn locality(rng: &mut impl Rng) -> Locality {
    [
        Locality::Boot,
        Locality::Os,
        Locality::Tee,
        Locality::TeeApplication,
    ][rng.gen_range(0..4)]
}

fn credentials(rng: &mut impl Rng) -> Credentials {
    Credentials {
        user_id: UserId(array(rng)),
        secret_digest: array(rng),
    }
}

pub fn random_command(rng: &mut impl Rng) -> TpmCommand {
    let params = match CommandCode::ALL[rng.gen_range(0..CommandCode::ALL.len())] {
        CommandCode::Startup => CommandParams::Startup,
        CommandCode::GetRandom => CommandParams::GetRandom { count: rng.gen() },
        CommandCode::Hash => CommandParams::Hash {
            alg: if rng.gen() {
                DigestAlg::Sha1
            } else {
                DigestAlg::Sha256
            },
            data: bytes(rng, 96),
        },
        CommandCode::PcrRead => CommandParams::PcrRead { index: rng.gen() },
        CommandCode::PcrExtend => CommandParams::PcrExtend {
            index: rng.gen(),
            data: bytes(rng, 40),
        },
        CommandCode::PcrReset => CommandParams::PcrReset { index: rng.gen() },
        CommandCode::CreateKey => CommandParams::CreateKey {
            kind: if rng.gen() {
                KeyKind::Storage
            } else {
                KeyKind::Attestation
            },
        },
        CommandCode::LoadKey => CommandParams::LoadKey {
            id: KeyId(rng.gen()),
        },
        CommandCode::Seal => CommandParams::Seal {
            sk: KeyId(rng.gen()),
            policy: policy(rng),
            data: bytes(rng, 64),
        },
        CommandCode::Unseal => CommandParams::Unseal {
            sk: KeyId(rng.gen()),
            blob: SealedBlob {
                ciphertext: bytes(rng, 80),
                policy: policy(rng),
                nonce_tag: NonceTag(array(rng)),
                sk_id: KeyId(rng.gen()),
            },
        },
        CommandCode::Quote => CommandParams::Quote {
            aik: KeyId(rng.gen()),
            selection: selection(rng, false),
            nonce: bytes(rng, 32),
        },
        CommandCode::ResetLockout => CommandParams::ResetLockout {
            token: bytes(rng, 32),
        },
    };
    TpmCommand::new(locality(rng), params)
}

fn quote(rng: &mut impl Rng) -> AttestationQuote {
    AttestationQuote {
        selection: selection(rng, true),
        composite: digest(rng),
        qualifying_nonce: bytes(rng, 20),
        signature: bytes(rng, 64),
    }
}

/// A random SHA-1 layout message; every kind is equally likely.
pub fn random_wire(rng: &mut impl Rng) -> WireMessage {
    let sha1 = |rng: &mut dyn RngCore| {
        let mut v = vec![0u8; 20];
        rng.fill_bytes(&mut v);
        Digest::from_bytes(v)
    };
    match WireKind::ALL[rng.gen_range(0..WireKind::ALL.len())] {
        WireKind::RegistrationRequest => WireMessage::RegistrationRequest(RegistrationPayload {
            activation_key: ActivationKey(array(rng)),
            pin_digest: sha1(rng),
            credentials: credentials(rng),
        }),
        WireKind::LoginRequest1 => WireMessage::LoginRequest1(LoginAttestation {
            composite: sha1(rng),
            nonce: ChallengeNonce(array(rng)),
        }),
        WireKind::LoginRequest2 => WireMessage::LoginRequest2(
            LoginAttestation {
                composite: sha1(rng),
                nonce: ChallengeNonce(array(rng)),
            },
            credentials(rng),
        ),
        WireKind::CredentialLogin => WireMessage::CredentialLogin(credentials(rng)),
        WireKind::Challenge => WireMessage::Challenge(ChallengeNonce(array(rng))),
        WireKind::Grant => WireMessage::Grant(array(rng)),
        WireKind::Deny => WireMessage::Deny(DenyReason::from_code(rng.gen_range(1..=9)).unwrap()),
        WireKind::ServerHello => WireMessage::ServerHello(array(rng)),
        WireKind::Evidence => WireMessage::Evidence(Evidence {
            quote: quote(rng),
            aik_public: rng.gen::<bool>().then(|| AikPublic(array(rng))),
        }),
    }
}

fn set_size(buf: &mut [u8]) {
    let n = buf.len() as u32;
    buf[2..6].copy_from_slice(&n.to_be_bytes());
}

/// Round trip plus structural mutations of one command. Returns a
/// description of the first violated property.
pub fn check_command(cmd: &TpmCommand, rng: &mut impl Rng) -> Result<(), String> {
    let buf = encode_command(cmd);
    match decode_command(&buf) {
        Ok(back) if back == *cmd => {}
        other => return Err(format!("round trip of {cmd:?} gave {other:?}")),
    }
    let reject = |what: &str, b: &[u8]| match decode_command(b) {
        Ok(c) => Err(format!("{what}: accepted {c:?}")),
        Err(e) => Ok(e),
    };

    let cut = rng.gen_range(0..buf.len());
    reject("truncated", &buf[..cut])?;
    let mut fixed = buf[..cut].to_vec();
    if fixed.len() >= 6 {
        set_size(&mut fixed);
        reject("truncated with size fixed", &fixed)?;
    }

    let mut extra = buf.clone();
    extra.push(rng.gen());
    reject("trailing byte", &extra)?;
    set_size(&mut extra);
    if reject("trailing byte with size fixed", &extra)? != CodecError::TrailingBytes(1) {
        return Err("trailing byte not reported as such".into());
    }

    let mut size = buf.clone();
    let bogus = loop {
        let v: u32 = rng.gen();
        if v as usize != buf.len() {
            break v;
        }
    };
    size[2..6].copy_from_slice(&bogus.to_be_bytes());
    expect_err(reject("size field", &size)?, |e| {
        matches!(e, CodecError::SizeMismatch { .. })
    })?;

    let mut tag = buf.clone();
    tag[rng.gen_range(0..2)] ^= 1 << rng.gen_range(0..8);
    expect_err(reject("tag", &tag)?, |e| matches!(e, CodecError::BadTag(_)))?;

    let mut code = buf.clone();
    let unknown = loop {
        let v: u32 = rng.gen();
        if CommandCode::from_value(v).is_none() {
            break v;
        }
    };
    code[6..10].copy_from_slice(&unknown.to_be_bytes());
    expect_err(reject("unknown code", &code)?, |e| {
        matches!(e, CodecError::UnknownCode(_))
    })?;

    let mut loc = buf.clone();
    loc[10] = loop {
        let v: u8 = rng.gen();
        if Locality::try_from(v).is_err() {
            break v;
        }
    };
    expect_err(reject("locality", &loc)?, |e| {
        matches!(e, CodecError::BadLocality(_))
    })?;
    Ok(())
}

fn expect_err(e: CodecError, ok: impl Fn(&CodecError) -> bool) -> Result<(), String> {
    if ok(&e) {
        Ok(())
    } else {
        Err(format!("unexpected error {e:?}"))
    }
}

pub fn check_wire(msg: &WireMessage, rng: &mut impl Rng) -> Result<(), String> {
    let buf = encode_wire(msg);
    match decode_wire(&buf) {
        Ok(back) if back == *msg => {}
        other => return Err(format!("round trip of {msg:?} gave {other:?}")),
    }
    let reject = |what: &str, b: &[u8]| match decode_wire(b) {
        Ok(m) => Err(format!("{what}: accepted {m:?}")),
        Err(e) => Ok(e),
    };

    let cut = rng.gen_range(0..buf.len());
    reject("truncated", &buf[..cut])?;
    let mut extra = buf.clone();
    extra.push(rng.gen());
    reject("trailing byte", &extra)?;

    let mut kind = buf.clone();
    kind[0] = loop {
        let v: u8 = rng.gen();
        if WireKind::from_code(v).is_none() {
            break v;
        }
    };
    expect_err(reject("unknown kind", &kind)?, |e| {
        matches!(e, CodecError::UnknownKind(_))
    })?;

    if msg.kind().payload_len(20).is_some() {
        for b in [&buf[..buf.len() - 1], &extra[..]] {
            expect_err(reject("wrong length", b)?, |e| {
                matches!(e, CodecError::WrongLength { .. })
            })?;
        }
    }
    Ok(())
}

/// Flip one random bit. The mutant must be rejected or be the exact
/// encoding of what it decodes to.
pub fn check_flip(buf: &[u8], rng: &mut impl Rng, command: bool) -> Result<(), String> {
    let mut m = buf.to_vec();
    let i = rng.gen_range(0..m.len());
    m[i] ^= 1 << rng.gen_range(0..8);
    let again = if command {
        decode_command(&m).map(|c| encode_command(&c))
    } else {
        decode_wire(&m).map(|w| encode_wire(&w))
    };
    match again {
        Ok(re) if re != m => Err(format!("flip at {i} decoded but re-encoded differently")),
        _ => Ok(()),
    }
}

/// Runs every codec property over `n` commands and `n` messages.
pub fn codec_properties(seed: u64, n: usize) -> Result<(), String> {
    let mut r = rng(seed);
    for _ in 0..n {
        let cmd = random_command(&mut r);
        check_command(&cmd, &mut r)?;
        check_flip(&encode_command(&cmd), &mut r, true)?;
        let msg = random_wire(&mut r);
        check_wire(&msg, &mut r)?;
        check_flip(&encode_wire(&msg), &mut r, false)?;
    }
    Ok(())
}
