//! The bank's verifier: account records, activation keys, challenges, the
//! whitelist of known-good PCR composites, and the access decisions.

mod whitelist;

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub use whitelist::{
    format_whitelist, parse_whitelist, read_whitelist_file, write_whitelist_file, WhitelistEntry,
    WhitelistFileError,
};

use crate::codec::{DenyReason, LoginAttestation, RegistrationPayload, WireMessage};
use crate::identity::{AccessCertificate, ActivationKey, ChallengeNonce, Credentials, UserId};
use crate::lma::attested_selection;
use crate::tpm::{AikPublic, AttestationQuote, Digest, DigestAlg};

pub const DEFAULT_NONCE_TTL_SECS: u64 = 120;

#[derive(Clone, Debug)]
pub struct BankConfig {
    pub alg: DigestAlg,
    pub seed: u64,
    pub nonce_ttl_secs: u64,
    /// Where the whitelist is loaded from and saved to; in memory if `None`.
    pub whitelist_path: Option<PathBuf>,
}

impl BankConfig {
    pub fn seeded(seed: u64) -> Self {
        BankConfig {
            alg: DigestAlg::Sha1,
            seed,
            nonce_ttl_secs: DEFAULT_NONCE_TTL_SECS,
            whitelist_path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    /// Carries a fresh 32-byte session token.
    Grant([u8; 32]),
    Deny(DenyReason),
}

impl Decision {
    pub fn is_grant(&self) -> bool {
        matches!(self, Decision::Grant(_))
    }

    pub fn to_wire(self) -> WireMessage {
        match self {
            Decision::Grant(token) => WireMessage::Grant(token),
            Decision::Deny(reason) => WireMessage::Deny(reason),
        }
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum RegistrationError {
    #[error("quote signature does not verify")]
    BadSignature,
    #[error("activation key was not issued to this user")]
    UnknownActivationKey,
    #[error("credentials do not match the account")]
    BadCredentials,
    #[error("challenge is unknown, expired or already used")]
    StaleNonce,
    #[error("user already has an active registration")]
    DuplicateRegistration,
    #[error("quote does not cover the attested registers")]
    WrongSelection,
}

impl RegistrationError {
    pub fn deny_reason(self) -> DenyReason {
        match self {
            RegistrationError::BadSignature => DenyReason::BadSignature,
            RegistrationError::UnknownActivationKey => DenyReason::UnknownActivationKey,
            RegistrationError::BadCredentials => DenyReason::BadCredentials,
            RegistrationError::StaleNonce => DenyReason::StaleNonce,
            RegistrationError::DuplicateRegistration => DenyReason::DuplicateRegistration,
            RegistrationError::WrongSelection => DenyReason::Malformed,
        }
    }
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("unknown user")]
    UnknownUser,
    #[error("whitelist file: {0}")]
    Whitelist(#[from] WhitelistFileError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserRecord {
    pub user_id: UserId,
    pub credential_digest: [u8; 32],
    pub access_certificate: AccessCertificate,
    /// PCR21 and PCR22 as the registration request implies them. Lets a
    /// software configuration be revoked across users.
    pub expected_key_pcr: Digest,
    pub expected_pin_pcr: Digest,
}

struct Challenge {
    nonce: ChallengeNonce,
    expires_at: u64,
}

struct State {
    rng: ChaCha20Rng,
    now: u64,
    next_session: u64,
    accounts: HashMap<UserId, [u8; 32]>,
    activation_keys: HashMap<ActivationKey, UserId>,
    users: HashMap<UserId, UserRecord>,
    whitelist: Vec<WhitelistEntry>,
    outstanding: HashMap<SessionId, Challenge>,
    consumed: HashSet<ChallengeNonce>,
}

impl State {
    /// Removes the session's challenge; it is spent whatever the outcome.
    fn take_nonce(&mut self, session: SessionId, presented: &[u8]) -> bool {
        let Some(ch) = self.outstanding.remove(&session) else {
            return false;
        };
        let fresh = self.consumed.insert(ch.nonce) && self.now <= ch.expires_at;
        fresh && presented == ch.nonce.as_bytes()
    }

    fn active_entry(&self, user: &UserId) -> Option<&WhitelistEntry> {
        self.whitelist
            .iter()
            .find(|e| e.user_id == *user && !e.revoked)
    }
}

pub struct BankService {
    config: BankConfig,
    state: Mutex<State>,
}

impl BankService {
    pub fn new(config: BankConfig) -> Result<Self, BankError> {
        let whitelist = match &config.whitelist_path {
            Some(path) => read_whitelist_file(path)?,
            None => Vec::new(),
        };
        let state = State {
            rng: ChaCha20Rng::seed_from_u64(config.seed),
            now: 0,
            next_session: 1,
            accounts: HashMap::new(),
            activation_keys: HashMap::new(),
            users: HashMap::new(),
            whitelist,
            outstanding: HashMap::new(),
            consumed: HashSet::new(),
        };
        Ok(BankService {
            config,
            state: Mutex::new(state),
        })
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Out-of-band account record the registration credentials are checked
    /// against.
    pub fn provision_account(&self, creds: &Credentials) {
        self.lock()
            .accounts
            .insert(creds.user_id, creds.secret_digest);
    }

    /// A fresh activation key for `user`, handed to them out of band.
    pub fn issue_activation_key(&self, user: &UserId) -> Result<ActivationKey, BankError> {
        let mut st = self.lock();
        if !st.accounts.contains_key(user) {
            return Err(BankError::UnknownUser);
        }
        loop {
            let mut key = [0u8; ActivationKey::LEN];
            st.rng.fill_bytes(&mut key);
            let key = ActivationKey(key);
            if let std::collections::hash_map::Entry::Vacant(slot) = st.activation_keys.entry(key) {
                slot.insert(*user);
                return Ok(key);
            }
        }
    }

    pub fn open_session(&self) -> SessionId {
        let mut st = self.lock();
        let id = SessionId(st.next_session);
        st.next_session += 1;
        id
    }

    /// Replaces any challenge the session still holds.
    pub fn issue_challenge(&self, session: SessionId) -> ChallengeNonce {
        let mut st = self.lock();
        let mut nonce = [0u8; ChallengeNonce::LEN];
        st.rng.fill_bytes(&mut nonce);
        let nonce = ChallengeNonce(nonce);
        let expires_at = st.now + self.config.nonce_ttl_secs;
        st.outstanding
            .insert(session, Challenge { nonce, expires_at });
        nonce
    }

    pub fn now(&self) -> u64 {
        self.lock().now
    }

    /// Moves the simulated clock forward.
    pub fn advance_clock(&self, secs: u64) {
        self.lock().now += secs;
    }

    pub fn register_user(
        &self,
        session: SessionId,
        req: &RegistrationPayload,
        quote: &AttestationQuote,
        aik_public: &AikPublic,
    ) -> Result<AccessCertificate, RegistrationError> {
        let mut st = self.lock();
        if !st.take_nonce(session, &quote.qualifying_nonce) {
            return Err(RegistrationError::StaleNonce);
        }
        if !quote.verify(aik_public) {
            return Err(RegistrationError::BadSignature);
        }
        if quote.selection != attested_selection() {
            return Err(RegistrationError::WrongSelection);
        }
        let user = req.credentials.user_id;
        if st.activation_keys.get(&req.activation_key) != Some(&user) {
            return Err(RegistrationError::UnknownActivationKey);
        }
        if st.accounts.get(&user) != Some(&req.credentials.secret_digest) {
            return Err(RegistrationError::BadCredentials);
        }
        if st.active_entry(&user).is_some() {
            return Err(RegistrationError::DuplicateRegistration);
        }

        let alg = self.config.alg;
        let mut cert = [0u8; AccessCertificate::LEN];
        st.rng.fill_bytes(&mut cert);
        let record = UserRecord {
            user_id: user,
            credential_digest: req.credentials.secret_digest,
            access_certificate: AccessCertificate(cert),
            expected_key_pcr: alg.extend(&alg.zero(), req.activation_key.as_bytes()),
            expected_pin_pcr: alg.extend(&alg.zero(), req.pin_digest.as_bytes()),
        };
        st.users.insert(user, record);
        st.whitelist.push(WhitelistEntry {
            user_id: user,
            expected_composite: quote.composite.clone(),
            aik_public: *aik_public,
            revoked: false,
        });
        self.save(&st);
        Ok(AccessCertificate(cert))
    }

    /// Decide a login. `msg` must be a one- or two-step login request; any
    /// other message is denied as malformed. The session's challenge is spent
    /// by every call.
    pub fn verify_login(
        &self,
        session: SessionId,
        msg: &WireMessage,
        quote: &AttestationQuote,
    ) -> Decision {
        let mut st = self.lock();
        let nonce_ok = st.take_nonce(session, &quote.qualifying_nonce);
        let (attestation, creds) = match msg {
            WireMessage::LoginRequest1(a) => (a, None),
            WireMessage::LoginRequest2(a, c) => (a, Some(c)),
            _ => return Decision::Deny(DenyReason::Malformed),
        };
        if !attests_quote(attestation, quote) {
            return Decision::Deny(DenyReason::Malformed);
        }

        let matching = || {
            st.whitelist
                .iter()
                .filter(|e| e.expected_composite == quote.composite)
        };
        let Some(entry) = matching().find(|e| !e.revoked) else {
            return Decision::Deny(if matching().next().is_some() {
                DenyReason::Revoked
            } else {
                DenyReason::UnknownComposite
            });
        };
        if !quote.verify(&entry.aik_public) {
            return Decision::Deny(DenyReason::BadSignature);
        }
        if !nonce_ok {
            return Decision::Deny(DenyReason::StaleNonce);
        }
        if let Some(creds) = creds {
            let record = st.users.get(&entry.user_id);
            if creds.user_id != entry.user_id
                || record.map(|r| r.credential_digest) != Some(creds.secret_digest)
            {
                return Decision::Deny(DenyReason::BadCredentials);
            }
        }
        Decision::Grant(grant_token(&mut st))
    }

    /// Password-style login without attestation.
    pub fn verify_credential_login(&self, creds: &Credentials) -> Decision {
        let mut st = self.lock();
        if st.accounts.get(&creds.user_id) != Some(&creds.secret_digest) {
            return Decision::Deny(DenyReason::BadCredentials);
        }
        Decision::Grant(grant_token(&mut st))
    }

    /// Revoke every active entry for a configuration. `config` matches an
    /// entry either as its full composite or as the software measurement
    /// (PCR20) the entry's user registered with. Returns the count revoked.
    pub fn revoke_configuration(&self, config: &Digest) -> usize {
        let alg = self.config.alg;
        let mut st = self.lock();
        let State {
            whitelist, users, ..
        } = &mut *st;
        let mut count = 0;
        for entry in whitelist.iter_mut().filter(|e| !e.revoked) {
            let by_software = users.get(&entry.user_id).is_some_and(|r| {
                alg.digest_parts(&[
                    config.as_bytes(),
                    r.expected_key_pcr.as_bytes(),
                    r.expected_pin_pcr.as_bytes(),
                ]) == entry.expected_composite
            });
            if entry.expected_composite == *config || by_software {
                entry.revoked = true;
                count += 1;
            }
        }
        if count > 0 {
            self.save(&st);
        }
        count
    }

    pub fn whitelist(&self) -> Vec<WhitelistEntry> {
        self.lock().whitelist.clone()
    }

    pub fn user(&self, user: &UserId) -> Option<UserRecord> {
        self.lock().users.get(user).cloned()
    }

    pub fn whitelist_path(&self) -> Option<&Path> {
        self.config.whitelist_path.as_deref()
    }

    fn save(&self, st: &State) {
        if let Some(path) = &self.config.whitelist_path {
            if let Err(e) = write_whitelist_file(path, &st.whitelist) {
                log::warn!("could not save whitelist to {}: {e}", path.display());
            }
        }
    }
}

fn attests_quote(a: &LoginAttestation, quote: &AttestationQuote) -> bool {
    a.composite == quote.composite
        && a.nonce.as_bytes()[..] == quote.qualifying_nonce[..]
        && quote.selection == attested_selection()
}

fn grant_token(st: &mut State) -> [u8; 32] {
    let mut token = [0u8; 32];
    st.rng.fill_bytes(&mut token);
    token
}
