//! The local mobile banking application.
//!
//! Registration binds three dynamic registers to the device: PCR20 holds the
//! app measurement, PCR21 the activation key and PCR22 the PIN digest. Two
//! blobs are sealed:
//!
//! | blob        | contents       | policy           |
//! |-------------|----------------|------------------|
//! | activation  | activation key | PCR20, PCR22     |
//! | credentials | credentials    | PCR20-PCR22      |
//!
//! The activation blob cannot depend on PCR21 because PCR21 is rebuilt from
//! its contents at login. Login therefore unseals the activation key with the
//! right app and PIN, extends it into PCR21, quotes all three registers and,
//! for two-step login, unseals the credentials with all three in place.

mod counters;

use std::collections::BTreeSet;

use thiserror::Error;

pub use crate::identity::{ActivationKey, ChallengeNonce, Credentials, Pin, UserId};
pub use counters::{CountingTpm, FlowCounters};

use crate::codec::{Evidence, LoginAttestation, RegistrationPayload, WireMessage};
use crate::tpm::{
    Digest, DigestAlg, KeyHandle, KeyId, KeyKind, Locality, PcrIndex, PcrPolicy, SealedBlob,
    TpmApi, TpmError,
};

pub const SOFTWARE_PCR: PcrIndex = PcrIndex::from_const(20);
pub const ACTIVATION_KEY_PCR: PcrIndex = PcrIndex::from_const(21);
pub const PIN_PCR: PcrIndex = PcrIndex::from_const(22);

/// The OS, acting as measured launch environment, owns the dynamic registers.
pub const MLE_LOCALITY: Locality = Locality::Os;

/// Registers reported in every quote.
pub fn attested_selection() -> BTreeSet<PcrIndex> {
    BTreeSet::from([SOFTWARE_PCR, ACTIVATION_KEY_PCR, PIN_PCR])
}

/// PCR20 value after measuring `image` into a freshly reset register; the
/// value that identifies an app version.
pub fn software_configuration(image: &[u8], alg: DigestAlg) -> Digest {
    alg.extend(&alg.zero(), image)
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum LmaError {
    #[error("app is already registered")]
    AlreadyRegistered,
    #[error("app is not registered")]
    NotRegistered,
    #[error("wrong PIN")]
    WrongPin,
    #[error("TPM locked out after repeated failures")]
    Lockout,
    #[error("sealed data has an unexpected format")]
    CorruptBlob,
    #[error(transparent)]
    Tpm(#[from] TpmError),
}

/// What the app keeps on the device between sessions. Holds no plaintext
/// secret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviceStore {
    pub activation_blob: SealedBlob,
    pub credential_blob: SealedBlob,
    pub aik: KeyId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoginSteps {
    /// Attestation only.
    One,
    /// Attestation plus the sealed credentials.
    Two,
}

impl LoginSteps {
    pub fn count(self) -> u32 {
        match self {
            LoginSteps::One => 1,
            LoginSteps::Two => 2,
        }
    }
}

/// Messages a flow hands to the channel, plus the flow's operation counts.
#[derive(Clone, Debug)]
pub struct FlowOutput {
    pub request: WireMessage,
    pub evidence: Evidence,
    pub counters: FlowCounters,
}

enum Phase {
    Fresh,
    Registered(DeviceStore),
}

pub struct Lma<T: TpmApi> {
    tpm: CountingTpm<T>,
    phase: Phase,
}

impl<T: TpmApi> Lma<T> {
    pub fn new(tpm: T) -> Self {
        Lma {
            tpm: CountingTpm::new(tpm),
            phase: Phase::Fresh,
        }
    }

    /// An app that registered in an earlier run.
    pub fn restore(tpm: T, store: DeviceStore) -> Self {
        Lma {
            tpm: CountingTpm::new(tpm),
            phase: Phase::Registered(store),
        }
    }

    pub fn is_registered(&self) -> bool {
        matches!(self.phase, Phase::Registered(_))
    }

    pub fn store(&self) -> Option<&DeviceStore> {
        match &self.phase {
            Phase::Registered(s) => Some(s),
            Phase::Fresh => None,
        }
    }

    /// Counters of the current flow.
    pub fn counters(&self) -> FlowCounters {
        self.tpm.counters()
    }

    /// The underlying TPM, bypassing the app (and its counters).
    pub fn tpm_mut(&mut self) -> &mut T {
        self.tpm.inner_mut()
    }

    /// OS launch measurement of the app. Starts a new flow.
    pub fn measure_software(&mut self, app_image: &[u8]) -> Result<Digest, LmaError> {
        self.tpm.reset_counters();
        Ok(self
            .tpm
            .pcr_extend(SOFTWARE_PCR.value(), app_image, MLE_LOCALITY)?)
    }

    /// First-run registration. Expects `measure_software` earlier in this
    /// session and a challenge freshly issued by the bank.
    pub fn register(
        &mut self,
        key: &ActivationKey,
        pin: &Pin,
        creds: &Credentials,
        challenge: &ChallengeNonce,
    ) -> Result<FlowOutput, LmaError> {
        if self.is_registered() {
            return Err(LmaError::AlreadyRegistered);
        }
        let alg = self.tpm.alg();
        let tpm = &mut self.tpm;

        tpm.pcr_extend(ACTIVATION_KEY_PCR.value(), key.as_bytes(), MLE_LOCALITY)?;
        let pin_digest = tpm.hash(pin.digits(), alg)?;
        tpm.pcr_extend(PIN_PCR.value(), pin_digest.as_bytes(), MLE_LOCALITY)?;

        let aik = tpm.create_key(KeyKind::Attestation)?;
        let aik_public = aik.public.ok_or(TpmError::BadResponse)?;
        let sk = tpm.create_key(KeyKind::Storage)?;

        let activation_policy = current_policy(tpm, &[SOFTWARE_PCR, PIN_PCR])?;
        let activation_blob = tpm.seal(key.as_bytes(), &activation_policy, &sk)?;
        let credential_policy = current_policy(tpm, &[SOFTWARE_PCR, ACTIVATION_KEY_PCR, PIN_PCR])?;
        let credential_blob = tpm.seal(&creds.to_bytes(), &credential_policy, &sk)?;

        let quote = tpm.quote(&attested_selection(), challenge.as_bytes(), &aik)?;

        self.phase = Phase::Registered(DeviceStore {
            activation_blob,
            credential_blob,
            aik: aik.id,
        });
        Ok(FlowOutput {
            request: WireMessage::RegistrationRequest(RegistrationPayload {
                activation_key: *key,
                pin_digest,
                credentials: *creds,
            }),
            evidence: Evidence {
                quote,
                aik_public: Some(aik_public),
            },
            counters: self.tpm.counters(),
        })
    }

    /// Login after registration. Expects `measure_software` earlier in this
    /// session. On failure the dynamic registers are cleared, so a retry
    /// starts again from the measurement.
    pub fn login(
        &mut self,
        pin: &Pin,
        steps: LoginSteps,
        challenge: &ChallengeNonce,
    ) -> Result<FlowOutput, LmaError> {
        self.login_inner(pin, steps, challenge, None)
    }

    /// Fault-injection variant of [`login`](Self::login): extends
    /// `substitute` into PCR21 instead of the unsealed activation key.
    pub fn login_with_substituted_key(
        &mut self,
        pin: &Pin,
        steps: LoginSteps,
        challenge: &ChallengeNonce,
        substitute: &ActivationKey,
    ) -> Result<FlowOutput, LmaError> {
        self.login_inner(pin, steps, challenge, Some(substitute))
    }

    fn login_inner(
        &mut self,
        pin: &Pin,
        steps: LoginSteps,
        challenge: &ChallengeNonce,
        substitute: Option<&ActivationKey>,
    ) -> Result<FlowOutput, LmaError> {
        let Phase::Registered(store) = &self.phase else {
            return Err(LmaError::NotRegistered);
        };
        let store = store.clone();
        match login_flow(&mut self.tpm, &store, pin, steps, challenge, substitute) {
            Ok((request, quote)) => Ok(FlowOutput {
                request,
                evidence: Evidence {
                    quote,
                    aik_public: None,
                },
                counters: self.tpm.counters(),
            }),
            Err(e) => {
                let _ = self.end_session();
                Err(e)
            }
        }
    }

    /// Leave the app: the MLE clears the app's dynamic registers.
    pub fn end_session(&mut self) -> Result<(), LmaError> {
        for pcr in [SOFTWARE_PCR, ACTIVATION_KEY_PCR, PIN_PCR] {
            self.tpm.inner_mut().pcr_reset(pcr.value(), MLE_LOCALITY)?;
        }
        Ok(())
    }
}

fn current_policy<T: TpmApi>(tpm: &mut T, selection: &[PcrIndex]) -> Result<PcrPolicy, TpmError> {
    let mut expected = std::collections::BTreeMap::new();
    for index in selection {
        expected.insert(*index, tpm.pcr_read(index.value())?);
    }
    Ok(PcrPolicy::new(expected))
}

fn login_flow<T: TpmApi>(
    tpm: &mut CountingTpm<T>,
    store: &DeviceStore,
    pin: &Pin,
    steps: LoginSteps,
    challenge: &ChallengeNonce,
    substitute: Option<&ActivationKey>,
) -> Result<(WireMessage, crate::tpm::AttestationQuote), LmaError> {
    let alg = tpm.alg();
    let pin_digest = tpm.hash(pin.digits(), alg)?;
    tpm.pcr_extend(PIN_PCR.value(), pin_digest.as_bytes(), MLE_LOCALITY)?;

    let sk = KeyHandle::reference(store.activation_blob.sk_id, KeyKind::Storage);
    let key = tpm
        .unseal(&store.activation_blob, &sk)
        .map_err(|e| match e {
            TpmError::PolicyMismatch => LmaError::WrongPin,
            TpmError::Lockout => LmaError::Lockout,
            other => LmaError::Tpm(other),
        })?;
    let key = ActivationKey::from_slice(&key).ok_or(LmaError::CorruptBlob)?;
    let key = substitute.copied().unwrap_or(key);
    tpm.pcr_extend(ACTIVATION_KEY_PCR.value(), key.as_bytes(), MLE_LOCALITY)?;

    let aik = tpm.load_key(&KeyHandle::reference(store.aik, KeyKind::Attestation))?;
    let quote = tpm.quote(&attested_selection(), challenge.as_bytes(), &aik)?;
    let attestation = LoginAttestation {
        composite: quote.composite.clone(),
        nonce: *challenge,
    };

    let request = match steps {
        LoginSteps::One => WireMessage::LoginRequest1(attestation),
        LoginSteps::Two => {
            let sk = KeyHandle::reference(store.credential_blob.sk_id, KeyKind::Storage);
            let bytes = tpm
                .unseal(&store.credential_blob, &sk)
                .map_err(|e| match e {
                    TpmError::Lockout => LmaError::Lockout,
                    other => LmaError::Tpm(other),
                })?;
            let creds = Credentials::from_bytes(&bytes).ok_or(LmaError::CorruptBlob)?;
            WireMessage::LoginRequest2(attestation, creds)
        }
    };
    Ok((request, quote))
}

#[cfg(test)]
mod tests;
