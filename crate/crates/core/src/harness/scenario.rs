use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::store::{decode_device_store, encode_device_store};
use super::world::{pin_from_code, tampered_image, World, GENUINE_IMAGE, PIN_SPACE};
use crate::channel::Transcript;
use crate::codec::{DenyReason, Evidence, LoginAttestation, WireMessage};
use crate::lma::{
    attested_selection, software_configuration, FlowCounters, Lma, LmaError, LoginSteps,
    ACTIVATION_KEY_PCR, MLE_LOCALITY, PIN_PCR,
};
use crate::tpm::{KeyHandle, KeyKind, TpmApi, TpmError, DEFAULT_ADMIN_TOKEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Image {
    Genuine,
    /// The genuine image with a single byte flipped.
    Tampered,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PinEntry {
    Correct,
    /// The `n`th wrong guess; distinct from the correct PIN for
    /// `n` not a multiple of one million.
    Wrong(u32),
}

/// What a step ended in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Grant,
    Deny(DenyReason),
    /// The app failed before anything reached the bank.
    Local(LmaError),
    /// Entries revoked by a revocation step.
    Revoked(usize),
    Done,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Grant => f.write_str("Grant"),
            Outcome::Deny(r) => write!(f, "Deny({r})"),
            Outcome::Local(LmaError::Tpm(e)) => write!(f, "{e:?}"),
            Outcome::Local(e) => write!(f, "{e:?}"),
            Outcome::Revoked(n) => write!(f, "revoked {n}"),
            Outcome::Done => f.write_str("ok"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expect {
    pub outcome: Outcome,
    pub counters: Option<FlowCounters>,
    /// Payload bytes of the request the app sent.
    pub request_bytes: Option<usize>,
}

impl Expect {
    pub fn outcome(outcome: Outcome) -> Self {
        Expect {
            outcome,
            counters: None,
            request_bytes: None,
        }
    }

    pub fn grant() -> Self {
        Self::outcome(Outcome::Grant)
    }

    pub fn deny(reason: DenyReason) -> Self {
        Self::outcome(Outcome::Deny(reason))
    }

    pub fn local(err: LmaError) -> Self {
        Self::outcome(Outcome::Local(err))
    }

    pub fn with_counters(mut self, counters: FlowCounters) -> Self {
        self.counters = Some(counters);
        self
    }

    pub fn with_bytes(mut self, bytes: usize) -> Self {
        self.request_bytes = Some(bytes);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Provision {
        user: String,
    },
    /// The OS launches the app and measures it.
    Measure {
        user: String,
        image: Image,
    },
    Register {
        user: String,
        expect: Expect,
    },
    Login {
        user: String,
        steps: LoginSteps,
        pin: PinEntry,
        expect: Expect,
    },
    EndSession {
        user: String,
    },
    CredentialLogin {
        user: String,
        expect: Expect,
    },
    /// A tampered app that has stolen the activation key and PIN rebuilds
    /// PCR21/PCR22 and quotes directly, without the sealed blobs.
    RogueLogin {
        user: String,
        expect: Expect,
    },
    /// Resend the last login request and evidence verbatim.
    ReplayLogin {
        user: String,
        expect: Expect,
    },
    /// Revoke the genuine app's software configuration.
    RevokeGenuine {
        expect: Expect,
    },
    ResetLockout {
        user: String,
    },
    /// Copy `from`'s device store and identity onto `to`'s phone, as an
    /// attacker who cloned the app's storage would.
    TransplantStore {
        from: String,
        to: String,
    },
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Provision { user } => write!(f, "provision {user}"),
            Step::Measure { user, image } => write!(f, "measure {user} {image:?}"),
            Step::Register { user, .. } => write!(f, "register {user}"),
            Step::Login {
                user, steps, pin, ..
            } => {
                let pin = match pin {
                    PinEntry::Correct => "correct-pin".to_string(),
                    PinEntry::Wrong(n) => format!("wrong-pin#{n}"),
                };
                write!(f, "login-{} {user} {pin}", steps.count())
            }
            Step::EndSession { user } => write!(f, "end-session {user}"),
            Step::CredentialLogin { user, .. } => write!(f, "credential-login {user}"),
            Step::RogueLogin { user, .. } => write!(f, "rogue-login {user}"),
            Step::ReplayLogin { user, .. } => write!(f, "replay-login {user}"),
            Step::RevokeGenuine { .. } => f.write_str("revoke genuine"),
            Step::ResetLockout { user } => write!(f, "reset-lockout {user}"),
            Step::TransplantStore { from, to } => write!(f, "transplant {from} -> {to}"),
        }
    }
}

impl Step {
    fn expect(&self) -> Option<&Expect> {
        match self {
            Step::Register { expect, .. }
            | Step::Login { expect, .. }
            | Step::CredentialLogin { expect, .. }
            | Step::RogueLogin { expect, .. }
            | Step::ReplayLogin { expect, .. }
            | Step::RevokeGenuine { expect } => Some(expect),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub script: Vec<Step>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    Registration,
    Login1,
    Login2,
}

/// Counters of one app flow that completed on the device.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub kind: FlowKind,
    pub counters: FlowCounters,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: String,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counters: Option<FlowCounters>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub request_bytes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub seed: u64,
    pub passed: bool,
    /// First step whose result differed from the script's expectation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<String>,
    pub steps: Vec<StepRecord>,
    pub flows: Vec<FlowRecord>,
    #[serde(skip)]
    pub transcripts: Vec<Transcript>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("scenario {scenario}: {divergence}")]
    ExpectationFailed {
        scenario: String,
        divergence: String,
        report: Box<ScenarioReport>,
    },
}

struct StepResult {
    outcome: Outcome,
    counters: Option<FlowCounters>,
    request_bytes: Option<usize>,
    flow: Option<FlowKind>,
}

impl StepResult {
    fn plain(outcome: Outcome) -> Self {
        StepResult {
            outcome,
            counters: None,
            request_bytes: None,
            flow: None,
        }
    }
}

/// Run a script against a fresh world. Never fails: divergences and setup
/// errors are recorded in the report, and execution stops at the first one.
pub fn execute(scenario: &Scenario, seed: u64) -> ScenarioReport {
    let mut world = World::new(seed);
    let mut report = ScenarioReport {
        name: scenario.name.clone(),
        seed,
        passed: true,
        divergence: None,
        steps: Vec::new(),
        flows: Vec::new(),
        transcripts: Vec::new(),
    };
    for (i, step) in scenario.script.iter().enumerate() {
        let result = match run_step(&mut world, step) {
            Ok(r) => r,
            Err(e) => {
                report.passed = false;
                report.divergence = Some(format!("step {} ({step}): {e}", i + 1));
                break;
            }
        };
        report.steps.push(StepRecord {
            step: step.to_string(),
            outcome: result.outcome.to_string(),
            counters: result.counters,
            request_bytes: result.request_bytes,
        });
        if let (Some(kind), Some(counters)) = (result.flow, result.counters) {
            report.flows.push(FlowRecord { kind, counters });
        }
        if let Some(d) = step.expect().and_then(|e| diverges(e, &result)) {
            report.passed = false;
            report.divergence = Some(format!("step {} ({step}): {d}", i + 1));
            break;
        }
    }
    report.transcripts = world.into_transcripts();
    report
}

fn diverges(expect: &Expect, got: &StepResult) -> Option<String> {
    if expect.outcome != got.outcome {
        return Some(format!("expected {}, got {}", expect.outcome, got.outcome));
    }
    if let Some(c) = expect.counters {
        if got.counters != Some(c) {
            let got = got.counters.map_or("none".to_string(), |c| c.to_string());
            return Some(format!("expected counters {c}, got {got}"));
        }
    }
    if let Some(b) = expect.request_bytes {
        if got.request_bytes != Some(b) {
            return Some(format!(
                "expected {b} request bytes, got {:?}",
                got.request_bytes
            ));
        }
    }
    None
}

fn decision(msg: WireMessage) -> Result<Outcome, String> {
    match msg {
        WireMessage::Grant(_) => Ok(Outcome::Grant),
        WireMessage::Deny(r) => Ok(Outcome::Deny(r)),
        other => Err(format!("unexpected reply {:?}", other.kind())),
    }
}

fn run_step(world: &mut World, step: &Step) -> Result<StepResult, String> {
    let err = |e: crate::channel::ChannelError| e.to_string();
    match step {
        Step::Provision { user } => {
            world.provision(user)?;
            Ok(StepResult::plain(Outcome::Done))
        }
        Step::Measure { user, image } => {
            let c = world.customer(user)?;
            let image = match image {
                Image::Genuine => GENUINE_IMAGE.to_vec(),
                Image::Tampered => tampered_image(),
            };
            match c.lma.measure_software(&image) {
                Ok(_) => Ok(StepResult::plain(Outcome::Done)),
                Err(e) => Ok(StepResult::plain(Outcome::Local(e))),
            }
        }
        Step::Register { user, .. } => {
            let c = world.customer(user)?;
            let challenge = c.session.challenge().ok_or("no challenge")?;
            let out = match c.lma.register(&c.key, &c.pin, &c.creds, &challenge) {
                Ok(out) => out,
                Err(e) => return Ok(StepResult::plain(Outcome::Local(e))),
            };
            let reply = c
                .session
                .request(&out.request, Some(&out.evidence))
                .map_err(err)?;
            Ok(StepResult {
                outcome: decision(reply)?,
                counters: Some(out.counters),
                request_bytes: Some(out.request.payload().len()),
                flow: Some(FlowKind::Registration),
            })
        }
        Step::Login {
            user, steps, pin, ..
        } => {
            let c = world.customer(user)?;
            let pin = match pin {
                PinEntry::Correct => c.pin.clone(),
                PinEntry::Wrong(n) => pin_from_code(c.pin_code + n % PIN_SPACE),
            };
            let challenge = c.session.challenge().ok_or("no challenge")?;
            let out = match c.lma.login(&pin, *steps, &challenge) {
                Ok(out) => out,
                Err(e) => return Ok(StepResult::plain(Outcome::Local(e))),
            };
            let reply = c
                .session
                .request(&out.request, Some(&out.evidence))
                .map_err(err)?;
            c.captured = Some((out.request.clone(), out.evidence.clone()));
            Ok(StepResult {
                outcome: decision(reply)?,
                counters: Some(out.counters),
                request_bytes: Some(out.request.payload().len()),
                flow: Some(match steps {
                    LoginSteps::One => FlowKind::Login1,
                    LoginSteps::Two => FlowKind::Login2,
                }),
            })
        }
        Step::EndSession { user } => {
            let c = world.customer(user)?;
            c.lma.end_session().map_err(|e| e.to_string())?;
            Ok(StepResult::plain(Outcome::Done))
        }
        Step::CredentialLogin { user, .. } => {
            let c = world.customer(user)?;
            let msg = WireMessage::CredentialLogin(c.creds);
            let reply = c.session.request(&msg, None).map_err(err)?;
            Ok(StepResult {
                request_bytes: Some(msg.payload().len()),
                ..StepResult::plain(decision(reply)?)
            })
        }
        Step::RogueLogin { user, .. } => {
            let c = world.customer(user)?;
            let aik = c.lma.store().ok_or("user not registered")?.aik;
            let challenge = c.session.challenge().ok_or("no challenge")?;
            let (key, pin) = (c.key, c.pin.clone());
            let tpm = c.lma.tpm_mut();
            let quote = rogue_quote(tpm, &key, &pin, aik, &challenge).map_err(|e| e.to_string())?;
            let msg = WireMessage::LoginRequest1(LoginAttestation {
                composite: quote.composite.clone(),
                nonce: challenge,
            });
            let evidence = Evidence {
                quote,
                aik_public: None,
            };
            let reply = c.session.request(&msg, Some(&evidence)).map_err(err)?;
            c.lma.end_session().map_err(|e| e.to_string())?;
            Ok(StepResult {
                request_bytes: Some(msg.payload().len()),
                ..StepResult::plain(decision(reply)?)
            })
        }
        Step::ReplayLogin { user, .. } => {
            let c = world.customer(user)?;
            let (msg, evidence) = c.captured.clone().ok_or("nothing captured to replay")?;
            let reply = c.session.request(&msg, Some(&evidence)).map_err(err)?;
            Ok(StepResult {
                request_bytes: Some(msg.payload().len()),
                ..StepResult::plain(decision(reply)?)
            })
        }
        Step::RevokeGenuine { .. } => {
            let config = software_configuration(GENUINE_IMAGE, world.bank.config().alg);
            Ok(StepResult::plain(Outcome::Revoked(
                world.bank.revoke_configuration(&config),
            )))
        }
        Step::ResetLockout { user } => {
            let c = world.customer(user)?;
            c.lma
                .tpm_mut()
                .reset_lockout(DEFAULT_ADMIN_TOKEN)
                .map_err(|e| e.to_string())?;
            Ok(StepResult::plain(Outcome::Done))
        }
        Step::TransplantStore { from, to } => {
            let src = world.customer(from)?;
            let bytes = encode_device_store(src.lma.store().ok_or("source not registered")?);
            let (creds, key, pin, pin_code) = (src.creds, src.key, src.pin.clone(), src.pin_code);
            let store = decode_device_store(&bytes).map_err(|e| e.to_string())?;
            let dst = world.customer(to)?;
            dst.lma = Lma::restore(dst.device.client(), store);
            dst.creds = creds;
            dst.key = key;
            dst.pin = pin;
            dst.pin_code = pin_code;
            Ok(StepResult::plain(Outcome::Done))
        }
    }
}

fn rogue_quote<T: TpmApi>(
    tpm: &mut T,
    key: &crate::identity::ActivationKey,
    pin: &crate::identity::Pin,
    aik: crate::tpm::KeyId,
    challenge: &crate::identity::ChallengeNonce,
) -> Result<crate::tpm::AttestationQuote, TpmError> {
    let alg = tpm.alg();
    tpm.pcr_extend(ACTIVATION_KEY_PCR.value(), key.as_bytes(), MLE_LOCALITY)?;
    let pin_digest = tpm.hash(pin.digits(), alg)?;
    tpm.pcr_extend(PIN_PCR.value(), pin_digest.as_bytes(), MLE_LOCALITY)?;
    let aik = tpm.load_key(&KeyHandle::reference(aik, KeyKind::Attestation))?;
    tpm.quote(&attested_selection(), challenge.as_bytes(), &aik)
}
