use std::sync::Arc;

use super::*;
use crate::codec::encode_sealed_blob;
use crate::tpm::{Tpm, TpmConfig, TpmDevice};

const IMAGE: &[u8] = b"bank-app v1.0";

fn fixtures() -> (ActivationKey, Pin, Credentials, ChallengeNonce) {
    let user = UserId::from_name("alice").unwrap();
    (
        ActivationKey([0x5a; 20]),
        Pin::new("2468").unwrap(),
        Credentials::from_secret(user, b"correct horse"),
        ChallengeNonce([0x11; 20]),
    )
}

fn registered() -> Lma<Tpm> {
    let (key, pin, creds, nonce) = fixtures();
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(3)));
    lma.measure_software(IMAGE).unwrap();
    lma.register(&key, &pin, &creds, &nonce).unwrap();
    lma.end_session().unwrap();
    lma
}

#[test]
fn registration_counts() {
    let (key, pin, creds, nonce) = fixtures();
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(3)));
    lma.measure_software(IMAGE).unwrap();
    let out = lma.register(&key, &pin, &creds, &nonce).unwrap();
    assert_eq!(out.counters.as_tuple(), (2, 1, 0, 1, 3));
    assert!(out.evidence.aik_public.is_some());
    assert!(matches!(out.request, WireMessage::RegistrationRequest(_)));
    assert_eq!(
        lma.register(&key, &pin, &creds, &nonce).unwrap_err(),
        LmaError::AlreadyRegistered
    );
}

#[test]
fn login_counts_by_steps() {
    let (_, pin, creds, nonce) = fixtures();
    let mut lma = registered();
    for (steps, unseals) in [(LoginSteps::One, 1), (LoginSteps::Two, 2)] {
        lma.measure_software(IMAGE).unwrap();
        let out = lma.login(&pin, steps, &nonce).unwrap();
        assert_eq!(out.counters.as_tuple(), (0, 1, unseals, 1, 3));
        if let WireMessage::LoginRequest2(_, c) = &out.request {
            assert_eq!(*c, creds);
        }
        lma.end_session().unwrap();
    }
}

#[test]
fn login_composite_matches_registration() {
    let (key, pin, creds, nonce) = fixtures();
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(3)));
    lma.measure_software(IMAGE).unwrap();
    let reg = lma.register(&key, &pin, &creds, &nonce).unwrap();
    lma.end_session().unwrap();
    lma.measure_software(IMAGE).unwrap();
    let login = lma.login(&pin, LoginSteps::One, &nonce).unwrap();
    assert_eq!(reg.evidence.quote.composite, login.evidence.quote.composite);
}

#[test]
fn login_before_registration() {
    let (_, pin, _, nonce) = fixtures();
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(3)));
    lma.measure_software(IMAGE).unwrap();
    assert_eq!(
        lma.login(&pin, LoginSteps::One, &nonce).unwrap_err(),
        LmaError::NotRegistered
    );
}

#[test]
fn wrong_pin_and_tampered_image_fail_locally() {
    let (_, pin, _, nonce) = fixtures();
    let mut lma = registered();
    lma.measure_software(IMAGE).unwrap();
    let bad = Pin::new("1357").unwrap();
    assert_eq!(
        lma.login(&bad, LoginSteps::One, &nonce).unwrap_err(),
        LmaError::WrongPin
    );
    lma.measure_software(b"bank-app v1.0 + hook").unwrap();
    assert_eq!(
        lma.login(&pin, LoginSteps::One, &nonce).unwrap_err(),
        LmaError::WrongPin
    );
    // the failures cleared the registers, so the honest app still works
    lma.measure_software(IMAGE).unwrap();
    lma.login(&pin, LoginSteps::Two, &nonce).unwrap();
}

#[test]
fn fifth_wrong_pin_locks_out() {
    let (_, pin, _, nonce) = fixtures();
    let mut lma = registered();
    let bad = Pin::new("0000").unwrap();
    let mut results = Vec::new();
    for _ in 0..5 {
        lma.measure_software(IMAGE).unwrap();
        results.push(lma.login(&bad, LoginSteps::One, &nonce).unwrap_err());
    }
    assert_eq!(results[..4], [LmaError::WrongPin; 4]);
    assert_eq!(results[4], LmaError::Lockout);
    lma.measure_software(IMAGE).unwrap();
    assert_eq!(
        lma.login(&pin, LoginSteps::One, &nonce).unwrap_err(),
        LmaError::Lockout
    );
}

#[test]
fn substituted_key_changes_composite() {
    let (_, pin, _, nonce) = fixtures();
    let mut lma = registered();
    lma.measure_software(IMAGE).unwrap();
    let honest = lma.login(&pin, LoginSteps::One, &nonce).unwrap();
    lma.end_session().unwrap();
    lma.measure_software(IMAGE).unwrap();
    let forged = lma
        .login_with_substituted_key(&pin, LoginSteps::One, &nonce, &ActivationKey([0; 20]))
        .unwrap();
    assert_ne!(
        honest.evidence.quote.composite,
        forged.evidence.quote.composite
    );
}

#[test]
fn blob_policies() {
    let lma = registered();
    let store = lma.store().unwrap();
    assert_eq!(
        store.activation_blob.policy.selection(),
        BTreeSet::from([SOFTWARE_PCR, PIN_PCR])
    );
    assert_eq!(
        store.credential_blob.policy.selection(),
        attested_selection()
    );
}

#[test]
fn store_holds_no_plaintext() {
    let (key, _, creds, _) = fixtures();
    let lma = registered();
    let store = lma.store().unwrap();
    let mut persisted = encode_sealed_blob(&store.activation_blob);
    persisted.extend(encode_sealed_blob(&store.credential_blob));
    let contains = |needle: &[u8]| persisted.windows(needle.len()).any(|w| w == needle);
    assert!(!contains(key.as_bytes()));
    assert!(!contains(&creds.to_bytes()));
    assert!(!contains(&creds.secret_digest));
}

#[test]
fn software_configuration_matches_pcr20() {
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(3)));
    let pcr = lma.measure_software(IMAGE).unwrap();
    assert_eq!(pcr, software_configuration(IMAGE, DigestAlg::Sha1));
}

#[test]
fn same_flow_over_device_interface() {
    let (key, pin, creds, nonce) = fixtures();
    let mut direct = Lma::new(Tpm::new(TpmConfig::seeded(9)));
    let device = Arc::new(TpmDevice::new(TpmConfig::seeded(9)));
    let mut remote = Lma::new(device.client());
    for lma in [&mut direct as &mut dyn FlowDriver, &mut remote] {
        lma.run(&key, &pin, &creds, &nonce);
    }
    assert_eq!(direct.store(), remote.store());
}

trait FlowDriver {
    fn run(&mut self, key: &ActivationKey, pin: &Pin, creds: &Credentials, nonce: &ChallengeNonce);
}

impl<T: TpmApi> FlowDriver for Lma<T> {
    fn run(&mut self, key: &ActivationKey, pin: &Pin, creds: &Credentials, nonce: &ChallengeNonce) {
        self.measure_software(IMAGE).unwrap();
        self.register(key, pin, creds, nonce).unwrap();
        self.end_session().unwrap();
        self.measure_software(IMAGE).unwrap();
        let out = self.login(pin, LoginSteps::Two, nonce).unwrap();
        assert_eq!(out.counters.as_tuple(), (0, 1, 2, 1, 3));
    }
}
