//! The same scripted session against two identically seeded banks, one in
//! process and one over loopback TCP, must produce the same decisions and
//! the same transcript bytes.

use std::sync::Arc;

use attest_sim::bank::{BankConfig, BankService};
use attest_sim::channel::{
    open_session, BankEndpoint, BankServer, ChannelConfig, Session, Transport,
};
use attest_sim::codec::{DenyReason, WireMessage};
use attest_sim::harness::GENUINE_IMAGE;
use attest_sim::identity::{Credentials, Pin, UserId};
use attest_sim::lma::{Lma, LoginSteps};
use attest_sim::tpm::{Tpm, TpmConfig};

const TOKEN: &[u8] = b"differential token";

fn creds(secret: &[u8]) -> Credentials {
    Credentials::from_secret(UserId::from_name("carol").unwrap(), secret)
}

fn endpoint(seed: u64) -> Arc<BankEndpoint> {
    let bank = Arc::new(BankService::new(BankConfig::seeded(seed)).unwrap());
    Arc::new(BankEndpoint::new(bank, TOKEN))
}

fn receive_decision(s: &mut Session) -> WireMessage {
    let decision = s.recv().unwrap();
    assert!(matches!(s.recv().unwrap(), WireMessage::Challenge(_)));
    decision
}

/// Runs the script and returns every decision plus the transcript log.
fn script(ep: &BankEndpoint, transport: Transport, seed: u64) -> (Vec<WireMessage>, String) {
    let good = creds(b"correct horse");
    ep.bank().provision_account(&good);
    let key = ep.bank().issue_activation_key(&good.user_id).unwrap();
    let pin = Pin::new("4321").unwrap();
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(seed)));
    let mut s = open_session(&ChannelConfig::new(transport, TOKEN)).unwrap();
    let mut decisions = Vec::new();

    let msg = WireMessage::CredentialLogin(good);
    decisions.push(s.request(&msg, None).unwrap());
    let msg = WireMessage::CredentialLogin(creds(b"wrong"));
    decisions.push(s.request(&msg, None).unwrap());

    lma.measure_software(GENUINE_IMAGE).unwrap();
    let reg = lma
        .register(&key, &pin, &good, &s.challenge().unwrap())
        .unwrap();
    lma.end_session().unwrap();
    decisions.push(s.request(&reg.request, Some(&reg.evidence)).unwrap());
    decisions.push(s.request(&reg.request, Some(&reg.evidence)).unwrap());

    let mut first_login = None;
    for steps in [LoginSteps::One, LoginSteps::Two] {
        lma.measure_software(GENUINE_IMAGE).unwrap();
        let out = lma.login(&pin, steps, &s.challenge().unwrap()).unwrap();
        lma.end_session().unwrap();
        decisions.push(s.request(&out.request, Some(&out.evidence)).unwrap());
        first_login.get_or_insert(out);
    }

    let replay = first_login.unwrap();
    decisions.push(s.request(&replay.request, Some(&replay.evidence)).unwrap());

    lma.measure_software(GENUINE_IMAGE).unwrap();
    let mut forged = lma
        .login(&pin, LoginSteps::One, &s.challenge().unwrap())
        .unwrap();
    lma.end_session().unwrap();
    forged.evidence.quote.signature[0] ^= 0x80;
    decisions.push(s.request(&forged.request, Some(&forged.evidence)).unwrap());

    s.send(&WireMessage::Evidence(replay.evidence.clone()))
        .unwrap();
    decisions.push(receive_decision(&mut s));

    s.send(&replay.request).unwrap();
    s.send(&replay.request).unwrap();
    decisions.push(receive_decision(&mut s));

    s.send(&WireMessage::Grant([0; 32])).unwrap();
    decisions.push(receive_decision(&mut s));

    (decisions, s.transcript().to_log())
}

#[test]
fn in_process_and_tcp_agree() {
    for seed in [1, 2, 42] {
        let local = endpoint(seed);
        let (a, log_a) = script(&local, Transport::InProcess(Arc::clone(&local)), seed);

        let remote = endpoint(seed);
        let server = BankServer::spawn(Arc::clone(&remote), "127.0.0.1:0").unwrap();
        let (b, log_b) = script(&remote, Transport::LocalTcp(server.addr()), seed);

        assert_eq!(a, b, "seed {seed}");
        assert_eq!(log_a, log_b, "seed {seed}");

        let deny = |r| WireMessage::Deny(r);
        assert!(matches!(a[0], WireMessage::Grant(_)));
        assert_eq!(a[1], deny(DenyReason::BadCredentials));
        assert!(matches!(a[2], WireMessage::Grant(_)));
        assert!(matches!(a[3], WireMessage::Deny(_)));
        assert!(matches!(a[4], WireMessage::Grant(_)));
        assert!(matches!(a[5], WireMessage::Grant(_)));
        assert_eq!(a[6], deny(DenyReason::StaleNonce));
        assert_eq!(a[7], deny(DenyReason::BadSignature));
        assert_eq!(a[8], deny(DenyReason::Malformed));
        assert_eq!(a[9], deny(DenyReason::MissingEvidence));
        assert_eq!(a[10], deny(DenyReason::Malformed));
    }
}
