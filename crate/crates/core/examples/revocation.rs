//! The bank revokes a software version: logins from it are then denied
//! while credential logins still work.

use attest_sim::bank::{BankConfig, BankService, Decision};
use attest_sim::codec::WireMessage;
use attest_sim::harness::GENUINE_IMAGE;
use attest_sim::identity::{Credentials, Pin, UserId};
use attest_sim::lma::{software_configuration, Lma, LoginSteps};
use attest_sim::tpm::{DigestAlg, Tpm, TpmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile_dir();
    let path = dir.join("whitelist.txt");
    let bank = BankService::new(BankConfig {
        whitelist_path: Some(path.clone()),
        ..BankConfig::seeded(6)
    })?;
    let creds = Credentials::from_secret(UserId::from_name("dave").unwrap(), b"pw");
    bank.provision_account(&creds);
    let key = bank.issue_activation_key(&creds.user_id)?;
    let pin = Pin::new("5555")?;
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(6)));

    let session = bank.open_session();
    lma.measure_software(GENUINE_IMAGE)?;
    let out = lma.register(&key, &pin, &creds, &bank.issue_challenge(session))?;
    lma.end_session()?;
    let WireMessage::RegistrationRequest(req) = &out.request else {
        unreachable!()
    };
    let aik = out
        .evidence
        .aik_public
        .expect("registration carries the AIK");
    bank.register_user(session, req, &out.evidence.quote, &aik)?;

    let mut login = |bank: &BankService| -> Result<_, Box<dyn std::error::Error>> {
        let session = bank.open_session();
        lma.measure_software(GENUINE_IMAGE)?;
        let out = lma.login(&pin, LoginSteps::One, &bank.issue_challenge(session))?;
        lma.end_session()?;
        Ok(describe(bank.verify_login(
            session,
            &out.request,
            &out.evidence.quote,
        )))
    };

    println!("before revocation: {}", login(&bank)?);
    let config = software_configuration(GENUINE_IMAGE, DigestAlg::Sha1);
    println!(
        "revoked {} entries for PCR20 {}",
        bank.revoke_configuration(&config),
        config.to_hex()
    );
    println!("after revocation:  {}", login(&bank)?);
    println!(
        "credential login:  {:?}",
        bank.verify_credential_login(&creds)
    );
    print!("whitelist file:\n{}", std::fs::read_to_string(&path)?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn describe(d: Decision) -> String {
    match d {
        Decision::Grant(_) => "Grant".into(),
        Decision::Deny(r) => format!("Deny({r})"),
    }
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("attest-sim-revocation-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}
