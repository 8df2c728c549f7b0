//! The app registers with the bank, then logs in with one and two steps.
//! Prints the TPM operation counters and request sizes of each flow.

use std::sync::Arc;

use attest_sim::bank::{BankConfig, BankService};
use attest_sim::channel::{open_session, BankEndpoint, ChannelConfig, Transport};
use attest_sim::harness::GENUINE_IMAGE;
use attest_sim::identity::{Credentials, Pin, UserId};
use attest_sim::lma::{Lma, LoginSteps};
use attest_sim::tpm::{Tpm, TpmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bank = Arc::new(BankService::new(BankConfig::seeded(3))?);
    let creds = Credentials::from_secret(UserId::from_name("alice").unwrap(), b"hunter2");
    bank.provision_account(&creds);
    let activation_key = bank.issue_activation_key(&creds.user_id)?;

    let endpoint = Arc::new(BankEndpoint::new(bank, b"token".to_vec()));
    let mut session = open_session(&ChannelConfig::new(
        Transport::InProcess(endpoint),
        *b"token",
    ))?;
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(3)));
    let pin = Pin::new("2468")?;

    lma.measure_software(GENUINE_IMAGE)?;
    let out = lma.register(&activation_key, &pin, &creds, &session.challenge().unwrap())?;
    lma.end_session()?;
    let reply = session.request(&out.request, Some(&out.evidence))?;
    println!(
        "register  {:?}  [{}]  {} bytes",
        reply.kind(),
        out.counters,
        out.request.payload().len()
    );

    for steps in [LoginSteps::One, LoginSteps::Two] {
        lma.measure_software(GENUINE_IMAGE)?;
        let out = lma.login(&pin, steps, &session.challenge().unwrap())?;
        lma.end_session()?;
        let reply = session.request(&out.request, Some(&out.evidence))?;
        println!(
            "login-{}   {:?}  [{}]  {} bytes",
            steps.count(),
            reply.kind(),
            out.counters,
            out.request.payload().len()
        );
    }
    Ok(())
}
