//! Run the bank on a loopback port and register over TCP.

use std::sync::Arc;

use attest_sim::bank::{BankConfig, BankService};
use attest_sim::channel::{
    open_session, BankEndpoint, BankServer, ChannelConfig, ChannelError, Transport,
};
use attest_sim::harness::GENUINE_IMAGE;
use attest_sim::identity::{Credentials, Pin, UserId};
use attest_sim::lma::{Lma, LoginSteps};
use attest_sim::tpm::{Tpm, TpmConfig};

const TOKEN: &[u8] = b"loopback bank";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bank = Arc::new(BankService::new(BankConfig::seeded(5))?);
    let creds = Credentials::from_secret(UserId::from_name("carol").unwrap(), b"pw");
    bank.provision_account(&creds);
    let key = bank.issue_activation_key(&creds.user_id)?;
    let server = BankServer::spawn(Arc::new(BankEndpoint::new(bank, TOKEN)), "127.0.0.1:0")?;
    println!("bank listening on {}", server.addr());

    let impostor = ChannelConfig::new(Transport::LocalTcp(server.addr()), *b"other token");
    let refused = open_session(&impostor).unwrap_err();
    assert_eq!(refused, ChannelError::ServerAuthFailed);
    println!("client expecting another server: {refused}");

    let cfg = ChannelConfig::new(Transport::LocalTcp(server.addr()), TOKEN);
    let mut session = open_session(&cfg)?;
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(5)));
    let pin = Pin::new("1234")?;

    lma.measure_software(GENUINE_IMAGE)?;
    let out = lma.register(&key, &pin, &creds, &session.challenge().unwrap())?;
    lma.end_session()?;
    println!(
        "register: {:?}",
        session.request(&out.request, Some(&out.evidence))?.kind()
    );

    lma.measure_software(GENUINE_IMAGE)?;
    let out = lma.login(&pin, LoginSteps::Two, &session.challenge().unwrap())?;
    lma.end_session()?;
    println!(
        "login-2:  {:?}",
        session.request(&out.request, Some(&out.evidence))?.kind()
    );

    print!("{}", session.transcript().to_log());
    Ok(())
}
