//! Guessing the PIN: four wrong guesses are reported as such, the fifth
//! locks the TPM until an administrator resets it.

use attest_sim::harness::GENUINE_IMAGE;
use attest_sim::identity::{ActivationKey, ChallengeNonce, Credentials, Pin, UserId};
use attest_sim::lma::{Lma, LoginSteps};
use attest_sim::tpm::{Tpm, TpmConfig, DEFAULT_ADMIN_TOKEN};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let creds = Credentials::from_secret(UserId::from_name("bob").unwrap(), b"pw");
    let pin = Pin::new("8080")?;
    let nonce = ChallengeNonce([7; 20]);
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(4)));
    lma.measure_software(GENUINE_IMAGE)?;
    lma.register(&ActivationKey([9; 20]), &pin, &creds, &nonce)?;
    lma.end_session()?;

    for guess in ["0000", "1111", "2222", "3333", "4444", "8080"] {
        lma.measure_software(GENUINE_IMAGE)?;
        match lma.login(&Pin::new(guess)?, LoginSteps::One, &nonce) {
            Ok(_) => println!("{guess}: accepted"),
            Err(e) => println!("{guess}: {e}"),
        }
        lma.end_session()?;
    }

    lma.tpm_mut().reset_lockout(DEFAULT_ADMIN_TOKEN)?;
    lma.measure_software(GENUINE_IMAGE)?;
    let ok = lma.login(&pin, LoginSteps::One, &nonce).is_ok();
    println!("after administrative reset, correct PIN accepted: {ok}");
    Ok(())
}
