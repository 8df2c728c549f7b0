//! Seal a secret to PCR 20 and watch unseal fail once the register moves.

use attest_sim::tpm::{KeyKind, Locality, PcrIndex, PcrPolicy, Tpm, TpmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut tpm = Tpm::new(TpmConfig::seeded(1));
    let pcr = PcrIndex::new(20)?;
    tpm.pcr_extend(pcr, b"app image v1", Locality::Os)?;

    let sk = tpm.create_key(KeyKind::Storage);
    let policy = PcrPolicy::from_bank(tpm.pcrs(), &[pcr]);
    let blob = tpm.seal(b"account password", &policy, sk.id)?;
    println!(
        "sealed {} bytes, policy over {:?}",
        blob.ciphertext.len(),
        policy.selection()
    );

    let plain = tpm.unseal(&blob, sk.id)?;
    println!("unsealed: {}", String::from_utf8_lossy(&plain));

    tpm.pcr_extend(pcr, b"something else", Locality::Os)?;
    println!(
        "after extending PCR 20 again: {:?}",
        tpm.unseal(&blob, sk.id)
    );

    tpm.pcr_reset(pcr, Locality::Os)?;
    tpm.pcr_extend(pcr, b"app image v1", Locality::Os)?;
    println!(
        "after reset and re-measure: {:?}",
        tpm.unseal(&blob, sk.id).is_ok()
    );
    Ok(())
}
