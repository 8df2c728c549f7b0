//! A verifier checks a signed quote over PCRs 20-22 against its nonce.

use std::collections::BTreeSet;

use attest_sim::tpm::{KeyKind, Locality, PcrIndex, Tpm, TpmConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut tpm = Tpm::new(TpmConfig::seeded(2));
    for (i, data) in [(20, &b"app"[..]), (21, b"key"), (22, b"pin")] {
        tpm.pcr_extend(PcrIndex::new(i)?, data, Locality::Os)?;
    }
    let aik = tpm.create_key(KeyKind::Attestation);
    let aik_public = aik.public.expect("attestation keys export a public half");

    let nonce = [0x42u8; 20];
    let selection: BTreeSet<_> = [20, 21, 22].map(PcrIndex::from_const).into();
    let quote = tpm.quote(&selection, &nonce, aik.id)?;
    println!("composite {}", quote.composite.to_hex());
    println!("signature valid: {}", quote.verify(&aik_public));
    println!("nonce fresh:     {}", quote.qualifying_nonce == nonce);

    let mut forged = quote.clone();
    forged.selection.remove(&PcrIndex::from_const(22));
    println!(
        "selection edited, signature valid: {}",
        forged.verify(&aik_public)
    );
    Ok(())
}
