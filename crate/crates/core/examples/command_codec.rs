//! Marshal TPM commands and wire messages, then decode them back.

use attest_sim::codec::{
    decode_command, decode_wire, encode_command, encode_wire, CommandParams, TpmCommand,
    WireMessage,
};
use attest_sim::identity::ChallengeNonce;
use attest_sim::tpm::{DigestAlg, Locality};

fn main() {
    let commands = [
        TpmCommand::new(Locality::Boot, CommandParams::PcrRead { index: 0 }),
        TpmCommand::new(
            Locality::Os,
            CommandParams::Hash {
                alg: DigestAlg::Sha1,
                data: b"abc".to_vec(),
            },
        ),
        TpmCommand::new(Locality::Tee, CommandParams::GetRandom { count: 20 }),
    ];
    for cmd in &commands {
        let bytes = encode_command(cmd);
        assert_eq!(decode_command(&bytes).as_ref(), Ok(cmd));
        println!(
            "{:<10} {}",
            format!("{:?}", cmd.params.code()),
            hex::encode(&bytes)
        );
    }

    let challenge = WireMessage::Challenge(ChallengeNonce([0xab; 20]));
    let bytes = encode_wire(&challenge);
    println!("Challenge  {}", hex::encode(&bytes));

    let mut truncated = encode_command(&commands[0]);
    truncated.pop();
    println!(
        "truncated command: {:?}",
        decode_command(&truncated).unwrap_err()
    );
    println!("unknown kind:      {:?}", decode_wire(&[0x7f]).unwrap_err());
}
