mod common;

use attest_sim::codec::{decode_command, decode_wire, encode_command, encode_wire};
use common::{
    check_command, check_flip, check_wire, random_command, random_wire, rng, ROUND_TRIPS,
};

#[test]
fn commands_round_trip_and_reject_mutations() {
    let mut r = rng(0xC0DE);
    for i in 0..ROUND_TRIPS {
        let cmd = random_command(&mut r);
        check_command(&cmd, &mut r).unwrap_or_else(|e| panic!("command {i}: {e}"));
    }
}

#[test]
fn wire_messages_round_trip_and_reject_mutations() {
    let mut r = rng(0x5EED);
    for i in 0..ROUND_TRIPS {
        let msg = random_wire(&mut r);
        check_wire(&msg, &mut r).unwrap_or_else(|e| panic!("message {i}: {e}"));
    }
}

#[test]
fn bit_flips_are_rejected_or_canonical() {
    let mut r = rng(7);
    for i in 0..ROUND_TRIPS {
        let cmd = encode_command(&random_command(&mut r));
        check_flip(&cmd, &mut r, true).unwrap_or_else(|e| panic!("command {i}: {e}"));
        let msg = encode_wire(&random_wire(&mut r));
        check_flip(&msg, &mut r, false).unwrap_or_else(|e| panic!("message {i}: {e}"));
    }
}

#[test]
fn garbage_never_panics() {
    let mut r = rng(99);
    for _ in 0..ROUND_TRIPS {
        let len = rand::Rng::gen_range(&mut r, 0..128);
        let mut buf = vec![0u8; len];
        rand::RngCore::fill_bytes(&mut r, &mut buf);
        if let Ok(c) = decode_command(&buf) {
            assert_eq!(encode_command(&c), buf);
        }
        if let Ok(m) = decode_wire(&buf) {
            assert_eq!(encode_wire(&m), buf);
        }
    }
}
