pub mod bank;
pub mod channel;
pub mod codec;
pub mod harness;
pub mod identity;
pub mod lma;
pub mod tpm;
