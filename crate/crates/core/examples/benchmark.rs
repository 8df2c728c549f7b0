//! Time single TPM commands through the binary device interface.
//!
//! `cargo run --release --example benchmark -- 2000`

use attest_sim::harness::{run_bench, BenchConfig, MonotonicClock};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations = match std::env::args().nth(1) {
        Some(n) => n.parse()?,
        None => 1000,
    };
    let config = BenchConfig {
        iterations,
        ..BenchConfig::default()
    };
    print!("{}", run_bench(&config, &mut MonotonicClock::new())?);
    Ok(())
}
