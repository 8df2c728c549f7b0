//! Micro-benchmarks of single TPM commands over the binary interface.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tpm::{KeyKind, Locality, PcrIndex, TpmApi, TpmConfig, TpmDevice, TpmError};

pub const DEFAULT_ITERATIONS: u32 = 10_000;
pub const WARMUP_ITERATIONS: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BenchOp {
    Rng,
    PcrRead,
    Hash,
    Sign,
    Extend,
}

impl BenchOp {
    pub const ALL: [BenchOp; 5] = [
        BenchOp::Rng,
        BenchOp::PcrRead,
        BenchOp::Hash,
        BenchOp::Sign,
        BenchOp::Extend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchOp::Rng => "rng",
            BenchOp::PcrRead => "pcr-read",
            BenchOp::Hash => "hash",
            BenchOp::Sign => "sign",
            BenchOp::Extend => "extend",
        }
    }

    /// Row label in the report.
    pub fn label(self) -> &'static str {
        match self {
            BenchOp::Rng => "RNG",
            BenchOp::PcrRead => "PCR Read",
            BenchOp::Hash => "Sha1 Data Hash",
            BenchOp::Sign => "Sha1 Key Sign",
            BenchOp::Extend => "Extend PCR",
        }
    }
}

impl FromStr for BenchOp {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| BenchError::UnknownOp(s.to_string()))
    }
}

/// Comma-separated op names, e.g. `rng,pcr-read`.
pub fn parse_ops(list: &str) -> Result<Vec<BenchOp>, BenchError> {
    list.split(',').map(|s| s.trim().parse()).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchError {
    #[error("unknown benchmark operation {0:?} (expected rng, pcr-read, hash, sign or extend)")]
    UnknownOp(String),
    #[error("iterations must be positive")]
    NoIterations,
    #[error(transparent)]
    Tpm(#[from] TpmError),
}

/// Time source for the benchmark.
pub trait Clock {
    /// Time since an arbitrary fixed origin.
    fn now(&mut self) -> Duration;
}

pub struct MonotonicClock(Instant);

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock(Instant::now())
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&mut self) -> Duration {
        self.0.elapsed()
    }
}

/// Advances by a fixed step on every reading.
pub struct MockClock {
    t: Duration,
    step: Duration,
}

impl MockClock {
    pub fn new(step: Duration) -> Self {
        MockClock {
            t: Duration::ZERO,
            step,
        }
    }
}

impl Clock for MockClock {
    fn now(&mut self) -> Duration {
        self.t += self.step;
        self.t
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub ops: Vec<BenchOp>,
    pub iterations: u32,
    pub warmup: u32,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ops: BenchOp::ALL.to_vec(),
            iterations: DEFAULT_ITERATIONS,
            warmup: WARMUP_ITERATIONS,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub operation: String,
    pub iterations: u32,
    pub mean_ms: f64,
    pub std_dev_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub rows: Vec<BenchRow>,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>10} {:>12} {:>11}",
            "Operation", "Time (ms)", "[Std Dev]", "Iterations"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<16} {:>10.4} {:>12} {:>11}",
                r.operation,
                r.mean_ms,
                format!("[{:.4}]", r.std_dev_ms),
                r.iterations
            )?;
        }
        Ok(())
    }
}

/// Mean and population standard deviation, every sample weighted equally.
pub fn mean_std_dev(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

const HASH_INPUT: [u8; 64] = [0xa5; 64];
const BENCH_PCR: u8 = 23;

pub fn run_bench(config: &BenchConfig, clock: &mut dyn Clock) -> Result<BenchReport, BenchError> {
    if config.iterations == 0 {
        return Err(BenchError::NoIterations);
    }
    let device = Arc::new(TpmDevice::new(TpmConfig::seeded(config.seed)));
    let mut tpm = device.client();
    let alg = tpm.alg();
    let aik = tpm.create_key(KeyKind::Attestation)?;
    let selection = BTreeSet::from([PcrIndex::from_const(BENCH_PCR)]);
    let nonce = [0x3c; 20];

    let mut rows = Vec::with_capacity(config.ops.len());
    for &op in &config.ops {
        let mut once = || -> Result<(), TpmError> {
            match op {
                BenchOp::Rng => tpm.get_random(20).map(drop),
                BenchOp::PcrRead => tpm.pcr_read(BENCH_PCR).map(drop),
                BenchOp::Hash => tpm.hash(&HASH_INPUT, alg).map(drop),
                BenchOp::Sign => tpm.quote(&selection, &nonce, &aik).map(drop),
                BenchOp::Extend => tpm
                    .pcr_extend(BENCH_PCR, &HASH_INPUT[..20], Locality::Tee)
                    .map(drop),
            }
        };
        for _ in 0..config.warmup {
            once()?;
        }
        let mut samples = Vec::with_capacity(config.iterations as usize);
        for _ in 0..config.iterations {
            let start = clock.now();
            once()?;
            let end = clock.now();
            samples.push(end.saturating_sub(start).as_secs_f64() * 1e3);
        }
        let (mean_ms, std_dev_ms) = mean_std_dev(&samples);
        rows.push(BenchRow {
            operation: op.label().to_string(),
            iterations: config.iterations,
            mean_ms,
            std_dev_ms,
        });
    }
    Ok(BenchReport {
        seed: config.seed,
        rows,
    })
}
