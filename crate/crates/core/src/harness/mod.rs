//! Scenario runner, attack suite, report tables, benchmarks and device
//! persistence.

mod bench;
mod builtin;
mod report;
mod scenario;
mod store;
mod world;

use std::fmt::Write as _;
use std::thread;

use serde::{Deserialize, Serialize};

pub use bench::{
    mean_std_dev, parse_ops, run_bench, BenchConfig, BenchError, BenchOp, BenchReport, BenchRow,
    Clock, MockClock, MonotonicClock, DEFAULT_ITERATIONS, WARMUP_ITERATIONS,
};
pub use builtin::{builtin, login_counters, BUILTIN_SCENARIOS, REGISTRATION_COUNTERS};
pub use report::{
    report_tables, ByteReportRow, Cell, CellStatus, OpReportRow, ReportError, Tables,
    PUBLISHED_BYTES, PUBLISHED_OPERATIONS,
};
pub use scenario::{
    execute, Expect, FlowKind, FlowRecord, Image, Outcome, PinEntry, Scenario, ScenarioError,
    ScenarioReport, Step, StepRecord,
};
pub use store::{
    decode_device_store, encode_device_store, load_device, persist_device, StoreError, STORE_MAGIC,
    STORE_VERSION,
};
pub use world::{derive_seed, tampered_image, GENUINE_IMAGE};

use crate::channel::{report_bytes, ByteTable};

/// Run a built-in scenario.
pub fn run_scenario(name: &str, seed: u64) -> Result<ScenarioReport, ScenarioError> {
    let scenario = builtin(name).ok_or_else(|| ScenarioError::UnknownScenario(name.into()))?;
    let report = execute(&scenario, seed);
    match &report.divergence {
        None => Ok(report),
        Some(d) => Err(ScenarioError::ExpectationFailed {
            scenario: name.to_string(),
            divergence: d.clone(),
            report: Box::new(report),
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub scenarios: Vec<ScenarioReport>,
    pub bytes: ByteTable,
    pub flows: Vec<FlowRecord>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.scenarios.iter().all(|s| s.passed)
    }

    pub fn tables(&self) -> Result<Tables, ReportError> {
        report_tables(&self.flows, &self.bytes)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Human-readable summary followed by the tables.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Scenario suite, seed {}", self.seed);
        for s in &self.scenarios {
            let status = if s.passed { "PASS" } else { "FAIL" };
            let detail = match &s.divergence {
                Some(d) => d.clone(),
                None => s
                    .steps
                    .iter()
                    .rev()
                    .find(|r| r.outcome != "ok")
                    .map(|r| format!("{}: {}", r.step, r.outcome))
                    .unwrap_or_default(),
            };
            let _ = writeln!(out, "  {:<22} {}  {}", s.name, status, detail);
        }
        out.push('\n');
        match self.tables() {
            Ok(t) => out.push_str(&t.to_string()),
            Err(e) => {
                let _ = writeln!(out, "{e}");
            }
        }
        out
    }
}

/// Every built-in scenario, each in its own world seeded from `seed` and the
/// scenario name. With `parallel`, scenarios run on separate threads; the
/// report is identical either way.
pub fn run_suite(seed: u64, parallel: bool) -> SuiteReport {
    let run = |name: &str| {
        let scenario = builtin(name).expect("built-in scenario");
        execute(&scenario, derive_seed(seed, name))
    };
    let scenarios: Vec<ScenarioReport> = if parallel {
        thread::scope(|s| {
            let handles: Vec<_> = BUILTIN_SCENARIOS
                .iter()
                .map(|name| s.spawn(move || run(name)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario thread"))
                .collect()
        })
    } else {
        BUILTIN_SCENARIOS.iter().map(|name| run(name)).collect()
    };
    summarize(seed, scenarios)
}

/// Combine scenario reports into one suite report.
pub fn summarize(seed: u64, scenarios: Vec<ScenarioReport>) -> SuiteReport {
    let bytes = report_bytes(scenarios.iter().flat_map(|s| s.transcripts.iter()));
    let flows = scenarios.iter().flat_map(|s| s.flows.clone()).collect();
    SuiteReport {
        seed,
        scenarios,
        bytes,
        flows,
    }
}

#[cfg(test)]
mod tests;
