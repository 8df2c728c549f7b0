use std::time::Duration;

use super::*;
use crate::codec::DenyReason;
use crate::lma::LoginSteps;

#[test]
fn every_builtin_passes() {
    for name in BUILTIN_SCENARIOS {
        let report = run_scenario(name, 1).unwrap_or_else(|e| panic!("{e}"));
        assert!(report.passed, "{name}");
    }
}

#[test]
fn unknown_scenario() {
    assert_eq!(
        run_scenario("no-such-thing", 1).unwrap_err(),
        ScenarioError::UnknownScenario("no-such-thing".into())
    );
}

#[test]
fn divergence_is_reported_at_first_failing_step() {
    let mut scenario = builtin("replayed-quote").unwrap();
    let last = scenario.script.len() - 1;
    scenario.script[last] = Step::ReplayLogin {
        user: "alice".into(),
        expect: Expect::grant(),
    };
    let report = execute(&scenario, 3);
    assert!(!report.passed);
    let d = report.divergence.unwrap();
    assert!(d.starts_with(&format!("step {}", last + 1)), "{d}");
    assert!(d.contains("expected Grant, got Deny(StaleNonce)"), "{d}");
}

#[test]
fn wrong_pin_bruteforce_outcomes() {
    let report = run_scenario("wrong-pin-bruteforce", 9).unwrap();
    let logins: Vec<&str> = report
        .steps
        .iter()
        .filter(|s| s.step.starts_with("login"))
        .map(|s| s.outcome.as_str())
        .collect();
    assert_eq!(
        logins,
        ["WrongPin", "WrongPin", "WrongPin", "WrongPin", "Lockout", "Lockout", "Grant"]
    );
}

#[test]
fn honest_login_2_counters_and_bytes() {
    let report = run_scenario("honest-login-2", 5).unwrap();
    let login = report
        .steps
        .iter()
        .find(|s| s.step.starts_with("login-2"))
        .unwrap();
    assert_eq!(login.counters, Some(login_counters(LoginSteps::Two)));
    assert_eq!(login.request_bytes, Some(84));
}

#[test]
fn suite_is_deterministic_and_order_independent() {
    let a = run_suite(42, false);
    let b = run_suite(42, true);
    assert!(a.passed());
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.render(), b.render());
    assert_ne!(a.to_json(), run_suite(43, false).to_json());
}

#[test]
fn suite_reproduces_tables() {
    let tables = run_suite(7, false).tables().unwrap();
    assert!(tables.all_match(), "{tables}");
    assert_eq!(tables.cells().count(), 14);
}

#[test]
fn json_round_trip() {
    let suite = run_suite(2, false);
    let back = SuiteReport::from_json(&suite.to_json()).unwrap();
    assert_eq!(back.tables(), suite.tables());
}

#[test]
fn tables_without_two_step_login() {
    let scenarios = ["honest-register", "honest-login-1", "credential-baseline"]
        .iter()
        .map(|n| run_scenario(n, 1).unwrap())
        .collect();
    let tables = summarize(1, scenarios).tables().unwrap();
    let unseal = tables
        .operations
        .iter()
        .find(|r| r.operation == "Unsealing")
        .unwrap();
    assert_eq!(unseal.login.measured, "1");
    assert_eq!(unseal.login.published, "1-2");
    assert_eq!(unseal.login.status, CellStatus::Match);
    let two_step = tables
        .bytes
        .iter()
        .find(|r| r.flow == "Login (2 Steps)")
        .unwrap();
    assert_eq!(two_step.cell.status, CellStatus::NoData);
}

#[test]
fn no_runs_no_data() {
    assert_eq!(summarize(0, Vec::new()).tables(), Err(ReportError::NoData));
}

#[test]
fn mismatch_is_flagged() {
    let flows = vec![FlowRecord {
        kind: FlowKind::Registration,
        counters: crate::lma::FlowCounters::new(3, 1, 0, 1, 3),
    }];
    let tables = report_tables(&flows, &crate::channel::report_bytes([])).unwrap();
    assert_eq!(
        tables.operations[0].registration.status,
        CellStatus::Mismatch
    );
    assert!(tables.to_string().contains("MISMATCH"));
}

#[test]
fn tampered_image_differs_in_one_byte() {
    let t = tampered_image();
    let diff = t.iter().zip(GENUINE_IMAGE).filter(|(a, b)| a != b).count();
    assert_eq!((t.len(), diff), (GENUINE_IMAGE.len(), 1));
}

#[test]
fn derived_seeds_depend_on_label_and_seed() {
    assert_eq!(derive_seed(1, "bank"), derive_seed(1, "bank"));
    assert_ne!(derive_seed(1, "bank"), derive_seed(1, "tpm:alice"));
    assert_ne!(derive_seed(1, "bank"), derive_seed(2, "bank"));
}

#[test]
fn foreign_blob_ends_in_foreign_tpm() {
    let report = run_scenario("foreign-tpm-blob", 4).unwrap();
    assert_eq!(report.steps.last().unwrap().outcome, "ForeignTpm");
}

#[test]
fn attack_scenarios_never_grant_at_their_end() {
    for (name, outcome) in [
        (
            "tampered-image",
            Outcome::Deny(DenyReason::UnknownComposite),
        ),
        ("replayed-quote", Outcome::Deny(DenyReason::StaleNonce)),
        ("revoked-version", Outcome::Deny(DenyReason::Revoked)),
    ] {
        let report = run_scenario(name, 8).unwrap();
        let ends_with = report
            .steps
            .iter()
            .rev()
            .find(|s| s.outcome != "ok")
            .unwrap();
        assert_eq!(ends_with.outcome, outcome.to_string(), "{name}");
    }
}

mod store {
    use super::*;
    use crate::identity::{ActivationKey, ChallengeNonce, Credentials, UserId};
    use crate::lma::{Lma, Pin};
    use crate::tpm::{Tpm, TpmConfig};

    fn store() -> crate::lma::DeviceStore {
        let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(1)));
        lma.measure_software(GENUINE_IMAGE).unwrap();
        let creds = Credentials::from_secret(UserId::from_name("u").unwrap(), b"s");
        lma.register(
            &ActivationKey([1; 20]),
            &Pin::new("1111").unwrap(),
            &creds,
            &ChallengeNonce([2; 20]),
        )
        .unwrap();
        lma.store().unwrap().clone()
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("device.bin");
        let s = store();
        persist_device(&s, &path).unwrap();
        assert_eq!(load_device(&path).unwrap(), s);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..5], b"ATDS\x01");
    }

    #[test]
    fn rejects_bad_files() {
        let bytes = encode_device_store(&store());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(
            decode_device_store(&magic),
            Err(StoreError::BadMagic)
        ));
        let mut version = bytes.clone();
        version[4] = 2;
        assert!(matches!(
            decode_device_store(&version),
            Err(StoreError::BadVersion(2))
        ));
        for cut in [5, 8, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(decode_device_store(&bytes[..cut]), Err(StoreError::Corrupt)),
                "cut at {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            decode_device_store(&extra),
            Err(StoreError::Corrupt)
        ));
    }
}

mod bench {
    use super::*;

    fn quick(ops: Vec<BenchOp>) -> BenchConfig {
        BenchConfig {
            ops,
            iterations: 50,
            warmup: 5,
            seed: 1,
        }
    }

    #[test]
    fn rows_in_order() {
        let report = run_bench(&quick(BenchOp::ALL.to_vec()), &mut MonotonicClock::new()).unwrap();
        let names: Vec<_> = report.rows.iter().map(|r| r.operation.as_str()).collect();
        assert_eq!(
            names,
            [
                "RNG",
                "PCR Read",
                "Sha1 Data Hash",
                "Sha1 Key Sign",
                "Extend PCR"
            ]
        );
        assert!(report
            .rows
            .iter()
            .all(|r| r.iterations == 50 && r.mean_ms >= 0.0));
        assert!(report.to_string().contains("Time (ms)"));
    }

    #[test]
    fn constant_clock_has_zero_spread() {
        let mut clock = MockClock::new(Duration::from_micros(250));
        let report = run_bench(&quick(BenchOp::ALL.to_vec()), &mut clock).unwrap();
        for row in &report.rows {
            assert_eq!(row.std_dev_ms, 0.0);
            assert!((row.mean_ms - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn defaults() {
        let c = BenchConfig::default();
        assert_eq!((c.iterations, c.warmup, c.ops.len()), (10_000, 100, 5));
    }

    #[test]
    fn op_parsing() {
        assert_eq!(
            parse_ops("rng, sign").unwrap(),
            [BenchOp::Rng, BenchOp::Sign]
        );
        assert_eq!(
            parse_ops("rng,fft"),
            Err(BenchError::UnknownOp("fft".into()))
        );
    }

    #[test]
    fn population_std_dev() {
        // 2,4,4,4,5,5,7,9: mean 5, population variance 4
        let (m, s) = mean_std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!((m, s), (5.0, 2.0));
        assert_eq!(mean_std_dev(&[]), (0.0, 0.0));
    }
}
