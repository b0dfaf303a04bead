//! Golden payload for a known-failing trial.
//!
//! The fixture records the power-sum inequality evaluated at `s = 0.5`,
//! where it reverses. Regenerate with
//! `MARTLAB_REGENERATE_FIXTURES=1 cargo test -p martlab --test replay`.

use std::path::PathBuf;

use martlab::verify::{evaluate, replay, Exponents, FailurePayload, Instance, SuiteName, Verdict};

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/power-sum-failure.json")
}

fn failing_instance() -> Instance {
    Instance {
        suite: SuiteName::PowerSum,
        trial: 0,
        seed: 0,
        space: None,
        weight: None,
        sigma: None,
        alpha: None,
        family: None,
        functions: Vec::new(),
        sequence: Some(vec![1.0, 1.0, 0.25, 3.0]),
        root: None,
        exponents: vec![
            Exponents { s: Some(2.0), ..Exponents::default() },
            Exponents { s: Some(0.5), ..Exponents::default() },
        ],
    }
}

#[test]
fn golden_failure_replays() {
    let fresh = FailurePayload::record(failing_instance()).unwrap();
    assert_eq!(fresh.verdict, Verdict::Fail);
    let text = serde_json::to_string_pretty(&fresh).unwrap() + "\n";
    if std::env::var_os("MARTLAB_REGENERATE_FIXTURES").is_some() {
        std::fs::write(fixture_path(), &text).unwrap();
    }
    let golden = std::fs::read_to_string(fixture_path()).unwrap();
    assert_eq!(golden, text, "fixture is stale; regenerate it");

    let payload = FailurePayload::from_json(&golden).unwrap();
    let report = replay(&payload).unwrap();
    assert!(report.reproduced());
    assert_eq!(report.verdict, Verdict::Fail);
    // s = 2 holds, s = 0.5 fails
    let holds: Vec<bool> = report.checks.iter().map(|c| c.holds).collect();
    assert_eq!(holds, vec![true, false]);
}

#[test]
fn failing_side_values() {
    let checks = evaluate(&failing_instance()).unwrap();
    let c = &checks[1];
    // (1 + 1 + 0.25 + 3)^0.5 against 0.5 * sum a_i (tail_i)^{-0.5}
    let lhs = 5.25f64.sqrt();
    let rhs = 0.5 * (1.0 / 5.25f64.sqrt() + 1.0 / 4.25f64.sqrt() + 0.25 / 3.25f64.sqrt() + 3.0 / 3.0f64.sqrt());
    assert!((c.lhs - lhs).abs() < 1e-12 && (c.rhs - rhs).abs() < 1e-12);
    assert!(!c.holds);
}

#[test]
fn edited_payload_is_not_reproduced() {
    let golden = std::fs::read_to_string(fixture_path()).unwrap();
    let mut payload = FailurePayload::from_json(&golden).unwrap();
    payload.instance.sequence.as_mut().unwrap()[3] = 0.0;
    let report = replay(&payload).unwrap();
    assert!(!report.hash_matches);
    assert!(!report.reproduced());
}
