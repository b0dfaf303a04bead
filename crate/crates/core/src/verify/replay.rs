//! Self-contained trial records and their re-execution.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::suite::{evaluate, Check, CheckKind, Instance, SuiteName};
use crate::error::{LabError, Result};

pub const PAYLOAD_SCHEMA: &str = "martlab-trial/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn of(checks: &[Check]) -> Self {
        if checks.iter().all(|c| c.kind != CheckKind::Assert || c.holds) {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// A trial with everything needed to re-run it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FailurePayload {
    pub schema: String,
    pub suite: SuiteName,
    pub trial: u64,
    pub instance: Instance,
    /// SHA-256 of the compact JSON form of `instance`.
    pub instance_hash: String,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
}

pub fn instance_hash(inst: &Instance) -> Result<String> {
    let text = serde_json::to_string(inst)?;
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl FailurePayload {
    pub fn new(instance: Instance, checks: Vec<Check>) -> Result<Self> {
        Ok(FailurePayload {
            schema: PAYLOAD_SCHEMA.to_string(),
            suite: instance.suite,
            trial: instance.trial,
            instance_hash: instance_hash(&instance)?,
            verdict: Verdict::of(&checks),
            instance,
            checks,
        })
    }

    /// Evaluates `instance` and records the outcome.
    pub fn record(instance: Instance) -> Result<Self> {
        let checks = evaluate(&instance)?;
        Self::new(instance, checks)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema").and_then(|s| s.as_str()) {
            Some(PAYLOAD_SCHEMA) => {}
            Some(other) => return Err(LabError::Schema(format!("unsupported payload schema `{other}`"))),
            None => return Err(LabError::Schema("payload has no `schema` field".into())),
        }
        Ok(serde_json::from_value(value)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplayReport {
    pub suite: SuiteName,
    pub trial: u64,
    pub hash_matches: bool,
    pub recorded_verdict: Verdict,
    pub verdict: Verdict,
    /// Every recorded check reproduced with identical bits.
    pub checks_match: bool,
    pub checks: Vec<Check>,
}

impl ReplayReport {
    pub fn reproduced(&self) -> bool {
        self.hash_matches && self.checks_match && self.verdict == self.recorded_verdict
    }
}

fn same_bits(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

fn same_check(a: &Check, b: &Check) -> bool {
    a.name == b.name
        && a.kind == b.kind
        && a.holds == b.holds
        && a.flagged == b.flagged
        && same_bits(a.lhs, b.lhs)
        && same_bits(a.rhs, b.rhs)
}

/// Re-executes the recorded instance.
pub fn replay(payload: &FailurePayload) -> Result<ReplayReport> {
    if payload.schema != PAYLOAD_SCHEMA {
        return Err(LabError::Schema(format!("unsupported payload schema `{}`", payload.schema)));
    }
    if payload.instance.suite != payload.suite {
        return Err(LabError::Schema("payload suite differs from its instance".into()));
    }
    let checks = evaluate(&payload.instance)?;
    let checks_match = checks.len() == payload.checks.len() && checks.iter().zip(&payload.checks).all(|(a, b)| same_check(a, b));
    Ok(ReplayReport {
        suite: payload.suite,
        trial: payload.trial,
        hash_matches: instance_hash(&payload.instance)? == payload.instance_hash,
        recorded_verdict: payload.verdict,
        verdict: Verdict::of(&checks),
        checks_match,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::suite::{generate_instance, SuiteParams};

    #[test]
    fn pass_replays_as_pass() {
        let inst = generate_instance(SuiteName::TailIntegrals, &SuiteParams::default(), 5, 2).unwrap();
        let payload = FailurePayload::record(inst).unwrap();
        let text = serde_json::to_string_pretty(&payload).unwrap();
        let back = FailurePayload::from_json(&text).unwrap();
        let report = replay(&back).unwrap();
        assert!(report.reproduced());
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn tampering_is_detected() {
        let inst = generate_instance(SuiteName::ApTesting, &SuiteParams::default(), 5, 0).unwrap();
        let mut payload = FailurePayload::record(inst).unwrap();
        payload.instance.weight.as_mut().unwrap()[0] *= 7.0;
        let report = replay(&payload).unwrap();
        assert!(!report.hash_matches && !report.reproduced());
    }

    #[test]
    fn schema_is_checked() {
        assert!(matches!(FailurePayload::from_json("{\"schema\": \"other\"}"), Err(LabError::Schema(_))));
        assert!(matches!(FailurePayload::from_json("[]"), Err(LabError::Schema(_))));
    }
}
