//! Machine-readable experiment reports: one record per check, each
//! carrying the full resolved parameter set, the measured statistic,
//! the declared threshold, and the verdict. Reports are written as
//! deterministic JSON (no timestamps) so reruns with the same seed are
//! byte-identical.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::stats::Verdict;

/// One check inside an experiment report.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub params: Value,
    /// The headline number: a max discrepancy, a KS statistic, a count.
    pub statistic: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_approx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl CheckRecord {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// A full experiment report.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub experiment: String,
    pub params: Value,
    pub checks: Vec<CheckRecord>,
    pub verdict: Verdict,
}

impl Report {
    pub fn new(experiment: impl Into<String>, params: Value, checks: Vec<CheckRecord>) -> Self {
        let verdict = if checks.iter().any(|c| c.verdict == Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else if checks.iter().all(|c| c.verdict == Verdict::Pass) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Report {
            experiment: experiment.into(),
            params,
            checks,
            verdict,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
        std::fs::write(path, body + "\n").map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Process exit code: 0 pass, 1 fail, 3 inconclusive.
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn record(name: &str, verdict: Verdict) -> CheckRecord {
        CheckRecord {
            check: name.into(),
            params: json!({"n": 3}),
            statistic: 0.5,
            threshold: 1.0,
            verdict,
            p_approx: None,
            ess: None,
            detail: None,
        }
    }

    #[test]
    fn verdict_aggregation() {
        let r = Report::new("x", json!({}), vec![record("a", Verdict::Pass)]);
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.exit_code(), 0);
        let r = Report::new(
            "x",
            json!({}),
            vec![record("a", Verdict::Pass), record("b", Verdict::Fail)],
        );
        assert_eq!(r.exit_code(), 1);
        let r = Report::new(
            "x",
            json!({}),
            vec![record("a", Verdict::Fail), record("b", Verdict::Inconclusive)],
        );
        assert_eq!(r.exit_code(), 3);
    }

    #[test]
    fn json_is_deterministic() {
        let r = Report::new("x", json!({"seed": 7}), vec![record("a", Verdict::Pass)]);
        let a = serde_json::to_string(&r).unwrap();
        let b = serde_json::to_string(&r).unwrap();
        assert_eq!(a, b);
    }
}
