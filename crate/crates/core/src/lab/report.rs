use std::time::Instant;

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

/// One checked inequality `lhs <= rhs` (or equality, see [`VerificationReport::equality`]).
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    pub runtime_ms: f64,
}

impl VerificationReport {
    /// `lhs <= rhs` up to `tol`.
    pub fn exact(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            pass: slack >= -tol,
            method: Method::Exact,
            stderr: None,
            runtime_ms: 0.0,
        }
    }

    /// `lhs = rhs` up to `tol`; the slack is `-|lhs - rhs|`.
    pub fn equality(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let gap = (lhs - rhs).abs();
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack: -gap,
            pass: gap <= tol,
            method: Method::Exact,
            stderr: None,
            runtime_ms: 0.0,
        }
    }

    /// Estimated inequality; passes within three standard errors.
    pub fn monte_carlo(name: impl Into<String>, lhs: f64, rhs: f64, stderr: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack,
            pass: slack >= -3.0 * stderr,
            method: Method::MonteCarlo,
            stderr: Some(stderr),
            runtime_ms: 0.0,
        }
    }

    /// Estimated equality; passes when `|lhs - rhs| <= 3 stderr`.
    pub fn monte_carlo_equality(name: impl Into<String>, lhs: f64, rhs: f64, stderr: f64) -> Self {
        Self::monte_carlo_within(name, lhs, rhs, stderr, 3.0)
    }

    /// Estimated equality accepted within `sigmas` standard errors.
    pub fn monte_carlo_within(name: impl Into<String>, lhs: f64, rhs: f64, stderr: f64, sigmas: f64) -> Self {
        let gap = (lhs - rhs).abs();
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack: -gap,
            pass: gap <= sigmas * stderr,
            method: Method::MonteCarlo,
            stderr: Some(stderr),
            runtime_ms: 0.0,
        }
    }

    pub fn with_runtime(mut self, ms: f64) -> Self {
        self.runtime_ms = ms;
        self
    }
}

/// Runs `f` and returns its value with the elapsed wall time in milliseconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64() * 1e3)
}

#[derive(Clone, Debug, Serialize)]
pub struct Totals {
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub n: usize,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub cases: Vec<VerificationReport>,
    pub totals: Totals,
}

impl SuiteReport {
    pub fn new(
        suite: impl Into<String>,
        n: usize,
        seed: Option<u64>,
        config: serde_json::Value,
        cases: Vec<VerificationReport>,
    ) -> Self {
        let passed = cases.iter().filter(|c| c.pass).count();
        let totals = Totals {
            cases: cases.len(),
            passed,
            failed: cases.len() - passed,
        };
        Self {
            suite: suite.into(),
            n,
            seed,
            config,
            cases,
            totals,
        }
    }

    pub fn all_pass(&self) -> bool {
        self.totals.failed == 0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per case, same columns as the JSON cases.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "lhs", "rhs", "slack", "pass", "method", "stderr", "runtime_ms"])?;
        for c in &self.cases {
            let method = match c.method {
                Method::Exact => "exact",
                Method::MonteCarlo => "monte_carlo",
            };
            w.write_record([
                c.name.clone(),
                c.lhs.to_string(),
                c.rhs.to_string(),
                c.slack.to_string(),
                c.pass.to_string(),
                method.to_string(),
                c.stderr.map(|s| s.to_string()).unwrap_or_default(),
                c.runtime_ms.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_rules() {
        assert!(VerificationReport::exact("a", 1.0, 1.0 - 1e-12, 1e-9).pass);
        assert!(!VerificationReport::exact("a", 1.0, 0.9, 1e-9).pass);
        assert!(VerificationReport::monte_carlo("b", 1.0, 0.9, 0.05).pass);
        assert!(!VerificationReport::monte_carlo("b", 1.0, 0.8, 0.05).pass);
        assert!(VerificationReport::equality("c", 2.0, 2.0 + 1e-13, 1e-12).pass);
    }

    #[test]
    fn json_and_csv_shapes() {
        let r = SuiteReport::new(
            "gamma",
            2,
            Some(1),
            serde_json::json!({"n": 2}),
            vec![VerificationReport::exact("x", 0.0, 1.0, 0.0)],
        );
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(v["totals"]["passed"], 1);
        assert_eq!(v["cases"][0]["method"], "exact");
        assert!(v["cases"][0].get("stderr").is_none());
        assert_eq!(r.to_csv().unwrap().lines().count(), 2);
    }
}
