use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
    /// Reported but left out of the overall verdict.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub informational: bool,
}

impl Row {
    pub fn new(name: impl Into<String>, measured: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => measured <= threshold,
            Relation::Below => measured < threshold,
            Relation::AtLeast => measured >= threshold,
            Relation::Equal => measured == threshold,
        };
        Self { name: name.into(), measured, threshold, relation, pass, informational: false }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Relation::AtMost, threshold)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, measured, Relation::AtLeast, threshold)
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }

    fn prefixed(mut self, prefix: &str) -> Self {
        self.name = format!("{prefix}.{}", self.name);
        self
    }
}

/// Everything a run produces except wall-clock time.
#[derive(Clone, Debug, Serialize)]
pub struct ReportBody {
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub rows: Vec<Row>,
    pub details: BTreeMap<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub body: ReportBody,
    /// Seconds per section.
    pub timing: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            body: ReportBody {
                version: env!("CARGO_PKG_VERSION"),
                command: command.into(),
                config,
                rows: Vec::new(),
                details: BTreeMap::new(),
                error: None,
                pass: false,
            },
            timing: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: Row) {
        self.body.rows.push(row);
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.body.details.insert(key.into(), value);
    }

    pub fn fail(&mut self, message: String) {
        self.body.error = Some(message);
        self.body.pass = false;
    }

    /// Recomputes the overall verdict: every gating row passes and no error.
    pub fn finish(&mut self) {
        self.body.pass = self.body.error.is_none()
            && !self.body.rows.is_empty()
            && self.body.rows.iter().filter(|r| !r.informational).all(|r| r.pass);
    }

    /// Folds a sub-report in under `prefix`.
    pub fn absorb(&mut self, prefix: &str, other: RunReport) {
        self.body.rows.extend(other.body.rows.into_iter().map(|r| r.prefixed(prefix)));
        for (k, v) in other.body.details {
            self.body.details.insert(format!("{prefix}.{k}"), v);
        }
        for (k, v) in other.timing {
            self.timing.insert(format!("{prefix}.{k}"), v);
        }
        if let Some(e) = other.body.error {
            let joined = match self.body.error.take() {
                Some(prev) => format!("{prev}; {prefix}: {e}"),
                None => format!("{prefix}: {e}"),
            };
            self.body.error = Some(joined);
        }
    }

    pub fn row(&self, name: &str) -> Option<&Row> {
        self.body.rows.iter().find(|r| r.name == name)
    }

    pub fn pass(&self) -> bool {
        self.body.pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON of the report without timing; equal across reruns with the same
    /// config and seeds.
    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("report serializes")
    }

    /// One line per row, then the verdict.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.body.rows {
            let verdict = match (r.pass, r.informational) {
                (true, _) => "ok",
                (false, true) => "info",
                (false, false) => "FAIL",
            };
            let rel = serde_json::to_value(r.relation).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            out.push_str(&format!("{verdict:4} {} = {:.6e} ({rel} {:.3e})\n", r.name, r.measured, r.threshold));
        }
        if let Some(e) = &self.body.error {
            out.push_str(&format!("error: {e}\n"));
        }
        out.push_str(&format!("{} {}\n", self.body.command, if self.body.pass { "PASS" } else { "FAIL" }));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Row::at_most("x", 1.0, 1.0).pass);
        assert!(!Row::new("x", 1.0, Relation::Below, 1.0).pass);
        assert!(Row::at_least("x", 2.0, 1.0).pass);
        assert!(!Row::at_most("x", f64::NAN, 1.0).pass);
    }

    #[test]
    fn informational_rows_do_not_gate() {
        let mut r = RunReport::new("t", serde_json::Value::Null);
        r.push(Row::at_most("a", 0.0, 1.0));
        r.push(Row::at_most("b", 2.0, 1.0).informational());
        r.finish();
        assert!(r.pass());
        r.push(Row::at_most("c", 2.0, 1.0));
        r.finish();
        assert!(!r.pass());
    }

    #[test]
    fn empty_or_errored_reports_fail() {
        let mut r = RunReport::new("t", serde_json::Value::Null);
        r.finish();
        assert!(!r.pass());
        r.push(Row::at_most("a", 0.0, 1.0));
        r.fail("boom".into());
        r.finish();
        assert!(!r.pass());
    }

    #[test]
    fn body_excludes_timing() {
        let mut r = RunReport::new("t", serde_json::Value::Null);
        r.timing.insert("total".into(), 1.5);
        assert!(r.to_json().contains("timing"));
        assert!(!r.body_json().contains("timing"));
    }
}
