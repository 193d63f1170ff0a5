//! Result documents: every run emits one JSON document with the resolved
//! spec, its hash, the code version and a list of named checks. Exit status
//! is nonzero iff an asserted check failed.

use serde::Serialize;

use crate::config::ExperimentSpec;

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct ResultDoc {
    pub schema: &'static str,
    pub command: String,
    pub spec: std::collections::BTreeMap<String, String>,
    pub spec_hash: String,
    pub code_version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_fingerprint: Option<String>,
    pub results: serde_json::Value,
    pub checks: Vec<CheckLine>,
}

impl ResultDoc {
    pub fn new(spec: &ExperimentSpec) -> Self {
        ResultDoc {
            schema: "percolab-result-v1",
            command: spec.get("command").unwrap_or("unknown").to_string(),
            spec: spec.entries().clone(),
            spec_hash: format!("{:016x}", spec.hash()),
            code_version: env!("CARGO_PKG_VERSION"),
            graph_fingerprint: None,
            results: serde_json::Value::Null,
            checks: Vec::new(),
        }
    }

    pub fn with_graph(mut self, fingerprint: u64) -> Self {
        self.graph_fingerprint = Some(format!("{fingerprint:016x}"));
        self
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl ToString) {
        self.checks.push(CheckLine {
            name: name.to_string(),
            pass,
            detail: detail.to_string(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result docs serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doc_serialization_is_deterministic() {
        let mut spec = ExperimentSpec::new("gen");
        spec.set("graph", "tree(3,4)").set("seed", 7);
        let mut a = ResultDoc::new(&spec);
        a.check("euler", true, "V-E+F = 2");
        let b_json = {
            let mut b = ResultDoc::new(&spec);
            b.check("euler", true, "V-E+F = 2");
            b.to_json()
        };
        assert_eq!(a.to_json(), b_json);
        assert!(a.all_passed());
        a.check("fails", false, "nope");
        assert!(!a.all_passed());
    }
}
