//! Experiment specification: CLI flags merged with an optional plain-text
//! `key = value` config file (the file wins), plus the graph-spec grammar
//! shared by every subcommand.

use std::collections::BTreeMap;
use std::path::Path;

use percolib::graph::{build_grid, build_tree, Graph};
use percolib::hash::Fnv64;
use percolib::map::{build_tiling, CombinatorialMap};

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSpec {
    Tree { k: u32, depth: u32 },
    Tiling { p: u32, q: u32, layers: u32 },
    DualTiling { p: u32, q: u32, layers: u32 },
    Grid { w: u32, h: u32 },
}

impl GraphSpec {
    pub fn canonical(&self) -> String {
        match self {
            GraphSpec::Tree { k, depth } => format!("tree({k},{depth})"),
            GraphSpec::Tiling { p, q, layers } => format!("tiling({p},{q},{layers})"),
            GraphSpec::DualTiling { p, q, layers } => format!("dual(tiling({p},{q},{layers}))"),
            GraphSpec::Grid { w, h } => format!("grid({w},{h})"),
        }
    }

    pub fn build_graph(&self) -> Result<Graph, percolib::Error> {
        match *self {
            GraphSpec::Tree { k, depth } => build_tree(k, depth),
            GraphSpec::Grid { w, h } => build_grid(w, h),
            GraphSpec::Tiling { p, q, layers } => Ok(build_tiling(p, q, layers)?.graph().clone()),
            GraphSpec::DualTiling { p, q, layers } => {
                Ok(build_tiling(p, q, layers)?.dual()?.map.graph().clone())
            }
        }
    }

    pub fn build_map(&self) -> Result<CombinatorialMap, percolib::Error> {
        match *self {
            GraphSpec::Tiling { p, q, layers } => build_tiling(p, q, layers),
            GraphSpec::DualTiling { p, q, layers } => Ok(build_tiling(p, q, layers)?.dual()?.map),
            _ => Err(percolib::Error::InvalidParameter(format!(
                "{} is not a combinatorial map family",
                self.canonical()
            ))),
        }
    }
}

/// Grammar: `tree(k,depth)`, `tiling(p,q,layers)`, `dual(tiling(p,q,layers))`,
/// `grid(w,h)`.
pub fn parse_graph_spec(s: &str) -> Result<GraphSpec, String> {
    let s = s.trim();
    let args = |inner: &str| -> Result<Vec<u32>, String> {
        inner
            .split(',')
            .map(|x| x.trim().parse::<u32>().map_err(|_| format!("bad number in {s:?}")))
            .collect()
    };
    if let Some(inner) = s.strip_prefix("tree(").and_then(|r| r.strip_suffix(")")) {
        let a = args(inner)?;
        if a.len() != 2 {
            return Err(format!("tree takes (k, depth), got {s:?}"));
        }
        return Ok(GraphSpec::Tree { k: a[0], depth: a[1] });
    }
    if let Some(inner) = s.strip_prefix("dual(tiling(").and_then(|r| r.strip_suffix("))")) {
        let a = args(inner)?;
        if a.len() != 3 {
            return Err(format!("tiling takes (p, q, layers), got {s:?}"));
        }
        return Ok(GraphSpec::DualTiling {
            p: a[0],
            q: a[1],
            layers: a[2],
        });
    }
    if let Some(inner) = s.strip_prefix("tiling(").and_then(|r| r.strip_suffix(")")) {
        let a = args(inner)?;
        if a.len() != 3 {
            return Err(format!("tiling takes (p, q, layers), got {s:?}"));
        }
        return Ok(GraphSpec::Tiling {
            p: a[0],
            q: a[1],
            layers: a[2],
        });
    }
    if let Some(inner) = s.strip_prefix("grid(").and_then(|r| r.strip_suffix(")")) {
        let a = args(inner)?;
        if a.len() != 2 {
            return Err(format!("grid takes (w, h), got {s:?}"));
        }
        return Ok(GraphSpec::Grid { w: a[0], h: a[1] });
    }
    Err(format!(
        "unknown graph spec {s:?}; expected tree(k,d), tiling(p,q,l), dual(tiling(p,q,l)) or grid(w,h)"
    ))
}

/// Fully resolved experiment parameters: serialized into every result
/// document; identical specs reproduce identical outputs.
#[derive(Debug, Clone, Default)]
pub struct ExperimentSpec {
    entries: BTreeMap<String, String>,
}

impl ExperimentSpec {
    pub fn new(command: &str) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert("command".into(), command.into());
        ExperimentSpec { entries }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.into(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn entries_remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    /// Merge a `key = value` config file over the current entries (the file
    /// overrides flags).
    pub fn merge_config_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path:?}: {e}"))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("{path:?}:{}: expected key = value", lineno + 1))?;
            self.entries.insert(k.trim().into(), v.trim().into());
        }
        Ok(())
    }

    /// Canonical serialization: sorted `key = value` lines.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn hash(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write(self.canonical().as_bytes());
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_spec_grammar() {
        assert_eq!(
            parse_graph_spec("tree(3,12)").unwrap(),
            GraphSpec::Tree { k: 3, depth: 12 }
        );
        assert_eq!(
            parse_graph_spec("dual(tiling(3,7,2))").unwrap(),
            GraphSpec::DualTiling { p: 3, q: 7, layers: 2 }
        );
        assert!(parse_graph_spec("blob(1)").is_err());
        assert!(parse_graph_spec("tree(3)").is_err());
    }

    #[test]
    fn spec_hash_tracks_content() {
        let mut a = ExperimentSpec::new("gen");
        a.set("graph", "tree(3,4)");
        let mut b = ExperimentSpec::new("gen");
        b.set("graph", "tree(3,4)");
        assert_eq!(a.hash(), b.hash());
        b.set("graph", "tree(3,5)");
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn config_file_overrides() {
        let dir = std::env::temp_dir().join("perclab-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.conf");
        std::fs::write(&path, "# comment\np = 0.7\nsamples = 99\n").unwrap();
        let mut spec = ExperimentSpec::new("sample");
        spec.set("p", "0.5");
        spec.merge_config_file(&path).unwrap();
        assert_eq!(spec.get("p"), Some("0.7"));
        assert_eq!(spec.get("samples"), Some("99"));
    }
}
