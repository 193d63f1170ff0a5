//! Std companion of the percolation laboratory core: file formats, the
//! experiment configuration surface, deterministic task execution, result
//! documents with provenance, and the bundled small-graph corpus used by
//! the exact-oracle checks.

pub mod config;
pub mod corpus;
pub mod formats;
pub mod report;
pub mod runner;

pub use config::{parse_graph_spec, ExperimentSpec, GraphSpec};
pub use report::{CheckLine, ResultDoc};
