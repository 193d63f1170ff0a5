//! Core library of the percolation laboratory.
//!
//! Everything in this crate is pure computation over owned data: graph
//! family construction, Bernoulli bond configuration sampling, cluster
//! analysis, exact small-graph enumeration oracles, two-point operator
//! matrices with their q->q norms, and the statistical experiments built
//! on top of those pieces. IO, file formats and the CLI live in the
//! companion `perclab` crate.
//!
//! The crate is `no_std` (with `alloc`) so the algorithmic core stays
//! independent of any platform surface.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bits;
pub mod duality;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod graph;
pub mod hash;
pub mod map;
pub mod matrix;
pub mod norms;
pub mod oracle;
pub mod perc;
pub mod rng;
pub mod treeform;

pub use error::Error;
pub use graph::Graph;

