//! Learned dual warm starts for exact minimum-weight perfect bipartite
//! matching and b-matching.
//!
//! The pipeline: [`learning`] turns optimal duals of sample instances into a
//! prediction, [`feasibility`] repairs that prediction for a new instance in
//! linear time, and [`hungarian`] (or [`bmatching`]) finishes from the
//! repaired dual with work proportional to its distance from optimal.
//! [`bench`] runs the batch and online experiments over [`instancegen`]
//! distributions; [`oracle`] holds brute-force references for testing.

pub mod bench;
pub mod bmatching;
pub mod error;
pub mod feasibility;
pub mod graph;
pub mod hungarian;
pub mod instancegen;
pub mod io;
pub mod learning;
pub mod oracle;

pub use error::{Error, Result};
