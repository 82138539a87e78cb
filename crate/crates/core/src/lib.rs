//! Label-free selection of time-series anomaly detectors.
//!
//! Candidate models are scored on a dataset, surrogate metrics (prediction
//! error, centrality, synthetic-injection F1) each induce a model ranking,
//! and the rankings are combined by Borda-family or exact Kemeny
//! aggregation, optionally after trimming high-influence rankings.

pub mod detectors;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod injection;
pub mod io;
pub mod perm;
pub mod prep;
pub mod rankagg;
pub mod rng;
pub mod series;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
pub use perm::{Direction, Permutation};
pub use rng::RngSeed;
pub use series::{Dataset, ModelOutput, TimeSeries};
