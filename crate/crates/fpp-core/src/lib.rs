//! Fractional Poisson process (FPP) toolkit: Mittag-Leffler special functions,
//! seeded inter-arrival simulation, method-of-moments estimation, a from-scratch
//! LSTM regressor with BPTT and Adam, experiment orchestration, and timestamp
//! ingestion for real event streams.
//!
//! The FPP is a renewal counting process whose i.i.d. waiting times follow a
//! Mittag-Leffler distribution with index `beta` in (0, 1] and rate-like
//! parameter `mu > 0`; at `beta = 1` it reduces to the homogeneous Poisson
//! process. Everything in this crate is deterministic given a 64-bit seed,
//! including parallel dataset generation and training.

pub mod dataset;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod ingest;
pub mod linalg;
pub mod mom;
pub mod neural;
pub mod rng;
pub mod sim;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
