//! Transferability metrics for ranking pretrained checkpoints.
//!
//! Given exported penultimate-layer features (and optionally source-head
//! probabilities) of several checkpoints on a downstream task, this crate
//! scores each checkpoint with the PAC-Bayesian PACTran metrics
//! (Dirichlet, Gamma, Gaussian) and the usual baselines (LEEP, NCE, N-LEEP,
//! H-score, LogME, LINEAR, LINEAR-VALID), and evaluates the rankings with
//! Kendall's tau against ground-truth test errors.

pub mod cli;
pub mod data;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod seed;

pub use error::{Error, Result};

/// Dense row/column matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
