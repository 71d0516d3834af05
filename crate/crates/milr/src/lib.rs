//! Mutual-information-driven dynamic learning rates.
//!
//! This crate estimates the mutual information between a network layer's
//! activations and the true labels while the network trains, and turns that
//! signal into a per-epoch learning-rate decision: relative change in the
//! last-layer MI alone, or change plus value against a data-derived reference
//! bound. It ships a KSG k-nearest-neighbor MI estimator, the scheduling
//! policies with their fixed/warm-up/decay baselines, a small dense-network
//! trainer with per-layer activation capture, dataset loading and synthesis,
//! and an experiment runner that writes plot-ready CSVs.
//!
//! The `parallel` feature (default on) runs the data-parallel inner loops on
//! rayon; outputs are bit-identical with the feature disabled.

pub mod cli;
pub mod data;
pub mod error;
pub mod matrix;
pub mod mi;
pub mod nn;
mod parallel;
pub mod probe;
pub mod runner;
pub mod scheduler;
pub mod seeding;

pub use error::{Error, Result};
pub use matrix::SampleMatrix;
pub use mi::MiEstimate;
