//! DyGPP: passenger-trip prediction over continuous-time interaction streams.
//!
//! The library models a transit log as a chronologically ordered stream of
//! (passenger, station, board/alight, timestamp) events and learns to score
//! how likely a candidate interaction is at a given time. Everything is
//! self-contained: a hand-rolled reverse-mode tape over dense `f64`
//! matrices, Adam, finite-difference gradient verification, a binary
//! checkpoint format, ranking metrics with exhaustive oracles, statistical
//! baselines, and a synthetic commuter-log generator for end-to-end runs.
//!
//! Module map:
//! - [`event_store`]: event parsing, dense id remapping, per-node history
//!   indices, chronological train/val/test splitting.
//! - [`batch_sampler`]: recent-neighbor sequences, co-occurrence counts,
//!   time-interval batching, negative corruption.
//! - [`encoders`]: the deterministic feature encoders (time cosines, edge
//!   sign, co-occurrence counts).
//! - [`autodiff`]: dense matrices, the op tape, Adam, gradient checking,
//!   checkpoints.
//! - [`model`]: the sequence model itself — fused encoders, FFN blocks,
//!   pooling, the link head, and batched training/scoring entry points.
//! - [`trainer`]: the epoch loop with early stopping on validation AP.
//! - [`metrics`]: AP/AUC and the shared evaluation harness.
//! - [`baselines`]: TOP and Personal TOP transition-frequency baselines.
//! - [`synth`]: the synthetic commuter world generator.
//! - [`config`]: flat `key = value` run configuration.

// The training tape allocates and frees large dense matrices every batch;
// mimalloc keeps that churn out of kernel page-management time.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub mod autodiff;
pub mod baselines;
pub mod batch_sampler;
pub mod config;
pub mod encoders;
pub mod error;
pub mod event_store;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod trainer;

pub use error::{DygppError, Result};
