//! Transaction-fee-mechanism simulation lab.
//!
//! Eight block-building processes, user and miner strategy libraries with
//! information-constraint tags, a deterministic Monte Carlo engine for the
//! on-chain and off-chain games, Myerson-style interim analysis, and
//! falsification checkers for the simplicity and collusion desiderata,
//! including the canonical eight-row property matrix.

pub mod agents;
pub mod checkers;
pub mod dist;
pub mod engine;
pub mod interim;
pub mod matrix;
pub mod mech;
pub mod rng;
