// SPDX-License-Identifier: Apache-2.0

//! Differential fuzzing for neural-network verifiers.
//!
//! Test cases pair a feed-forward network with a pre/postcondition
//! specification. Campaigns mutate test cases along both dimensions, run
//! every configured verifier on each mutant, and report disagreements,
//! invalid counterexamples and crashes.

pub mod campaign;
pub mod cli;
pub mod error;
pub mod mutation;
pub mod network;
pub mod pool;
pub mod report;
pub mod spec;
pub mod verifier;

pub use error::{Error, Result};
