//! Simulator and security analysis toolkit for quantum m-out-of-n oblivious
//! transfer over an idealized BB84 channel.
//!
//! - [`channel`]: photons, bases and measurement.
//! - [`commitment`]: ideal weak bit commitment.
//! - [`params`]: admissible parameters and concentration bounds.
//! - [`protocol`]: the two-party protocol and its transcript.
//! - [`adversary`]: dishonest strategies.
//! - [`harness`]: Monte Carlo runner, exact oracles, statistics and reports.

pub mod channel;
pub mod commitment;
pub mod params;
pub mod protocol;
pub mod adversary;
pub mod harness;
