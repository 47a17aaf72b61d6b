//! Secret key rate analysis for time-entanglement QKD with pulse position
//! modulation (PPM) key extraction.
//!
//! Three detector imperfections are modelled, each in its own module:
//!
//! * [`jitter`]: Gaussian timing jitter as a discrete memoryless channel
//!   between Alice's and Bob's PPM symbols (reconciliation cost).
//! * [`downtime`]: detector dead time as frame-level Markov chains, giving
//!   the raw PPM rate and the compression ratio needed to remove memory.
//! * [`darkcount`]: dark counts as lost frames plus a heavy-tailed component
//!   of the observed jitter.
//!
//! [`pipeline`] composes them into a [`pipeline::RateReport`], and [`sim`] is
//! an event-level Monte Carlo simulator used to cross-check the analytic
//! quantities.
//!
//! All times are in seconds and all rates in events per second. Information
//! quantities are in bits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod darkcount;
pub mod downtime;
mod error;
pub mod jitter;
pub mod params;
pub mod pipeline;
pub mod pmf;
pub mod sim;

pub use error::{Error, Result};
pub use params::{DerivedParams, SystemParams};
