//! Equation-coefficient selection and outage analysis for compute-and-forward
//! relaying with two sources and `M` relays.
//!
//! The crate is organised bottom-up:
//!
//! - [`rate`]: scaled channels, Gram matrices and the computation-rate kernel.
//! - [`search`]: exact (pruned) ECV search, the simplified CMF(K) selector and
//!   the `g_min` table that drives the pruning.
//! - [`analysis`]: quadrature-based selection, relay and system outage for CMF(K).
//! - [`sim`]: seeded Monte Carlo simulation of the relay network, with optional
//!   channel-estimation error.
//! - [`report`]: CSV rows shared by the command-line front end and the tests.
//!
//! Data-parallel loops go through [`Execution`]; with the `parallel` feature
//! disabled every loop runs sequentially and produces the same results.

pub mod analysis;
mod error;
mod exec;
pub mod rate;
pub mod report;
pub mod search;
pub mod sim;

pub use error::{CmfError, Result};
pub use exec::Execution;
pub use rate::{
    canonicalize, computation_rate, gram_matrix, quad_form, scaled_channel, ChannelVector, Ecv, GramMatrix,
    Rate, ScaledChannel, SourcePowers,
};
