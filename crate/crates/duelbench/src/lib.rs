//! duelbench: a dueling-bandit evaluation toolkit.
//!
//! The crate implements the MergeDTS policy (UCB elimination over small
//! batches plus double Thompson sampling) together with the MergeRUCB and
//! Self-Sparring baselines, synthetic Condorcet and non-Condorcet
//! environments, and a seeded replicate harness that records cumulative
//! regret and audits the theoretical regret bound.
//!
//! Entry points:
//! - [`env`] builds or loads preference-matrix environments,
//! - [`harness::run_replicates`] executes a [`types::RunConfig`],
//! - [`cli`] backs the `duelbench` binary.

pub mod baselines;
pub mod cli;
pub mod env;
pub mod error;
pub mod files;
pub mod harness;
pub mod mergedts;
pub mod policy;
pub mod sampling;
pub mod types;

pub use error::{Error, Result};
