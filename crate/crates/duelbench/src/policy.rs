//! The pluggable policy interface the harness drives.
//!
//! A policy owns its full per-replicate state, including the seeded random
//! stream, and advances one duel per [`Policy::step`] call. Additional
//! algorithms (DTS, RMED1, REX3, ...) plug in by implementing this trait and
//! extending the harness factory.

use crate::types::{DuelOutcome, PreferenceMatrix};

pub trait Policy {
    /// Executes exactly one duel against the environment and updates internal
    /// state. Step numbering starts at 1.
    fn step(&mut self, env: &PreferenceMatrix) -> DuelOutcome;

    /// The ranker this policy has committed to, if it has converged. Policies
    /// that never eliminate rankers return `None` forever.
    fn declared_winner(&self) -> Option<usize>;
}
