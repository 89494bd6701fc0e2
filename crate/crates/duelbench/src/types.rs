//! Shared value types and the environment-independent scoring/regret
//! mathematics.
//!
//! Rankers are 0-based integer indices everywhere. When an environment has a
//! Condorcet winner we carry its index in [`EnvDiagnostics`] instead of
//! permuting matrices.

use crate::error::{Error, Result};

/// Absolute tolerance used when validating probability complementarity and
/// when deciding whether a pair of rankers is distinguishable from 0.5.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Ground-truth pairwise win probabilities defining a duel environment.
///
/// Invariants enforced on construction:
/// - `p[i][j] + p[j][i] = 1` within [`PROB_TOLERANCE`] (entries are then
///   re-symmetrized as `p[j][i] = 1 - p[i][j]` for `i < j`, so downstream code
///   sees exact complementarity),
/// - `p[i][i] = 0.5` exactly,
/// - all entries lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceMatrix {
    k: usize,
    p: Vec<f64>,
}

impl PreferenceMatrix {
    /// Validates and re-symmetrizes a row-major `k * k` probability matrix.
    pub fn new(k: usize, mut p: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::DegenerateInput("k must be >= 1".into()));
        }
        if p.len() != k * k {
            return Err(Error::Validation(format!(
                "expected {} entries for k={}, got {}",
                k * k,
                k,
                p.len()
            )));
        }
        for (idx, &v) in p.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "entry ({},{}) = {} is not a probability",
                    idx / k,
                    idx % k,
                    v
                )));
            }
        }
        for i in 0..k {
            if (p[i * k + i] - 0.5).abs() > PROB_TOLERANCE {
                return Err(Error::Validation(format!(
                    "diagonal entry ({i},{i}) = {} must be 0.5",
                    p[i * k + i]
                )));
            }
            p[i * k + i] = 0.5;
            for j in (i + 1)..k {
                let sum = p[i * k + j] + p[j * k + i];
                if (sum - 1.0).abs() > PROB_TOLERANCE {
                    return Err(Error::Validation(format!(
                        "p[{i}][{j}] + p[{j}][{i}] = {sum}, expected 1"
                    )));
                }
                p[j * k + i] = 1.0 - p[i * k + j];
            }
        }
        Ok(Self { k, p })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Probability that ranker `i` beats ranker `j`.
    #[inline]
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.k + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.p.chunks_exact(self.k)
    }
}

/// Running duel-outcome counts: `w[i][j]` is the number of duels ranker `i`
/// has won against ranker `j`. Self-duels increment the diagonal, which is
/// pure bookkeeping (never read by elimination or tournaments).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonMatrix {
    k: usize,
    w: Vec<u64>,
}

impl ComparisonMatrix {
    pub fn new(k: usize) -> Self {
        Self { k, w: vec![0; k * k] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn wins(&self, i: usize, j: usize) -> u64 {
        self.w[i * self.k + j]
    }

    /// Records one duel won by `winner` against `loser`.
    #[inline]
    pub fn record(&mut self, winner: usize, loser: usize) {
        self.w[winner * self.k + loser] += 1;
    }

    /// Total number of recorded duels.
    pub fn total(&self) -> u64 {
        self.w.iter().sum()
    }

    /// Builds a matrix with preset counts, `(winner, loser, n)` per entry.
    pub fn from_counts(k: usize, counts: &[(usize, usize, u64)]) -> Self {
        let mut m = Self::new(k);
        for &(i, j, n) in counts {
            m.w[i * k + j] = n;
        }
        m
    }
}

/// Result of a single duel at step `step`: `winner` is either `first` or
/// `second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DuelOutcome {
    pub step: u64,
    pub first: usize,
    pub second: usize,
    pub winner: usize,
}

/// Precomputed facts about a preference matrix: winners, score vectors, gaps
/// and the distinguishability diagnostics used to check the standing
/// assumptions of elimination-style algorithms.
#[derive(Debug, Clone)]
pub struct EnvDiagnostics {
    /// Index of the Condorcet winner, when one exists.
    pub condorcet: Option<usize>,
    /// Normalized count of beaten rankers per ranker (`1.0` for a lone ranker).
    pub copeland_scores: Vec<f64>,
    /// Maximum Copeland score.
    pub copeland_value: f64,
    pub borda_scores: Vec<f64>,
    /// `gaps[i][j] = |p[i][j] - 0.5|`, row-major.
    pub gaps: Vec<f64>,
    /// Smallest gap strictly above [`PROB_TOLERANCE`]; absent when no pair is
    /// distinguishable.
    pub delta_min: Option<f64>,
    /// Rankers indistinguishable from at least one other ranker while beating
    /// none.
    pub uninformative_count: usize,
    /// Every pair distinguishable unless both members are uninformative.
    pub assumption1_holds: bool,
    /// Uninformative rankers are at most one third of the set.
    pub assumption2_holds: bool,
}

impl EnvDiagnostics {
    pub fn k(&self) -> usize {
        self.copeland_scores.len()
    }

    #[inline]
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        self.gaps[i * self.k() + j]
    }
}

/// Checkpointed cumulative-regret trajectory of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    /// `(step, cumulative regret)` pairs with strictly increasing steps and
    /// non-decreasing regret; the last step equals `total_steps`.
    pub checkpoints: Vec<(u64, f64)>,
    pub final_winner: Option<usize>,
    pub total_steps: u64,
}

impl RegretLedger {
    pub fn final_regret(&self) -> f64 {
        self.checkpoints.last().map(|&(_, r)| r).unwrap_or(0.0)
    }

    pub fn steps(&self) -> Vec<u64> {
        self.checkpoints.iter().map(|&(s, _)| s).collect()
    }
}

/// Which winner notion the per-step regret is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegretKind {
    /// Condorcet regret when the environment has a Condorcet winner, Copeland
    /// regret otherwise.
    #[default]
    Auto,
    Condorcet,
    Copeland,
}

/// Policy selector for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    MergeDts,
    MergeRucb,
    SelfSparring,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::MergeDts => "merge-dts",
            Algorithm::MergeRucb => "merge-rucb",
            Algorithm::SelfSparring => "self-sparring",
        }
    }

    /// Case-insensitive parse of the canonical kebab-case names (dashes and
    /// underscores are interchangeable).
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "merge-dts" | "mergedts" => Ok(Algorithm::MergeDts),
            "merge-rucb" | "mergerucb" => Ok(Algorithm::MergeRucb),
            "self-sparring" | "selfsparring" => Ok(Algorithm::SelfSparring),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm {other:?} (expected merge-dts, merge-rucb or self-sparring)"
            ))),
        }
    }
}

/// Full specification of a reproducible experiment.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Exploration parameter; values <= 0.5 require `c_override`.
    pub alpha: f64,
    /// Batch size M.
    pub batch_size: usize,
    /// Horizon T.
    pub horizon: u64,
    /// Failure probability; defaults to `1/horizon` when not given.
    pub epsilon: f64,
    /// Replaces the computed exploration constant C(epsilon).
    pub c_override: Option<f64>,
    pub env: crate::env::EnvironmentSpec,
    pub base_seed: u64,
    pub replicates: usize,
    pub checkpoint_count: usize,
    pub regret: RegretKind,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must lie in (0,1)",
                self.epsilon
            )));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must be positive",
                self.alpha
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        if self.replicates < 1 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        if self.checkpoint_count < 1 {
            return Err(Error::InvalidParameter(
                "checkpoint_count must be >= 1".into(),
            ));
        }
        if let Some(c) = self.c_override {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "c_override = {c} must be positive and finite"
                )));
            }
        }
        Ok(())
    }
}

/// Index of the ranker beating every other ranker with probability > 0.5, if
/// one exists. A single-ranker matrix vacuously has winner 0. At most one
/// index can satisfy the condition.
pub fn condorcet_winner(p: &PreferenceMatrix) -> Option<usize> {
    let k = p.k();
    (0..k).find(|&i| (0..k).all(|j| j == i || p.prob(i, j) > 0.5))
}

/// Copeland scores: fraction of other rankers beaten strictly,
/// `zeta_i = |{j != i : p[i][j] > 0.5}| / (k - 1)`.
pub fn copeland_scores(p: &PreferenceMatrix) -> Result<Vec<f64>> {
    let k = p.k();
    if k < 2 {
        return Err(Error::DegenerateInput(
            "copeland scores need at least 2 rankers".into(),
        ));
    }
    Ok((0..k)
        .map(|i| {
            let beaten = (0..k).filter(|&j| j != i && p.prob(i, j) > 0.5).count();
            beaten as f64 / (k - 1) as f64
        })
        .collect())
}

/// Borda scores: `sum_j p[i][j]`, including the diagonal 0.5 term.
pub fn borda_scores(p: &PreferenceMatrix) -> Vec<f64> {
    p.rows().map(|row| row.iter().sum()).collect()
}

/// Per-step Condorcet regret of comparing rankers `i` and `j`:
/// `(gap(w,i) + gap(w,j)) / 2` where `w` is the Condorcet winner and
/// `gap(w,x) = p[w][x] - 0.5`. Errors when the environment has no Condorcet
/// winner; callers must use [`copeland_step_regret`] there.
pub fn condorcet_step_regret(
    diag: &EnvDiagnostics,
    p: &PreferenceMatrix,
    i: usize,
    j: usize,
) -> Result<f64> {
    let w = diag.condorcet.ok_or_else(|| {
        Error::UnsupportedEnvironment(
            "no Condorcet winner; Condorcet regret is undefined".into(),
        )
    })?;
    Ok(((p.prob(w, i) - 0.5) + (p.prob(w, j) - 0.5)) / 2.0)
}

/// Per-step Copeland regret: `zeta* - (zeta_i + zeta_j) / 2`.
pub fn copeland_step_regret(diag: &EnvDiagnostics, i: usize, j: usize) -> f64 {
    diag.copeland_value - 0.5 * (diag.copeland_scores[i] + diag.copeland_scores[j])
}
