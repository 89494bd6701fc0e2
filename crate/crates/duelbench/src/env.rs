//! Construction, loading, validation and sampling of stochastic duel
//! environments defined by preference matrices.

use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{
    borda_scores, condorcet_winner, DuelOutcome, EnvDiagnostics, PreferenceMatrix, PROB_TOLERANCE,
};

/// Declarative description of an environment, as it appears in config files.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentSpec {
    /// Preference matrix loaded from a file.
    File { path: PathBuf },
    /// Synthetic cyclic environment: one Condorcet winner plus a ring of
    /// suboptimal rankers.
    Cycle {
        n_suboptimal: usize,
        p_condorcet: f64,
        p_cycle: f64,
    },
    /// Utility-based environment: `p[i][j]` from the logistic link on utility
    /// differences. Always has a Condorcet winner when one utility is a
    /// strict maximum.
    Utility { utilities: Vec<f64> },
}

impl EnvironmentSpec {
    pub fn build(&self) -> Result<PreferenceMatrix> {
        match self {
            EnvironmentSpec::File { path } => load_matrix(path),
            EnvironmentSpec::Cycle {
                n_suboptimal,
                p_condorcet,
                p_cycle,
            } => generate_cycle(*n_suboptimal, *p_condorcet, *p_cycle),
            EnvironmentSpec::Utility { utilities } => generate_utility(utilities),
        }
    }
}

/// Builds the cyclic environment. Ranker 0 beats every other ranker with
/// `p_condorcet`. The `n_suboptimal` remaining rankers sit on a ring where
/// each beats the `n_suboptimal / 2` rankers to its left (ascending index
/// order, wrapped) with `p_cycle` and loses to those to its right with the
/// same probability. `n_suboptimal` must be odd and >= 3 so that both sides of
/// the ring have equal size.
pub fn generate_cycle(n_suboptimal: usize, p_condorcet: f64, p_cycle: f64) -> Result<PreferenceMatrix> {
    if n_suboptimal < 3 || n_suboptimal % 2 == 0 {
        return Err(Error::DegenerateInput(format!(
            "n_suboptimal = {n_suboptimal} must be odd and >= 3"
        )));
    }
    for (name, p) in [("p_condorcet", p_condorcet), ("p_cycle", p_cycle)] {
        if !(p > 0.5 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} = {p} must lie in (0.5, 1]"
            )));
        }
    }
    let n = n_suboptimal;
    let k = n + 1;
    let half = n / 2;
    let mut p = vec![0.5; k * k];
    for j in 1..k {
        p[j] = p_condorcet; // row 0
        p[j * k] = 1.0 - p_condorcet;
    }
    for r in 0..n {
        let i = r + 1;
        for d in 1..=half {
            let j = (r + d) % n + 1;
            p[i * k + j] = p_cycle;
            p[j * k + i] = 1.0 - p_cycle;
        }
    }
    PreferenceMatrix::new(k, p)
}

/// Builds a utility-based environment: `p[i][j] = 1 / (1 + exp(u_j - u_i))`,
/// the logistic link on utility differences.
pub fn generate_utility(utilities: &[f64]) -> Result<PreferenceMatrix> {
    if utilities.is_empty() {
        return Err(Error::DegenerateInput("need at least one utility".into()));
    }
    if let Some(u) = utilities.iter().find(|u| !u.is_finite()) {
        return Err(Error::InvalidParameter(format!("utility {u} is not finite")));
    }
    let k = utilities.len();
    let mut p = vec![0.5; k * k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                p[i * k + j] = 1.0 / (1.0 + (utilities[j] - utilities[i]).exp());
            }
        }
    }
    PreferenceMatrix::new(k, p)
}

/// Loads and validates a preference matrix from the on-disk format (see
/// [`crate::files`] for the format itself).
pub fn load_matrix(path: impl AsRef<Path>) -> Result<PreferenceMatrix> {
    let (k, entries) = crate::files::read_matrix_file(path.as_ref())?;
    PreferenceMatrix::new(k, entries)
}

/// Plays one duel between rankers `i` and `j`: `i` wins with probability
/// `p[i][j]`. Consumes exactly one uniform variate from `rng`. A self-duel
/// (`i == j`) is a fair coin via the 0.5 diagonal.
pub fn duel<R: Rng>(
    p: &PreferenceMatrix,
    step: u64,
    i: usize,
    j: usize,
    rng: &mut R,
) -> Result<DuelOutcome> {
    let k = p.k();
    for index in [i, j] {
        if index >= k {
            return Err(Error::IndexOutOfRange { index, k });
        }
    }
    let u: f64 = rng.random();
    let winner = if u < p.prob(i, j) { i } else { j };
    Ok(DuelOutcome {
        step,
        first: i,
        second: j,
        winner,
    })
}

/// Computes the full diagnostics for a matrix: winners, score vectors, gaps,
/// the minimal positive gap and the distinguishability assumptions.
pub fn diagnose(p: &PreferenceMatrix) -> EnvDiagnostics {
    let k = p.k();
    let condorcet = condorcet_winner(p);
    let copeland_scores: Vec<f64> = if k == 1 {
        // A lone ranker vacuously beats all others.
        vec![1.0]
    } else {
        crate::types::copeland_scores(p).expect("k >= 2")
    };
    let copeland_value = copeland_scores.iter().cloned().fold(f64::MIN, f64::max);
    let borda = borda_scores(p);

    let mut gaps = vec![0.0; k * k];
    let mut delta_min: Option<f64> = None;
    for i in 0..k {
        for j in 0..k {
            let g = (p.prob(i, j) - 0.5).abs();
            gaps[i * k + j] = g;
            if i != j && g > PROB_TOLERANCE {
                delta_min = Some(delta_min.map_or(g, |d: f64| d.min(g)));
            }
        }
    }

    let uninformative: Vec<bool> = (0..k)
        .map(|i| {
            let tied_with_someone =
                (0..k).any(|j| j != i && (p.prob(i, j) - 0.5).abs() <= PROB_TOLERANCE);
            let beats_none = (0..k).all(|j| j == i || p.prob(i, j) <= 0.5 + PROB_TOLERANCE);
            tied_with_someone && beats_none
        })
        .collect();
    let uninformative_count = uninformative.iter().filter(|&&u| u).count();

    let mut assumption1_holds = true;
    for i in 0..k {
        for j in (i + 1)..k {
            let indistinguishable = (p.prob(i, j) - 0.5).abs() <= PROB_TOLERANCE;
            if indistinguishable && !(uninformative[i] && uninformative[j]) {
                assumption1_holds = false;
            }
        }
    }
    let assumption2_holds = 3 * uninformative_count <= k;

    EnvDiagnostics {
        condorcet,
        copeland_scores,
        copeland_value,
        borda_scores: borda,
        gaps,
        delta_min,
        uninformative_count,
        assumption1_holds,
        assumption2_holds,
    }
}
