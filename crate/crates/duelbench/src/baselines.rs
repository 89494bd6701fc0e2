//! Comparison policies evaluated against MergeDTS: MergeRUCB (same
//! elimination/merge framework, different selection rule) and Self-Sparring.
//!
//! Further baselines plug in through [`crate::policy::Policy`]; their
//! algorithms live in their own papers and are out of scope here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::env;
use crate::mergedts::{SelectPair, UcbContext, UcbSnapshot};
use crate::policy::Policy;
use crate::sampling::{argmax_tiebreak, sample_beta_posterior};
use crate::types::{ComparisonMatrix, DuelOutcome, PreferenceMatrix};

// --- MergeRUCB ----------------------------------------------------------------

fn rucb_pair<R: Rng>(
    batch: &[usize],
    u: impl Fn(usize, usize) -> f64,
    rng: &mut R,
) -> (usize, usize) {
    assert!(!batch.is_empty(), "empty batch");
    if batch.len() == 1 {
        return (batch[0], batch[0]);
    }
    let first = batch[rng.random_range(0..batch.len())];
    let opponents: Vec<usize> = batch.iter().copied().filter(|&j| j != first).collect();
    let optimism: Vec<f64> = opponents.iter().map(|&j| u(j, first)).collect();
    let second = opponents[argmax_tiebreak(&optimism, rng)];
    (first, second)
}

/// MergeRUCB selection: the first candidate is uniform over the batch, the
/// second is the batch member most likely to beat it under the optimistic
/// estimates (`argmax u[j][c]`, ties uniform). A singleton batch yields a
/// self-duel.
pub fn mergerucb_select<R: Rng>(
    _w: &ComparisonMatrix,
    batch: &[usize],
    u: &UcbSnapshot,
    rng: &mut R,
) -> (usize, usize) {
    rucb_pair(batch, |i, j| u.u(i, j), rng)
}

/// Selection rule used by the [`crate::mergedts::MergeRucb`] policy.
pub(crate) struct RucbSelect;

impl SelectPair for RucbSelect {
    fn select_pair<R: Rng>(
        &mut self,
        batch: &[usize],
        ctx: &UcbContext<'_>,
        rng: &mut R,
    ) -> (usize, usize) {
        rucb_pair(batch, |i, j| ctx.u(i, j), rng)
    }
}

// --- Self-Sparring --------------------------------------------------------------

/// Self-Sparring: a single Thompson sampler over per-ranker duel win/loss
/// counts, sampled twice per step to pick both candidates. It never
/// eliminates rankers.
pub struct SelfSparring {
    wins: Vec<u64>,
    losses: Vec<u64>,
    t: u64,
    rng: ChaCha12Rng,
}

impl SelfSparring {
    pub fn new(k: usize, seed: u64) -> Self {
        assert!(k >= 1);
        Self {
            wins: vec![0; k],
            losses: vec![0; k],
            t: 1,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn wins(&self) -> &[u64] {
        &self.wins
    }

    pub fn losses(&self) -> &[u64] {
        &self.losses
    }

    /// Two independent sampling rounds; each draws a Beta posterior sample per
    /// ranker (ascending index order) and takes the argmax with uniform
    /// tie-break. The rounds may coincide, producing a self-duel.
    pub fn select(&mut self) -> (usize, usize) {
        (self.sample_round(), self.sample_round())
    }

    fn sample_round(&mut self) -> usize {
        if self.wins.len() == 1 {
            return 0;
        }
        let theta: Vec<f64> = (0..self.wins.len())
            .map(|i| sample_beta_posterior(&mut self.rng, self.wins[i], self.losses[i]))
            .collect();
        argmax_tiebreak(&theta, &mut self.rng)
    }

    /// Credits the winner with a win and the loser with a loss; a self-duel
    /// increments both counters of the same ranker.
    pub fn update(&mut self, outcome: &DuelOutcome) {
        let loser = if outcome.winner == outcome.first {
            outcome.second
        } else {
            outcome.first
        };
        self.wins[outcome.winner] += 1;
        self.losses[loser] += 1;
    }
}

impl Policy for SelfSparring {
    fn step(&mut self, env: &PreferenceMatrix) -> DuelOutcome {
        let (first, second) = self.select();
        let outcome =
            env::duel(env, self.t, first, second, &mut self.rng).expect("indices in range");
        self.update(&outcome);
        self.t += 1;
        outcome
    }

    fn declared_winner(&self) -> Option<usize> {
        None
    }
}
