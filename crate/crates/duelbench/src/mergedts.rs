//! Divide-and-conquer dueling bandit policies built around UCB elimination,
//! singleton merging and stage repartitioning, with double Thompson sampling
//! for candidate selection (MergeDTS).
//!
//! The shared machinery (`BatchSet`, elimination, merging, repartitioning,
//! UCB values) is reused verbatim by the MergeRUCB baseline, which only swaps
//! the pair-selection rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::env;
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::sampling::{argmax_tiebreak, argmin_tiebreak, sample_beta_posterior};
use crate::types::{ComparisonMatrix, DuelOutcome, PreferenceMatrix};

// --- exploration constant and bounds ------------------------------------------

/// The exploration constant
/// `C(epsilon) = ((4a - 1) K^2 / ((2a - 1) epsilon))^(1 / (2a - 1))`.
///
/// Requires `alpha > 0.5`; tuned configurations outside the theoretical regime
/// must supply an explicit constant instead (`c_override` in the run config).
pub fn c_of_epsilon(alpha: f64, k: usize, epsilon: f64) -> Result<f64> {
    if !(alpha > 0.5) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must exceed 0.5 for the exploration constant"
        )));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} must lie in (0, 1]"
        )));
    }
    let base = (4.0 * alpha - 1.0) * (k * k) as f64 / ((2.0 * alpha - 1.0) * epsilon);
    Ok(base.powf(1.0 / (2.0 * alpha - 1.0)))
}

/// High-probability cumulative-regret bound
/// `8 a M K ln(T + C) / delta_min^2` with an explicitly supplied constant `C`.
pub fn theorem_bound_with_c(
    alpha: f64,
    m_param: usize,
    k: usize,
    t_horizon: u64,
    c: f64,
    delta_min: f64,
) -> Result<f64> {
    if !(alpha > 0.5) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha}: the regret bound requires alpha > 0.5"
        )));
    }
    if !(delta_min > 0.0) {
        return Err(Error::InvalidParameter(
            "delta_min must be strictly positive for the regret bound".into(),
        ));
    }
    Ok(8.0 * alpha * (m_param * k) as f64 * (t_horizon as f64 + c).ln() / (delta_min * delta_min))
}

/// High-probability cumulative-regret bound with `C(epsilon)` computed from
/// [`c_of_epsilon`].
pub fn theorem_bound(
    alpha: f64,
    m_param: usize,
    k: usize,
    t_horizon: u64,
    epsilon: f64,
    delta_min: f64,
) -> Result<f64> {
    let c = c_of_epsilon(alpha, k, epsilon)?;
    theorem_bound_with_c(alpha, m_param, k, t_horizon, c, delta_min)
}

/// Expected-regret form of the bound: `1 +` the high-probability bound, valid
/// at the horizon `T` with `epsilon = 1/T`.
pub fn expected_theorem_bound(
    alpha: f64,
    m_param: usize,
    k: usize,
    t_horizon: u64,
    epsilon: f64,
    delta_min: f64,
) -> Result<f64> {
    Ok(1.0 + theorem_bound(alpha, m_param, k, t_horizon, epsilon, delta_min)?)
}

/// Upper bound `4 a ln(T + C) / delta^2` on the number of comparisons a pair
/// of distinguishable rankers with batch gap `delta` can receive within one
/// stage. Used as a per-pair audit on instrumented runs.
pub fn lemma_comparison_cap(
    alpha: f64,
    t_horizon: u64,
    c: f64,
    delta_batch_min: f64,
) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    if !(delta_batch_min > 0.0) {
        return Err(Error::InvalidParameter(
            "delta_batch_min must be strictly positive".into(),
        ));
    }
    Ok(4.0 * alpha * (t_horizon as f64 + c).ln() / (delta_batch_min * delta_batch_min))
}

// --- UCB estimators ------------------------------------------------------------

/// Single UCB entry: `w_ij/(w_ij + w_ji) + sqrt(alpha * log_term / (w_ij + w_ji))`.
/// An uncompared pair gets the maximally optimistic value 1 (the elimination
/// rule only tests against 0.5, so any value above it behaves identically).
#[inline]
pub fn ucb_value(wij: u64, wji: u64, log_term: f64, alpha: f64) -> f64 {
    let n = wij + wji;
    if n == 0 {
        1.0
    } else {
        let nf = n as f64;
        wij as f64 / nf + (alpha * log_term / nf).sqrt()
    }
}

/// Full matrix of upper confidence bounds at step `t`.
#[derive(Debug, Clone)]
pub struct UcbSnapshot {
    k: usize,
    u: Vec<f64>,
    pub at_step: u64,
}

impl UcbSnapshot {
    #[inline]
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.k + j]
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Computes the full `k * k` UCB snapshot from the comparison counts.
pub fn ucb_matrix(w: &ComparisonMatrix, t: u64, c: f64, alpha: f64) -> UcbSnapshot {
    let k = w.k();
    let log_term = (t as f64 + c).ln();
    let mut u = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            u[i * k + j] = ucb_value(w.wins(i, j), w.wins(j, i), log_term, alpha);
        }
    }
    UcbSnapshot { k, u, at_step: t }
}

/// Borrowed view used on the hot path: computes UCB entries lazily from the
/// counts so only the active batch block is ever evaluated. Values agree with
/// [`ucb_matrix`] entry for entry.
pub(crate) struct UcbContext<'a> {
    pub w: &'a ComparisonMatrix,
    pub log_term: f64,
    pub alpha: f64,
}

impl UcbContext<'_> {
    #[inline]
    pub fn u(&self, i: usize, j: usize) -> f64 {
        ucb_value(self.w.wins(i, j), self.w.wins(j, i), self.log_term, self.alpha)
    }
}

// --- batches --------------------------------------------------------------------

/// The stage-indexed partition of surviving rankers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSet {
    stage: u32,
    batches: Vec<Vec<usize>>,
    initial_k: usize,
}

impl BatchSet {
    /// Stage-1 partition: consecutive chunks of size `m`, the last one holding
    /// the remainder.
    pub fn initial(k: usize, m: usize) -> Self {
        assert!(k >= 1 && m >= 1);
        let all: Vec<usize> = (0..k).collect();
        Self {
            stage: 1,
            batches: all.chunks(m).map(|c| c.to_vec()).collect(),
            initial_k: k,
        }
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    /// Number of batches b_s.
    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    pub fn initial_k(&self) -> usize {
        self.initial_k
    }

    /// Total surviving rankers.
    pub fn total(&self) -> usize {
        self.batches.iter().map(|b| b.len()).sum()
    }

    pub(crate) fn batch_mut(&mut self, m: usize) -> &mut Vec<usize> {
        &mut self.batches[m]
    }

    /// Moves the sole ranker of batch `m` into batch `(m + 1) mod b_s` and
    /// drops batch `m`. Returns the receiving batch's index after removal.
    pub fn merge_singleton(&mut self, m: usize) -> usize {
        assert!(self.batches.len() > 1, "merge needs more than one batch");
        assert_eq!(self.batches[m].len(), 1, "batch {m} is not a singleton");
        let target = (m + 1) % self.batches.len();
        let ranker = self.batches[m][0];
        self.batches[target].push(ranker);
        self.batches[target].sort_unstable();
        self.batches.remove(m);
        if target > m {
            target - 1
        } else {
            target
        }
    }

    /// Enters the next stage when the survivors have halved
    /// (`total <= K / 2^s`), rebuilding batches deterministically:
    /// batches sorted by size descending (ties by smallest member), each
    /// first-fit into the least-filled new batch that stays within `1.5 M`,
    /// then undersized batches merged into the smallest other batch. Fewer
    /// than `ceil(0.5 M)` total survivors end up in a single batch.
    ///
    /// Returns whether a repartition happened.
    pub fn maybe_repartition(&mut self, m_param: usize) -> bool {
        let total = self.total() as u128;
        let halved = self.stage < 100 && (total << self.stage) <= self.initial_k as u128;
        if !halved {
            return false;
        }
        self.stage += 1;
        self.batches = repartition(&self.batches, m_param);
        true
    }
}

fn repartition(old: &[Vec<usize>], m_param: usize) -> Vec<Vec<usize>> {
    let total: usize = old.iter().map(|b| b.len()).sum();
    let lo = m_param.div_ceil(2);
    let hi = m_param + m_param / 2;

    if total < lo {
        let mut merged: Vec<usize> = old.concat();
        merged.sort_unstable();
        return vec![merged];
    }

    let mut order: Vec<Vec<usize>> = old.iter().filter(|b| !b.is_empty()).cloned().collect();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));

    let mut fresh: Vec<Vec<usize>> = Vec::new();
    for batch in order {
        let mut best: Option<usize> = None;
        for idx in 0..fresh.len() {
            if fresh[idx].len() + batch.len() <= hi {
                let better = match best {
                    None => true,
                    Some(b) => fresh[idx].len() < fresh[b].len(),
                };
                if better {
                    best = Some(idx);
                }
            }
        }
        match best {
            Some(idx) => fresh[idx].extend(batch),
            None => fresh.push(batch),
        }
    }

    while fresh.len() > 1 {
        let Some(pos) = fresh.iter().position(|b| b.len() < lo) else {
            break;
        };
        let small = fresh.remove(pos);
        let mut target = 0;
        for i in 1..fresh.len() {
            if fresh[i].len() < fresh[target].len() {
                target = i;
            }
        }
        fresh[target].extend(small);
    }

    for b in &mut fresh {
        b.sort_unstable();
    }
    fresh
}

// --- elimination -----------------------------------------------------------------

fn eliminate_core(batch: &mut Vec<usize>, u: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // Flags are evaluated against pre-removal membership.
    let flagged: Vec<usize> = batch
        .iter()
        .copied()
        .filter(|&i| batch.iter().any(|&j| j != i && u(i, j) < 0.5))
        .collect();
    let mut removed = Vec::new();
    for i in flagged {
        if batch.len() > 1 {
            let pos = batch.iter().position(|&x| x == i).expect("flagged member");
            batch.remove(pos);
            removed.push(i);
        }
    }
    removed
}

/// Removes every ranker whose UCB against some other batch member is below
/// 0.5. Flags come from pre-removal membership; removals apply in ascending
/// ranker order and the last survivor is retained even if flagged, so the
/// batch never empties. Returns the removed rankers.
pub fn eliminate(batch: &mut Vec<usize>, u: &UcbSnapshot) -> Vec<usize> {
    eliminate_core(batch, |i, j| u.u(i, j))
}

// --- tournaments -------------------------------------------------------------------

/// Phase I: samples `theta_ij ~ Beta(w_ij + 1, w_ji + 1)` for every unordered
/// batch pair (ascending index order), scores each ranker by how many batch
/// mates its sampled preferences beat, and returns the best scorer with
/// uniform random tie-break. A singleton batch returns its sole member without
/// consuming randomness.
pub fn sample_tournament<R: Rng>(w: &ComparisonMatrix, batch: &[usize], rng: &mut R) -> usize {
    assert!(!batch.is_empty(), "empty batch");
    debug_assert!(batch.windows(2).all(|p| p[0] < p[1]), "batch must be sorted");
    if batch.len() == 1 {
        return batch[0];
    }
    let n = batch.len();
    let mut beat_counts = vec![0u32; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let (i, j) = (batch[a], batch[b]);
            let theta = sample_beta_posterior(rng, w.wins(i, j), w.wins(j, i));
            if theta > 0.5 {
                beat_counts[a] += 1;
            } else if theta < 0.5 {
                beat_counts[b] += 1;
            }
        }
    }
    batch[argmax_tiebreak(&beat_counts, rng)]
}

/// Phase II: samples `phi_j ~ Beta(w_jc + 1, w_cj + 1)` for every batch member
/// other than the first candidate (ascending index order) and returns the
/// weakest with uniform random tie-break. The first candidate itself carries
/// `phi = 1` and is never selected while the batch has other members; a
/// singleton batch yields a self-duel.
pub fn relative_tournament<R: Rng>(
    w: &ComparisonMatrix,
    batch: &[usize],
    a_c: usize,
    rng: &mut R,
) -> usize {
    assert!(batch.contains(&a_c), "first candidate not in batch");
    if batch.len() == 1 {
        return a_c;
    }
    let opponents: Vec<usize> = batch.iter().copied().filter(|&j| j != a_c).collect();
    let phis: Vec<f64> = opponents
        .iter()
        .map(|&j| sample_beta_posterior(rng, w.wins(j, a_c), w.wins(a_c, j)))
        .collect();
    opponents[argmin_tiebreak(&phis, rng)]
}

/// Full record of one double-sampling round: the sampled preference matrix
/// over the batch, the per-ranker win fractions, the sampled
/// beat-the-candidate probabilities and both chosen candidates. Indices into
/// `theta`, `kappa` and `phi` follow batch positions.
#[derive(Debug, Clone)]
pub struct SampledPreferences {
    pub batch: Vec<usize>,
    /// `theta[a * n + b]` for batch positions a, b; diagonal fixed at 0.5.
    pub theta: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `phi` aligned with batch positions; the first candidate holds exactly 1.
    pub phi: Vec<f64>,
    pub first: usize,
    pub second: usize,
}

/// Detailed variant of the two tournaments, consuming the random stream
/// exactly like [`sample_tournament`] followed by [`relative_tournament`].
pub fn sample_pair_detailed<R: Rng>(
    w: &ComparisonMatrix,
    batch: &[usize],
    rng: &mut R,
) -> SampledPreferences {
    assert!(!batch.is_empty(), "empty batch");
    let n = batch.len();
    if n == 1 {
        return SampledPreferences {
            batch: batch.to_vec(),
            theta: vec![0.5],
            kappa: vec![1.0],
            phi: vec![1.0],
            first: batch[0],
            second: batch[0],
        };
    }
    let mut theta = vec![0.5; n * n];
    let mut beat_counts = vec![0u32; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let (i, j) = (batch[a], batch[b]);
            let th = sample_beta_posterior(rng, w.wins(i, j), w.wins(j, i));
            theta[a * n + b] = th;
            theta[b * n + a] = 1.0 - th;
            if th > 0.5 {
                beat_counts[a] += 1;
            } else if th < 0.5 {
                beat_counts[b] += 1;
            }
        }
    }
    let kappa: Vec<f64> = beat_counts
        .iter()
        .map(|&c| c as f64 / (n - 1) as f64)
        .collect();
    let c_pos = argmax_tiebreak(&beat_counts, rng);
    let first = batch[c_pos];

    let mut phi = vec![1.0; n];
    for (pos, &j) in batch.iter().enumerate() {
        if j != first {
            phi[pos] = sample_beta_posterior(rng, w.wins(j, first), w.wins(first, j));
        }
    }
    let mut best: Option<usize> = None;
    let mut ties = 0usize;
    for pos in 0..n {
        if pos == c_pos {
            continue;
        }
        match best {
            None => {
                best = Some(pos);
                ties = 1;
            }
            Some(b) => {
                if phi[pos] < phi[b] {
                    best = Some(pos);
                    ties = 1;
                } else if phi[pos] == phi[b] {
                    ties += 1;
                }
            }
        }
    }
    let mut d_pos = best.expect("n > 1");
    if ties > 1 {
        let wanted = rng.random_range(0..ties);
        let mut seen = 0usize;
        for pos in 0..n {
            if pos != c_pos && phi[pos] == phi[d_pos] {
                if seen == wanted {
                    d_pos = pos;
                    break;
                }
                seen += 1;
            }
        }
    }
    SampledPreferences {
        batch: batch.to_vec(),
        theta,
        kappa,
        phi,
        first,
        second: batch[d_pos],
    }
}

// --- the merge framework -------------------------------------------------------

/// Pair-selection rule plugged into the shared elimination/merge framework.
pub(crate) trait SelectPair {
    fn select_pair<R: Rng>(&mut self, batch: &[usize], ctx: &UcbContext<'_>, rng: &mut R)
        -> (usize, usize);
}

/// Double Thompson sampling selection (Phases I and II).
pub(crate) struct DtsSelect;

impl SelectPair for DtsSelect {
    fn select_pair<R: Rng>(
        &mut self,
        batch: &[usize],
        ctx: &UcbContext<'_>,
        rng: &mut R,
    ) -> (usize, usize) {
        let first = sample_tournament(ctx.w, batch, rng);
        let second = relative_tournament(ctx.w, batch, first, rng);
        (first, second)
    }
}

/// Snapshot of one framework step, for instrumentation.
#[derive(Debug, Clone, Copy)]
pub struct StepEvent<'a> {
    pub stage: u32,
    /// Active batch (post-elimination, post-merge) the pair was drawn from.
    pub batch: &'a [usize],
    pub outcome: DuelOutcome,
}

/// Shared state of the merge-style policies: comparison counts, the batch
/// partition, the step counter and the replicate's random stream.
pub(crate) struct MergeState<S> {
    w: ComparisonMatrix,
    batches: BatchSet,
    t: u64,
    alpha: f64,
    m_param: usize,
    c: f64,
    rng: ChaCha12Rng,
    declared: Option<usize>,
    select: S,
}

impl<S: SelectPair> MergeState<S> {
    fn new(k: usize, alpha: f64, m_param: usize, c: f64, seed: u64, select: S) -> Self {
        Self {
            w: ComparisonMatrix::new(k),
            batches: BatchSet::initial(k, m_param),
            t: 1,
            alpha,
            m_param,
            c,
            rng: ChaCha12Rng::seed_from_u64(seed),
            declared: None,
            select,
        }
    }

    fn step_observed(
        &mut self,
        env: &PreferenceMatrix,
        observer: &mut dyn FnMut(StepEvent<'_>),
    ) -> DuelOutcome {
        let b = self.batches.len();
        let m = (self.t % b as u64) as usize;

        if b == 1 && self.batches.batches()[0].len() == 1 && self.declared.is_none() {
            self.declared = Some(self.batches.batches()[0][0]);
        }

        let log_term = (self.t as f64 + self.c).ln();
        {
            let ctx = UcbContext {
                w: &self.w,
                log_term,
                alpha: self.alpha,
            };
            eliminate_core(self.batches.batch_mut(m), |i, j| ctx.u(i, j));
        }

        let mut active = m;
        if self.batches.len() > 1 && self.batches.batches()[m].len() == 1 {
            active = self.batches.merge_singleton(m);
        }

        let ctx = UcbContext {
            w: &self.w,
            log_term,
            alpha: self.alpha,
        };
        let (first, second) =
            self.select
                .select_pair(&self.batches.batches()[active], &ctx, &mut self.rng);

        let outcome =
            env::duel(env, self.t, first, second, &mut self.rng).expect("batch indices in range");
        let loser = if outcome.winner == first { second } else { first };
        self.w.record(outcome.winner, loser);

        observer(StepEvent {
            stage: self.batches.stage(),
            batch: &self.batches.batches()[active],
            outcome,
        });

        self.batches.maybe_repartition(self.m_param);
        self.t += 1;
        outcome
    }

    fn step(&mut self, env: &PreferenceMatrix) -> DuelOutcome {
        self.step_observed(env, &mut |_| {})
    }
}

macro_rules! merge_policy {
    ($(#[$doc:meta])* $name:ident, $select:expr) => {
        $(#[$doc])*
        pub struct $name(MergeState<DtsOrRucb>);

        impl $name {
            pub fn new(k: usize, alpha: f64, batch_size: usize, c: f64, seed: u64) -> Self {
                Self(MergeState::new(k, alpha, batch_size, c, seed, $select))
            }

            /// One step with an instrumentation callback observing the active
            /// batch and the duel outcome.
            pub fn step_observed(
                &mut self,
                env: &PreferenceMatrix,
                observer: &mut dyn FnMut(StepEvent<'_>),
            ) -> DuelOutcome {
                self.0.step_observed(env, observer)
            }

            pub fn comparisons(&self) -> &ComparisonMatrix {
                &self.0.w
            }

            pub fn batch_set(&self) -> &BatchSet {
                &self.0.batches
            }
        }

        impl Policy for $name {
            fn step(&mut self, env: &PreferenceMatrix) -> DuelOutcome {
                self.0.step(env)
            }

            fn declared_winner(&self) -> Option<usize> {
                self.0.declared
            }
        }
    };
}

/// Selection rule dispatch shared by the two merge policies. Scripted
/// selection drives framework tests.
pub(crate) enum DtsOrRucb {
    Dts(DtsSelect),
    Rucb(crate::baselines::RucbSelect),
    #[cfg(test)]
    Scripted(Box<dyn FnMut(&[usize]) -> (usize, usize)>),
}

impl SelectPair for DtsOrRucb {
    fn select_pair<R: Rng>(
        &mut self,
        batch: &[usize],
        ctx: &UcbContext<'_>,
        rng: &mut R,
    ) -> (usize, usize) {
        match self {
            DtsOrRucb::Dts(s) => s.select_pair(batch, ctx, rng),
            DtsOrRucb::Rucb(s) => s.select_pair(batch, ctx, rng),
            #[cfg(test)]
            DtsOrRucb::Scripted(f) => f(batch),
        }
    }
}

merge_policy!(
    /// MergeDTS: UCB elimination plus double Thompson sampling selection.
    MergeDts,
    DtsOrRucb::Dts(DtsSelect)
);

merge_policy!(
    /// MergeRUCB: the same elimination/merge framework with uniform first
    /// candidate and optimistic opponent selection.
    MergeRucb,
    DtsOrRucb::Rucb(crate::baselines::RucbSelect)
);

#[cfg(test)]
pub(crate) fn scripted_merge_policy(
    k: usize,
    alpha: f64,
    batch_size: usize,
    c: f64,
    seed: u64,
    script: Box<dyn FnMut(&[usize]) -> (usize, usize)>,
) -> MergeDts {
    MergeDts(MergeState::new(
        k,
        alpha,
        batch_size,
        c,
        seed,
        DtsOrRucb::Scripted(script),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate_utility;

    fn approx(a: f64, b: f64, rel: f64) {
        assert!(
            (a - b).abs() <= rel * b.abs().max(1.0),
            "{a} vs {b} beyond {rel}"
        );
    }

    #[test]
    fn c_of_epsilon_examples() {
        assert_eq!(c_of_epsilon(1.0, 2, 1.0).unwrap(), 12.0);
        approx(c_of_epsilon(1.5, 10, 0.1).unwrap(), 50.0, 1e-12);
        approx(c_of_epsilon(1.0, 16, 1e-6).unwrap(), 7.68e8, 1e-12);
        assert!(c_of_epsilon(0.5, 4, 0.1).is_err());
        assert!(c_of_epsilon(0.3, 4, 0.1).is_err());
    }

    #[test]
    fn ucb_examples() {
        // w_ij = 1, w_ji = 3, alpha = 1, t + c = e
        let log_term = 1.0;
        approx(ucb_value(1, 3, log_term, 1.0), 0.75, 1e-12);
        // uncompared pair
        assert_eq!(ucb_value(0, 0, 5.0, 1.0), 1.0);
        // w_ij = 3, w_ji = 1, alpha = 0.5, t + c = e^4
        approx(ucb_value(3, 1, 4.0, 0.5), 1.4571067811865475, 1e-12);
    }

    #[test]
    fn ucb_matrix_matches_pairwise_values() {
        let w = ComparisonMatrix::from_counts(3, &[(0, 1, 5), (1, 0, 2), (2, 0, 7)]);
        let snap = ucb_matrix(&w, 10, 3.0, 0.8);
        let log_term = (10.0f64 + 3.0).ln();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(snap.u(i, j), ucb_value(w.wins(i, j), w.wins(j, i), log_term, 0.8));
            }
        }
        assert_eq!(snap.at_step, 10);
    }

    #[test]
    fn ucb_pair_sum_exceeds_one() {
        let w = ComparisonMatrix::from_counts(2, &[(0, 1, 4), (1, 0, 9)]);
        let snap = ucb_matrix(&w, 100, 2.0, 1.3);
        let sum = snap.u(0, 1) + snap.u(1, 0);
        assert!(sum > 1.0);
        // at most one direction can fall below 0.5
        assert!(!(snap.u(0, 1) < 0.5 && snap.u(1, 0) < 0.5));
    }

    #[test]
    fn theorem_bound_examples() {
        // alpha=1, M=4, K=16, T=1e6, eps=1e-6, delta=0.1
        let b = theorem_bound(1.0, 4, 16, 1_000_000, 1e-6, 0.1).unwrap();
        approx(b, 1047582.7982064598, 1e-9);
        // doubling delta_min quarters the bound
        let b2 = theorem_bound(1.0, 4, 16, 1_000_000, 1e-6, 0.2).unwrap();
        approx(b2, b / 4.0, 1e-12);
        // fixed C from tuned setup
        let b3 = theorem_bound_with_c(1.01, 4, 136, 100_000_000, 4_726_908.0, 0.01).unwrap();
        approx(b3, 811714816.7005374, 1e-9);
        // expected form
        let e = expected_theorem_bound(1.0, 4, 16, 1_000_000, 1e-6, 0.1).unwrap();
        approx(e, 1.0 + b, 1e-12);
        // refusals
        assert!(theorem_bound(0.4, 4, 16, 100, 0.1, 0.1).is_err());
        assert!(theorem_bound(1.0, 4, 16, 100, 0.1, 0.0).is_err());
    }

    #[test]
    fn lemma_cap_examples() {
        // alpha=1, T + C = e^10, delta=0.5
        let cap = lemma_comparison_cap(1.0, 1, (10.0f64).exp() - 1.0, 0.5).unwrap();
        approx(cap, 160.0, 1e-9);
        let cap2 = lemma_comparison_cap(2.0, 1, (10.0f64).exp() - 1.0, 0.5).unwrap();
        approx(cap2, 320.0, 1e-9);
        let cap3 = lemma_comparison_cap(1.0, 1, (10.0f64).exp() - 1.0, 1.0).unwrap();
        approx(cap3, 40.0, 1e-9);
        assert!(lemma_comparison_cap(1.0, 1, 1.0, 0.0).is_err());
    }

    fn snapshot_from(u: Vec<Vec<f64>>) -> UcbSnapshot {
        let k = u.len();
        UcbSnapshot {
            k,
            u: u.into_iter().flatten().collect(),
            at_step: 1,
        }
    }

    #[test]
    fn eliminate_examples() {
        // batch {0,1}, u[0][1] = 0.4 -> removes 0
        let snap = snapshot_from(vec![vec![1.0, 0.4], vec![0.8, 1.0]]);
        let mut batch = vec![0, 1];
        assert_eq!(eliminate(&mut batch, &snap), vec![0]);
        assert_eq!(batch, vec![1]);

        // all off-diagonal >= 0.5 -> nothing removed
        let snap = snapshot_from(vec![
            vec![1.0, 0.6, 0.5],
            vec![0.6, 1.0, 0.7],
            vec![0.9, 0.5, 1.0],
        ]);
        let mut batch = vec![0, 1, 2];
        assert!(eliminate(&mut batch, &snap).is_empty());
        assert_eq!(batch, vec![0, 1, 2]);

        // cyclic flags: every member flagged, ascending removal, never empty
        let snap = snapshot_from(vec![
            vec![1.0, 0.4, 0.9],
            vec![0.9, 1.0, 0.4],
            vec![0.4, 0.9, 1.0],
        ]);
        let mut batch = vec![0, 1, 2];
        assert_eq!(eliminate(&mut batch, &snap), vec![0, 1]);
        assert_eq!(batch, vec![2]);
    }

    #[test]
    fn eliminate_keeps_unflagged() {
        // flags computed against pre-removal membership: ranker 2 loses only
        // to ranker 0; both are flagged/removed by earlier members or not.
        let snap = snapshot_from(vec![
            vec![1.0, 0.4, 0.9],
            vec![0.9, 1.0, 0.9],
            vec![0.45, 0.9, 1.0],
        ]);
        // 0 flagged (loses to 1), 2 flagged (loses to 0 pre-removal).
        let mut batch = vec![0, 1, 2];
        assert_eq!(eliminate(&mut batch, &snap), vec![0, 2]);
        assert_eq!(batch, vec![1]);
    }

    #[test]
    fn merge_singleton_examples() {
        let mut bs = BatchSet {
            stage: 1,
            batches: vec![vec![0], vec![1, 2]],
            initial_k: 3,
        };
        let active = bs.merge_singleton(0);
        assert_eq!(bs.batches(), &[vec![0, 1, 2]]);
        assert_eq!(active, 0);

        let mut bs = BatchSet {
            stage: 1,
            batches: vec![vec![1, 2], vec![0]],
            initial_k: 3,
        };
        let active = bs.merge_singleton(1);
        assert_eq!(bs.batches(), &[vec![0, 1, 2]]);
        assert_eq!(active, 0);
    }

    #[test]
    fn repartition_trigger_and_bounds() {
        // survivors above the threshold: unchanged
        let mut bs = BatchSet {
            stage: 1,
            batches: vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8, 9, 10]],
            initial_k: 16,
        };
        assert!(!bs.maybe_repartition(4));
        assert_eq!(bs.stage(), 1);

        // derived example: M=4, sizes [3,2,1,1,1], K=16, s=1 (total 8 <= 8)
        let mut bs = BatchSet {
            stage: 1,
            batches: vec![vec![0, 1, 2], vec![3, 4], vec![5], vec![6], vec![7]],
            initial_k: 16,
        };
        assert!(bs.maybe_repartition(4));
        assert_eq!(bs.stage(), 2);
        assert_eq!(bs.total(), 8);
        for b in bs.batches() {
            assert!(
                (2..=6).contains(&b.len()),
                "batch size {} out of [2,6]",
                b.len()
            );
        }

        // single survivor collapses into one batch and increments the stage
        let mut bs = BatchSet {
            stage: 3,
            batches: vec![vec![4]],
            initial_k: 16,
        };
        assert!(bs.maybe_repartition(4));
        assert_eq!(bs.stage(), 4);
        assert_eq!(bs.batches(), &[vec![4]]);
    }

    #[test]
    fn initial_batches_are_ceil_split() {
        let bs = BatchSet::initial(10, 4);
        assert_eq!(bs.batches(), &[vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8, 9]]);
        assert_eq!(bs.len(), 3);
        let bs = BatchSet::initial(1, 4);
        assert_eq!(bs.batches(), &[vec![0]]);
    }

    #[test]
    fn tournaments_on_singletons() {
        use rand::SeedableRng;
        let w = ComparisonMatrix::new(6);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut probe = ChaCha12Rng::seed_from_u64(0);
        assert_eq!(sample_tournament(&w, &[5], &mut rng), 5);
        assert_eq!(relative_tournament(&w, &[3], 3, &mut rng), 3);
        // no variates consumed
        assert_eq!(rng.random::<u64>(), probe.random::<u64>());
    }

    #[test]
    fn relative_tournament_two_rankers_avoids_self() {
        use rand::SeedableRng;
        let w = ComparisonMatrix::new(2);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..200 {
            assert_eq!(relative_tournament(&w, &[0, 1], 0, &mut rng), 1);
        }
    }

    #[test]
    fn overwhelming_counts_pin_the_tournament() {
        use rand::SeedableRng;
        let w = ComparisonMatrix::from_counts(2, &[(0, 1, 1000)]);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let trials = 10_000;
        let zero_wins = (0..trials)
            .filter(|_| sample_tournament(&w, &[0, 1], &mut rng) == 0)
            .count();
        assert!(
            zero_wins as f64 / trials as f64 >= 0.999,
            "{zero_wins}/{trials}"
        );
    }

    #[test]
    fn detailed_sampling_matches_lean_path() {
        use rand::SeedableRng;
        let w = ComparisonMatrix::from_counts(
            5,
            &[(0, 1, 3), (1, 0, 2), (2, 3, 8), (3, 2, 1), (4, 0, 2)],
        );
        let batch = vec![0, 1, 2, 3, 4];
        for seed in 0..50 {
            let mut lean = ChaCha12Rng::seed_from_u64(seed);
            let mut detl = ChaCha12Rng::seed_from_u64(seed);
            let first = sample_tournament(&w, &batch, &mut lean);
            let second = relative_tournament(&w, &batch, first, &mut lean);
            let detail = sample_pair_detailed(&w, &batch, &mut detl);
            assert_eq!(detail.first, first, "seed {seed}");
            assert_eq!(detail.second, second, "seed {seed}");
            assert_eq!(lean.random::<u64>(), detl.random::<u64>(), "seed {seed}");
        }
    }

    #[test]
    fn detailed_sampling_invariants() {
        use rand::SeedableRng;
        let w = ComparisonMatrix::from_counts(4, &[(0, 1, 2), (1, 2, 5), (3, 0, 1)]);
        let batch = vec![0, 1, 2, 3];
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..100 {
            let d = sample_pair_detailed(&w, &batch, &mut rng);
            let n = batch.len();
            let c_pos = batch.iter().position(|&x| x == d.first).unwrap();
            assert_eq!(d.phi[c_pos], 1.0);
            assert_ne!(d.first, d.second);
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        let th = d.theta[a * n + b];
                        assert!(th > 0.0 && th < 1.0);
                        assert!((th + d.theta[b * n + a] - 1.0).abs() < 1e-12);
                    }
                }
            }
            for &kp in &d.kappa {
                assert!((0.0..=1.0).contains(&kp));
            }
        }
    }

    #[test]
    fn single_ranker_run_declares_immediately() {
        let env = generate_utility(&[0.0]).unwrap();
        let mut policy = MergeDts::new(1, 1.01, 4, 100.0, 7);
        let o = policy.step(&env);
        assert_eq!(policy.declared_winner(), Some(0));
        assert_eq!((o.first, o.second, o.winner), (0, 0, 0));
        for _ in 0..100 {
            let o = policy.step(&env);
            assert_eq!((o.first, o.second), (0, 0));
        }
    }

    #[test]
    fn two_ranker_utility_finds_winner() {
        // Gap ~0.231 makes elimination fast.
        let env = generate_utility(&[1.0, 0.0]).unwrap();
        let horizon = 100_000u64;
        let c = c_of_epsilon(1.01, 2, 1.0 / horizon as f64).unwrap();
        let mut hits = 0;
        for seed in 0..100 {
            let mut policy = MergeDts::new(2, 1.01, 4, c, seed);
            for _ in 0..horizon {
                policy.step(&env);
            }
            if policy.declared_winner() == Some(0) {
                hits += 1;
            }
        }
        assert!(hits >= 99, "{hits}/100");
    }

    #[test]
    fn batch_evolution_stays_consistent() {
        let env = crate::env::generate_cycle(7, 0.8, 0.9).unwrap();
        let k = env.k();
        let mut policy = MergeDts::new(k, 1.01, 3, 50.0, 11);
        let mut last_stage = 1;
        for _ in 0..20_000 {
            policy.step(&env);
            let bs = policy.batch_set();
            assert!(bs.stage() >= last_stage, "stage decreased");
            last_stage = bs.stage();
            let mut seen = std::collections::HashSet::new();
            for b in bs.batches() {
                assert!(!b.is_empty(), "empty batch");
                for &r in b {
                    assert!(r < k, "ranker outside initial set");
                    assert!(seen.insert(r), "ranker {r} in two batches");
                }
            }
            if let Some(wnr) = policy.declared_winner() {
                assert_eq!(bs.total(), 1);
                assert_eq!(bs.batches()[0][0], wnr);
            }
        }
        // On this easy environment the winner must emerge well within budget.
        assert_eq!(policy.declared_winner(), Some(0));
    }
}
