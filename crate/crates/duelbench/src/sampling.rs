//! Small sampling helpers shared by the policies.
//!
//! All draws are deterministic functions of the caller's seeded stream, so a
//! run is reproducible from `(config, seed)` alone.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

/// Draws from Beta(wins + 1, losses + 1) via the two-gamma construction.
/// The result is strictly inside (0, 1).
#[inline]
pub fn sample_beta_posterior<R: Rng>(rng: &mut R, wins: u64, losses: u64) -> f64 {
    let a = (wins + 1) as f64;
    let b = (losses + 1) as f64;
    let x = Gamma::new(a, 1.0).expect("shape >= 1").sample(rng);
    let y = Gamma::new(b, 1.0).expect("shape >= 1").sample(rng);
    x / (x + y)
}

/// Position of the maximum of `values`, breaking ties uniformly at random.
/// A random variate is consumed only when the tie set has more than one
/// member.
pub fn argmax_tiebreak<T: PartialOrd + Copy, R: Rng>(values: &[T], rng: &mut R) -> usize {
    pick_extreme(values, rng, |cand, best| cand > best)
}

/// Position of the minimum of `values`, breaking ties uniformly at random.
pub fn argmin_tiebreak<T: PartialOrd + Copy, R: Rng>(values: &[T], rng: &mut R) -> usize {
    pick_extreme(values, rng, |cand, best| cand < best)
}

fn pick_extreme<T: PartialOrd + Copy, R: Rng>(
    values: &[T],
    rng: &mut R,
    better: impl Fn(T, T) -> bool,
) -> usize {
    assert!(!values.is_empty(), "empty candidate set");
    let mut best = values[0];
    for &v in &values[1..] {
        if better(v, best) {
            best = v;
        }
    }
    let ties = values.iter().filter(|&&v| v == best).count();
    let wanted = if ties == 1 { 0 } else { rng.random_range(0..ties) };
    values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v == best)
        .nth(wanted)
        .map(|(pos, _)| pos)
        .expect("tie index in range")
}
