//! Runs seeded replicate batches of any policy against any environment,
//! records checkpointed regret, aggregates statistics and audits the
//! theoretical bound.

use rayon::prelude::*;

use crate::baselines::SelfSparring;
use crate::error::{Error, Result};
use crate::mergedts::{c_of_epsilon, theorem_bound_with_c, MergeDts, MergeRucb};
use crate::policy::Policy;
use crate::types::{
    Algorithm, EnvDiagnostics, PreferenceMatrix, RegretKind, RegretLedger, RunConfig,
};

/// Geometric checkpoint schedule: `n_points` steps from
/// `max(1, ceil(t_horizon / 10^4))` to `t_horizon` inclusive, strictly
/// ascending (collisions bump to the next integer), always ending at the
/// horizon. Saturates to consecutive integers when the range is too small.
pub fn checkpoint_schedule(t_horizon: u64, n_points: usize) -> Result<Vec<u64>> {
    if n_points < 2 {
        return Err(Error::InvalidParameter("need at least 2 checkpoints".into()));
    }
    if t_horizon < n_points as u64 {
        return Err(Error::InvalidParameter(format!(
            "horizon {t_horizon} below checkpoint count {n_points}"
        )));
    }
    let start = t_horizon.div_ceil(10_000).max(1);
    let ratio = (t_horizon as f64 / start as f64).powf(1.0 / (n_points - 1) as f64);
    let mut steps = Vec::with_capacity(n_points);
    let mut prev = 0u64;
    for i in 0..n_points {
        let raw = (start as f64 * ratio.powi(i as i32)).round() as u64;
        let step = raw.max(prev + 1);
        if step >= t_horizon {
            break;
        }
        steps.push(step);
        prev = step;
    }
    steps.push(t_horizon);
    Ok(steps)
}

/// Per-step regret functional, resolved once per environment.
#[derive(Debug, Clone)]
pub enum RegretFn {
    /// Precomputed winner-row gaps `p[w][x] - 0.5`.
    Condorcet { gaps: Vec<f64> },
    Copeland { scores: Vec<f64>, star: f64 },
}

impl RegretFn {
    /// Resolves the configured regret kind against the environment
    /// diagnostics. `Auto` picks Condorcet regret when a Condorcet winner
    /// exists and Copeland regret otherwise; `Condorcet` on an environment
    /// without a Condorcet winner is an error, never a silent fallback.
    pub fn resolve(kind: RegretKind, env: &PreferenceMatrix, diag: &EnvDiagnostics) -> Result<Self> {
        let condorcet = || -> Result<Self> {
            let w = diag.condorcet.ok_or_else(|| {
                Error::UnsupportedEnvironment(
                    "Condorcet regret requested but the environment has no Condorcet winner"
                        .into(),
                )
            })?;
            let gaps = (0..env.k()).map(|x| env.prob(w, x) - 0.5).collect();
            Ok(RegretFn::Condorcet { gaps })
        };
        let copeland = || -> Result<Self> {
            Ok(RegretFn::Copeland {
                scores: diag.copeland_scores.clone(),
                star: diag.copeland_value,
            })
        };
        match kind {
            RegretKind::Condorcet => condorcet(),
            RegretKind::Copeland => copeland(),
            RegretKind::Auto => {
                if diag.condorcet.is_some() {
                    condorcet()
                } else {
                    copeland()
                }
            }
        }
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        match self {
            RegretFn::Condorcet { gaps } => (gaps[i] + gaps[j]) / 2.0,
            RegretFn::Copeland { scores, star } => star - 0.5 * (scores[i] + scores[j]),
        }
    }
}

/// Everything shared across the replicates of one experiment.
pub struct Prepared {
    pub config: RunConfig,
    pub env: PreferenceMatrix,
    pub diag: EnvDiagnostics,
    pub c: f64,
    pub checkpoints: Vec<u64>,
    pub regret: RegretFn,
}

/// Builds the environment, resolves the exploration constant (the override
/// wins over the computed `C(epsilon)`), the regret functional and the
/// checkpoint schedule.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    config.validate()?;
    let env = config.env.build()?;
    let diag = crate::env::diagnose(&env);
    let c = match config.c_override {
        Some(c) => c,
        None => c_of_epsilon(config.alpha, env.k(), config.epsilon)?,
    };
    let checkpoints = if config.checkpoint_count == 1 {
        vec![config.horizon]
    } else {
        checkpoint_schedule(config.horizon, config.checkpoint_count.min(config.horizon as usize))?
    };
    let regret = RegretFn::resolve(config.regret, &env, &diag)?;
    Ok(Prepared {
        config: config.clone(),
        env,
        diag,
        c,
        checkpoints,
        regret,
    })
}

/// Instantiates the configured policy for one replicate.
pub fn build_policy(
    algorithm: Algorithm,
    k: usize,
    alpha: f64,
    batch_size: usize,
    c: f64,
    seed: u64,
) -> Box<dyn Policy> {
    match algorithm {
        Algorithm::MergeDts => Box::new(MergeDts::new(k, alpha, batch_size, c, seed)),
        Algorithm::MergeRucb => Box::new(MergeRucb::new(k, alpha, batch_size, c, seed)),
        Algorithm::SelfSparring => Box::new(SelfSparring::new(k, seed)),
    }
}

/// Drives a policy for the full horizon, accumulating regret and recording
/// the ledger at the checkpoint schedule.
pub fn run_policy(
    policy: &mut dyn Policy,
    env: &PreferenceMatrix,
    horizon: u64,
    checkpoints: &[u64],
    regret: &RegretFn,
) -> RegretLedger {
    let mut cum = 0.0f64;
    let mut ledger = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0usize;
    for t in 1..=horizon {
        let outcome = policy.step(env);
        cum += regret.value(outcome.first, outcome.second);
        if next_cp < checkpoints.len() && checkpoints[next_cp] == t {
            ledger.push((t, cum));
            next_cp += 1;
        }
    }
    RegretLedger {
        checkpoints: ledger,
        final_winner: policy.declared_winner(),
        total_steps: horizon,
    }
}

/// Runs one replicate with seed `base_seed + replicate`.
pub fn run_single(prep: &Prepared, replicate: usize) -> RegretLedger {
    let seed = prep.config.base_seed.wrapping_add(replicate as u64);
    let mut policy = build_policy(
        prep.config.algorithm,
        prep.env.k(),
        prep.config.alpha,
        prep.config.batch_size,
        prep.c,
        seed,
    );
    run_policy(
        policy.as_mut(),
        &prep.env,
        prep.config.horizon,
        &prep.checkpoints,
        &prep.regret,
    )
}

/// Runs all replicates of the configured experiment. Replicates are
/// independent and execute concurrently on the global thread pool; output
/// order is by replicate index regardless of completion order, so serial and
/// parallel execution produce identical ledger lists.
pub fn run_replicates(config: &RunConfig) -> Result<Vec<RegretLedger>> {
    let prep = prepare(config)?;
    Ok((0..config.replicates)
        .into_par_iter()
        .map(|r| run_single(&prep, r))
        .collect())
}

/// [`run_replicates`] with an explicit cap on worker threads (`None` uses the
/// global pool).
pub fn run_replicates_with_threads(
    config: &RunConfig,
    threads: Option<usize>,
) -> Result<Vec<RegretLedger>> {
    match threads {
        None => run_replicates(config),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(|| run_replicates(config))
        }
    }
}

/// Per-checkpoint mean and standard error over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub checkpoints: Vec<u64>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (n - 1 denominator) over sqrt(n); zero when
    /// n = 1.
    pub stderr: Vec<f64>,
    pub n: usize,
}

/// Aggregates ledgers sharing one checkpoint schedule.
pub fn aggregate(ledgers: &[RegretLedger]) -> Result<AggregateSeries> {
    let first = ledgers
        .first()
        .ok_or_else(|| Error::InvalidParameter("no ledgers to aggregate".into()))?;
    let schedule = first.steps();
    for (idx, ledger) in ledgers.iter().enumerate() {
        if ledger.steps() != schedule {
            return Err(Error::ScheduleMismatch(format!(
                "ledger {idx} does not share the common checkpoint schedule"
            )));
        }
    }
    let n = ledgers.len();
    let mut mean = Vec::with_capacity(schedule.len());
    let mut stderr = Vec::with_capacity(schedule.len());
    for cp in 0..schedule.len() {
        let values: Vec<f64> = ledgers.iter().map(|l| l.checkpoints[cp].1).collect();
        let m = values.iter().sum::<f64>() / n as f64;
        let se = if n == 1 {
            0.0
        } else {
            let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        mean.push(m);
        stderr.push(se);
    }
    Ok(AggregateSeries {
        checkpoints: schedule,
        mean,
        stderr,
        n,
    })
}

/// Outcome of auditing replicate ledgers against the theoretical bound.
#[derive(Debug, Clone)]
pub struct BoundAuditReport {
    /// `None` when the configuration sits outside the theoretical regime
    /// (alpha <= 0.5), with the reason attached.
    pub bound: Option<f64>,
    pub not_applicable: Option<String>,
    /// `(final regret, within bound)` per replicate.
    pub per_replicate: Vec<(f64, bool)>,
    pub violations: usize,
    /// Tolerated violations: `ceil(epsilon * n) + 1`.
    pub allowed: usize,
    pub pass: bool,
}

/// Checks every ledger's final regret against the regret bound. The
/// environment's smallest positive gap feeds the bound; a single-ranker
/// environment passes trivially (its regret is identically zero).
pub fn bound_audit(
    config: &RunConfig,
    ledgers: &[RegretLedger],
    diag: &EnvDiagnostics,
) -> Result<BoundAuditReport> {
    let n = ledgers.len();
    let allowed = (config.epsilon * n as f64).ceil() as usize + 1;
    if config.alpha <= 0.5 {
        return Ok(BoundAuditReport {
            bound: None,
            not_applicable: Some(format!(
                "alpha = {} is outside the theoretical regime (alpha > 0.5); bound not applicable",
                config.alpha
            )),
            per_replicate: ledgers.iter().map(|l| (l.final_regret(), true)).collect(),
            violations: 0,
            allowed,
            pass: true,
        });
    }
    if diag.k() == 1 {
        return Ok(BoundAuditReport {
            bound: None,
            not_applicable: None,
            per_replicate: ledgers.iter().map(|l| (l.final_regret(), true)).collect(),
            violations: 0,
            allowed,
            pass: true,
        });
    }
    let delta_min = diag.delta_min.ok_or_else(|| {
        Error::UnsupportedEnvironment(
            "no distinguishable pair: the regret bound is undefined".into(),
        )
    })?;
    let bound = theorem_bound_with_c(
        config.alpha,
        config.batch_size,
        diag.k(),
        config.horizon,
        c_of_epsilon(config.alpha, diag.k(), config.epsilon)?,
        delta_min,
    )?;
    let per_replicate: Vec<(f64, bool)> = ledgers
        .iter()
        .map(|l| {
            let r = l.final_regret();
            (r, r < bound)
        })
        .collect();
    let violations = per_replicate.iter().filter(|&&(_, ok)| !ok).count();
    Ok(BoundAuditReport {
        bound: Some(bound),
        not_applicable: None,
        per_replicate,
        violations,
        allowed,
        pass: violations <= allowed,
    })
}
