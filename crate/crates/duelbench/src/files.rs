//! On-disk formats: preference-matrix files, results/aggregate CSVs and the
//! flat `key = value` run-config format.
//!
//! All writers go through a temp-file-plus-rename so interrupted runs never
//! leave truncated files behind. Numbers are serialized in locale-independent
//! decimal notation with a `.` separator.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::env::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::harness::AggregateSeries;
use crate::types::{Algorithm, PreferenceMatrix, RegretKind, RegretLedger, RunConfig};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Writes `content` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| io_err(path, e))?;
    tmp.write_all(content.as_bytes()).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Formats `x` with 12 significant decimal digits, plain notation.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0.000000000000".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    let decimals = (11 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

// --- preference-matrix files -------------------------------------------------
//
// Line 1 is `# k=<int>`; then k rows of k comma-separated decimals with 12
// significant digits. Other `#`-prefixed lines are comments.

pub fn write_matrix_file(path: &Path, m: &PreferenceMatrix) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# k={}\n", m.k()));
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_sig12(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Reads the raw `(k, entries)` payload of a matrix file. Validation against
/// the probability invariants happens in [`crate::env::load_matrix`].
pub fn read_matrix_file(path: &Path) -> Result<(usize, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    let (first_no, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let header = first.trim();
    let k: usize = header
        .strip_prefix("# k=")
        .or_else(|| header.strip_prefix("#k="))
        .ok_or_else(|| parse_err(path, first_no + 1, "expected `# k=<int>` header"))?
        .trim()
        .parse()
        .map_err(|_| parse_err(path, first_no + 1, "invalid k in header"))?;
    if k == 0 {
        return Err(parse_err(path, first_no + 1, "k must be >= 1"));
    }

    let mut entries = Vec::with_capacity(k * k);
    let mut rows = 0usize;
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = 0usize;
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| {
                parse_err(path, no + 1, format!("invalid number {:?}", cell.trim()))
            })?;
            entries.push(v);
            cols += 1;
        }
        if cols != k {
            return Err(parse_err(
                path,
                no + 1,
                format!("expected {k} columns, got {cols}"),
            ));
        }
        rows += 1;
    }
    if rows != k {
        return Err(parse_err(
            path,
            text.lines().count(),
            format!("expected {k} rows, got {rows} (non-square payload)"),
        ));
    }
    Ok((k, entries))
}

// --- results CSV -------------------------------------------------------------
//
// Header `replicate,step,cum_regret`; one row per (replicate, checkpoint),
// ordered by replicate then step. The shortest round-trip float notation keeps
// the file byte-stable for identical runs and lossless for readers.

pub fn results_csv(ledgers: &[RegretLedger]) -> String {
    let mut out = String::from("replicate,step,cum_regret\n");
    for (r, ledger) in ledgers.iter().enumerate() {
        for &(step, cum) in &ledger.checkpoints {
            out.push_str(&format!("{r},{step},{cum}\n"));
        }
    }
    out
}

pub fn write_results_csv(path: &Path, ledgers: &[RegretLedger]) -> Result<()> {
    write_atomic(path, &results_csv(ledgers))
}

/// Reads a results CSV back into ledgers. Winners are not serialized, so
/// `final_winner` is `None` for loaded ledgers.
pub fn read_results_csv(path: &Path) -> Result<Vec<RegretLedger>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "replicate,step,cum_regret" => {}
        Some((no, h)) => {
            return Err(parse_err(path, no + 1, format!("unexpected header {h:?}")));
        }
        None => return Err(parse_err(path, 1, "empty file")),
    }
    let mut per_replicate: Vec<Vec<(u64, f64)>> = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let mut next = |name: &str| {
            cells
                .next()
                .ok_or_else(|| parse_err(path, no + 1, format!("missing {name} column")))
        };
        let replicate: usize = next("replicate")?
            .trim()
            .parse()
            .map_err(|_| parse_err(path, no + 1, "invalid replicate"))?;
        let step: u64 = next("step")?
            .trim()
            .parse()
            .map_err(|_| parse_err(path, no + 1, "invalid step"))?;
        let cum: f64 = next("cum_regret")?
            .trim()
            .parse()
            .map_err(|_| parse_err(path, no + 1, "invalid cum_regret"))?;
        if replicate >= per_replicate.len() {
            per_replicate.resize(replicate + 1, Vec::new());
        }
        per_replicate[replicate].push((step, cum));
    }
    per_replicate
        .into_iter()
        .enumerate()
        .map(|(r, checkpoints)| {
            let total_steps = checkpoints
                .last()
                .map(|&(s, _)| s)
                .ok_or_else(|| parse_err(path, 1, format!("replicate {r} has no rows")))?;
            Ok(RegretLedger {
                checkpoints,
                final_winner: None,
                total_steps,
            })
        })
        .collect()
}

// --- aggregate CSV -----------------------------------------------------------

pub fn aggregate_csv(series: &AggregateSeries) -> String {
    let mut out = String::from("step,mean,stderr,n\n");
    for i in 0..series.checkpoints.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            series.checkpoints[i], series.mean[i], series.stderr[i], series.n
        ));
    }
    out
}

pub fn write_aggregate_csv(path: &Path, series: &AggregateSeries) -> Result<()> {
    write_atomic(path, &aggregate_csv(series))
}

// --- run-config files --------------------------------------------------------
//
// Flat `key = value` lines; `#` starts a comment. Keys mirror the RunConfig
// fields plus the `env.*` group. Command-line flags override file keys.

/// Raw key/value view of a config file plus any command-line overrides, before
/// resolution into a [`RunConfig`].
#[derive(Debug, Clone, Default)]
pub struct ConfigDraft {
    pub algorithm: Option<String>,
    pub alpha: Option<f64>,
    pub batch_size: Option<usize>,
    pub horizon: Option<u64>,
    pub epsilon: Option<f64>,
    pub c_override: Option<f64>,
    pub base_seed: Option<u64>,
    pub replicates: Option<usize>,
    pub checkpoint_count: Option<usize>,
    pub regret: Option<String>,
    pub env_kind: Option<String>,
    pub env_path: Option<PathBuf>,
    pub env_suboptimal: Option<usize>,
    pub env_p_condorcet: Option<f64>,
    pub env_p_cycle: Option<f64>,
    pub env_utilities: Option<Vec<f64>>,
}

pub fn parse_utilities(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("invalid utility {:?}", c.trim())))
        })
        .collect()
}

pub fn read_config_file(path: &Path) -> Result<ConfigDraft> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut draft = ConfigDraft::default();
    for (no, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, no + 1, "expected `key = value`"))?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| parse_err(path, no + 1, format!("invalid {what} value {value:?}"));
        match key {
            "algorithm" => draft.algorithm = Some(value.to_string()),
            "alpha" => draft.alpha = Some(value.parse().map_err(|_| bad("alpha"))?),
            "batch_size" => draft.batch_size = Some(value.parse().map_err(|_| bad("batch_size"))?),
            "horizon" => draft.horizon = Some(value.parse().map_err(|_| bad("horizon"))?),
            "epsilon" => draft.epsilon = Some(value.parse().map_err(|_| bad("epsilon"))?),
            "c_override" => draft.c_override = Some(value.parse().map_err(|_| bad("c_override"))?),
            "base_seed" => draft.base_seed = Some(value.parse().map_err(|_| bad("base_seed"))?),
            "replicates" => draft.replicates = Some(value.parse().map_err(|_| bad("replicates"))?),
            "checkpoint_count" => {
                draft.checkpoint_count = Some(value.parse().map_err(|_| bad("checkpoint_count"))?)
            }
            "regret" => draft.regret = Some(value.to_string()),
            "env.kind" => draft.env_kind = Some(value.to_string()),
            "env.path" => draft.env_path = Some(PathBuf::from(value)),
            "env.suboptimal" => {
                draft.env_suboptimal = Some(value.parse().map_err(|_| bad("env.suboptimal"))?)
            }
            "env.p_condorcet" => {
                draft.env_p_condorcet = Some(value.parse().map_err(|_| bad("env.p_condorcet"))?)
            }
            "env.p_cycle" => {
                draft.env_p_cycle = Some(value.parse().map_err(|_| bad("env.p_cycle"))?)
            }
            "env.utilities" => draft.env_utilities = Some(parse_utilities(value)?),
            other => {
                return Err(parse_err(path, no + 1, format!("unknown key {other:?}")));
            }
        }
    }
    Ok(draft)
}

impl ConfigDraft {
    /// Overlays `other` (typically command-line flags) on top of `self`;
    /// values present in `other` win.
    pub fn overlay(mut self, other: ConfigDraft) -> ConfigDraft {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            algorithm,
            alpha,
            batch_size,
            horizon,
            epsilon,
            c_override,
            base_seed,
            replicates,
            checkpoint_count,
            regret,
            env_kind,
            env_path,
            env_suboptimal,
            env_p_condorcet,
            env_p_cycle,
            env_utilities
        );
        self
    }

    fn resolve_env(&self) -> Result<EnvironmentSpec> {
        let kind = self
            .env_kind
            .clone()
            .or_else(|| self.env_path.is_some().then(|| "file".to_string()))
            .ok_or_else(|| Error::InvalidParameter("missing env.kind".into()))?;
        match kind.as_str() {
            "file" => Ok(EnvironmentSpec::File {
                path: self
                    .env_path
                    .clone()
                    .ok_or_else(|| Error::InvalidParameter("env.kind=file needs env.path".into()))?,
            }),
            "cycle" => Ok(EnvironmentSpec::Cycle {
                n_suboptimal: self.env_suboptimal.ok_or_else(|| {
                    Error::InvalidParameter("env.kind=cycle needs env.suboptimal".into())
                })?,
                p_condorcet: self.env_p_condorcet.ok_or_else(|| {
                    Error::InvalidParameter("env.kind=cycle needs env.p_condorcet".into())
                })?,
                p_cycle: self.env_p_cycle.ok_or_else(|| {
                    Error::InvalidParameter("env.kind=cycle needs env.p_cycle".into())
                })?,
            }),
            "utility" => Ok(EnvironmentSpec::Utility {
                utilities: self.env_utilities.clone().ok_or_else(|| {
                    Error::InvalidParameter("env.kind=utility needs env.utilities".into())
                })?,
            }),
            other => Err(Error::InvalidParameter(format!(
                "unknown env.kind {other:?} (expected file, cycle or utility)"
            ))),
        }
    }

    /// Resolves the draft into a validated [`RunConfig`], applying defaults:
    /// epsilon = 1/horizon, base_seed = 0, replicates = 50, checkpoint_count
    /// = 100, regret = auto.
    pub fn resolve(&self) -> Result<RunConfig> {
        let algorithm = Algorithm::parse(
            self.algorithm
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter("missing algorithm".into()))?,
        )?;
        let horizon = self
            .horizon
            .ok_or_else(|| Error::InvalidParameter("missing horizon".into()))?;
        let alpha = self
            .alpha
            .ok_or_else(|| Error::InvalidParameter("missing alpha".into()))?;
        let batch_size = self
            .batch_size
            .ok_or_else(|| Error::InvalidParameter("missing batch_size".into()))?;
        let regret = match self.regret.as_deref() {
            None | Some("auto") => RegretKind::Auto,
            Some("condorcet") => RegretKind::Condorcet,
            Some("copeland") => RegretKind::Copeland,
            Some(other) => {
                return Err(Error::InvalidParameter(format!(
                    "unknown regret kind {other:?} (expected auto, condorcet or copeland)"
                )))
            }
        };
        let config = RunConfig {
            algorithm,
            alpha,
            batch_size,
            horizon,
            epsilon: self.epsilon.unwrap_or(1.0 / horizon.max(2) as f64),
            c_override: self.c_override,
            env: self.resolve_env()?,
            base_seed: self.base_seed.unwrap_or(0),
            replicates: self.replicates.unwrap_or(50),
            checkpoint_count: self.checkpoint_count.unwrap_or(100),
            regret,
        };
        config.validate()?;
        Ok(config)
    }
}
