//! Train / eval / ablate / report pipeline behind the `dock` binary.

pub mod config;
pub mod rundir;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use dock_core::checkpoint::Checkpoint;
use dock_core::error::{CheckpointError, EnvError, EvalError, TrainError};
use dock_core::eval::{propeller_usage, run_eval, summarize, EpisodeRecord, MetricsSummary};
use dock_core::ppo::{train, AblationConfig, AblationId};
use dock_core::propulsion::N_PROPS;

pub use config::RunConfig;
pub use rundir::RunDir;

/// Directory under which runs land when `--out` is not given.
pub const OUT_ROOT_ENV: &str = "DOCK_OUT_ROOT";

pub fn out_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Fingerprint(String),
    #[error("{0}")]
    Empty(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// 0 ok, 1 other, 2 config, 3 numeric, 4 fingerprint, 5 nothing to report.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Fingerprint(_) => 4,
            CliError::Empty(_) => 5,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("io: {e}"))
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let msg = e.to_string();
        match e {
            _ if e.is_numeric() => CliError::Numeric(msg),
            TrainError::InvalidConfig { .. }
            | TrainError::Env {
                source: EnvError::InvalidConfig { .. },
                ..
            } => CliError::Config(msg),
            _ => CliError::Other(msg),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let msg = e.to_string();
        match e {
            EvalError::FingerprintMismatch { .. } => CliError::Fingerprint(msg),
            EvalError::Env(EnvError::NonFiniteState) | EvalError::Policy(_) => CliError::Numeric(msg),
            EvalError::Env(EnvError::InvalidConfig { .. }) => CliError::Config(msg),
            EvalError::Env(_) => CliError::Other(msg),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Other(e.to_string())
    }
}

/// Trains `cfg` into `out` and returns the path of the final checkpoint.
pub fn train_run(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let effective = cfg.effective();
    let mut dir = RunDir::create(out, &effective)?;
    let run = train(
        &effective.dock(),
        &effective.ppo,
        &effective.ablation,
        effective.seed,
        &mut dir,
    )?;
    dir.finish(&run)
}

pub fn cmd_train(config: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_root().join(format!("{}-s{}", cfg.ablation.id, cfg.seed)));
    train_run(&cfg, &out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub config: AblationId,
    pub fingerprint: String,
    pub seed: u64,
    pub n_envs: usize,
    pub summary: MetricsSummary,
    pub propeller_usage: [f64; N_PROPS],
}

/// Evaluates a checkpoint and writes records, summary and usage tables to `out`.
///
/// Without `config` the checkpoint's own task config is used; with it, the
/// config (after its ablation row) must fingerprint-match the checkpoint.
pub fn cmd_eval(
    checkpoint: &Path,
    n_envs: usize,
    seed: u64,
    out: Option<&Path>,
    allow_mismatch: bool,
    config: Option<&Path>,
) -> Result<EvalSummary, CliError> {
    if n_envs == 0 {
        return Err(CliError::Config("--n-envs must be >= 1".into()));
    }
    let ckpt = Checkpoint::load(checkpoint)
        .map_err(|e| CliError::Other(format!("{}: {e}", checkpoint.display())))?;
    let (dock, ablation) = match config {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            (cfg.dock(), cfg.ablation)
        }
        None => (ckpt.dock.clone(), ckpt.ablation),
    };
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_root().join(format!("eval-{}-s{seed}", ablation.id)));
    evaluate_into(&ckpt, &dock, &ablation, n_envs, seed, allow_mismatch, &out)
}

fn evaluate_into(
    ckpt: &Checkpoint,
    dock: &dock_core::env::DockConfig,
    ablation: &AblationConfig,
    n_envs: usize,
    seed: u64,
    allow_mismatch: bool,
    out: &Path,
) -> Result<EvalSummary, CliError> {
    let records = run_eval(ckpt, dock, ablation, n_envs, seed, allow_mismatch)?;
    let summary = summarize(&records).expect("at least one episode");
    let usage = propeller_usage(&records).expect("at least one episode");
    let result = EvalSummary {
        config: ablation.id,
        fingerprint: records[0].fingerprint.clone(),
        seed,
        n_envs,
        summary,
        propeller_usage: usage,
    };
    rundir::write_eval(out, &records, &result)?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub config: AblationId,
    pub seed: u64,
    pub ok: bool,
    pub exit_code: i32,
    pub error: Option<String>,
}

/// Trains and evaluates every (config, seed) pair, then writes the combined
/// tables. Failed runs are logged and skipped.
pub fn cmd_ablate(
    configs: &[AblationId],
    seeds: &[u64],
    out: &Path,
    base: Option<&Path>,
    n_envs: usize,
) -> Result<Report, CliError> {
    let base = match base {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(out)?;
    let mut statuses = Vec::new();
    for &id in configs {
        for &seed in seeds {
            let cfg = RunConfig {
                seed,
                ablation: AblationConfig::from_id(id),
                ..base.clone()
            };
            let dir = out.join(format!("{id}-s{seed}"));
            eprintln!("[ablate] config {id}, seed {seed} -> {}", dir.display());
            let result = train_run(&cfg, &dir).and_then(|final_ckpt| {
                let ckpt = Checkpoint::load(&final_ckpt)?;
                evaluate_into(&ckpt, &cfg.dock(), &cfg.ablation, n_envs, seed, false, &dir.join("eval"))
            });
            let status = match result {
                Ok(_) => RunStatus {
                    config: id,
                    seed,
                    ok: true,
                    exit_code: 0,
                    error: None,
                },
                Err(e) => {
                    eprintln!("[ablate] config {id}, seed {seed} failed: {e}");
                    RunStatus {
                        config: id,
                        seed,
                        ok: false,
                        exit_code: e.exit_code(),
                        error: Some(e.to_string()),
                    }
                }
            };
            statuses.push(status);
        }
    }
    let mut lines = String::new();
    for s in &statuses {
        lines.push_str(&serde_json::to_string(s).expect("status serializes"));
        lines.push('\n');
    }
    std::fs::write(out.join("ablate_status.jsonl"), lines)?;
    let report = cmd_report(out)?;
    if let Some(failed) = statuses.iter().find(|s| !s.ok) {
        let n = statuses.iter().filter(|s| !s.ok).count();
        let msg = format!("{n} of {} runs failed; first: {}", statuses.len(), failed.error.as_deref().unwrap_or(""));
        return Err(match failed.exit_code {
            2 => CliError::Config(msg),
            3 => CliError::Numeric(msg),
            4 => CliError::Fingerprint(msg),
            _ => CliError::Other(msg),
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<(String, MetricsSummary)>,
    pub usage: Vec<(String, [f64; N_PROPS])>,
    pub runs: Vec<PathBuf>,
    pub skipped: Vec<PathBuf>,
}

/// Rebuilds the combined tables from stored evaluation records.
pub fn cmd_report(runs: &Path) -> Result<Report, CliError> {
    let (complete, skipped) = rundir::scan(runs)?;
    for s in &skipped {
        eprintln!("warning: skipping incomplete run {}", s.display());
    }
    if complete.is_empty() {
        return Err(CliError::Empty(format!("no completed runs under {}", runs.display())));
    }
    let mut by_config: BTreeMap<AblationId, Vec<EpisodeRecord>> = BTreeMap::new();
    for run in &complete {
        for r in rundir::read_eval_records(run)? {
            by_config.entry(r.config).or_default().push(r);
        }
    }
    let mut rows = Vec::new();
    let mut usage = Vec::new();
    for (id, records) in &by_config {
        if let (Some(s), Some(u)) = (summarize(records), propeller_usage(records)) {
            rows.push((id.to_string(), s));
            usage.push((id.to_string(), u));
        }
    }
    if rows.is_empty() {
        return Err(CliError::Empty(format!("completed runs under {} hold no episodes", runs.display())));
    }
    let report = Report {
        rows,
        usage,
        runs: complete,
        skipped,
    };
    rundir::write_report(runs, &report)?;
    Ok(report)
}
