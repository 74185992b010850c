//! On-disk layout of a run:
//!
//! ```text
//! config.toml          effective config snapshot
//! fingerprint          SHA-256 of config.toml
//! train_log.jsonl      one record per update
//! checkpoints/         update_NNNNNN.json, final.json
//! eval/                records.jsonl, summary.csv, summary.json, usage.csv
//! COMPLETE             written once training has finished
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use dock_core::checkpoint::Checkpoint;
use dock_core::error::TrainError;
use dock_core::eval::{read_records, summary_csv, usage_csv, write_records, EpisodeRecord};
use dock_core::policy::PolicyParams;
use dock_core::ppo::{TrainObserver, TrainedRun, UpdateLog};

use crate::config::RunConfig;
use crate::{CliError, EvalSummary, Report};

pub const CONFIG_FILE: &str = "config.toml";
pub const COMPLETE_MARKER: &str = "COMPLETE";

pub fn fingerprint_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct LogLine<'a> {
    fingerprint: &'a str,
    #[serde(flatten)]
    log: &'a UpdateLog,
}

/// A run directory being written by the trainer.
pub struct RunDir {
    pub root: PathBuf,
    pub config: RunConfig,
    pub fingerprint: String,
    log: BufWriter<File>,
    final_checkpoint: Option<PathBuf>,
}

impl RunDir {
    /// Creates the directory and writes the config snapshot. Any stale
    /// completion marker from an earlier run is removed first.
    pub fn create(root: &Path, effective: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(root.join("checkpoints"))?;
        let _ = fs::remove_file(root.join(COMPLETE_MARKER));
        let text = effective.to_toml();
        let reparsed = RunConfig::parse(&text)?;
        if &reparsed != effective {
            return Err(CliError::Other("config snapshot does not round-trip".into()));
        }
        let fingerprint = fingerprint_bytes(text.as_bytes());
        fs::write(root.join(CONFIG_FILE), &text)?;
        fs::write(root.join("fingerprint"), format!("{fingerprint}\n"))?;
        let log = BufWriter::new(File::create(root.join("train_log.jsonl"))?);
        Ok(Self {
            root: root.to_path_buf(),
            config: effective.clone(),
            fingerprint,
            log,
            final_checkpoint: None,
        })
    }

    fn checkpoint(&self, params: &PolicyParams, update: usize) -> Checkpoint {
        Checkpoint::new(
            params.clone(),
            self.config.dock(),
            self.config.ablation,
            self.config.seed,
            update,
            Some(self.fingerprint.clone()),
        )
    }

    pub fn finish(mut self, run: &TrainedRun) -> Result<PathBuf, CliError> {
        self.log.flush()?;
        let path = match self.final_checkpoint.take() {
            Some(p) => p,
            None => {
                let p = self.root.join("checkpoints").join("final.json");
                self.checkpoint(&run.params, run.logs.len()).save(&p)?;
                p
            }
        };
        fs::write(self.root.join(COMPLETE_MARKER), format!("{}\n", self.fingerprint))?;
        Ok(path)
    }
}

impl TrainObserver for RunDir {
    fn on_update(&mut self, log: &UpdateLog) -> Result<(), TrainError> {
        let line = serde_json::to_string(&LogLine {
            fingerprint: &self.fingerprint,
            log,
        })
        .expect("log serializes");
        writeln!(self.log, "{line}")?;
        if log.update % 10 == 0 {
            eprintln!(
                "update {:>5}  steps {:>9}  return {:>9}  stable {:>5}",
                log.update,
                log.env_steps,
                log.episode_reward_mean.map_or("-".into(), |r| format!("{r:.2}")),
                log.stable_success_rate.map_or("-".into(), |r| format!("{r:.2}")),
            );
        }
        Ok(())
    }

    fn on_checkpoint(&mut self, update: usize, params: &PolicyParams, final_update: bool) -> Result<(), TrainError> {
        let dir = self.root.join("checkpoints");
        let ckpt = self.checkpoint(params, update);
        let io = |e: dock_core::error::CheckpointError| match e {
            dock_core::error::CheckpointError::Io(e) => TrainError::Io(e),
            other => TrainError::Io(std::io::Error::other(other.to_string())),
        };
        ckpt.save(&dir.join(format!("update_{update:06}.json"))).map_err(io)?;
        if final_update {
            let p = dir.join("final.json");
            ckpt.save(&p).map_err(io)?;
            self.final_checkpoint = Some(p);
        }
        Ok(())
    }
}

pub fn write_eval(out: &Path, records: &[EpisodeRecord], result: &EvalSummary) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    write_records(BufWriter::new(File::create(out.join("records.jsonl"))?), records)?;
    let name = result.config.to_string();
    fs::write(out.join("summary.csv"), summary_csv(&[(name.clone(), result.summary)]))?;
    fs::write(out.join("usage.csv"), usage_csv(&[(name, result.propeller_usage)]))?;
    let json = serde_json::to_string_pretty(result).expect("summary serializes");
    fs::write(out.join("summary.json"), json + "\n")?;
    Ok(())
}

pub fn read_eval_records(run: &Path) -> Result<Vec<EpisodeRecord>, CliError> {
    let path = run.join("eval").join("records.jsonl");
    read_records(BufReader::new(File::open(&path)?))
        .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn is_complete(run: &Path) -> bool {
    run.join(COMPLETE_MARKER).is_file() && run.join("eval").join("records.jsonl").is_file()
}

/// Runs found at `root` itself or one level below it, split into complete
/// and incomplete, each sorted by path.
pub fn scan(root: &Path) -> Result<(Vec<PathBuf>, Vec<PathBuf>), CliError> {
    if !root.is_dir() {
        return Err(CliError::Empty(format!("{} is not a directory", root.display())));
    }
    let mut candidates = vec![root.to_path_buf()];
    let mut children: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    candidates.extend(children);
    let (mut complete, mut skipped) = (Vec::new(), Vec::new());
    for c in candidates {
        if !c.join(CONFIG_FILE).is_file() {
            continue;
        }
        if is_complete(&c) {
            complete.push(c);
        } else {
            skipped.push(c);
        }
    }
    Ok((complete, skipped))
}

pub fn write_report(root: &Path, report: &Report) -> Result<(), CliError> {
    fs::write(root.join("summary.csv"), summary_csv(&report.rows))?;
    fs::write(root.join("usage.csv"), usage_csv(&report.usage))?;
    Ok(())
}
