//! Deterministic batch evaluation and the docking metric suite.

use std::io::{BufRead, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{config_fingerprint, Checkpoint};
use crate::env::success::{update_success, SuccessTracker, SUCCESS_ORI_THRESHOLD_DEG, SUCCESS_POS_THRESHOLD};
use crate::env::{DockConfig, Observation, VecEnv, OBS_DIM};
use crate::error::EvalError;
use crate::policy::{distribution, forward_batch, sample_action, PolicyParams};
use crate::ppo::{AblationConfig, AblationId};
use crate::propulsion::{Command, N_PROPS};
use crate::seeding::streams;

/// Half-width of the window around the docking point used for orientation and
/// propeller usage.
pub const DOCKING_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub config: AblationId,
    pub episode: usize,
    pub seed: u64,
    pub fingerprint: String,
    /// Clean position error per step (m).
    pub pos_err: Vec<f64>,
    /// Clean orientation error per step (rad).
    pub ori_err: Vec<f64>,
    pub u: Vec<Command>,
    pub stable_success: bool,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.pos_err.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos_err.is_empty()
    }
}

/// Rolls out `tanh(mean)` actions for one full episode per environment.
pub fn evaluate_params(
    params: &PolicyParams,
    dock: &DockConfig,
    config: AblationId,
    n_envs: usize,
    seed: u64,
    parallel: bool,
) -> Result<Vec<EpisodeRecord>, EvalError> {
    let fingerprint = config_fingerprint(dock);
    let mut envs = VecEnv::new(dock, n_envs, seed, streams::EVAL_ENVS)?.with_parallel(parallel);
    let mut obs: Vec<[f64; OBS_DIM]> = envs.reset_all().iter().map(Observation::to_array).collect();
    let steps = dock.env.episode_length as usize;
    let mut records: Vec<EpisodeRecord> = (0..n_envs)
        .map(|episode| EpisodeRecord {
            config,
            episode,
            seed,
            fingerprint: fingerprint.clone(),
            pos_err: Vec::with_capacity(steps),
            ori_err: Vec::with_capacity(steps),
            u: Vec::with_capacity(steps),
            stable_success: false,
        })
        .collect();
    // Deterministic actions never touch the generator.
    let mut unused = rand::rngs::mock::StepRng::new(0, 0);
    for _ in 0..steps {
        let x = Array2::from_shape_fn((n_envs, OBS_DIM), |(i, j)| obs[i][j]);
        let cache = forward_batch(params, x.view())?;
        let actions: Vec<[f64; N_PROPS]> = (0..n_envs)
            .map(|e| sample_action(&distribution(params, cache.means().row(e)), &mut unused, true).0)
            .collect();
        for (e, s) in envs.step(&actions)?.into_iter().enumerate() {
            let r = &mut records[e];
            r.pos_err.push(s.info.pos_err);
            r.ori_err.push(s.info.ori_err);
            r.u.push(s.info.u);
            r.stable_success = s.info.stable_success;
            obs[e] = s.obs.to_array();
        }
    }
    Ok(records)
}

/// Evaluates a checkpoint under `dock` with `ablation` applied. The effective
/// config must be the one the checkpoint was trained under unless
/// `allow_mismatch` is set.
pub fn run_eval(
    checkpoint: &Checkpoint,
    dock: &DockConfig,
    ablation: &AblationConfig,
    n_envs: usize,
    seed: u64,
    allow_mismatch: bool,
) -> Result<Vec<EpisodeRecord>, EvalError> {
    let effective = ablation.applied_to(dock);
    let expected = config_fingerprint(&effective);
    if expected != checkpoint.env_fingerprint && !allow_mismatch {
        return Err(EvalError::FingerprintMismatch {
            expected,
            found: checkpoint.env_fingerprint.clone(),
        });
    }
    evaluate_params(&checkpoint.params, &effective, ablation.id, n_envs, seed, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DockingPoint {
    pub t: usize,
    pub pos_err: f64,
    /// Minimum over the window around `t` (rad).
    pub ori_err: f64,
}

fn window(t: usize, len: usize) -> std::ops::Range<usize> {
    t.saturating_sub(DOCKING_WINDOW)..(t + DOCKING_WINDOW + 1).min(len)
}

/// Closest approach within the second half of the episode (latest on ties).
pub fn docking_point(record: &EpisodeRecord) -> Option<DockingPoint> {
    let n = record.len();
    if n == 0 {
        return None;
    }
    let mut t = n / 2;
    for i in n / 2..n {
        if record.pos_err[i] <= record.pos_err[t] {
            t = i;
        }
    }
    let ori_err = record.ori_err[window(t, n)].iter().copied().fold(f64::INFINITY, f64::min);
    Some(DockingPoint {
        t,
        pos_err: record.pos_err[t],
        ori_err,
    })
}

/// Whether both errors stay under threshold for the dwell length at some point.
pub fn has_stable_dwell(record: &EpisodeRecord) -> bool {
    let mut tracker = SuccessTracker::default();
    record.pos_err.iter().zip(&record.ori_err).any(|(&p, &o)| {
        tracker = update_success(tracker, p, o);
        tracker.is_success()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub final_pos_err_m: f64,
    pub final_ori_err_deg: f64,
    pub pct_pos_below: f64,
    pub pct_ori_below: f64,
    pub pct_momentary: f64,
    pub pct_stable_success: f64,
    pub pct_time_pos_below: f64,
    pub pct_time_ori_below: f64,
    pub n_episodes: usize,
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "Config",
    "Final Pos Err (m)",
    "Final Ori Err (deg)",
    "% Pos < thresh",
    "% Ori < thresh",
    "% Momentary Achievement",
    "% Stable Docking Success",
    "% Time Pos < thresh",
    "% Time Ori < thresh",
];

impl MetricsSummary {
    pub fn columns(&self) -> [f64; 8] {
        [
            self.final_pos_err_m,
            self.final_ori_err_deg,
            self.pct_pos_below,
            self.pct_ori_below,
            self.pct_momentary,
            self.pct_stable_success,
            self.pct_time_pos_below,
            self.pct_time_ori_below,
        ]
    }
}

pub fn summarize(records: &[EpisodeRecord]) -> Option<MetricsSummary> {
    let pos_thr = SUCCESS_POS_THRESHOLD;
    let ori_thr = SUCCESS_ORI_THRESHOLD_DEG.to_radians();
    let mut acc = [0.0; 8];
    let mut n = 0usize;
    for r in records {
        let dp = docking_point(r)?;
        let pos_ok = dp.pos_err < pos_thr;
        let ori_ok = dp.ori_err < ori_thr;
        let len = r.len() as f64;
        let frac = |v: &[f64], thr: f64| v.iter().filter(|&&x| x < thr).count() as f64 / len;
        let row = [
            dp.pos_err,
            dp.ori_err.to_degrees(),
            pos_ok as u8 as f64,
            ori_ok as u8 as f64,
            (pos_ok && ori_ok) as u8 as f64,
            has_stable_dwell(r) as u8 as f64,
            frac(&r.pos_err, pos_thr),
            frac(&r.ori_err, ori_thr),
        ];
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let k = n as f64;
    Some(MetricsSummary {
        final_pos_err_m: acc[0] / k,
        final_ori_err_deg: acc[1] / k,
        pct_pos_below: 100.0 * acc[2] / k,
        pct_ori_below: 100.0 * acc[3] / k,
        pct_momentary: 100.0 * acc[4] / k,
        pct_stable_success: 100.0 * acc[5] / k,
        pct_time_pos_below: 100.0 * acc[6] / k,
        pct_time_ori_below: 100.0 * acc[7] / k,
        n_episodes: n,
    })
}

/// Mean `|u_i|` around each episode's docking point, averaged over episodes.
pub fn propeller_usage(records: &[EpisodeRecord]) -> Option<[f64; N_PROPS]> {
    let mut acc = [0.0; N_PROPS];
    for r in records {
        let dp = docking_point(r)?;
        let w = window(dp.t, r.len());
        let k = w.len() as f64;
        let mut sums = [0.0; N_PROPS];
        for u in &r.u[w] {
            for i in 0..N_PROPS {
                sums[i] += u[i].abs();
            }
        }
        for i in 0..N_PROPS {
            acc[i] += sums[i] / k;
        }
    }
    if records.is_empty() {
        return None;
    }
    Some(acc.map(|a| a / records.len() as f64))
}

/// Coefficient of variation (population std / mean) of a usage vector.
pub fn coefficient_of_variation(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

pub fn write_records<W: Write>(mut w: W, records: &[EpisodeRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<EpisodeRecord>, String> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    Ok(out)
}

pub fn summary_csv(rows: &[(String, MetricsSummary)]) -> String {
    let mut s = SUMMARY_HEADER.join(",");
    s.push('\n');
    for (name, m) in rows {
        s.push_str(name);
        for v in m.columns() {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}

pub fn usage_csv(rows: &[(String, [f64; N_PROPS])]) -> String {
    let mut s = String::from("Config");
    for i in 0..N_PROPS {
        s.push_str(&format!(",u{i}"));
    }
    s.push('\n');
    for (name, u) in rows {
        s.push_str(name);
        for v in u {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    s
}
