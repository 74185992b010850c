use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::{AblationConfig, PPOConfig};
use super::update::{ppo_update, Adam, RolloutBuffer, UpdateStats};
use crate::env::{DockConfig, Observation, RewardBreakdown, VecEnv, OBS_DIM};
use crate::error::TrainError;
use crate::policy::{distribution, forward_batch, forward_split, sample_action, Architecture, InitConfig, PolicyParams};
use crate::seeding::{stream_rng, streams};

/// Completed episodes that feed the episodic statistics in the log.
pub const EPISODE_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLog {
    pub update: usize,
    pub env_steps: u64,
    /// Episodes that finished during this update's rollout.
    pub episodes_finished: usize,
    /// Undiscounted episode return over the last completed episodes; absent
    /// until the first episode finishes.
    pub episode_reward_mean: Option<f64>,
    pub episode_reward_min: Option<f64>,
    pub episode_reward_max: Option<f64>,
    pub stable_success_rate: Option<f64>,
    /// Per-step mean of each reward term over this rollout.
    pub term_means: RewardBreakdown,
    #[serde(flatten)]
    pub stats: UpdateStats,
}

/// Hooks for persisting progress while training runs.
pub trait TrainObserver {
    fn on_update(&mut self, _log: &UpdateLog) -> Result<(), TrainError> {
        Ok(())
    }

    /// `final_update` is true for the end-of-run checkpoint.
    fn on_checkpoint(&mut self, _update: usize, _params: &PolicyParams, _final_update: bool) -> Result<(), TrainError> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub params: PolicyParams,
    /// Task config with the ablation row applied.
    pub dock: DockConfig,
    pub ablation: AblationConfig,
    pub seed: u64,
    pub logs: Vec<UpdateLog>,
}

fn obs_matrix(obs: &[[f64; OBS_DIM]]) -> Array2<f64> {
    Array2::from_shape_fn((obs.len(), OBS_DIM), |(i, j)| obs[i][j])
}

#[derive(Default)]
struct TermAccumulator {
    sums: [f64; 9],
    n: usize,
}

impl TermAccumulator {
    fn add(&mut self, r: &RewardBreakdown) {
        for (s, v) in self.sums.iter_mut().zip(r.terms().into_iter().chain([r.total])) {
            *s += v;
        }
        self.n += 1;
    }

    fn mean(&self) -> RewardBreakdown {
        let k = self.n.max(1) as f64;
        let m = self.sums.map(|s| s / k);
        RewardBreakdown {
            r_pose: m[0],
            r_vel: m[1],
            r_boundary: m[2],
            r_prog: m[3],
            r_cuboid: m[4],
            r_drag: m[5],
            r_act: m[6],
            r_torque: m[7],
            total: m[8],
        }
    }
}

/// Collect → advantage → update loop. Fully determined by its arguments.
pub fn train(
    dock: &DockConfig,
    ppo: &PPOConfig,
    ablation: &AblationConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<TrainedRun, TrainError> {
    ppo.validate()
        .map_err(|(field, reason)| TrainError::InvalidConfig { field, reason })?;
    let dock = ablation.applied_to(dock);
    let env_err = |update| move |source| TrainError::Env { update, source };
    let mut envs = VecEnv::new(&dock, ppo.n_envs, seed, streams::TRAIN_ENVS)
        .map_err(env_err(0))?
        .with_parallel(ppo.parallel_envs);

    let mut params = PolicyParams::init(
        Architecture::new(ppo.hidden.clone()),
        &InitConfig {
            log_std: ppo.init_log_std,
            ..InitConfig::default()
        },
        &mut stream_rng(seed, streams::POLICY_INIT, 0),
    );
    let mut opt = Adam::new(params.data.len(), ppo.lr);
    let mut action_rng = stream_rng(seed, streams::ACTION_SAMPLING, 0);

    let mut obs: Vec<[f64; OBS_DIM]> = envs.reset_all().iter().map(Observation::to_array).collect();
    let critic_view = |noisy: &Observation, clean: &Observation| {
        if ppo.privileged_critic { clean.to_array() } else { noisy.to_array() }
    };
    let mut cobs: Vec<[f64; OBS_DIM]> = if ppo.privileged_critic {
        envs.clean_observations().iter().map(Observation::to_array).collect()
    } else {
        obs.clone()
    };
    let mut ep_return = vec![0.0; ppo.n_envs];
    let mut recent: VecDeque<(f64, bool)> = VecDeque::with_capacity(EPISODE_WINDOW);
    let mut logs = Vec::new();
    let mut env_steps = 0u64;
    let n_updates = ppo.n_updates();

    for update in 0..n_updates {
        let mut buf = RolloutBuffer::new(ppo.horizon, ppo.n_envs);
        let mut terms = TermAccumulator::default();
        let mut finished = 0;
        for t in 0..ppo.horizon {
            let x = obs_matrix(&obs);
            let cx = obs_matrix(&cobs);
            let cache = forward_split(&params, x.view(), cx.view())?;
            let mut actions = Vec::with_capacity(ppo.n_envs);
            for e in 0..ppo.n_envs {
                let dist = distribution(&params, cache.means().row(e));
                let (a, lp) = sample_action(&dist, &mut action_rng, false);
                let row = buf.row(t, e);
                buf.obs.row_mut(row).assign(&x.row(e));
                buf.critic_obs.row_mut(row).assign(&cx.row(e));
                buf.actions[row] = a;
                buf.log_probs[row] = lp;
                buf.values[row] = cache.values()[e];
                actions.push(a);
            }
            let steps = envs.step(&actions).map_err(env_err(update))?;
            env_steps += ppo.n_envs as u64;

            // Episodes end only by time limit: bootstrap from the final state.
            let finals: Vec<(usize, [f64; OBS_DIM])> = steps
                .iter()
                .enumerate()
                .filter_map(|(e, s)| Some((e, critic_view(s.final_obs.as_ref()?, s.final_clean_obs.as_ref()?))))
                .collect();
            let mut final_values = vec![0.0; ppo.n_envs];
            if !finals.is_empty() {
                let fx = obs_matrix(&finals.iter().map(|(_, o)| *o).collect::<Vec<_>>());
                let fc = forward_batch(&params, fx.view())?;
                for (k, (e, _)) in finals.iter().enumerate() {
                    final_values[*e] = fc.values()[k];
                }
            }

            for (e, s) in steps.iter().enumerate() {
                let row = buf.row(t, e);
                terms.add(&s.reward);
                ep_return[e] += s.reward.total;
                buf.rewards[row] = s.reward.total;
                buf.dones[row] = s.done;
                if s.done {
                    buf.rewards[row] += ppo.gamma * final_values[e];
                    if recent.len() == EPISODE_WINDOW {
                        recent.pop_front();
                    }
                    recent.push_back((ep_return[e], s.info.stable_success));
                    ep_return[e] = 0.0;
                    finished += 1;
                }
                obs[e] = s.obs.to_array();
                cobs[e] = critic_view(&s.obs, &s.clean_obs);
            }
        }
        let boot = forward_batch(&params, obs_matrix(&cobs).view())?;
        buf.bootstrap_values = boot.values().to_vec();

        let mut shuffle_rng = stream_rng(seed, streams::MINIBATCH_SHUFFLE, update as u64);
        let stats = ppo_update(&mut params, &mut opt, &buf, ppo, &mut shuffle_rng)?;

        let returns: Vec<f64> = recent.iter().map(|r| r.0).collect();
        let has = !returns.is_empty();
        let log = UpdateLog {
            update,
            env_steps,
            episodes_finished: finished,
            episode_reward_mean: has.then(|| returns.iter().sum::<f64>() / returns.len() as f64),
            episode_reward_min: has.then(|| returns.iter().copied().fold(f64::INFINITY, f64::min)),
            episode_reward_max: has.then(|| returns.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            stable_success_rate: has
                .then(|| recent.iter().filter(|r| r.1).count() as f64 / recent.len() as f64),
            term_means: terms.mean(),
            stats,
        };
        observer.on_update(&log)?;
        logs.push(log);

        let last = update + 1 == n_updates;
        if last || (update + 1) % ppo.checkpoint_every == 0 {
            observer.on_checkpoint(update + 1, &params, last)?;
        }
    }

    Ok(TrainedRun {
        params,
        dock,
        ablation: *ablation,
        seed,
        logs,
    })
}
