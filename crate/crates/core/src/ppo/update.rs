use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::PPOConfig;
use super::gae::compute_gae;
use crate::env::OBS_DIM;
use crate::error::TrainError;
use crate::policy::{
    batch_rows, distribution, forward_split, log_prob_and_entropy, policy_backward, Net, OutputGrads, PolicyParams,
    ACT_DIM,
};

/// One update's worth of transitions, stored time-major: row `t * n_envs + e`.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub horizon: usize,
    pub n_envs: usize,
    pub obs: Array2<f64>,
    /// What the critic saw for each row; equal to `obs` unless the critic is privileged.
    pub critic_obs: Array2<f64>,
    pub actions: Vec<[f64; ACT_DIM]>,
    pub log_probs: Vec<f64>,
    /// Weighted total reward, including any time-limit bootstrap.
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    /// Critic value of the observation following the last step, per env.
    pub bootstrap_values: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(horizon: usize, n_envs: usize) -> Self {
        let n = horizon * n_envs;
        Self {
            horizon,
            n_envs,
            obs: Array2::zeros((n, OBS_DIM)),
            critic_obs: Array2::zeros((n, OBS_DIM)),
            actions: vec![[0.0; ACT_DIM]; n],
            log_probs: vec![0.0; n],
            rewards: vec![0.0; n],
            values: vec![0.0; n],
            dones: vec![false; n],
            bootstrap_values: vec![0.0; n_envs],
        }
    }

    pub fn len(&self) -> usize {
        self.horizon * self.n_envs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, t: usize, env: usize) -> usize {
        t * self.n_envs + env
    }

    /// Advantages and value targets in buffer row order.
    pub fn advantages(&self, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let mut adv = vec![0.0; self.len()];
        let mut ret = vec![0.0; self.len()];
        for e in 0..self.n_envs {
            let rows: Vec<usize> = (0..self.horizon).map(|t| self.row(t, e)).collect();
            let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
            let dones: Vec<bool> = rows.iter().map(|&i| self.dones[i]).collect();
            let (a, r) = compute_gae(
                &pick(&self.rewards),
                &pick(&self.values),
                &dones,
                self.bootstrap_values[e],
                gamma,
                lambda,
            );
            for (k, &i) in rows.iter().enumerate() {
                adv[i] = a[k];
                ret[i] = r[k];
            }
        }
        (adv, ret)
    }
}

/// Shifts to zero mean and scales to unit (population) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len();
    if n == 0 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    adv.iter_mut().for_each(|a| *a -= mean);
    if n > 1 {
        let std = (adv.iter().map(|a| a * a).sum::<f64>() / n as f64).sqrt();
        if std > 1e-12 {
            adv.iter_mut().for_each(|a| *a /= std);
        }
    }
}

/// Clipped-surrogate loss for one sample and its derivative w.r.t. the new
/// log-probability.
pub fn clipped_surrogate(ratio: f64, adv: f64, clip_eps: f64) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv;
    if unclipped <= clipped {
        (-unclipped, -unclipped)
    } else {
        (-clipped, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Rescales the gradient entries in `ranges` so their joint norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], ranges: &[std::ops::Range<usize>], max_norm: f64) -> f64 {
    let norm = ranges
        .iter()
        .flat_map(|r| grads[r.clone()].iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / (norm + 1e-12);
        for r in ranges {
            grads[r.clone()].iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    /// Mean squared value error (before the coefficient).
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub actor_grad_norm: f64,
    pub critic_grad_norm: f64,
}

/// Several epochs of clipped-surrogate optimization over `buffer`.
///
/// Works on copies so a non-finite loss leaves `params` and `opt` untouched.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    opt: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PPOConfig,
    rng: &mut R,
) -> Result<UpdateStats, TrainError> {
    let (mut adv, returns) = buffer.advantages(cfg.gamma, cfg.lambda);
    normalize_advantages(&mut adv);

    let mut p = params.clone();
    let mut o = opt.clone();
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let actor_ranges = {
        let mut r = p.layout.net_ranges(Net::Actor);
        r.push(p.layout.log_std_entry().range());
        r
    };
    let critic_ranges = p.layout.net_ranges(Net::Critic);

    let mut stats = UpdateStats::default();
    let mut n_mb = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for (mb, idx) in minibatch_chunks(&order, cfg.minibatches).enumerate() {
            let obs = batch_rows(&buffer.obs, idx);
            let critic_obs = batch_rows(&buffer.critic_obs, idx);
            let cache = forward_split(&p, obs.view(), critic_obs.view())?;
            let mut up = OutputGrads::zeros(idx.len(), ACT_DIM);
            let (mut pl, mut vl, mut ent, mut clipped, mut kl) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (row, &i) in idx.iter().enumerate() {
                let dist = distribution(&p, cache.means().row(row));
                let (lp, h) = log_prob_and_entropy(&dist, &buffer.actions[i]);
                let log_ratio = lp - buffer.log_probs[i];
                let ratio = log_ratio.exp();
                let (l, dl_dlp) = clipped_surrogate(ratio, adv[i], cfg.clip_eps);
                up.add_log_prob(row, &dist, &buffer.actions[i], dl_dlp);
                up.add_entropy(row, -cfg.entropy_coef);
                let err = cache.values()[row] - returns[i];
                up.d_value[row] = 2.0 * cfg.value_coef * err;
                pl += l;
                vl += err * err;
                ent += h;
                kl += (ratio - 1.0) - log_ratio;
                if (ratio - 1.0).abs() > cfg.clip_eps {
                    clipped += 1.0;
                }
            }
            let n = idx.len() as f64;
            let loss = (pl + cfg.value_coef * vl - cfg.entropy_coef * ent) / n;
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, minibatch: mb });
            }
            let mut g = policy_backward(&p, &cache, &up)?;
            let an = clip_grad_norm(&mut g.data, &actor_ranges, cfg.max_grad_norm);
            let cn = clip_grad_norm(&mut g.data, &critic_ranges, cfg.max_grad_norm);
            o.apply(&mut p.data, &g.data);
            if !p.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, minibatch: mb });
            }
            stats.policy_loss += pl / n;
            stats.value_loss += vl / n;
            stats.entropy += ent / n;
            stats.clip_fraction += clipped / n;
            stats.approx_kl += kl / n;
            stats.actor_grad_norm += an;
            stats.critic_grad_norm += cn;
            n_mb += 1;
        }
    }
    let k = n_mb.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
    stats.approx_kl /= k;
    stats.actor_grad_norm /= k;
    stats.critic_grad_norm /= k;
    *params = p;
    *opt = o;
    Ok(stats)
}

/// Splits `order` into `count` contiguous chunks whose sizes differ by at most one.
fn minibatch_chunks(order: &[usize], count: usize) -> impl Iterator<Item = &[usize]> {
    let n = order.len();
    (0..count).map(move |k| &order[k * n / count..(k + 1) * n / count])
}
