//! Actor-critic function approximator with hand-written reverse mode.
//!
//! All parameters live in one flat `Vec<f64>` described by a [`ParamLayout`];
//! gradients share the layout so the optimizer and the gradient clipper work
//! on plain slices. Weights are stored `[out, in]` row-major.

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::OBS_DIM;
use crate::error::PolicyError;
use crate::propulsion::N_PROPS;

pub const ACT_DIM: usize = N_PROPS;

/// Keeps `atanh` finite when an action sits on the boundary.
pub const ACTION_LIMIT: f64 = 1.0 - 1e-6;
/// Guards the `log(1 - a²)` change-of-variables term.
pub const SQUASH_EPS: f64 = 1e-6;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden: Vec<usize>,
}

impl Architecture {
    pub fn new(hidden: Vec<usize>) -> Self {
        Self {
            obs_dim: OBS_DIM,
            act_dim: ACT_DIM,
            hidden,
        }
    }

    fn net_dims(&self, out: usize) -> Vec<usize> {
        let mut dims = vec![self.obs_dim];
        dims.extend(&self.hidden);
        dims.push(out);
        dims
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    /// `[rows, cols]`; biases and `log_std` are `[1, n]`.
    pub shape: [usize; 2],
    pub offset: usize,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Net {
    Actor,
    Critic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub arch: Architecture,
    pub entries: Vec<ParamEntry>,
    actor: Vec<(usize, usize)>,
    critic: Vec<(usize, usize)>,
    log_std: usize,
    total: usize,
}

impl ParamLayout {
    pub fn new(arch: Architecture) -> Self {
        let mut entries = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: [usize; 2]| {
            entries.push(ParamEntry { name, shape, offset });
            offset += shape[0] * shape[1];
            entries.len() - 1
        };
        let mut nets = [Vec::new(), Vec::new()];
        for (slot, (prefix, out)) in [("actor", arch.act_dim), ("critic", 1)].into_iter().enumerate() {
            let dims = arch.net_dims(out);
            for (k, pair) in dims.windows(2).enumerate() {
                let w = push(format!("{prefix}.{k}.weight"), [pair[1], pair[0]]);
                let b = push(format!("{prefix}.{k}.bias"), [1, pair[1]]);
                nets[slot].push((w, b));
            }
        }
        let log_std = push("log_std".into(), [1, arch.act_dim]);
        let [actor, critic] = nets;
        Self {
            arch,
            entries,
            actor,
            critic,
            log_std,
            total: offset,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    fn layers(&self, net: Net) -> &[(usize, usize)] {
        match net {
            Net::Actor => &self.actor,
            Net::Critic => &self.critic,
        }
    }

    pub fn log_std_entry(&self) -> &ParamEntry {
        &self.entries[self.log_std]
    }

    /// Parameter ranges belonging to one network (weights and biases).
    pub fn net_ranges(&self, net: Net) -> Vec<std::ops::Range<usize>> {
        self.layers(net)
            .iter()
            .flat_map(|&(w, b)| [self.entries[w].range(), self.entries[b].range()])
            .collect()
    }
}

fn view2<'a>(data: &'a [f64], e: &ParamEntry) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((e.shape[0], e.shape[1]), &data[e.range()]).expect("layout shape")
}

fn view1<'a>(data: &'a [f64], e: &ParamEntry) -> ArrayView1<'a, f64> {
    ArrayView1::from(&data[e.range()])
}

fn view2_mut<'a>(data: &'a mut [f64], e: &ParamEntry) -> ArrayViewMut2<'a, f64> {
    ArrayViewMut2::from_shape((e.shape[0], e.shape[1]), &mut data[e.range()]).expect("layout shape")
}

fn view1_mut<'a>(data: &'a mut [f64], e: &ParamEntry) -> ArrayViewMut1<'a, f64> {
    ArrayViewMut1::from(&mut data[e.range()])
}

/// Actor and critic weights plus the state-independent action log-std.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub layout: ParamLayout,
    pub data: Vec<f64>,
}

/// Same layout as [`PolicyParams`].
pub type ParamGradients = PolicyParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub hidden_gain: f64,
    pub actor_out_gain: f64,
    pub critic_out_gain: f64,
    pub log_std: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            hidden_gain: std::f64::consts::SQRT_2,
            actor_out_gain: 0.01,
            critic_out_gain: 1.0,
            log_std: 0.5f64.ln(),
        }
    }
}

/// `rows × cols` matrix with orthonormal rows or columns, scaled by `gain`.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (tall_r, tall_c) = (rows.max(cols), rows.min(cols));
    let g = DMatrix::<f64>::from_fn(tall_r, tall_c, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    // Sign fix so the result is uniformly distributed.
    let r = qr.r();
    for j in 0..tall_c {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let m = if rows >= cols { q } else { q.transpose() };
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(gain * m[(i, j)]);
        }
    }
    out
}

impl PolicyParams {
    pub fn zeros(arch: Architecture) -> Self {
        let layout = ParamLayout::new(arch);
        let data = vec![0.0; layout.len()];
        Self { layout, data }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            layout: other.layout.clone(),
            data: vec![0.0; other.data.len()],
        }
    }

    pub fn init<R: Rng + ?Sized>(arch: Architecture, init: &InitConfig, rng: &mut R) -> Self {
        let mut p = Self::zeros(arch);
        for net in [Net::Actor, Net::Critic] {
            let layers = p.layout.layers(net).to_vec();
            let last = layers.len() - 1;
            for (k, (w, _)) in layers.into_iter().enumerate() {
                let gain = match (k == last, net) {
                    (false, _) => init.hidden_gain,
                    (true, Net::Actor) => init.actor_out_gain,
                    (true, Net::Critic) => init.critic_out_gain,
                };
                let e = p.layout.entries[w].clone();
                let vals = orthogonal(e.shape[0], e.shape[1], gain, rng);
                p.data[e.range()].copy_from_slice(&vals);
            }
        }
        let e = p.layout.log_std_entry().clone();
        p.data[e.range()].fill(init.log_std);
        p
    }

    pub fn arch(&self) -> &Architecture {
        &self.layout.arch
    }

    pub fn log_std(&self) -> ArrayView1<'_, f64> {
        view1(&self.data, self.layout.log_std_entry())
    }

    pub fn log_std_mut(&mut self) -> ArrayViewMut1<'_, f64> {
        let e = self.layout.log_std_entry().clone();
        view1_mut(&mut self.data, &e)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn tensor(&self, name: &str) -> Option<(&ParamEntry, &[f64])> {
        let e = self.layout.entries.iter().find(|e| e.name == name)?;
        Some((e, &self.data[e.range()]))
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let e = self.layout.entries.iter().find(|e| e.name == name)?.clone();
        Some(&mut self.data[e.range()])
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Diagonal Gaussian over pre-squash actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDistribution {
    pub mean: [f64; ACT_DIM],
    pub std: [f64; ACT_DIM],
}

impl ActionDistribution {
    pub fn log_std(&self) -> [f64; ACT_DIM] {
        self.std.map(f64::ln)
    }
}

/// Activations kept for the backward pass of one network.
#[derive(Debug, Clone)]
pub struct NetCache {
    /// `acts[0]` is the input; `acts[k + 1]` is the output of layer `k`.
    acts: Vec<Array2<f64>>,
}

impl NetCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("non-empty cache")
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub actor: NetCache,
    pub critic: NetCache,
}

impl ForwardCache {
    /// Pre-squash action means, `[batch, act_dim]`.
    pub fn means(&self) -> &Array2<f64> {
        self.actor.output()
    }

    /// Value estimates, `[batch]`.
    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.critic.output().column(0)
    }
}

fn net_forward(params: &PolicyParams, net: Net, x: ArrayView2<'_, f64>) -> NetCache {
    let layers = params.layout.layers(net);
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.to_owned());
    for (k, &(w, b)) in layers.iter().enumerate() {
        let w = view2(&params.data, &params.layout.entries[w]);
        let b = view1(&params.data, &params.layout.entries[b]);
        let mut z = acts[k].dot(&w.t());
        z += &b;
        if k + 1 < layers.len() {
            z.mapv_inplace(f64::tanh);
        }
        acts.push(z);
    }
    NetCache { acts }
}

/// Batched forward pass over `[batch, obs_dim]` observations.
pub fn forward_batch(params: &PolicyParams, obs: ArrayView2<'_, f64>) -> Result<ForwardCache, PolicyError> {
    forward_split(params, obs, obs)
}

/// Forward pass where the critic reads its own rows (e.g. noise-free ones).
pub fn forward_split(
    params: &PolicyParams,
    actor_obs: ArrayView2<'_, f64>,
    critic_obs: ArrayView2<'_, f64>,
) -> Result<ForwardCache, PolicyError> {
    for width in [actor_obs.ncols(), critic_obs.ncols()] {
        if width != params.arch().obs_dim {
            return Err(PolicyError::Shape(format!(
                "observation width {} != {}",
                width,
                params.arch().obs_dim
            )));
        }
    }
    if actor_obs.nrows() != critic_obs.nrows() {
        return Err(PolicyError::Shape("actor and critic batches differ in length".into()));
    }
    let cache = ForwardCache {
        actor: net_forward(params, Net::Actor, actor_obs),
        critic: net_forward(params, Net::Critic, critic_obs),
    };
    if cache.means().iter().chain(cache.values().iter()).any(|v| !v.is_finite()) {
        return Err(PolicyError::NonFiniteOutput);
    }
    Ok(cache)
}

pub fn distribution(params: &PolicyParams, mean: ArrayView1<'_, f64>) -> ActionDistribution {
    let log_std = params.log_std();
    ActionDistribution {
        mean: std::array::from_fn(|i| mean[i]),
        std: std::array::from_fn(|i| log_std[i].exp()),
    }
}

pub fn policy_forward(params: &PolicyParams, obs: &[f64; OBS_DIM]) -> Result<(ActionDistribution, f64), PolicyError> {
    let x = ArrayView2::from_shape((1, OBS_DIM), obs).expect("obs shape");
    let cache = forward_batch(params, x)?;
    let dist = distribution(params, cache.means().row(0));
    if dist.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(PolicyError::NonFiniteOutput);
    }
    Ok((dist, cache.values()[0]))
}

/// Squashed action's log-density and the base Gaussian's entropy.
pub fn log_prob_and_entropy(dist: &ActionDistribution, action: &[f64; ACT_DIM]) -> (f64, f64) {
    let mut lp = 0.0;
    let mut ent = 0.0;
    for i in 0..ACT_DIM {
        let a = action[i].clamp(-ACTION_LIMIT, ACTION_LIMIT);
        let raw = a.atanh();
        let log_std = dist.std[i].ln();
        let z = (raw - dist.mean[i]) / dist.std[i];
        lp += -0.5 * z * z - log_std - HALF_LOG_2PI - (1.0 - a * a + SQUASH_EPS).ln();
        ent += log_std + 0.5 + HALF_LOG_2PI;
    }
    (lp, ent)
}

/// Draws a squashed action; with `deterministic` returns `tanh(mean)` without
/// touching the generator.
pub fn sample_action<R: Rng + ?Sized>(
    dist: &ActionDistribution,
    rng: &mut R,
    deterministic: bool,
) -> ([f64; ACT_DIM], f64) {
    let action: [f64; ACT_DIM] = std::array::from_fn(|i| {
        let raw = if deterministic {
            dist.mean[i]
        } else {
            let n: f64 = rng.sample(StandardNormal);
            dist.mean[i] + dist.std[i] * n
        };
        raw.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT)
    });
    let (lp, _) = log_prob_and_entropy(dist, &action);
    (action, lp)
}

/// Per-sample derivatives of a scalar loss with respect to the policy outputs.
#[derive(Debug, Clone)]
pub struct OutputGrads {
    /// `[batch, act_dim]`, w.r.t. the pre-squash means.
    pub d_mean: Array2<f64>,
    /// `[batch]`, w.r.t. the value estimates.
    pub d_value: Array1<f64>,
    /// `[batch, act_dim]`, w.r.t. `log_std`.
    pub d_log_std: Array2<f64>,
}

impl OutputGrads {
    pub fn zeros(batch: usize, act_dim: usize) -> Self {
        Self {
            d_mean: Array2::zeros((batch, act_dim)),
            d_value: Array1::zeros(batch),
            d_log_std: Array2::zeros((batch, act_dim)),
        }
    }

    /// Adds `scale · ∂ log_prob / ∂(mean, log_std)` for sample `row`.
    pub fn add_log_prob(&mut self, row: usize, dist: &ActionDistribution, action: &[f64; ACT_DIM], scale: f64) {
        for i in 0..ACT_DIM {
            let raw = action[i].clamp(-ACTION_LIMIT, ACTION_LIMIT).atanh();
            let z = (raw - dist.mean[i]) / dist.std[i];
            self.d_mean[(row, i)] += scale * z / dist.std[i];
            self.d_log_std[(row, i)] += scale * (z * z - 1.0);
        }
    }

    /// Adds `scale · ∂ entropy / ∂ log_std` for sample `row`.
    pub fn add_entropy(&mut self, row: usize, scale: f64) {
        self.d_log_std.row_mut(row).mapv_inplace(|g| g + scale);
    }
}

fn net_backward(params: &PolicyParams, net: Net, cache: &NetCache, d_out: Array2<f64>, grads: &mut ParamGradients, scale: f64) {
    let layers = params.layout.layers(net);
    let mut dz = d_out;
    for k in (0..layers.len()).rev() {
        let (w, b) = layers[k];
        let input = &cache.acts[k];
        let we = &params.layout.entries[w];
        let be = &params.layout.entries[b];
        {
            let mut gw = view2_mut(&mut grads.data, we);
            gw.scaled_add(scale, &dz.t().dot(input));
        }
        {
            let mut gb = view1_mut(&mut grads.data, be);
            gb.scaled_add(scale, &dz.sum_axis(Axis(0)));
        }
        if k > 0 {
            let wv = view2(&params.data, we);
            let mut da = dz.dot(&wv);
            // Hidden activations are tanh outputs: d tanh = 1 - tanh².
            da.zip_mut_with(input, |g, &h| *g *= 1.0 - h * h);
            dz = da;
        }
    }
}

/// Reverse pass. Returns the batch-mean gradient of the per-sample losses whose
/// output derivatives are given in `upstream`.
pub fn policy_backward(params: &PolicyParams, cache: &ForwardCache, upstream: &OutputGrads) -> Result<ParamGradients, PolicyError> {
    let batch = cache.actor.acts[0].nrows();
    if upstream.d_mean.dim() != (batch, params.arch().act_dim)
        || upstream.d_value.len() != batch
        || upstream.d_log_std.dim() != (batch, params.arch().act_dim)
    {
        return Err(PolicyError::Shape("upstream gradient shape does not match batch".into()));
    }
    let mut grads = PolicyParams::zeros_like(params);
    if batch == 0 {
        return Ok(grads);
    }
    let scale = 1.0 / batch as f64;
    net_backward(params, Net::Actor, &cache.actor, upstream.d_mean.clone(), &mut grads, scale);
    let d_value = upstream.d_value.clone().insert_axis(Axis(1));
    net_backward(params, Net::Critic, &cache.critic, d_value, &mut grads, scale);
    let e = params.layout.log_std_entry().clone();
    let mut g = view1_mut(&mut grads.data, &e);
    g.scaled_add(scale, &upstream.d_log_std.sum_axis(Axis(0)));
    Ok(grads)
}

/// Rows `[start, end)` of a batch of observations.
pub fn batch_rows(obs: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), obs.ncols()));
    for (r, &i) in rows.iter().enumerate() {
        out.row_mut(r).assign(&obs.slice(s![i, ..]));
    }
    out
}
