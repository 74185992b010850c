use serde::{Deserialize, Serialize};

use crate::env::DockConfig;
use crate::propulsion::PolarityMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PPOConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    /// Steps per environment between updates.
    pub horizon: usize,
    pub n_envs: usize,
    pub total_steps: u64,
    /// Applied separately to the actor (with `log_std`) and the critic.
    pub max_grad_norm: f64,
    pub hidden: Vec<usize>,
    /// Initial value of every action log-std entry.
    pub init_log_std: f64,
    /// Write a checkpoint every this many updates (and always at the end).
    pub checkpoint_every: usize,
    /// Step environments on the rayon pool; results are identical either way.
    pub parallel_envs: bool,
    /// Feed the critic the noise-free observation. The actor always sees the
    /// noisy one, and only the actor is needed at evaluation time.
    pub privileged_critic: bool,
}

impl Default for PPOConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip_eps: 0.2,
            lr: 3e-4,
            epochs: 5,
            minibatches: 4,
            entropy_coef: 0.005,
            value_coef: 0.5,
            horizon: 128,
            n_envs: 16,
            total_steps: 2_000_000,
            max_grad_norm: 0.5,
            hidden: vec![128, 128],
            init_log_std: 0.5f64.ln(),
            checkpoint_every: 100,
            parallel_envs: false,
            privileged_critic: true,
        }
    }
}

impl PPOConfig {
    pub fn batch_size(&self) -> usize {
        self.horizon * self.n_envs
    }

    pub fn n_updates(&self) -> usize {
        let b = self.batch_size() as u64;
        if b == 0 {
            0
        } else {
            self.total_steps.div_ceil(b) as usize
        }
    }

    pub fn validate(&self) -> Result<(), (String, String)> {
        let err = |f: &str, m: String| Err((f.to_string(), m));
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return err(name, format!("must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("clip_eps", self.clip_eps),
            ("lr", self.lr),
            ("max_grad_norm", self.max_grad_norm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return err(name, format!("must be > 0, got {v}"));
            }
        }
        for (name, v) in [("entropy_coef", self.entropy_coef), ("value_coef", self.value_coef)] {
            if !(v.is_finite() && v >= 0.0) {
                return err(name, format!("must be >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("minibatches", self.minibatches),
            ("horizon", self.horizon),
            ("n_envs", self.n_envs),
            ("checkpoint_every", self.checkpoint_every),
        ] {
            if v == 0 {
                return err(name, "must be >= 1".into());
            }
        }
        if !self.init_log_std.is_finite() {
            return err("init_log_std", "must be finite".into());
        }
        if self.total_steps == 0 {
            return err("total_steps", "must be >= 1".into());
        }
        if self.minibatches > self.batch_size() {
            return err("minibatches", format!("exceeds batch size {}", self.batch_size()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return err("hidden", "needs at least one non-empty hidden layer".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AblationId {
    A,
    B,
    C,
    D,
}

impl AblationId {
    pub const ALL: [AblationId; 4] = [AblationId::A, AblationId::B, AblationId::C, AblationId::D];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationId::A => "A",
            AblationId::B => "B",
            AblationId::C => "C",
            AblationId::D => "D",
        }
    }
}

impl std::str::FromStr for AblationId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(AblationId::A),
            "B" | "b" => Ok(AblationId::B),
            "C" | "c" => Ok(AblationId::C),
            "D" | "d" => Ok(AblationId::D),
            other => Err(format!("unknown ablation id `{other}` (expected A, B, C or D)")),
        }
    }
}

impl std::fmt::Display for AblationId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One row of the propulsion/penalty ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawAblation")]
pub struct AblationConfig {
    pub id: AblationId,
    pub drag_dynamics: bool,
    pub polarity_mode: PolarityMode,
    pub drag_penalty_enabled: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAblation {
    id: AblationId,
    drag_dynamics: Option<bool>,
    polarity_mode: Option<PolarityMode>,
    drag_penalty_enabled: Option<bool>,
}

impl TryFrom<RawAblation> for AblationConfig {
    type Error = String;

    fn try_from(raw: RawAblation) -> Result<Self, Self::Error> {
        let row = AblationConfig::from_id(raw.id);
        let check = |name: &str, given: Option<String>, expected: String| match given {
            Some(g) if g != expected => Err(format!(
                "ablation {}: {name} = {g} contradicts the row value {expected}",
                raw.id
            )),
            _ => Ok(()),
        };
        check("drag_dynamics", raw.drag_dynamics.map(|b| b.to_string()), row.drag_dynamics.to_string())?;
        check(
            "polarity_mode",
            raw.polarity_mode.map(|p| format!("{p:?}")),
            format!("{:?}", row.polarity_mode),
        )?;
        check(
            "drag_penalty_enabled",
            raw.drag_penalty_enabled.map(|b| b.to_string()),
            row.drag_penalty_enabled.to_string(),
        )?;
        Ok(row)
    }
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self::from_id(AblationId::B)
    }
}

impl AblationConfig {
    pub fn from_id(id: AblationId) -> Self {
        let (drag_dynamics, polarity_mode, drag_penalty_enabled) = match id {
            AblationId::A => (false, PolarityMode::Alternating, true),
            AblationId::B => (true, PolarityMode::Alternating, true),
            AblationId::C => (true, PolarityMode::SameSign, true),
            AblationId::D => (true, PolarityMode::Alternating, false),
        };
        Self {
            id,
            drag_dynamics,
            polarity_mode,
            drag_penalty_enabled,
        }
    }

    /// Writes the row's switches into a task config. Idempotent.
    pub fn apply(&self, dock: &mut DockConfig) {
        dock.propulsion.drag_dynamics_enabled = self.drag_dynamics;
        dock.propulsion.set_polarity_mode(self.polarity_mode);
        if !self.drag_penalty_enabled {
            dock.rewards.weights.drag = 0.0;
        }
    }

    pub fn applied_to(&self, dock: &DockConfig) -> DockConfig {
        let mut out = dock.clone();
        self.apply(&mut out);
        out
    }
}
