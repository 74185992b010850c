use serde::{Deserialize, Serialize};

use dock_core::env::{DockConfig, EnvConfig, NoiseConfig, RewardConfig};
use dock_core::ppo::{AblationConfig, PPOConfig};
use dock_core::propulsion::PropulsionConfig;

use crate::CliError;

/// Everything needed to reproduce one training run. Sections left out of the
/// file take their defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub propulsion: PropulsionConfig,
    pub rewards: RewardConfig,
    pub noise: NoiseConfig,
    pub ppo: PPOConfig,
    pub ablation: AblationConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.dock().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.ppo.validate().map_err(|(f, m)| {
            CliError::Config(format!("invalid config field `ppo.{f}`: {m}"))
        })
    }

    pub fn dock(&self) -> DockConfig {
        DockConfig {
            env: self.env.clone(),
            propulsion: self.propulsion.clone(),
            rewards: self.rewards.clone(),
            noise: self.noise.clone(),
        }
    }

    /// Copy with the ablation row written into the propulsion and reward
    /// sections, so the snapshot shows exactly what was simulated.
    pub fn effective(&self) -> Self {
        let dock = self.ablation.applied_to(&self.dock());
        Self {
            env: dock.env,
            propulsion: dock.propulsion,
            rewards: dock.rewards,
            noise: dock.noise,
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dock_core::ppo::AblationId;
    use dock_core::propulsion::PolarityMode;

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = RunConfig {
            seed: 7,
            ..Default::default()
        };
        cfg.ablation = AblationConfig::from_id(AblationId::C);
        let eff = cfg.effective();
        assert_eq!(RunConfig::parse(&eff.to_toml()).unwrap(), eff);
    }

    #[test]
    fn overrides_are_visible() {
        let mut cfg = RunConfig::default();
        cfg.ablation = AblationConfig::from_id(AblationId::C);
        assert_eq!(cfg.effective().propulsion.polarity_mode, PolarityMode::SameSign);
        cfg.ablation = AblationConfig::from_id(AblationId::D);
        assert_eq!(cfg.effective().rewards.weights.drag, 0.0);
        cfg.ablation = AblationConfig::from_id(AblationId::A);
        assert!(!cfg.effective().propulsion.drag_dynamics_enabled);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::parse("[rewards]\nkapa_p = 0.5\n").is_err());
        let e = RunConfig::parse("[rewards]\nkappa_p = -1.0\n").unwrap_err().to_string();
        assert!(e.contains("rewards.kappa_p"), "{e}");
        let e = RunConfig::parse("[ppo]\ngamma = 2.0\n").unwrap_err().to_string();
        assert!(e.contains("ppo.gamma"), "{e}");
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = RunConfig::parse("seed = 4\n[ppo]\ntotal_steps = 4096\n[ablation]\nid = \"D\"\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.ppo.total_steps, 4096);
        assert_eq!(cfg.ppo.horizon, 128);
        assert_eq!(cfg.ablation.id, AblationId::D);
    }
}
