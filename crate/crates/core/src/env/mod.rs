//! The docking task: a single environment plus a batch wrapper that steps many
//! of them in lock-step.

pub mod dynamics;
pub mod observation;
pub mod reward;
pub mod success;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::math::{orientation_error_angle, quat_mul, relative_rotation, UnitQuat, Vec3};
use crate::propulsion::{map_action_to_command, propeller_wrench, Command, PropulsionConfig, N_PROPS};
use crate::seeding::stream_rng;

pub use dynamics::{step_dynamics, InertialParams, MassProps, RigidBodyState};
pub use observation::{apply_observation_noise, build_observation, GoalPose, NoiseConfig, Observation, OBS_DIM};
pub use reward::{compute_reward, Cuboid, RewardBreakdown, RewardConfig, RewardWeights, Transition};
pub use success::{update_success, SuccessTracker};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpawnConfig {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    /// Largest initial attitude offset from the goal attitude (degrees).
    pub max_angle_deg: f64,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            center: [1.2, 0.0, 0.0],
            half_extents: [1.0, 1.0, 1.0],
            max_angle_deg: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    /// Control and physics step (s).
    pub dt: f64,
    pub episode_length: u32,
    pub inertial: InertialParams,
    pub goal: GoalPose,
    pub spawn: SpawnConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            episode_length: 400,
            inertial: InertialParams::default(),
            goal: GoalPose::default(),
            spawn: SpawnConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), (String, String)> {
        let err = |f: &str, m: String| Err((f.to_string(), m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return err("dt", format!("must be > 0, got {}", self.dt));
        }
        if self.episode_length == 0 {
            return err("episode_length", "must be >= 1".into());
        }
        if let Err(m) = self.inertial.validate() {
            return err("inertial", m);
        }
        if self.spawn.half_extents.iter().any(|&h| !(h >= 0.0)) {
            return err("spawn.half_extents", "must be >= 0".into());
        }
        if !(0.0..=180.0).contains(&self.spawn.max_angle_deg) {
            return err("spawn.max_angle_deg", "must lie in [0, 180]".into());
        }
        Ok(())
    }
}

/// Everything that defines one docking task instance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DockConfig {
    pub env: EnvConfig,
    pub propulsion: PropulsionConfig,
    pub rewards: RewardConfig,
    pub noise: NoiseConfig,
}

impl DockConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let wrap = |section: &str, (f, m): (String, String)| EnvError::InvalidConfig {
            field: format!("{section}.{f}"),
            reason: m,
        };
        self.env.validate().map_err(|e| wrap("env", e))?;
        self.rewards.validate().map_err(|e| wrap("rewards", e))?;
        self.noise
            .validate()
            .map_err(|(f, m)| wrap("noise", (f.to_string(), m)))?;
        self.propulsion.validate().map_err(|e| EnvError::InvalidConfig {
            field: "propulsion".into(),
            reason: e.to_string(),
        })?;
        Ok(())
    }
}

/// Samples an initial state: position uniform in the spawn box, attitude a
/// uniform-random axis with angle uniform in `[0, max_angle]` applied to the
/// goal attitude, zero twist.
pub fn env_reset<R: Rng + ?Sized>(cfg: &EnvConfig, rng: &mut R) -> RigidBodyState {
    let s = &cfg.spawn;
    let p = Vec3::from_fn(|i, _| {
        let h = s.half_extents[i];
        if h > 0.0 {
            s.center[i] + rng.gen_range(-h..=h)
        } else {
            s.center[i]
        }
    });
    let axis = loop {
        let a = Vec3::from_fn(|_, _| StandardNormal.sample(rng));
        if a.norm() > 1e-9 {
            break a;
        }
    };
    let angle = rng.gen_range(0.0..=s.max_angle_deg.to_radians());
    let dq = UnitQuat::from_axis_angle(&axis, angle).unwrap_or_default();
    RigidBodyState::at_rest(p, quat_mul(&cfg.goal.q_goal, &dq))
}

/// Clean (noise-free) goal errors of a state.
pub fn pose_errors(state: &RigidBodyState, goal: &GoalPose) -> (f64, f64) {
    (
        (state.p - goal.p_goal).norm(),
        orientation_error_angle(&relative_rotation(&state.q, &goal.q_goal)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Steps taken in the episode, including this one.
    pub t: u32,
    pub pos_err: f64,
    /// Radians.
    pub ori_err: f64,
    pub u: Command,
    /// Both thresholds met at this step.
    pub momentary: bool,
    /// Dwell requirement met at some point in the episode so far.
    pub stable_success: bool,
    pub reward: RewardBreakdown,
}

pub struct StepOutput {
    pub obs: Observation,
    pub clean_obs: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub info: StepInfo,
}

/// One docking episode at a time, owning its own random stream.
pub struct DockEnv {
    cfg: DockConfig,
    mass: MassProps,
    rng: ChaCha8Rng,
    state: RigidBodyState,
    u_prev: Command,
    t: u32,
    tracker: SuccessTracker,
    stable_latched: bool,
    done: bool,
}

impl DockEnv {
    pub fn new(cfg: DockConfig, rng: ChaCha8Rng) -> Result<Self, EnvError> {
        cfg.validate()?;
        let mass = MassProps::new(&cfg.env.inertial);
        Ok(Self {
            cfg,
            mass,
            rng,
            state: RigidBodyState::default(),
            u_prev: [0.0; N_PROPS],
            t: 0,
            tracker: SuccessTracker::default(),
            stable_latched: false,
            done: true,
        })
    }

    pub fn config(&self) -> &DockConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RigidBodyState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Starts a new episode and returns the (noisy) first observation.
    pub fn reset(&mut self) -> Observation {
        let state = env_reset(&self.cfg.env, &mut self.rng);
        self.reset_to(state)
    }

    /// Starts a new episode from a given state.
    pub fn reset_to(&mut self, state: RigidBodyState) -> Observation {
        self.state = state;
        self.u_prev = [0.0; N_PROPS];
        self.t = 0;
        self.tracker.reset();
        self.stable_latched = false;
        self.done = false;
        self.observe()
    }

    /// Noise-free observation of the current state. Draws nothing from the stream.
    pub fn clean_observation(&self) -> Observation {
        build_observation(&self.state, &self.cfg.env.goal, &self.u_prev)
    }

    fn observe(&mut self) -> Observation {
        apply_observation_noise(&self.clean_observation(), &self.cfg.noise, &mut self.rng)
    }

    pub fn step(&mut self, action: &[f64; N_PROPS]) -> Result<StepOutput, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        let u = map_action_to_command(action);
        let prop = &self.cfg.propulsion;
        let wrench = propeller_wrench(prop, &u)?;
        let torques = prop.per_propeller_torques(&u)?;
        let prev = self.state;
        self.state = step_dynamics(&prev, &wrench, &self.mass, self.cfg.env.dt)?;
        let reward = compute_reward(
            &Transition {
                prev_state: &prev,
                state: &self.state,
                goal: &self.cfg.env.goal,
                u: &u,
                u_prev: &self.u_prev,
                per_prop_torques: &torques,
            },
            &self.cfg.rewards,
            prop,
        );
        self.u_prev = u;
        self.t += 1;

        let (pos_err, ori_err) = pose_errors(&self.state, &self.cfg.env.goal);
        self.tracker = update_success(self.tracker, pos_err, ori_err);
        self.stable_latched |= self.tracker.is_success();
        self.done = self.t >= self.cfg.env.episode_length;

        let obs = self.observe();
        Ok(StepOutput {
            obs,
            clean_obs: self.clean_observation(),
            reward,
            done: self.done,
            info: StepInfo {
                t: self.t,
                pos_err,
                ori_err,
                u,
                momentary: self.tracker.within(pos_err, ori_err),
                stable_success: self.stable_latched,
                reward,
            },
        })
    }
}

/// Result of stepping one member of a [`VecEnv`].
pub struct VecStep {
    /// Observation for the next action; after a timeout this is the first
    /// observation of the fresh episode.
    pub obs: Observation,
    /// Noise-free counterpart of `obs`.
    pub clean_obs: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    /// Last observation of the finished episode, for value bootstrapping.
    pub final_obs: Option<Observation>,
    pub final_clean_obs: Option<Observation>,
    pub info: StepInfo,
}

/// A batch of environments with automatic reset, stepped either sequentially
/// or across the rayon pool. Each member owns an independent random stream, so
/// both schedules produce identical results.
pub struct VecEnv {
    envs: Vec<DockEnv>,
    parallel: bool,
}

impl VecEnv {
    /// `stream` separates e.g. training from evaluation streams under one seed.
    pub fn new(cfg: &DockConfig, n: usize, seed: u64, stream: u64) -> Result<Self, EnvError> {
        let envs = (0..n)
            .map(|i| DockEnv::new(cfg.clone(), stream_rng(seed, stream, i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { envs, parallel: false })
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[DockEnv] {
        &self.envs
    }

    pub fn reset_all(&mut self) -> Vec<Observation> {
        if self.parallel {
            self.envs.par_iter_mut().map(DockEnv::reset).collect()
        } else {
            self.envs.iter_mut().map(DockEnv::reset).collect()
        }
    }

    pub fn clean_observations(&self) -> Vec<Observation> {
        self.envs.iter().map(DockEnv::clean_observation).collect()
    }

    pub fn step(&mut self, actions: &[[f64; N_PROPS]]) -> Result<Vec<VecStep>, EnvError> {
        assert_eq!(actions.len(), self.envs.len(), "one action per environment");
        let step_one = |(env, a): (&mut DockEnv, &[f64; N_PROPS])| -> Result<VecStep, EnvError> {
            let out = env.step(a)?;
            if out.done {
                let first = env.reset();
                Ok(VecStep {
                    obs: first,
                    clean_obs: env.clean_observation(),
                    reward: out.reward,
                    done: true,
                    final_obs: Some(out.obs),
                    final_clean_obs: Some(out.clean_obs),
                    info: out.info,
                })
            } else {
                Ok(VecStep {
                    obs: out.obs,
                    clean_obs: out.clean_obs,
                    reward: out.reward,
                    done: false,
                    final_obs: None,
                    final_clean_obs: None,
                    info: out.info,
                })
            }
        };
        if self.parallel {
            self.envs
                .par_iter_mut()
                .zip(actions.par_iter())
                .map(step_one)
                .collect()
        } else {
            self.envs.iter_mut().zip(actions.iter()).map(step_one).collect()
        }
    }
}
