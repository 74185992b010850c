//! The 23-dimensional policy input and its sensor-noise model.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dynamics::RigidBodyState;
use crate::math::{quat_to_rotmat, relative_rotation, rotmat_to_6d, Rot6D, UnitQuat, Vec3};
use crate::propulsion::{Command, N_PROPS};

pub const OBS_DIM: usize = 23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GoalPose {
    pub p_goal: Vec3,
    pub q_goal: UnitQuat,
}

impl Default for GoalPose {
    fn default() -> Self {
        Self {
            p_goal: Vec3::zeros(),
            q_goal: UnitQuat::identity(),
        }
    }
}

/// Body-frame goal errors and velocities plus the previous command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub dp: Vec3,
    pub rot6d_err: Rot6D,
    pub v_lin: Vec3,
    pub v_ang: Vec3,
    pub u_prev: Command,
}

impl Observation {
    /// Flattened in the order `dp, rot6d_err, v_lin, v_ang, u_prev`.
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        out[0..3].copy_from_slice(self.dp.as_slice());
        out[3..9].copy_from_slice(&self.rot6d_err.0);
        out[9..12].copy_from_slice(self.v_lin.as_slice());
        out[12..15].copy_from_slice(self.v_ang.as_slice());
        out[15..23].copy_from_slice(&self.u_prev);
        out
    }
}

pub fn build_observation(state: &RigidBodyState, goal: &GoalPose, u_prev: &Command) -> Observation {
    let rt = quat_to_rotmat(&state.q).transpose();
    Observation {
        dp: rt * (goal.p_goal - state.p),
        rot6d_err: rotmat_to_6d(&relative_rotation(&state.q, &goal.q_goal)),
        v_lin: rt * state.v,
        v_ang: state.omega,
        u_prev: *u_prev,
    }
}

/// Half-widths of the uniform perturbation applied to each observation slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// m
    pub delta_pos: f64,
    pub delta_rot6d: f64,
    /// m/s
    pub delta_vlin: f64,
    /// rad/s
    pub delta_vang: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            delta_pos: 0.03,
            delta_rot6d: 0.01,
            delta_vlin: 0.03,
            delta_vang: 0.03,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("delta_pos", self.delta_pos),
            ("delta_rot6d", self.delta_rot6d),
            ("delta_vlin", self.delta_vlin),
            ("delta_vang", self.delta_vang),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err((name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn jitter<R: Rng + ?Sized>(x: &mut f64, delta: f64, rng: &mut R) {
    if delta > 0.0 {
        *x += rng.gen_range(-delta..=delta);
    }
}

/// Adds independent `U(-δ, δ)` noise per scalar to the four state slices. The
/// command slice is never touched and the 6D slice is not re-orthogonalized.
pub fn apply_observation_noise<R: Rng + ?Sized>(
    obs: &Observation,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Observation {
    let mut out = *obs;
    if !noise.enabled {
        return out;
    }
    out.dp.iter_mut().for_each(|x| jitter(x, noise.delta_pos, rng));
    out.rot6d_err.0.iter_mut().for_each(|x| jitter(x, noise.delta_rot6d, rng));
    out.v_lin.iter_mut().for_each(|x| jitter(x, noise.delta_vlin, rng));
    out.v_ang.iter_mut().for_each(|x| jitter(x, noise.delta_vang, rng));
    debug_assert_eq!(out.u_prev.len(), N_PROPS);
    out
}
