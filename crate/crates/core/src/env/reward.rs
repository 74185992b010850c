//! Multi-term docking reward.

use serde::{Deserialize, Serialize};

use super::dynamics::RigidBodyState;
use super::observation::GoalPose;
use crate::math::{orientation_error_angle, relative_rotation, Vec3};
use crate::propulsion::{residual_drag_scalar, Command, PropulsionConfig, N_PROPS};

/// Axis-aligned safe region in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cuboid {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
}

impl Cuboid {
    /// Per-axis distance outside the box (0 inside).
    pub fn overshoot(&self, p: &Vec3) -> Vec3 {
        Vec3::from_fn(|i, _| ((p[i] - self.center[i]).abs() - self.half_extents[i]).max(0.0))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.overshoot(p) == Vec3::zeros()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub pose: f64,
    pub vel: f64,
    pub boundary: f64,
    pub prog: f64,
    pub cuboid: f64,
    pub drag: f64,
    pub act: f64,
    pub torque: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardConfig::default().weights
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    /// Position shaping scale (m).
    pub kappa_p: f64,
    /// Orientation shaping scale (rad).
    pub kappa_o: f64,
    /// Boundary shaping scale (m).
    pub kappa_b: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Progress normalization distance (m).
    pub d_max: f64,
    /// Operational radius around the goal; the boundary distance is the
    /// overshoot beyond it (m).
    pub r_op: f64,
    pub cuboid: Cuboid,
    pub weights: RewardWeights,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            kappa_p: 0.5,
            kappa_o: 0.5,
            kappa_b: 0.5,
            v_min: 0.0,
            v_max: 0.3,
            omega_min: 0.0,
            omega_max: 0.5,
            d_max: 5.0,
            r_op: 1.5,
            cuboid: Cuboid {
                center: [1.5, 0.0, 0.0],
                half_extents: [2.5, 1.1, 1.1],
            },
            weights: RewardWeights {
                pose: 1.0,
                vel: -0.5,
                boundary: 0.2,
                prog: 1.0,
                cuboid: 1.0,
                drag: 10.0,
                act: -0.05,
                torque: -0.1,
            },
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), (String, String)> {
        let err = |f: &str, m: String| Err((f.to_string(), m));
        for (name, v) in [
            ("kappa_p", self.kappa_p),
            ("kappa_o", self.kappa_o),
            ("kappa_b", self.kappa_b),
            ("d_max", self.d_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return err(name, format!("must be > 0, got {v}"));
            }
        }
        if !(self.v_min >= 0.0 && self.v_max > self.v_min) {
            return err("v_max", "need v_max > v_min >= 0".into());
        }
        if !(self.omega_min >= 0.0 && self.omega_max > self.omega_min) {
            return err("omega_max", "need omega_max > omega_min >= 0".into());
        }
        if !(self.r_op.is_finite() && self.r_op >= 0.0) {
            return err("r_op", format!("must be >= 0, got {}", self.r_op));
        }
        if self.cuboid.half_extents.iter().any(|&h| !(h > 0.0)) {
            return err("cuboid.half_extents", "all half-extents must be > 0".into());
        }
        let w = &self.weights;
        for (name, v) in [
            ("pose", w.pose),
            ("vel", w.vel),
            ("boundary", w.boundary),
            ("prog", w.prog),
            ("cuboid", w.cuboid),
            ("drag", w.drag),
            ("act", w.act),
            ("torque", w.torque),
        ] {
            if !v.is_finite() {
                return err(&format!("weights.{name}"), "must be finite".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_pose: f64,
    pub r_vel: f64,
    pub r_boundary: f64,
    pub r_prog: f64,
    pub r_cuboid: f64,
    pub r_drag: f64,
    pub r_act: f64,
    pub r_torque: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub const TERM_NAMES: [&'static str; 8] = [
        "r_pose",
        "r_vel",
        "r_boundary",
        "r_prog",
        "r_cuboid",
        "r_drag",
        "r_act",
        "r_torque",
    ];

    pub fn terms(&self) -> [f64; 8] {
        [
            self.r_pose,
            self.r_vel,
            self.r_boundary,
            self.r_prog,
            self.r_cuboid,
            self.r_drag,
            self.r_act,
            self.r_torque,
        ]
    }

    pub fn weighted_total(&self, w: &RewardWeights) -> f64 {
        w.pose * self.r_pose
            + w.vel * self.r_vel
            + w.boundary * self.r_boundary
            + w.prog * self.r_prog
            + w.cuboid * self.r_cuboid
            + w.drag * self.r_drag
            + w.act * self.r_act
            + w.torque * self.r_torque
    }
}

/// Everything the reward needs about one transition.
pub struct Transition<'a> {
    pub prev_state: &'a RigidBodyState,
    pub state: &'a RigidBodyState,
    pub goal: &'a GoalPose,
    pub u: &'a Command,
    pub u_prev: &'a Command,
    pub per_prop_torques: &'a [Vec3; N_PROPS],
}

pub fn compute_reward(tr: &Transition<'_>, cfg: &RewardConfig, prop: &PropulsionConfig) -> RewardBreakdown {
    let goal = tr.goal;
    let d = (tr.state.p - goal.p_goal).norm();
    let d_prev = (tr.prev_state.p - goal.p_goal).norm();
    let e_theta = orientation_error_angle(&relative_rotation(&tr.state.q, &goal.q_goal));

    let r_pose = (-d / cfg.kappa_p).exp() + (-e_theta / cfg.kappa_o).exp();

    let speed = tr.state.v.norm();
    let spin = tr.state.omega.norm();
    let r_vel = (speed - cfg.v_min).clamp(0.0, cfg.v_max - cfg.v_min)
        + (spin - cfg.omega_min).clamp(0.0, cfg.omega_max - cfg.omega_min);

    let d_b = (d - cfg.r_op).max(0.0);
    let r_boundary = (-d_b / cfg.kappa_b).exp();

    let r_prog = (d_prev - d) * (cfg.d_max - d);

    let r_cuboid = -cfg.cuboid.overshoot(&tr.state.p).norm();

    // Commands are validated by the caller before the wrench is computed.
    let r_drag = -residual_drag_scalar(prop, tr.u).map(f64::abs).unwrap_or(f64::NAN);

    let r_act = tr
        .u
        .iter()
        .zip(tr.u_prev)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();

    let r_torque = tr.per_prop_torques.iter().map(|t| t.abs().sum()).sum();

    let mut out = RewardBreakdown {
        r_pose,
        r_vel,
        r_boundary,
        r_prog,
        r_cuboid,
        r_drag,
        r_act,
        r_torque,
        total: 0.0,
    };
    out.total = out.weighted_total(&cfg.weights);
    out
}
