//! Microgravity rigid-body integrator.

use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::math::{integrate_quaternion, quat_to_rotmat, RotMat, UnitQuat, Vec3};
use crate::propulsion::BodyWrench;

/// Pose and twist of the free-flyer. `v` lives in the world frame, `omega` in
/// the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidBodyState {
    pub p: Vec3,
    pub q: UnitQuat,
    pub v: Vec3,
    pub omega: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(p: Vec3, q: UnitQuat) -> Self {
        Self {
            p,
            q,
            v: Vec3::zeros(),
            omega: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().all(|v| v.is_finite())
            && self.v.iter().all(|v| v.is_finite())
            && self.omega.iter().all(|v| v.is_finite())
            && self.q.wxyz().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InertialParams {
    /// Mass (kg).
    pub mass: f64,
    /// Body-frame inertia tensor, row-major (kg·m²).
    pub inertia: [[f64; 3]; 3],
}

impl Default for InertialParams {
    fn default() -> Self {
        Self::solid_sphere(3.2, 0.1)
    }
}

impl InertialParams {
    /// Solid sphere of the given mass and radius.
    pub fn solid_sphere(mass: f64, radius: f64) -> Self {
        let i = 0.4 * mass * radius * radius;
        Self {
            mass,
            inertia: [[i, 0.0, 0.0], [0.0, i, 0.0], [0.0, 0.0, i]],
        }
    }

    pub fn inertia_matrix(&self) -> RotMat {
        RotMat::from_fn(|r, c| self.inertia[r][c])
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(format!("mass must be > 0, got {}", self.mass));
        }
        let m = self.inertia_matrix();
        if m.iter().any(|v| !v.is_finite()) {
            return Err("inertia has non-finite entries".into());
        }
        if (m - m.transpose()).amax() > 1e-12 {
            return Err("inertia is not symmetric".into());
        }
        let eig = m.symmetric_eigenvalues();
        if eig.iter().any(|&e| e <= 0.0) {
            return Err("inertia is not positive definite".into());
        }
        Ok(())
    }
}

/// Precomputed mass properties for the integrator.
#[derive(Debug, Clone, Copy)]
pub struct MassProps {
    pub inv_mass: f64,
    pub inertia: RotMat,
    pub inv_inertia: RotMat,
}

impl MassProps {
    pub fn new(params: &InertialParams) -> Self {
        let inertia = params.inertia_matrix();
        let inv_inertia = inertia
            .try_inverse()
            .expect("inertia validated as positive definite");
        Self {
            inv_mass: 1.0 / params.mass,
            inertia,
            inv_inertia,
        }
    }
}

/// Semi-implicit Euler step with a body-frame wrench. No gravity, no hull drag.
pub fn step_dynamics(
    state: &RigidBodyState,
    wrench: &BodyWrench,
    mass: &MassProps,
    dt: f64,
) -> Result<RigidBodyState, EnvError> {
    let r = quat_to_rotmat(&state.q);
    let accel = r * wrench.force * mass.inv_mass;
    let v = state.v + accel * dt;
    let p = state.p + v * dt;
    let w = state.omega;
    let gyro = w.cross(&(mass.inertia * w));
    let omega = w + mass.inv_inertia * (wrench.torque - gyro) * dt;
    let q = integrate_quaternion(&state.q, &omega, dt);
    let next = RigidBodyState { p, q, v, omega };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(EnvError::NonFiniteState)
    }
}
