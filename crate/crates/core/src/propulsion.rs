//! Eight-propeller actuation model: thrust force, moment-arm torque and the
//! reaction drag torque about each rotor's spin axis.

use nalgebra::{DMatrix, SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::PropulsionError;
use crate::math::Vec3;

pub const N_PROPS: usize = 8;

pub type Command = [f64; N_PROPS];
pub type WrenchMatrix = SMatrix<f64, 6, N_PROPS>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolarityMode {
    /// Spin polarity `(+1, -1, +1, -1, ...)`; mirror pairs spin opposite ways.
    Alternating,
    /// Every rotor spins `+1`.
    SameSign,
}

impl PolarityMode {
    pub fn polarity(self, index: usize) -> f64 {
        match self {
            PolarityMode::Alternating if index % 2 == 1 => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Propeller {
    /// Mount point in the body frame (m).
    pub position: [f64; 3],
    /// Unit thrust axis in the body frame; the force is `-u * f_max * n`.
    pub thrust_dir: [f64; 3],
    /// Unit spin axis in the body frame.
    pub spin_axis: [f64; 3],
    /// Maximum thrust including the per-propeller scale factor (N).
    pub f_max: f64,
    /// Spin polarity, `+1` or `-1`.
    pub polarity: f64,
}

impl Propeller {
    pub fn r(&self) -> Vec3 {
        Vec3::from(self.position)
    }
    pub fn n(&self) -> Vec3 {
        Vec3::from(self.thrust_dir)
    }
    pub fn a(&self) -> Vec3 {
        Vec3::from(self.spin_axis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropulsionConfig {
    pub propellers: Vec<Propeller>,
    /// Drag torque per unit thrust (m), shared by all rotors.
    pub k_drag: f64,
    pub drag_dynamics_enabled: bool,
    pub polarity_mode: PolarityMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyWrench {
    pub force: Vec3,
    pub torque: Vec3,
}

/// Geometry of the stand-in layout.
///
/// Four antipodal pairs. Pair `p` sits at azimuth `45° + 90° p`, alternately
/// below and above the equator, and both members share one thrust axis that is
/// canted `ELEVATION` out of the horizontal plane and twisted `TWIST` off the
/// radial direction. The twist is what gives the moment arms a (small) yaw
/// component.
pub const LAYOUT_RADIUS: f64 = 0.09;
pub const LAYOUT_HEIGHT: f64 = 0.06;
pub const LAYOUT_ELEVATION_DEG: f64 = 30.0;
pub const LAYOUT_TWIST_DEG: f64 = 5.0;
pub const DEFAULT_F_MAX: f64 = 0.1;
pub const DEFAULT_K_DRAG: f64 = 0.02;

/// Symmetric default arrangement. Propellers `2p` and `2p + 1` form a mirror
/// pair (`r` and `-r`) with a common thrust/spin axis; in alternating mode the
/// pair members get opposite polarity so equal commands cancel their drag.
pub fn default_layout(polarity_mode: PolarityMode) -> PropulsionConfig {
    let elev = LAYOUT_ELEVATION_DEG.to_radians();
    let twist = LAYOUT_TWIST_DEG.to_radians();
    let mut propellers = Vec::with_capacity(N_PROPS);
    for p in 0..N_PROPS / 2 {
        let psi = (45.0 + 90.0 * p as f64).to_radians();
        let up = if p % 2 == 0 { 1.0 } else { -1.0 };
        let r = Vec3::new(
            LAYOUT_RADIUS * psi.cos(),
            LAYOUT_RADIUS * psi.sin(),
            -up * LAYOUT_HEIGHT,
        );
        let n = Vec3::new(
            elev.cos() * (psi + twist).cos(),
            elev.cos() * (psi + twist).sin(),
            up * elev.sin(),
        );
        // The `+1` member is placed so that its differential moment-arm yaw
        // and its drag yaw point the same way.
        let plus = if up > 0.0 { -r } else { r };
        for (k, pos) in [plus, -plus].into_iter().enumerate() {
            let index = 2 * p + k;
            propellers.push(Propeller {
                position: pos.into(),
                thrust_dir: n.into(),
                spin_axis: n.into(),
                f_max: DEFAULT_F_MAX,
                polarity: polarity_mode.polarity(index),
            });
        }
    }
    PropulsionConfig {
        propellers,
        k_drag: DEFAULT_K_DRAG,
        drag_dynamics_enabled: true,
        polarity_mode,
    }
}

/// Maps a policy action in `[-1, 1]` to a propeller command in `[0, 1]`.
/// Out-of-range values are clamped.
pub fn map_action_to_command(action: &[f64; N_PROPS]) -> Command {
    action.map(|a| (a.clamp(-1.0, 1.0) + 1.0) * 0.5)
}

fn check_command(u: &Command) -> Result<(), PropulsionError> {
    for (index, &value) in u.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(PropulsionError::CommandOutOfRange { index, value });
        }
    }
    Ok(())
}

impl Default for PropulsionConfig {
    fn default() -> Self {
        default_layout(PolarityMode::Alternating)
    }
}

impl PropulsionConfig {
    /// Switches polarity mode and rewrites every rotor's polarity to match.
    pub fn set_polarity_mode(&mut self, mode: PolarityMode) {
        self.polarity_mode = mode;
        for (i, p) in self.propellers.iter_mut().enumerate() {
            p.polarity = mode.polarity(i);
        }
    }

    pub fn validate(&self) -> Result<(), PropulsionError> {
        let bad = |m: String| Err(PropulsionError::InvalidConfig(m));
        if self.propellers.len() != N_PROPS {
            return bad(format!(
                "expected {N_PROPS} propellers, got {}",
                self.propellers.len()
            ));
        }
        if !(self.k_drag.is_finite() && self.k_drag >= 0.0) {
            return bad(format!("k_drag must be finite and >= 0, got {}", self.k_drag));
        }
        for (i, p) in self.propellers.iter().enumerate() {
            if p.position.iter().any(|v| !v.is_finite()) {
                return bad(format!("propellers[{i}].position is not finite"));
            }
            if (p.n().norm() - 1.0).abs() > 1e-9 {
                return bad(format!("propellers[{i}].thrust_dir is not unit length"));
            }
            if (p.a().norm() - 1.0).abs() > 1e-9 {
                return bad(format!("propellers[{i}].spin_axis is not unit length"));
            }
            if !(p.f_max.is_finite() && p.f_max > 0.0) {
                return bad(format!("propellers[{i}].f_max must be > 0"));
            }
            if p.polarity != self.polarity_mode.polarity(i) {
                return bad(format!(
                    "propellers[{i}].polarity {} disagrees with polarity_mode {:?}",
                    p.polarity, self.polarity_mode
                ));
            }
        }
        let b = self.wrench_matrix();
        if wrench_rank(&b) != 6 {
            return bad("wrench matrix is not full rank".into());
        }
        if positive_null_vector(&b).is_none() {
            return bad("no strictly positive command produces zero wrench".into());
        }
        Ok(())
    }

    /// Force and moment-arm torque per unit command; drag torque excluded.
    pub fn wrench_matrix(&self) -> WrenchMatrix {
        let mut b = WrenchMatrix::zeros();
        for (i, p) in self.propellers.iter().enumerate() {
            let f = -p.f_max * p.n();
            let t = p.r().cross(&f);
            b.fixed_view_mut::<3, 1>(0, i).copy_from(&f);
            b.fixed_view_mut::<3, 1>(3, i).copy_from(&t);
        }
        b
    }

    /// Total torque contributed by each rotor: moment arm plus, when drag
    /// dynamics are on, `s k D a`.
    pub fn per_propeller_torques(&self, u: &Command) -> Result<[Vec3; N_PROPS], PropulsionError> {
        check_command(u)?;
        let mut out = [Vec3::zeros(); N_PROPS];
        for ((p, &ui), tau) in self.propellers.iter().zip(u).zip(out.iter_mut()) {
            let d = ui * p.f_max;
            let f = -d * p.n();
            *tau = p.r().cross(&f);
            if self.drag_dynamics_enabled {
                *tau += p.polarity * self.k_drag * d.abs() * p.a();
            }
        }
        Ok(out)
    }

    /// Drag-torque vector `Σ s k |D| a`, regardless of whether drag dynamics
    /// are enabled.
    pub fn drag_torque(&self, u: &Command) -> Result<Vec3, PropulsionError> {
        check_command(u)?;
        let mut tau = Vec3::zeros();
        for (p, &ui) in self.propellers.iter().zip(u) {
            tau += p.polarity * self.k_drag * (ui * p.f_max).abs() * p.a();
        }
        Ok(tau)
    }
}

pub fn propeller_wrench(cfg: &PropulsionConfig, u: &Command) -> Result<BodyWrench, PropulsionError> {
    check_command(u)?;
    let mut w = BodyWrench::default();
    for (p, &ui) in cfg.propellers.iter().zip(u) {
        let d = ui * p.f_max;
        let f = -d * p.n();
        w.force += f;
        w.torque += p.r().cross(&f);
    }
    if cfg.drag_dynamics_enabled {
        w.torque += cfg.drag_torque(u)?;
    }
    Ok(w)
}

/// Signed scalar residual drag torque `Σ s k |D|` (N·m).
pub fn residual_drag_scalar(cfg: &PropulsionConfig, u: &Command) -> Result<f64, PropulsionError> {
    check_command(u)?;
    Ok(cfg
        .propellers
        .iter()
        .zip(u)
        .map(|(p, &ui)| p.polarity * cfg.k_drag * (ui * p.f_max).abs())
        .sum())
}

/// Numerical rank using a relative singular-value threshold.
pub fn wrench_rank(b: &WrenchMatrix) -> usize {
    let sv = b.svd(false, false).singular_values;
    let max = sv.max();
    sv.iter().filter(|&&s| s > max * 1e-9).count()
}

/// Finds a strictly positive vector in the null space of `b`, normalized so its
/// smallest entry is 1.
///
/// The null space of a rank-6, 6×8 matrix is two-dimensional, so each sign
/// constraint `x_j > 0` is an open half-plane of coefficient directions. Any
/// non-empty intersection of open half-planes contains the bisector of two
/// adjacent boundary directions, which makes a finite candidate scan exact.
pub fn positive_null_vector(b: &WrenchMatrix) -> Option<[f64; N_PROPS]> {
    let basis = null_space(b);
    if basis.ncols() != 2 {
        return None;
    }
    let mut bounds = Vec::with_capacity(2 * N_PROPS);
    for j in 0..N_PROPS {
        let (c0, c1) = (basis[(j, 0)], basis[(j, 1)]);
        if c0.hypot(c1) < 1e-12 {
            return None;
        }
        // x_j(θ) = c0 cos θ + c1 sin θ vanishes at θ = atan2(c0, -c1) + kπ.
        let t = c0.atan2(-c1);
        bounds.push(t.rem_euclid(std::f64::consts::TAU));
        bounds.push((t + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU));
    }
    bounds.sort_by(f64::total_cmp);
    let n = bounds.len();
    for k in 0..n {
        let lo = bounds[k];
        let hi = if k + 1 < n {
            bounds[k + 1]
        } else {
            bounds[0] + std::f64::consts::TAU
        };
        let theta = 0.5 * (lo + hi);
        let (s, c) = theta.sin_cos();
        let x: Vec<f64> = (0..N_PROPS)
            .map(|j| basis[(j, 0)] * c + basis[(j, 1)] * s)
            .collect();
        let min = x.iter().cloned().fold(f64::INFINITY, f64::min);
        if min > 1e-9 {
            let mut out = [0.0; N_PROPS];
            for (o, v) in out.iter_mut().zip(&x) {
                *o = v / min;
            }
            return Some(out);
        }
    }
    None
}

/// Orthonormal basis of the null space of `b` (columns).
pub fn null_space(b: &WrenchMatrix) -> DMatrix<f64> {
    let gram = b.transpose() * b;
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let cols: Vec<_> = (0..N_PROPS)
        .filter(|&i| eig.eigenvalues[i].abs() <= max * 1e-12)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let mut out = DMatrix::zeros(N_PROPS, cols.len());
    for (k, c) in cols.iter().enumerate() {
        out.column_mut(k).copy_from(c);
    }
    out
}
