//! Pattern formation: oscillator state to Cartesian foot targets, closed-form leg
//! kinematics and joint PD control.
//!
//! Leg chain (hip frame, x forward, y left, z up): hip-roll about x, lateral offset
//! `lateral_sign * l_hip` along y, hip-pitch about y, thigh of length `l_thigh` along −z,
//! knee pitch about y, calf of length `l_calf` along −z. Positive pitch swings the foot
//! backward. The IK always returns the knee-backward branch (`knee <= 0`).

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Workspace margin used by [`leg_ik`] and [`clamp_to_workspace`], m.
pub const WORKSPACE_EPS: f64 = 1e-6;

pub const MAX_X_OFFSET: f64 = 0.07;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootTrajectoryParams {
    /// Step-length scale multiplying the oscillator amplitude, m.
    pub l_step: f64,
    /// Nominal leg length (hip height above the foot at rest), m.
    pub h: f64,
    pub l_clrnc: f64,
    pub l_pntr: f64,
    pub x_off: [f64; 4],
}

impl Default for FootTrajectoryParams {
    fn default() -> Self {
        Self {
            l_step: 0.05,
            h: 0.25,
            l_clrnc: 0.06,
            l_pntr: 0.01,
            x_off: [0.0; 4],
        }
    }
}

impl FootTrajectoryParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.h > 0.0
            && self.l_clrnc >= 0.0
            && self.l_pntr >= 0.0
            && self.l_step >= 0.0
            && self.x_off.iter().all(|x| x.abs() <= MAX_X_OFFSET);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid foot trajectory parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegGeometry {
    pub l_hip: f64,
    pub l_thigh: f64,
    pub l_calf: f64,
    /// Hip origins in the trunk frame, FL, FR, HL, HR.
    pub hip_positions: [[f64; 3]; 4],
    /// +1 for left legs, −1 for right legs.
    pub lateral_sign: [f64; 4],
}

impl LegGeometry {
    pub fn with_body_length(body_length: f64) -> Self {
        let hx = body_length / 2.0;
        let hy = 0.047;
        Self {
            l_hip: 0.0838,
            l_thigh: 0.20,
            l_calf: 0.20,
            hip_positions: [[hx, hy, 0.0], [hx, -hy, 0.0], [-hx, hy, 0.0], [-hx, -hy, 0.0]],
            lateral_sign: [1.0, -1.0, 1.0, -1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_hip > 0.0 && self.l_thigh > 0.0 && self.l_calf > 0.0 {
            Ok(())
        } else {
            Err(Error::Config("leg link lengths must be positive".into()))
        }
    }

    /// Planar reach limits of the hip-pitch/knee sub-chain.
    pub fn reach(&self) -> (f64, f64) {
        (
            (self.l_thigh - self.l_calf).abs() + WORKSPACE_EPS,
            self.l_thigh + self.l_calf - WORKSPACE_EPS,
        )
    }
}

impl Default for LegGeometry {
    fn default() -> Self {
        Self::with_body_length(0.36)
    }
}

pub type JointVec = [f64; 12];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: JointVec,
    pub q_dot: JointVec,
}

impl JointState {
    pub fn at_rest(q: JointVec) -> Self {
        Self { q, q_dot: [0.0; 12] }
    }

    pub fn leg(&self, leg: usize) -> ([f64; 3], [f64; 3]) {
        let s = 3 * leg;
        (
            [self.q[s], self.q[s + 1], self.q[s + 2]],
            [self.q_dot[s], self.q_dot[s + 1], self.q_dot[s + 2]],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    pub kp: f64,
    pub kd: f64,
    pub tau_max: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        Self {
            kp: 100.0,
            kd: 2.0,
            tau_max: 33.5,
        }
    }
}

/// Desired foot position in the hip frame for one limb.
pub fn foot_target(
    theta: f64,
    r: f64,
    params: &FootTrajectoryParams,
    geom: &LegGeometry,
    leg: usize,
) -> Vector3<f64> {
    let (s, c) = theta.sin_cos();
    let x = params.x_off[leg] - params.l_step * r * c;
    let z = if s > 0.0 {
        -params.h + params.l_clrnc * s
    } else {
        -params.h + params.l_pntr * s
    };
    Vector3::new(x, geom.lateral_sign[leg] * geom.l_hip, z)
}

/// Forward kinematics: joint angles (roll, pitch, knee) to hip-frame foot position.
pub fn leg_fk(q: [f64; 3], geom: &LegGeometry, leg: usize) -> Vector3<f64> {
    let [roll, pitch, knee] = q;
    let x = -geom.l_thigh * pitch.sin() - geom.l_calf * (pitch + knee).sin();
    let zp = -geom.l_thigh * pitch.cos() - geom.l_calf * (pitch + knee).cos();
    let yp = geom.lateral_sign[leg] * geom.l_hip;
    let (sr, cr) = roll.sin_cos();
    Vector3::new(x, yp * cr - zp * sr, yp * sr + zp * cr)
}

/// Jacobian `∂p/∂q` of [`leg_fk`].
pub fn leg_jacobian(q: [f64; 3], geom: &LegGeometry, leg: usize) -> Matrix3<f64> {
    let [roll, pitch, knee] = q;
    let (lt, lc) = (geom.l_thigh, geom.l_calf);
    let (sp, cp) = pitch.sin_cos();
    let (spk, cpk) = (pitch + knee).sin_cos();
    let (sr, cr) = roll.sin_cos();
    let yp = geom.lateral_sign[leg] * geom.l_hip;
    let zp = -lt * cp - lc * cpk;
    // planar partials
    let dx_dp = -lt * cp - lc * cpk;
    let dx_dk = -lc * cpk;
    let dzp_dp = lt * sp + lc * spk;
    let dzp_dk = lc * spk;
    Matrix3::new(
        0.0,
        dx_dp,
        dx_dk,
        -yp * sr - zp * cr,
        -dzp_dp * sr,
        -dzp_dk * sr,
        yp * cr - zp * sr,
        dzp_dp * cr,
        dzp_dk * cr,
    )
}

/// Closed-form inverse kinematics, knee-backward branch.
pub fn leg_ik(p: &Vector3<f64>, geom: &LegGeometry, leg: usize) -> Result<[f64; 3]> {
    let (min, max) = geom.reach();
    let yp = geom.lateral_sign[leg] * geom.l_hip;
    let yz2 = p.y * p.y + p.z * p.z;
    let zp2 = yz2 - geom.l_hip * geom.l_hip;
    if !zp2.is_finite() || zp2 < 0.0 || !p.x.is_finite() {
        return Err(Error::OutOfWorkspace {
            distance: yz2.sqrt(),
            min: geom.l_hip,
            max: f64::INFINITY,
        });
    }
    let zp = -zp2.sqrt();
    let d2 = p.x * p.x + zp2;
    let d = d2.sqrt();
    if d < min || d > max {
        return Err(Error::OutOfWorkspace { distance: d, min, max });
    }
    let roll = p.z.atan2(p.y) - zp.atan2(yp);
    let (lt, lc) = (geom.l_thigh, geom.l_calf);
    let cos_knee = ((d2 - lt * lt - lc * lc) / (2.0 * lt * lc)).clamp(-1.0, 1.0);
    let knee = -cos_knee.acos();
    let a = lt + lc * knee.cos();
    let b = lc * knee.sin();
    let pitch = (-p.x).atan2(-zp) - b.atan2(a);
    Ok([crate::cpg::wrap_to_pi(roll), pitch, knee])
}

/// Pulls a target radially back into the reachable planar annulus, keeping its
/// direction. Unreachable lateral components are lifted to the hip offset circle.
pub fn clamp_to_workspace(p: &Vector3<f64>, geom: &LegGeometry) -> Vector3<f64> {
    let (min, max) = geom.reach();
    let margin = 1e-9;
    let l_hip = geom.l_hip;
    let yz = (p.y * p.y + p.z * p.z).sqrt();
    let lateral_ok = yz > l_hip * (1.0 + 1e-9);
    let zp = if lateral_ok { (yz * yz - l_hip * l_hip).sqrt() } else { 1e-6 };
    let d = (p.x * p.x + zp * zp).sqrt();
    let target = d.clamp(min + margin, max - margin);
    if lateral_ok && target == d {
        return *p;
    }
    let (x, zp) = if d > 0.0 {
        (p.x * target / d, zp * target / d)
    } else {
        (0.0, target)
    };
    // rebuild (y, z) with the same roll direction
    let yz_new = (zp * zp + l_hip * l_hip).sqrt();
    let (y, z) = if yz > 0.0 {
        (p.y * yz_new / yz, p.z * yz_new / yz)
    } else {
        (0.0, -yz_new)
    };
    Vector3::new(x, y, z)
}

/// Joint PD torques toward `q_des` with zero desired velocity, clamped to `±tau_max`.
pub fn pd_torque(q_des: &JointVec, js: &JointState, gains: &PdGains) -> JointVec {
    std::array::from_fn(|j| {
        let tau = gains.kp * (q_des[j] - js.q[j]) - gains.kd * js.q_dot[j];
        tau.clamp(-gains.tau_max, gains.tau_max)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix4;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params(l_step: f64, h: f64, l_clrnc: f64, l_pntr: f64, x_off: f64) -> FootTrajectoryParams {
        FootTrajectoryParams {
            l_step,
            h,
            l_clrnc,
            l_pntr,
            x_off: [x_off; 4],
        }
    }

    #[test]
    fn foot_target_examples() {
        let g = LegGeometry::default();
        let p = params(0.08, 0.25, 0.05, 0.01, 0.0);
        let top = foot_target(PI / 2.0, 1.0, &p, &g, 0);
        assert_abs_diff_eq!(top.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(top.z, -0.25 + 0.05, epsilon = 1e-15);
        let bottom = foot_target(1.5 * PI, 1.0, &p, &g, 1);
        assert_abs_diff_eq!(bottom.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bottom.z, -0.26, epsilon = 1e-15);
        assert_eq!(bottom.y, -g.l_hip);
        let p = params(0.05, 0.25, 0.05, 0.01, 0.03);
        assert_abs_diff_eq!(foot_target(0.0, 2.0, &p, &g, 0).x, -0.07, epsilon = 1e-15);
    }

    #[test]
    fn trajectory_excursions_over_a_cycle() {
        let g = LegGeometry::default();
        let p = params(0.06, 0.27, 0.05, 0.012, 0.02);
        let n = 4000;
        let pts: Vec<_> = (0..n)
            .map(|k| foot_target(2.0 * PI * k as f64 / n as f64, 1.0, &p, &g, 2))
            .collect();
        let zmax = pts.iter().map(|v| v.z).fold(f64::MIN, f64::max);
        let zmin = pts.iter().map(|v| v.z).fold(f64::MAX, f64::min);
        let xmax = pts.iter().map(|v| v.x).fold(f64::MIN, f64::max);
        let xmin = pts.iter().map(|v| v.x).fold(f64::MAX, f64::min);
        assert_abs_diff_eq!(zmax + p.h, p.l_clrnc, epsilon = 1e-12);
        assert_abs_diff_eq!(-p.h - zmin, p.l_pntr, epsilon = 1e-12);
        assert_abs_diff_eq!(xmax - xmin, 2.0 * p.l_step, epsilon = 1e-12);
        assert_abs_diff_eq!((xmax + xmin) / 2.0, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn fk_reference_configurations() {
        let g = LegGeometry::default();
        for leg in 0..4 {
            let p = leg_fk([0.0; 3], &g, leg);
            assert_abs_diff_eq!(p, Vector3::new(0.0, g.lateral_sign[leg] * g.l_hip, -0.4), epsilon = 1e-15);
            let q = [0.3, -0.4, PI / 2.0];
            let p = leg_fk(q, &g, leg);
            // hip-pitch origin sits at the lateral offset rotated by the roll angle
            let origin = Vector3::new(0.0, g.lateral_sign[leg] * g.l_hip * 0.3f64.cos(), g.lateral_sign[leg] * g.l_hip * 0.3f64.sin());
            assert_abs_diff_eq!((p - origin).norm(), (0.04f64 + 0.04).sqrt(), epsilon = 1e-12);
        }
    }

    fn rot_x(a: f64) -> Matrix4<f64> {
        let (s, c) = a.sin_cos();
        Matrix4::new(1.0, 0.0, 0.0, 0.0, 0.0, c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0)
    }

    fn rot_y(a: f64) -> Matrix4<f64> {
        let (s, c) = a.sin_cos();
        Matrix4::new(c, 0.0, s, 0.0, 0.0, 1.0, 0.0, 0.0, -s, 0.0, c, 0.0, 0.0, 0.0, 0.0, 1.0)
    }

    fn trans(x: f64, y: f64, z: f64) -> Matrix4<f64> {
        Matrix4::new(1.0, 0.0, 0.0, x, 0.0, 1.0, 0.0, y, 0.0, 0.0, 1.0, z, 0.0, 0.0, 0.0, 1.0)
    }

    /// Homogeneous-transform chain built from elementary rotations and translations.
    fn chain_fk(q: [f64; 3], g: &LegGeometry, leg: usize) -> Vector3<f64> {
        let t = rot_x(q[0])
            * trans(0.0, g.lateral_sign[leg] * g.l_hip, 0.0)
            * rot_y(q[1])
            * trans(0.0, 0.0, -g.l_thigh)
            * rot_y(q[2])
            * trans(0.0, 0.0, -g.l_calf);
        Vector3::new(t[(0, 3)], t[(1, 3)], t[(2, 3)])
    }

    #[test]
    fn fk_matches_transform_chain() {
        let g = LegGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let q: [f64; 3] = std::array::from_fn(|_| rng.random_range(-PI..PI));
            let leg = rng.random_range(0..4);
            assert_abs_diff_eq!(leg_fk(q, &g, leg), chain_fk(q, &g, leg), epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = LegGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let q: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let leg = rng.random_range(0..4);
            let j = leg_jacobian(q, &g, leg);
            for k in 0..3 {
                let mut qp = q;
                let mut qm = q;
                qp[k] += 1e-6;
                qm[k] -= 1e-6;
                let col = (leg_fk(qp, &g, leg) - leg_fk(qm, &g, leg)) / 2e-6;
                assert_abs_diff_eq!(j.column(k).into_owned(), col, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn ik_straight_down() {
        let g = LegGeometry::default();
        for leg in 0..4 {
            let p = Vector3::new(0.0, g.lateral_sign[leg] * g.l_hip, -(0.4 - 1e-4));
            let q = leg_ik(&p, &g, leg).unwrap();
            assert_abs_diff_eq!(q[0], 0.0, epsilon = 1e-12);
            assert!(q[1].abs() < 0.05 && q[2].abs() < 0.05, "{q:?}");
            assert!(q[2] <= 0.0);
        }
    }

    #[test]
    fn ik_round_trip_random_targets() {
        let g = LegGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (min, max) = g.reach();
        for _ in 0..20_000 {
            let leg = rng.random_range(0..4);
            let q = [
                rng.random_range(-0.8..0.8),
                rng.random_range(-1.5..1.5),
                rng.random_range(-2.8..-0.01),
            ];
            let p = leg_fk(q, &g, leg);
            let d = (p.x * p.x + p.y * p.y + p.z * p.z - g.l_hip * g.l_hip).sqrt();
            if d < min || d > max {
                continue;
            }
            let back = leg_ik(&p, &g, leg).unwrap();
            assert!((leg_fk(back, &g, leg) - p).norm() < 1e-9);
            assert!(back[2] <= 0.0);
        }
    }

    #[test]
    fn ik_rejects_unreachable() {
        let g = LegGeometry::default();
        let p = Vector3::new(0.0, g.l_hip, -(0.41));
        match leg_ik(&p, &g, 0) {
            Err(Error::OutOfWorkspace { distance, max, .. }) => {
                assert!(distance > max);
                assert_abs_diff_eq!(max, 0.4 - WORKSPACE_EPS);
            }
            other => panic!("expected workspace error, got {other:?}"),
        }
    }

    #[test]
    fn workspace_clamp_yields_reachable_target() {
        let g = LegGeometry::default();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..2000 {
            let leg = rng.random_range(0..4);
            let p = Vector3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.3..0.3), rng.random_range(-0.6..0.1));
            let c = clamp_to_workspace(&p, &g);
            assert!(leg_ik(&c, &g, leg).is_ok(), "{p:?} -> {c:?}");
        }
        let inside = Vector3::new(0.05, g.l_hip, -0.25);
        assert_eq!(clamp_to_workspace(&inside, &g), inside);
    }

    #[test]
    fn pd_examples() {
        let gains = PdGains::default();
        let js = JointState::at_rest([0.2; 12]);
        assert_eq!(pd_torque(&[0.2; 12], &js, &gains), [0.0; 12]);
        let tau = pd_torque(&[0.3; 12], &js, &gains);
        assert_abs_diff_eq!(tau[0], 10.0, epsilon = 1e-12);
        let tau = pd_torque(&[1.2; 12], &js, &gains);
        assert_eq!(tau[5], 33.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn pd_is_odd_when_unclamped(e in -0.3f64..0.3, q in -1.0f64..1.0) {
                let gains = PdGains::default();
                let js = JointState::at_rest([q; 12]);
                let plus = pd_torque(&[q + e; 12], &js, &gains);
                let minus = pd_torque(&[q - e; 12], &js, &gains);
                for j in 0..12 {
                    prop_assert!((plus[j] + minus[j]).abs() < 1e-12);
                }
            }
        }
    }
}
