//! Rigid trunk with massless kinematic legs.
//!
//! Joints are driven by PD torques against a reflected rotor inertia and the load
//! reflected through the leg Jacobian; the trunk receives gravity and the world-frame
//! ground reaction forces at the feet. Everything is integrated with semi-implicit
//! Euler at a fixed step.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::contact::{contact_force, ContactConfig, ContactRecord};
use super::terrain::Terrain;
use crate::error::{Error, Result};
use crate::pattern::{leg_fk, leg_jacobian, pd_torque, JointState, JointVec, LegGeometry, PdGains};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrunkState {
    pub p: Vector3<f64>,
    /// Body-to-world rotation.
    pub orientation: UnitQuaternion<f64>,
    pub v: Vector3<f64>,
    /// Angular velocity in the body frame.
    pub w: Vector3<f64>,
}

impl TrunkState {
    pub fn at_height(z: f64) -> Self {
        Self {
            p: Vector3::new(0.0, 0.0, z),
            orientation: UnitQuaternion::identity(),
            v: Vector3::zeros(),
            w: Vector3::zeros(),
        }
    }

    /// (roll, pitch, yaw).
    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = self.orientation.euler_angles();
        [r, p, y]
    }

    /// Linear velocity in the body frame.
    pub fn body_velocity(&self) -> Vector3<f64> {
        self.orientation.inverse_transform_vector(&self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModel {
    pub mass: f64,
    /// Body-frame inertia, row-major.
    pub inertia: [[f64; 3]; 3],
    pub geom: LegGeometry,
    pub gains: PdGains,
    pub joint_reflected_inertia: f64,
    pub body_length: f64,
}

impl Default for RobotModel {
    fn default() -> Self {
        let body_length = 0.36;
        Self {
            mass: 12.0,
            inertia: [[0.13, 0.0, 0.0], [0.0, 0.25, 0.0], [0.0, 0.0, 0.30]],
            geom: LegGeometry::with_body_length(body_length),
            gains: PdGains::default(),
            joint_reflected_inertia: 0.05,
            body_length,
        }
    }
}

impl RobotModel {
    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        let i = &self.inertia;
        Matrix3::new(
            i[0][0], i[0][1], i[0][2], i[1][0], i[1][1], i[1][2], i[2][0], i[2][1], i[2][2],
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.geom.validate()?;
        let i = self.inertia_matrix();
        let symmetric = (i - i.transpose()).abs().max() < 1e-12;
        let pd = i.cholesky().is_some();
        if !(self.mass > 0.0) || !symmetric || !pd {
            return Err(Error::Config(
                "robot mass must be positive and inertia symmetric positive definite".into(),
            ));
        }
        if !(self.joint_reflected_inertia > 0.0)
            || self.gains.kp < 0.0
            || self.gains.kd < 0.0
            || !(self.gains.tau_max > 0.0)
        {
            return Err(Error::Config("invalid joint drive parameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub contact: ContactConfig,
    pub gravity: f64,
    pub dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            contact: ContactConfig::default(),
            gravity: 9.81,
            dt: 1e-3,
        }
    }
}

/// Foot position and velocity in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootKinematics {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Foot position relative to the trunk origin, body frame.
    pub body_offset: Vector3<f64>,
    pub jacobian: Matrix3<f64>,
}

pub fn foot_kinematics(trunk: &TrunkState, js: &JointState, geom: &LegGeometry, leg: usize) -> FootKinematics {
    let (q, q_dot) = js.leg(leg);
    let hip = Vector3::from(geom.hip_positions[leg]);
    let body_offset = hip + leg_fk(q, geom, leg);
    let jacobian = leg_jacobian(q, geom, leg);
    let rel_body_vel = trunk.w.cross(&body_offset) + jacobian * Vector3::from(q_dot);
    FootKinematics {
        position: trunk.p + trunk.orientation * body_offset,
        velocity: trunk.v + trunk.orientation * rel_body_vel,
        body_offset,
        jacobian,
    }
}

/// World-frame foot positions for all legs.
pub fn foot_positions(trunk: &TrunkState, js: &JointState, geom: &LegGeometry) -> [Vector3<f64>; 4] {
    std::array::from_fn(|leg| foot_kinematics(trunk, js, geom, leg).position)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldStep {
    pub trunk: TrunkState,
    pub joints: JointState,
    pub contacts: ContactRecord,
    pub torques: JointVec,
    /// Ground reaction forces used in this step, world frame.
    pub forces: [Vector3<f64>; 4],
}

/// Advances trunk and joints by `cfg.dt`.
#[allow(clippy::too_many_arguments)]
pub fn step_world(
    trunk: &TrunkState,
    js: &JointState,
    contacts: &ContactRecord,
    q_des: &JointVec,
    model: &RobotModel,
    terrain: &Terrain,
    cfg: &SimConfig,
    time: f64,
) -> Result<WorldStep> {
    let dt = cfg.dt;
    let torques = pd_torque(q_des, js, &model.gains);
    let rot = trunk.orientation;

    let mut next_contacts = *contacts;
    let mut forces = [Vector3::zeros(); 4];
    let mut force_sum = Vector3::zeros();
    let mut moment_world = Vector3::zeros();
    let mut joint_acc = [0.0; 12];
    for leg in 0..4 {
        let fk = foot_kinematics(trunk, js, &model.geom, leg);
        let (f, slot) = contact_force(&fk.position, &fk.velocity, &contacts.slots[leg], terrain, &cfg.contact);
        next_contacts.slots[leg] = slot;
        forces[leg] = f;
        force_sum += f;
        moment_world += (fk.position - trunk.p).cross(&f);
        // generalized force of the ground reaction on the leg joints
        let load = fk.jacobian.transpose() * rot.inverse_transform_vector(&f);
        for k in 0..3 {
            let j = 3 * leg + k;
            joint_acc[j] = (torques[j] + load[k]) / model.joint_reflected_inertia;
        }
    }

    let inertia = model.inertia_matrix();
    let accel = force_sum / model.mass - Vector3::new(0.0, 0.0, cfg.gravity);
    let moment_body = rot.inverse_transform_vector(&moment_world);
    let gyro = trunk.w.cross(&(inertia * trunk.w));
    let w_dot = inertia
        .try_inverse()
        .ok_or_else(|| Error::Config("singular inertia".into()))?
        * (moment_body - gyro);

    let v = trunk.v + dt * accel;
    let w = trunk.w + dt * w_dot;
    let p = trunk.p + dt * v;
    let half = 0.5 * dt * w;
    let dq = Quaternion::new(1.0, half.x, half.y, half.z);
    let orientation = UnitQuaternion::new_normalize(*rot.quaternion() * dq);

    let mut joints = *js;
    for j in 0..12 {
        joints.q_dot[j] += dt * joint_acc[j];
        joints.q[j] += dt * joints.q_dot[j];
    }

    let next = TrunkState { p, orientation, v, w };
    let finite = next.p.iter().chain(next.v.iter()).chain(next.w.iter()).all(|x| x.is_finite())
        && next.orientation.coords.iter().all(|x| x.is_finite())
        && joints.q.iter().chain(joints.q_dot.iter()).all(|x| x.is_finite());
    if !finite {
        return Err(Error::Diverged {
            time,
            reason: "non-finite trunk or joint state".into(),
        });
    }
    Ok(WorldStep {
        trunk: next,
        joints,
        contacts: next_contacts,
        torques,
        forces,
    })
}
