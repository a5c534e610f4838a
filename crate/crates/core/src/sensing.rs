//! Observation assembly: blind proprioceptive and vestibular features plus
//! exteroceptive gap features, under per-feature masks.
//!
//! Feature order (each included only when its flag is set):
//!
//! | # | feature                        | width        |
//! |---|--------------------------------|--------------|
//! | 1 | roll, pitch, yaw               | 3            |
//! | 2 | body-frame linear velocity     | 3            |
//! | 3 | body-frame angular velocity    | 3            |
//! | 4 | joint positions                | 12           |
//! | 5 | joint velocities               | 12           |
//! | 6 | foot contact booleans          | 4            |
//! | 7 | previous raw action            | action_dim   |
//! | 8 | CPG r, ṙ, θ (wrapped), θ̇       | 16           |
//! | 9 | desired velocity               | 1            |
//! | 10 | all-feet gap distances        | 8            |
//! | 11 | front-feet gap distances      | 4            |
//! | 12 | hind-feet gap distances       | 4            |
//! | 13 | base gap distances            | 2            |
//! | 14 | foot penetration booleans     | 4            |
//! | 15 | ray scan                      | 3            |
//! | 16 | heightmap                     | rows × cols  |
//!
//! Gap distances are `(start, end)` pairs per foot in FL, FR, HL, HR order.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::cpg::{wrap_to_two_pi, CpgState, Gait};
use crate::error::{Error, Result};
use crate::pattern::JointState;
use crate::sim::{ray_hit_distance, terrain_height, ContactRecord, Terrain, TrunkState};

pub const DEFAULT_GAP_HORIZON: f64 = 1.0;
pub const DEFAULT_RAY_RANGE: f64 = 2.0;

/// Everything the sensors may look at, captured at a control instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSnapshot {
    pub time: f64,
    pub trunk: TrunkState,
    pub joints: JointState,
    pub contacts: ContactRecord,
    pub feet: [Vector3<f64>; 4],
    pub cpg: CpgState,
    pub prev_action: Vec<f64>,
    pub v_des: f64,
    pub body_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationConfig {
    pub orientation: bool,
    pub linear_velocity: bool,
    pub angular_velocity: bool,
    pub joint_positions: bool,
    pub joint_velocities: bool,
    pub contacts: bool,
    pub previous_action: bool,
    pub cpg_states: bool,
    pub desired_velocity: bool,
    pub feet_gap_distances: bool,
    pub front_feet_gap_distances: bool,
    pub hind_feet_gap_distances: bool,
    pub base_gap_distance: bool,
    pub foot_penetration: bool,
    pub ray_scan: bool,
    pub heightmap: bool,
    pub action_dim: usize,
    pub heightmap_rows: usize,
    pub heightmap_cols: usize,
    pub heightmap_spacing: f64,
    pub gap_horizon: f64,
    pub ray_range: f64,
    /// Downward pitch of each ray below the body x axis, rad.
    pub ray_pitches: [f64; 3],
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self::blind(12)
    }
}

impl ObservationConfig {
    /// Proprioceptive, vestibular and CPG features only.
    pub fn blind(action_dim: usize) -> Self {
        Self {
            orientation: true,
            linear_velocity: true,
            angular_velocity: true,
            joint_positions: true,
            joint_velocities: true,
            contacts: true,
            previous_action: true,
            cpg_states: true,
            desired_velocity: true,
            feet_gap_distances: false,
            front_feet_gap_distances: false,
            hind_feet_gap_distances: false,
            base_gap_distance: false,
            foot_penetration: false,
            ray_scan: false,
            heightmap: false,
            action_dim,
            heightmap_rows: 10,
            heightmap_cols: 6,
            heightmap_spacing: 0.05,
            gap_horizon: DEFAULT_GAP_HORIZON,
            ray_range: DEFAULT_RAY_RANGE,
            ray_pitches: [30f64.to_radians(), 45f64.to_radians(), 60f64.to_radians()],
        }
    }

    /// Enabled features with their widths, in vector order.
    pub fn layout(&self) -> Vec<(&'static str, usize)> {
        let table: [(bool, &'static str, usize); 16] = [
            (self.orientation, "orientation", 3),
            (self.linear_velocity, "linear_velocity", 3),
            (self.angular_velocity, "angular_velocity", 3),
            (self.joint_positions, "joint_positions", 12),
            (self.joint_velocities, "joint_velocities", 12),
            (self.contacts, "contacts", 4),
            (self.previous_action, "previous_action", self.action_dim),
            (self.cpg_states, "cpg_states", 16),
            (self.desired_velocity, "desired_velocity", 1),
            (self.feet_gap_distances, "feet_gap_distances", 8),
            (self.front_feet_gap_distances, "front_feet_gap_distances", 4),
            (self.hind_feet_gap_distances, "hind_feet_gap_distances", 4),
            (self.base_gap_distance, "base_gap_distance", 2),
            (self.foot_penetration, "foot_penetration", 4),
            (self.ray_scan, "ray_scan", 3),
            (self.heightmap, "heightmap", self.heightmap_rows * self.heightmap_cols),
        ];
        table
            .into_iter()
            .filter(|(on, _, _)| *on)
            .map(|(_, name, width)| (name, width))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.layout().iter().map(|(_, w)| w).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Config("observation config enables no features".into()));
        }
        if self.heightmap && (self.heightmap_rows == 0 || self.heightmap_cols == 0 || !(self.heightmap_spacing > 0.0)) {
            return Err(Error::Config("heightmap grid must be non-empty with positive spacing".into()));
        }
        if !(self.gap_horizon > 0.0) || !(self.ray_range > 0.0) {
            return Err(Error::Config("sensor ranges must be positive".into()));
        }
        Ok(())
    }

    /// Fixed per-entry divisors bringing each feature to roughly unit range.
    pub fn scales(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (name, width) in self.layout() {
            let s: &[f64] = match name {
                "orientation" => &[0.5],
                "linear_velocity" => &[1.0],
                "angular_velocity" => &[2.0],
                "joint_positions" => &[1.0],
                "joint_velocities" => &[10.0],
                "contacts" | "previous_action" | "foot_penetration" => &[1.0],
                "cpg_states" => &[2.0, 2.0, 2.0, 2.0, 10.0, 10.0, 10.0, 10.0, 3.0, 3.0, 3.0, 3.0, 20.0, 20.0, 20.0, 20.0],
                "desired_velocity" => &[1.0],
                "ray_scan" => &[self.ray_range],
                "heightmap" => &[0.5],
                _ => &[self.gap_horizon],
            };
            out.extend((0..width).map(|i| s[i % s.len()]));
        }
        out
    }
}

/// A named observation case: feature mask plus the oscillator coupling it trains with.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPreset {
    pub name: &'static str,
    pub config: ObservationConfig,
    pub coupling: Gait,
}

pub const PRESET_NAMES: [&str; 13] = [
    "case-01-feet-dist",
    "case-02-front-feet-dist",
    "case-03-lidar",
    "case-04-no-contacts",
    "case-05-no-proprio",
    "case-06-no-front-feet-dist",
    "case-07-no-vestibular",
    "case-08-base-dist",
    "case-09-penetration",
    "case-10-no-gap-info",
    "case-11-walk-coupling",
    "case-12-trot-coupling",
    "case-13-bound-coupling",
];

/// Looks up one of the 13 ablation cases, or `blind` / `heightmap`.
pub fn preset(name: &str, action_dim: usize) -> Result<ObservationPreset> {
    let blind = ObservationConfig::blind(action_dim);
    let feet = ObservationConfig {
        feet_gap_distances: true,
        ..blind.clone()
    };
    let (config, coupling) = match name {
        "blind" => (blind, Gait::Uncoupled),
        "heightmap" => (ObservationConfig { heightmap: true, ..blind }, Gait::Uncoupled),
        "case-01-feet-dist" => (feet, Gait::Uncoupled),
        "case-02-front-feet-dist" => (ObservationConfig { front_feet_gap_distances: true, ..blind }, Gait::Uncoupled),
        "case-03-lidar" => (ObservationConfig { ray_scan: true, ..blind }, Gait::Uncoupled),
        "case-04-no-contacts" => (ObservationConfig { contacts: false, ..feet }, Gait::Uncoupled),
        "case-05-no-proprio" => (
            ObservationConfig {
                joint_positions: false,
                joint_velocities: false,
                ..feet
            },
            Gait::Uncoupled,
        ),
        "case-06-no-front-feet-dist" => (ObservationConfig { hind_feet_gap_distances: true, ..blind }, Gait::Uncoupled),
        "case-07-no-vestibular" => (
            ObservationConfig {
                orientation: false,
                linear_velocity: false,
                angular_velocity: false,
                ..feet
            },
            Gait::Uncoupled,
        ),
        "case-08-base-dist" => (ObservationConfig { base_gap_distance: true, ..blind }, Gait::Uncoupled),
        "case-09-penetration" => (ObservationConfig { foot_penetration: true, ..blind }, Gait::Uncoupled),
        "case-10-no-gap-info" => (blind, Gait::Uncoupled),
        "case-11-walk-coupling" => (feet, Gait::Walk),
        "case-12-trot-coupling" => (feet, Gait::Trot),
        "case-13-bound-coupling" => (feet, Gait::Bound),
        other => return Err(Error::Config(format!("unknown observation preset `{other}`"))),
    };
    let name = PRESET_NAMES
        .iter()
        .chain(["blind", "heightmap"].iter())
        .find(|n| **n == name)
        .copied()
        .unwrap_or("custom");
    Ok(ObservationPreset { name, config, coupling })
}

fn gap_distances(x: f64, t: &Terrain, horizon: f64) -> [f64; 2] {
    match t.next_gap(x) {
        Some(g) => [
            (g.start - x).clamp(0.0, horizon),
            (g.end() - x).clamp(0.0, horizon),
        ],
        None => [horizon, horizon],
    }
}

/// Per-foot x distance to the start and end of the next gap, saturated at `horizon`.
pub fn feet_gap_distances(foot_xy: &[[f64; 2]; 4], t: &Terrain, horizon: f64) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (leg, xy) in foot_xy.iter().enumerate() {
        let d = gap_distances(xy[0], t, horizon);
        out[2 * leg] = d[0];
        out[2 * leg + 1] = d[1];
    }
    out
}

pub fn base_gap_distances(base_x: f64, t: &Terrain, horizon: f64) -> [f64; 2] {
    gap_distances(base_x, t, horizon)
}

/// True for feet that are over a gap and below the support plane.
pub fn foot_penetration(feet: &[Vector3<f64>; 4], t: &Terrain) -> [bool; 4] {
    feet.map(|p| t.gap_at(p.x).is_some() && p.z < 0.0)
}

/// Ray origin at the front of the trunk, in the body frame.
fn ray_origin_body(body_length: f64) -> Vector3<f64> {
    Vector3::new(body_length / 2.0 + 0.02, 0.0, 0.05)
}

/// Distances along downward-pitched rays fixed to the trunk front.
pub fn ray_scan(t: &Terrain, trunk: &TrunkState, body_length: f64, pitches: &[f64; 3], max_range: f64) -> [f64; 3] {
    let origin = trunk.p + trunk.orientation * ray_origin_body(body_length);
    pitches.map(|pitch| {
        let dir_body = Vector3::new(pitch.cos(), 0.0, -pitch.sin());
        let dir = trunk.orientation * dir_body;
        ray_hit_distance(t, (origin.x, origin.z), [dir.x, dir.y, dir.z], max_range)
    })
}

/// Terrain heights on a yaw-aligned grid starting below the front hips. Rows step
/// forward, columns step laterally (left to right); row-major.
pub fn heightmap_query(t: &Terrain, trunk: &TrunkState, body_length: f64, rows: usize, cols: usize, spacing: f64) -> Vec<f64> {
    let yaw = trunk.rpy()[2];
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw);
    let mut out = Vec::with_capacity(rows * cols);
    let half = (cols as f64 - 1.0) / 2.0;
    for i in 0..rows {
        for j in 0..cols {
            let local = Vector3::new(body_length / 2.0 + i as f64 * spacing, (half - j as f64) * spacing, 0.0);
            let p = trunk.p + rot * local;
            out.push(terrain_height(t, p.x, p.y));
        }
    }
    out
}

fn bools(b: [bool; 4]) -> [f64; 4] {
    b.map(|v| if v { 1.0 } else { 0.0 })
}

/// Concatenates the enabled features in the documented order.
pub fn assemble_observation(snap: &WorldSnapshot, t: &Terrain, cfg: &ObservationConfig) -> Vec<f64> {
    let mut obs = Vec::with_capacity(cfg.len());
    let foot_xy = snap.feet.map(|p| [p.x, p.y]);
    for (name, width) in cfg.layout() {
        let start = obs.len();
        match name {
            "orientation" => obs.extend(snap.trunk.rpy()),
            "linear_velocity" => obs.extend(snap.trunk.body_velocity().iter()),
            "angular_velocity" => obs.extend(snap.trunk.w.iter()),
            "joint_positions" => obs.extend(snap.joints.q),
            "joint_velocities" => obs.extend(snap.joints.q_dot),
            "contacts" => obs.extend(bools(snap.contacts.in_contact())),
            "previous_action" => {
                obs.extend(snap.prev_action.iter().take(width));
                obs.resize(start + width, 0.0);
            }
            "cpg_states" => {
                obs.extend(snap.cpg.r);
                obs.extend(snap.cpg.r_dot);
                obs.extend(snap.cpg.theta.map(wrap_to_two_pi));
                obs.extend(snap.cpg.theta_dot);
            }
            "desired_velocity" => obs.push(snap.v_des),
            "feet_gap_distances" => obs.extend(feet_gap_distances(&foot_xy, t, cfg.gap_horizon)),
            "front_feet_gap_distances" => obs.extend(&feet_gap_distances(&foot_xy, t, cfg.gap_horizon)[..4]),
            "hind_feet_gap_distances" => obs.extend(&feet_gap_distances(&foot_xy, t, cfg.gap_horizon)[4..]),
            "base_gap_distance" => obs.extend(base_gap_distances(snap.trunk.p.x, t, cfg.gap_horizon)),
            "foot_penetration" => obs.extend(bools(foot_penetration(&snap.feet, t))),
            "ray_scan" => obs.extend(ray_scan(t, &snap.trunk, snap.body_length, &cfg.ray_pitches, cfg.ray_range)),
            "heightmap" => obs.extend(heightmap_query(
                t,
                &snap.trunk,
                snap.body_length,
                cfg.heightmap_rows,
                cfg.heightmap_cols,
                cfg.heightmap_spacing,
            )),
            _ => unreachable!("unlisted feature {name}"),
        }
        debug_assert_eq!(obs.len() - start, width, "{name}");
    }
    obs
}
