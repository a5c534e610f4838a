//! Episode logs at the control rate, termination and gap-crossing bookkeeping.
//!
//! CSV layout (header row, UTF-8, `.` decimal, shortest round-trip floats):
//!
//! ```text
//! time,
//! px,py,pz, qw,qx,qy,qz, vx,vy,vz, wx,wy,wz,          trunk (w in body frame)
//! q0..q11, qd0..qd11, tau0..tau11,                    joints, leg-major FL FR HL HR
//! c0..c3, fn0..fn3, fpk0..fpk3,                       contact flag, normal force, cycle peak
//! foot0x,foot0y,foot0z .. foot3z,                     world foot positions
//! r0..r3, rd0..rd3, th0..th3, thd0..thd3,             oscillator states (θ unwrapped)
//! v_des, a0..a{n-1}, rw0..rw3, reward, clamped
//! ```
//!
//! Readers locate columns by name and ignore unknown ones; only the columns the
//! metrics need are mandatory, the rest default to zero.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::terrain::Terrain;
use super::world::TrunkState;
use crate::cpg::CpgState;
use crate::error::{Error, Result};
use crate::pattern::JointVec;

/// Base height below which the episode ends.
pub const FALL_HEIGHT: f64 = 0.15;
/// A foot this far below the support plane inside a gap has dropped into it.
pub const FOOT_IN_GAP_DEPTH: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Fall,
}

/// Fall iff the base is strictly below 15 cm above the support level.
pub fn check_termination(trunk: &TrunkState) -> Option<Termination> {
    (trunk.p.z < FALL_HEIGHT).then_some(Termination::Fall)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndReason {
    Horizon,
    Fall,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub time: f64,
    pub trunk: TrunkState,
    pub q: JointVec,
    pub q_dot: JointVec,
    pub tau: JointVec,
    pub contact: [bool; 4],
    pub normal_force: [f64; 4],
    /// Largest normal force per foot over the preceding control cycle.
    pub peak_force: [f64; 4],
    pub feet: [[f64; 3]; 4],
    pub cpg: CpgState,
    pub v_des: f64,
    pub action: Vec<f64>,
    pub reward_terms: [f64; 4],
    pub reward: f64,
    pub clamped: bool,
}

/// Context needed to interpret a log; stored as a JSON sidecar next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    pub seed: u64,
    pub mass: f64,
    pub gravity: f64,
    pub terrain: Terrain,
    pub end: EndReason,
    pub control_dt: f64,
}

impl Default for LogMeta {
    fn default() -> Self {
        Self {
            seed: 0,
            mass: 12.0,
            gravity: 9.81,
            terrain: Terrain::flat(),
            end: EndReason::Horizon,
            control_dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub rows: Vec<LogRow>,
    pub meta: LogMeta,
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn header(action_dim: usize) -> Vec<String> {
    let mut h: Vec<String> = ["time", "px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for p in ["q", "qd", "tau"] {
        h.extend(names(p, 12));
    }
    for p in ["c", "fn", "fpk"] {
        h.extend(names(p, 4));
    }
    for leg in 0..4 {
        for axis in ["x", "y", "z"] {
            h.push(format!("foot{leg}{axis}"));
        }
    }
    for p in ["r", "rd", "th", "thd"] {
        h.extend(names(p, 4));
    }
    h.push("v_des".into());
    h.extend(names("a", action_dim));
    h.extend(names("rw", 4));
    h.push("reward".into());
    h.push("clamped".into());
    h
}

const REQUIRED: &[&str] = &["time", "px", "py", "pz", "vx", "vy", "vz", "wx", "wy", "wz"];

impl EpisodeLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(_), Some(last)) => last.time,
            _ => 0.0,
        }
    }

    pub fn fell(&self) -> bool {
        self.meta.end == EndReason::Fall
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let action_dim = self.rows.first().map(|r| r.action.len()).unwrap_or(0);
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header(action_dim))?;
        let mut rec: Vec<String> = Vec::new();
        for r in &self.rows {
            rec.clear();
            let mut push = |v: f64| rec.push(format!("{v}"));
            push(r.time);
            r.trunk.p.iter().for_each(|v| push(*v));
            let q = r.trunk.orientation.quaternion();
            [q.w, q.i, q.j, q.k].into_iter().for_each(&mut push);
            r.trunk.v.iter().for_each(|v| push(*v));
            r.trunk.w.iter().for_each(|v| push(*v));
            r.q.iter().chain(&r.q_dot).chain(&r.tau).for_each(|v| push(*v));
            r.contact.iter().for_each(|c| push(if *c { 1.0 } else { 0.0 }));
            r.normal_force.iter().chain(&r.peak_force).for_each(|v| push(*v));
            r.feet.iter().flatten().for_each(|v| push(*v));
            r.cpg.r.iter().chain(&r.cpg.r_dot).chain(&r.cpg.theta).chain(&r.cpg.theta_dot).for_each(|v| push(*v));
            push(r.v_des);
            r.action.iter().for_each(|v| push(*v));
            r.reward_terms.iter().for_each(|v| push(*v));
            push(r.reward);
            push(if r.clamped { 1.0 } else { 0.0 });
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses a log written by [`EpisodeLog::write_csv`] or any CSV carrying the
    /// mandatory columns. Errors name the offending line.
    pub fn read_csv<R: Read>(r: R, meta: LogMeta) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(r);
        let head: HashMap<String, usize> = rd
            .headers()
            .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        for col in REQUIRED {
            if !head.contains_key(*col) {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("missing required column `{col}`"),
                });
            }
        }
        let action_dim = (0..).take_while(|i| head.contains_key(&format!("a{i}"))).count();
        let mut rows = Vec::new();
        for (k, rec) in rd.records().enumerate() {
            let line = k as u64 + 2;
            let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            let get = |name: &str| -> Result<f64> {
                match head.get(name) {
                    None => Ok(0.0),
                    Some(&i) => {
                        let s = rec.get(i).ok_or_else(|| Error::Parse {
                            line,
                            msg: format!("missing field `{name}`"),
                        })?;
                        s.trim().parse::<f64>().map_err(|e| Error::Parse {
                            line,
                            msg: format!("column `{name}`: {e}"),
                        })
                    }
                }
            };
            let arr = |prefix: &str| -> Result<[f64; 4]> {
                Ok([get(&format!("{prefix}0"))?, get(&format!("{prefix}1"))?, get(&format!("{prefix}2"))?, get(&format!("{prefix}3"))?])
            };
            let joints = |prefix: &str| -> Result<JointVec> {
                let mut out = [0.0; 12];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = get(&format!("{prefix}{i}"))?;
                }
                Ok(out)
            };
            let quat = if head.contains_key("qw") {
                UnitQuaternion::from_quaternion(Quaternion::new(get("qw")?, get("qx")?, get("qy")?, get("qz")?))
            } else {
                UnitQuaternion::identity()
            };
            let trunk = TrunkState {
                p: Vector3::new(get("px")?, get("py")?, get("pz")?),
                orientation: quat,
                v: Vector3::new(get("vx")?, get("vy")?, get("vz")?),
                w: Vector3::new(get("wx")?, get("wy")?, get("wz")?),
            };
            let mut feet = [[0.0; 3]; 4];
            for (leg, f) in feet.iter_mut().enumerate() {
                for (a, axis) in ["x", "y", "z"].iter().enumerate() {
                    f[a] = get(&format!("foot{leg}{axis}"))?;
                }
            }
            rows.push(LogRow {
                time: get("time")?,
                trunk,
                q: joints("q")?,
                q_dot: joints("qd")?,
                tau: joints("tau")?,
                contact: arr("c")?.map(|c| c > 0.5),
                normal_force: arr("fn")?,
                peak_force: arr("fpk")?,
                feet,
                cpg: CpgState {
                    r: arr("r")?,
                    r_dot: arr("rd")?,
                    theta: arr("th")?,
                    theta_dot: arr("thd")?,
                },
                v_des: get("v_des")?,
                action: (0..action_dim).map(|i| get(&format!("a{i}"))).collect::<Result<_>>()?,
                reward_terms: arr("rw")?,
                reward: get("reward")?,
                clamped: get("clamped")? > 0.5,
            });
        }
        Ok(Self { rows, meta })
    }

    /// Writes `<path>` and the `<stem>.meta.json` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        std::fs::write(meta_path(path), serde_json::to_string_pretty(&self.meta)?)?;
        Ok(())
    }

    /// Reads a CSV log and its sidecar if present (defaults otherwise).
    pub fn load(path: &Path) -> Result<Self> {
        let mp = meta_path(path);
        let meta = if mp.exists() {
            serde_json::from_str(&std::fs::read_to_string(mp)?)?
        } else {
            LogMeta::default()
        };
        Self::read_csv(std::fs::File::open(path)?, meta)
    }
}

pub fn meta_path(csv_path: &Path) -> std::path::PathBuf {
    let stem = csv_path.file_stem().and_then(|s| s.to_str()).unwrap_or("log");
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapOutcome {
    Crossed,
    Failed,
}

/// A gap is crossed when the trunk passes its far edge and no foot ever drops into it;
/// logs end at a fall, so gaps ahead of a fall stay failed.
pub fn gap_outcomes(log: &EpisodeLog, terrain: &Terrain) -> Vec<GapOutcome> {
    terrain
        .gaps
        .iter()
        .map(|g| {
            let dropped = log
                .rows
                .iter()
                .any(|row| row.feet.iter().any(|f| g.contains(f[0]) && f[2] < -FOOT_IN_GAP_DEPTH));
            if !dropped && log.rows.iter().any(|row| row.trunk.p.x > g.end()) {
                GapOutcome::Crossed
            } else {
                GapOutcome::Failed
            }
        })
        .collect()
}

/// Fraction of gaps crossed.
pub fn gap_success_rate(outcomes: &[GapOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| **o == GapOutcome::Crossed).count() as f64 / outcomes.len() as f64
}
