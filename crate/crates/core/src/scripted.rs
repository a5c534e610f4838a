//! Hand-written drive schedules used as baselines and for open-loop checks.

use serde::{Deserialize, Serialize};

use crate::cpg::{CpgDrives, Gait};
use crate::env::Controller;
use crate::error::Result;
use crate::learn::{drives_to_action, ActionSpec};
use crate::sensing::WorldSnapshot;
use crate::sim::{EpisodeLog, Terrain};

/// Holds the same drives and foot offsets for the whole episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDrives {
    pub drives: CpgDrives,
    pub x_off: [f64; 4],
    pub spec: ActionSpec,
}

impl ConstantDrives {
    pub fn new(drives: CpgDrives, x_off: [f64; 4], spec: ActionSpec) -> Self {
        Self { drives, x_off, spec }
    }
}

impl Controller for ConstantDrives {
    fn act(&mut self, _obs: &[f64], world: &WorldSnapshot, _terrain: &Terrain) -> Result<Vec<f64>> {
        Ok(drives_to_action(&self.drives, &self.x_off, &self.spec, world.v_des))
    }
}

/// Drives for one gait: shared amplitude and frequency, per-limb foot offsets, and
/// the inter-limb phase pattern to hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitDrive {
    pub gait: Gait,
    pub mu: f64,
    pub omega: f64,
    pub x_off: [f64; 4],
}

/// Trots up to a fixed distance before the first gap, then switches to a pronk with
/// higher frequency and feet shifted back.
///
/// Oscillators are uncoupled in the gap scenario, so the phase pattern is held by
/// frequency feedback: each limb's ω is lowered by `phase_gain` times how far it runs
/// ahead of the pattern set by the most delayed limb.
///
/// The schedule is open loop apart from the switch trigger. The defaults were tuned
/// for a course whose first gap starts at 2 m; the touchdown sequence over the gaps
/// depends on the phase at the switch, so other gap positions generally need a
/// different `switch_lead`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapSchedule {
    pub before: GaitDrive,
    pub after: GaitDrive,
    /// Trunk distance before the first gap's near edge at which to switch, m.
    pub switch_lead: f64,
    pub phase_gain: f64,
    pub spec: ActionSpec,
}

impl Default for GapSchedule {
    fn default() -> Self {
        use std::f64::consts::TAU;
        Self {
            before: GaitDrive {
                gait: Gait::Trot,
                mu: 1.5,
                omega: 4.45 * TAU,
                x_off: [0.0; 4],
            },
            after: GaitDrive {
                gait: Gait::Pronk,
                mu: 2.0,
                omega: 6.15 * TAU,
                x_off: [-0.05; 4],
            },
            switch_lead: 1.0,
            phase_gain: 6.0,
            spec: ActionSpec::gap(),
        }
    }
}

impl GapSchedule {
    /// Switch position for a terrain, or infinity when it has no gaps.
    pub fn switch_x(&self, terrain: &Terrain) -> f64 {
        terrain.gaps.first().map_or(f64::INFINITY, |g| g.start - self.switch_lead)
    }

    /// Time of the first logged row past the switch position.
    pub fn switch_time(&self, log: &EpisodeLog) -> Option<f64> {
        let x = self.switch_x(&log.meta.terrain);
        log.rows.iter().find(|r| r.trunk.p.x >= x).map(|r| r.time)
    }

    pub fn drive_at(&self, trunk_x: f64, terrain: &Terrain) -> &GaitDrive {
        if trunk_x >= self.switch_x(terrain) {
            &self.after
        } else {
            &self.before
        }
    }

    pub fn drives_at(&self, trunk_x: f64, theta: &[f64; 4], terrain: &Terrain) -> CpgDrives {
        let d = self.drive_at(trunk_x, terrain);
        let lags = d.gait.phase_offsets();
        let lag = |leg: usize| if leg == 0 { 0.0 } else { lags[leg - 1] };
        // lag behind the pattern; limbs wait for the most delayed one, so corrections
        // only slow limbs down and never run into the frequency ceiling
        let behind: [f64; 4] = std::array::from_fn(|leg| wrap_angle(theta[0] - theta[leg] - lag(leg)));
        let last = behind.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let omega = std::array::from_fn(|leg| d.omega - self.phase_gain * (last - behind[leg]));
        CpgDrives { mu: [d.mu; 4], omega }
    }
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    (a + PI).rem_euclid(TAU) - PI
}

impl Controller for GapSchedule {
    fn act(&mut self, _obs: &[f64], world: &WorldSnapshot, terrain: &Terrain) -> Result<Vec<f64>> {
        let x = world.trunk.p.x;
        let drives = self.drives_at(x, &world.cpg.theta, terrain);
        let x_off = self.drive_at(x, terrain).x_off;
        Ok(drives_to_action(&drives, &x_off, &self.spec, world.v_des))
    }
}
