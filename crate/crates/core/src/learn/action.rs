//! Mapping from raw policy outputs in `[-1, 1]` to oscillator drives and foot offsets.

use serde::{Deserialize, Serialize};

use crate::cpg::CpgDrives;
use crate::error::{Error, Result};
use crate::pattern::MAX_X_OFFSET;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Flat,
    Gap,
}

/// Linear frequency ceiling `f(v_des)` used on flat terrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyBound {
    pub omega_max_1: f64,
    pub omega_max_2: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl FrequencyBound {
    pub const WALK: Self = Self {
        omega_max_1: 23.0,
        omega_max_2: 60.0,
        v_min: 0.3,
        v_max: 1.0,
    };
    pub const TROT: Self = Self {
        omega_max_1: 30.0,
        omega_max_2: 70.0,
        v_min: 0.9,
        v_max: 2.1,
    };

    pub fn at(&self, v_des: f64) -> f64 {
        (self.omega_max_2 - self.omega_max_1) / (self.v_max - self.v_min) * (v_des - self.v_min) + self.omega_max_1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub scenario: Scenario,
    pub mu: (f64, f64),
    /// Fixed frequency range for gaps; flat terrain replaces the ceiling by `frequency`.
    pub omega: (f64, f64),
    pub frequency: FrequencyBound,
    pub x_off: (f64, f64),
}

impl ActionSpec {
    pub fn flat(frequency: FrequencyBound) -> Self {
        Self {
            scenario: Scenario::Flat,
            mu: (0.5, 4.0),
            omega: (0.0, frequency.omega_max_2),
            frequency,
            x_off: (0.0, 0.0),
        }
    }

    pub fn gap() -> Self {
        Self {
            scenario: Scenario::Gap,
            mu: (0.5, 4.0),
            omega: (0.0, 40.0),
            frequency: FrequencyBound::TROT,
            x_off: (-MAX_X_OFFSET, MAX_X_OFFSET),
        }
    }

    /// 8 on flat terrain (μ, ω per limb), 12 with gaps (plus x_off per limb).
    pub fn dim(&self) -> usize {
        match self.scenario {
            Scenario::Flat => 8,
            Scenario::Gap => 12,
        }
    }

    pub fn omega_bounds(&self, v_des: f64) -> (f64, f64) {
        match self.scenario {
            Scenario::Flat => (self.omega.0, self.frequency.at(v_des)),
            Scenario::Gap => self.omega,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.mu) || !ok(self.omega) || (self.scenario == Scenario::Gap && !ok(self.x_off)) {
            return Err(Error::Config("action bounds must satisfy lower < upper".into()));
        }
        let f = self.frequency;
        if !(f.v_max > f.v_min) || !(f.omega_max_2 > f.omega_max_1) || !(f.omega_max_1 > self.omega.0) {
            return Err(Error::Config("frequency bound must increase with velocity".into()));
        }
        Ok(())
    }
}

/// Decoded action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCommand {
    pub drives: CpgDrives,
    pub x_off: [f64; 4],
    /// Some raw entry was outside `[-1, 1]` (or non-finite) and got clamped.
    pub clamped: bool,
}

fn affine(raw: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + (raw + 1.0) * 0.5 * (hi - lo)
}

fn inverse_affine(value: f64, (lo, hi): (f64, f64)) -> f64 {
    (2.0 * (value - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
}

/// Raw layout: `[μ × 4, ω × 4, x_off × 4 (gap only)]`.
pub fn action_to_drives(raw: &[f64], spec: &ActionSpec, v_des: f64) -> Result<DriveCommand> {
    if raw.len() != spec.dim() {
        return Err(Error::Shape {
            expected: spec.dim(),
            got: raw.len(),
        });
    }
    let mut clamped = false;
    let a: Vec<f64> = raw
        .iter()
        .map(|&x| {
            let c = if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
            clamped |= c != x;
            c
        })
        .collect();
    let omega_bounds = spec.omega_bounds(v_des);
    let mut cmd = DriveCommand {
        drives: CpgDrives {
            mu: std::array::from_fn(|i| affine(a[i], spec.mu)),
            omega: std::array::from_fn(|i| affine(a[4 + i], omega_bounds)),
        },
        x_off: [0.0; 4],
        clamped,
    };
    if spec.scenario == Scenario::Gap {
        cmd.x_off = std::array::from_fn(|i| affine(a[8 + i], spec.x_off));
    }
    Ok(cmd)
}

/// Raw action reproducing the given drives (clamped to the representable range).
pub fn drives_to_action(drives: &CpgDrives, x_off: &[f64; 4], spec: &ActionSpec, v_des: f64) -> Vec<f64> {
    let omega_bounds = spec.omega_bounds(v_des);
    let mut raw: Vec<f64> = drives.mu.iter().map(|&m| inverse_affine(m, spec.mu)).collect();
    raw.extend(drives.omega.iter().map(|&w| inverse_affine(w, omega_bounds)));
    if spec.scenario == Scenario::Gap {
        raw.extend(x_off.iter().map(|&x| inverse_affine(x, spec.x_off)));
    }
    raw
}
