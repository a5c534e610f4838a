//! Flat-terrain and gap-crossing rewards with per-term breakdowns, and the 27-cell
//! low/medium/high weight grid for gap crossing.

use serde::{Deserialize, Serialize};

use crate::pattern::JointVec;

/// Reward cap on forward displacement per control cycle: 1 m/s over 10 ms.
pub const DEFAULT_D_MAX: f64 = 0.01;

pub const DEFAULT_F_C_MAX: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeightsFlat {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
}

impl Default for RewardWeightsFlat {
    fn default() -> Self {
        Self {
            a1: 0.03,
            a2: 0.03,
            a3: -0.00001,
            a4: -0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeightsGap {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub f_c_max: f64,
}

impl Default for RewardWeightsGap {
    /// Case 19: high viability, low power and low peak-force weights.
    fn default() -> Self {
        RewardWeightsGap::from_levels(Level::High, Level::Low, Level::Low)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::High];

    pub fn name(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        }
    }

    fn pick(self, values: [f64; 3]) -> f64 {
        values[self as usize]
    }
}

const VIABILITY: [f64; 3] = [0.1, 4.0, 8.0];
const PEAK_FORCE: [f64; 3] = [-0.0001, -0.001, -0.01];
const POWER: [f64; 3] = [-0.00001, -0.0001, -0.001];
const ORIENTATION_GAP: f64 = -0.25;

impl RewardWeightsGap {
    /// Weights for a (viability, CoT, peak force) level triple.
    pub fn from_levels(viability: Level, cot: Level, force: Level) -> Self {
        Self {
            a1: viability.pick(VIABILITY),
            a2: force.pick(PEAK_FORCE),
            a3: cot.pick(POWER),
            a4: ORIENTATION_GAP,
            f_c_max: DEFAULT_F_C_MAX,
        }
    }
}

/// One cell of the reward-weight sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// 1-based case index.
    pub case: usize,
    pub viability: Level,
    pub cot: Level,
    pub force: Level,
    pub weights: RewardWeightsGap,
}

impl GridCell {
    pub fn label(&self) -> String {
        format!("{}-{}-{}", self.viability.name(), self.cot.name(), self.force.name())
    }
}

/// All 27 cells. Case index = 9·viability + 3·CoT + force + 1 with levels low = 0,
/// medium = 1, high = 2, so case 1 is (low, low, low), case 12 is (medium, low, high),
/// case 19 is (high, low, low) and case 23 is (high, medium, medium).
pub fn weight_grid() -> Vec<GridCell> {
    let mut cells = Vec::with_capacity(27);
    for viability in Level::ALL {
        for cot in Level::ALL {
            for force in Level::ALL {
                cells.push(GridCell {
                    case: cells.len() + 1,
                    viability,
                    cot,
                    force,
                    weights: RewardWeightsGap::from_levels(viability, cot, force),
                });
            }
        }
    }
    cells
}

/// Quantities of one control-cycle transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionData {
    /// Forward (world x) displacement over the control cycle, m.
    pub f_x: f64,
    pub d_max: f64,
    pub v_des: f64,
    pub v_real: f64,
    pub tau: JointVec,
    pub q_dot_now: JointVec,
    pub q_dot_prev: JointVec,
    /// (roll, pitch, yaw) deviation from the nominal level pose.
    pub orientation_error: [f64; 3],
    pub contact_forces: [f64; 4],
}

impl TransitionData {
    pub fn zero() -> Self {
        Self {
            f_x: 0.0,
            d_max: DEFAULT_D_MAX,
            v_des: 0.0,
            v_real: 0.0,
            tau: [0.0; 12],
            q_dot_now: [0.0; 12],
            q_dot_prev: [0.0; 12],
            orientation_error: [0.0; 3],
            contact_forces: [0.0; 4],
        }
    }

    fn progress(&self) -> f64 {
        self.f_x.min(self.d_max)
    }

    /// `|τ · (q̇ᵗ − q̇ᵗ⁻¹)|`.
    fn power(&self) -> f64 {
        self.tau
            .iter()
            .zip(self.q_dot_now.iter().zip(&self.q_dot_prev))
            .map(|(t, (now, prev))| t * (now - prev))
            .sum::<f64>()
            .abs()
    }

    fn orientation(&self) -> f64 {
        self.orientation_error.iter().map(|e| e * e).sum::<f64>().sqrt()
    }
}

/// Weighted reward terms; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub total: f64,
    pub terms: [f64; 4],
}

impl RewardBreakdown {
    fn from_terms(terms: [f64; 4]) -> Self {
        Self {
            total: terms.iter().sum(),
            terms,
        }
    }
}

/// Terms: progress, velocity tracking, power, orientation.
pub fn reward_flat(td: &TransitionData, w: &RewardWeightsFlat) -> RewardBreakdown {
    let dv = td.v_des - td.v_real;
    RewardBreakdown::from_terms([
        w.a1 * td.progress(),
        w.a2 * (-(dv * dv) / 0.25).exp(),
        w.a3 * td.power(),
        w.a4 * td.orientation(),
    ])
}

/// Terms: progress, excess contact force, power, orientation.
pub fn reward_gap(td: &TransitionData, w: &RewardWeightsGap) -> RewardBreakdown {
    let excess: f64 = td
        .contact_forces
        .iter()
        .map(|f| (f - w.f_c_max).max(0.0))
        .sum();
    RewardBreakdown::from_terms([
        w.a1 * td.progress(),
        w.a2 * excess,
        w.a3 * td.power(),
        w.a4 * td.orientation(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn flat_examples() {
        let w = RewardWeightsFlat::default();
        let mut td = TransitionData::zero();
        td.f_x = 0.005;
        td.v_des = 0.8;
        td.v_real = 0.8;
        let r = reward_flat(&td, &w);
        assert_abs_diff_eq!(r.total, 0.03 * 0.005 + 0.03, epsilon = 1e-15);
        assert_abs_diff_eq!(r.total, 0.03015, epsilon = 1e-15);

        let mut td = TransitionData::zero();
        td.v_des = 0.6;
        let r = reward_flat(&td, &w);
        assert_eq!(r.terms[0], 0.0);
        assert_eq!(r.terms[2], 0.0);
        assert_eq!(r.terms[3], 0.0);
        assert_abs_diff_eq!(r.total, 0.03 * (-0.36f64 / 0.25).exp(), epsilon = 1e-15);

        let mut td = TransitionData::zero();
        td.f_x = 0.05;
        td.d_max = 0.01;
        assert_abs_diff_eq!(reward_flat(&td, &w).terms[0], 0.03 * 0.01, epsilon = 1e-15);
    }

    #[test]
    fn gap_examples() {
        let mut w = RewardWeightsGap::from_levels(Level::High, Level::Low, Level::Low);
        let mut td = TransitionData::zero();
        td.contact_forces = [200.0, 100.0, 179.0, 0.0];
        assert_abs_diff_eq!(reward_gap(&td, &w).terms[1], -0.002, epsilon = 1e-15);
        td.contact_forces = [180.0, 170.0, 10.0, 0.0];
        assert_eq!(reward_gap(&td, &w).terms[1], 0.0);
        td.f_x = 0.01;
        td.d_max = 0.01;
        assert_abs_diff_eq!(reward_gap(&td, &w).terms[0], 0.08, epsilon = 1e-15);
        w.a4 = 0.0;
        td.orientation_error = [0.3, 0.4, 0.0];
        assert_eq!(reward_gap(&td, &w).terms[3], 0.0);
    }

    #[test]
    fn power_term_is_literal() {
        let mut td = TransitionData::zero();
        td.tau[0] = 2.0;
        td.tau[1] = -1.0;
        td.q_dot_now[0] = 3.0;
        td.q_dot_prev[0] = 1.0;
        td.q_dot_now[1] = 10.0;
        // |2·2 + (−1)·10| = 6
        let w = RewardWeightsFlat { a1: 0.0, a2: 0.0, a3: 1.0, a4: 0.0 };
        assert_abs_diff_eq!(reward_flat(&td, &w).terms[2], 6.0);
    }

    #[test]
    fn grid_layout() {
        let grid = weight_grid();
        assert_eq!(grid.len(), 27);
        let c1 = grid[0];
        assert_eq!((c1.viability, c1.cot, c1.force), (Level::Low, Level::Low, Level::Low));
        let c19 = grid[18];
        assert_eq!(c19.case, 19);
        assert_eq!((c19.viability, c19.cot, c19.force), (Level::High, Level::Low, Level::Low));
        assert_eq!((c19.weights.a1, c19.weights.a3, c19.weights.a2), (8.0, -0.00001, -0.0001));
        let c23 = grid[22];
        assert_eq!((c23.viability, c23.cot, c23.force), (Level::High, Level::Medium, Level::Medium));
        let c12 = grid[11];
        assert_eq!((c12.viability, c12.cot, c12.force), (Level::Medium, Level::Low, Level::High));
        for case in [16, 17, 18, 25, 26, 27] {
            assert_eq!(grid[case - 1].cot, Level::High);
        }
        for case in [12, 15, 24] {
            assert_eq!(grid[case - 1].force, Level::High);
        }
        assert!(grid.iter().all(|c| c.weights.a4 == -0.25 && c.weights.f_c_max == 180.0));
        let labels: std::collections::HashSet<_> = grid.iter().map(|c| c.label()).collect();
        assert_eq!(labels.len(), 27);
    }

    fn arb_transition() -> impl Strategy<Value = TransitionData> {
        (
            (-0.05f64..0.05, 0.0f64..2.0, -1.0f64..3.0),
            prop::array::uniform12(-33.5f64..33.5),
            prop::array::uniform12(-30.0f64..30.0),
            prop::array::uniform12(-30.0f64..30.0),
            prop::array::uniform3(-1.0f64..1.0),
            prop::array::uniform4(0.0f64..400.0),
        )
            .prop_map(|((f_x, v_des, v_real), tau, now, prev, o, f)| TransitionData {
                f_x,
                d_max: DEFAULT_D_MAX,
                v_des,
                v_real,
                tau,
                q_dot_now: now,
                q_dot_prev: prev,
                orientation_error: o,
                contact_forces: f,
            })
    }

    proptest! {
        #[test]
        fn breakdown_sums_to_total(td in arb_transition()) {
            let f = reward_flat(&td, &RewardWeightsFlat::default());
            prop_assert!((f.terms.iter().sum::<f64>() - f.total).abs() <= 1e-12);
            for cell in weight_grid() {
                let g = reward_gap(&td, &cell.weights);
                prop_assert!((g.terms.iter().sum::<f64>() - g.total).abs() <= 1e-12);
            }
        }

        #[test]
        fn force_penalty_monotone(td in arb_transition(), leg in 0usize..4, bump in 0.0f64..100.0) {
            let w = RewardWeightsGap::default();
            let base = reward_gap(&td, &w).total;
            let mut more = td;
            more.contact_forces[leg] += bump;
            let after = reward_gap(&more, &w).total;
            prop_assert!(after <= base + 1e-12);
            if more.contact_forces[leg] <= w.f_c_max {
                prop_assert!((after - base).abs() <= 1e-12);
            }
        }
    }
}
