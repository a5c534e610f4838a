//! Rhythm generator: four amplitude-controlled phase oscillators, one per limb.
//!
//! Phase dynamics `θ̇_i = ω_i + Σ_j r_j w_ij sin(θ_j − θ_i − φ_ij)` and critically
//! damped amplitude dynamics `r̈_i = α(α/4 (μ_i − r_i) − ṙ_i)` are integrated with
//! semi-implicit Euler. Limb order is always FL, FR, HL, HR.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Result};

pub const NUM_LIMBS: usize = 4;

/// Limb index in the fixed FL, FR, HL, HR order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Limb {
    FrontLeft = 0,
    FrontRight = 1,
    HindLeft = 2,
    HindRight = 3,
}

impl Limb {
    pub const ALL: [Limb; 4] = [
        Limb::FrontLeft,
        Limb::FrontRight,
        Limb::HindLeft,
        Limb::HindRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_front(self) -> bool {
        matches!(self, Limb::FrontLeft | Limb::FrontRight)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Limb::FrontLeft => "FL",
            Limb::FrontRight => "FR",
            Limb::HindLeft => "HL",
            Limb::HindRight => "HR",
        }
    }
}

/// Oscillator state. Phases are stored unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpgState {
    pub theta: [f64; 4],
    pub r: [f64; 4],
    pub r_dot: [f64; 4],
    /// Phase rate used by the most recent step (zero before the first step).
    pub theta_dot: [f64; 4],
}

impl CpgState {
    pub fn new(theta: [f64; 4], r: [f64; 4]) -> Self {
        Self {
            theta,
            r,
            r_dot: [0.0; 4],
            theta_dot: [0.0; 4],
        }
    }

    /// Phases wrapped to `[0, 2π)`.
    pub fn wrapped_theta(&self) -> [f64; 4] {
        self.theta.map(wrap_to_two_pi)
    }

    fn check_finite(&self) -> Result<()> {
        ensure_finite("CpgState.theta", &self.theta)?;
        ensure_finite("CpgState.r", &self.r)?;
        ensure_finite("CpgState.r_dot", &self.r_dot)
    }
}

impl Default for CpgState {
    fn default() -> Self {
        Self::new([0.0; 4], [0.0; 4])
    }
}

/// Descending drive: intrinsic amplitude `mu` and frequency `omega` (rad/s) per limb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpgDrives {
    pub mu: [f64; 4],
    pub omega: [f64; 4],
}

impl CpgDrives {
    pub fn uniform(mu: f64, omega: f64) -> Self {
        Self {
            mu: [mu; 4],
            omega: [omega; 4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpgParams {
    /// Amplitude convergence factor, 1/s.
    pub alpha: f64,
    /// Integration step, s.
    pub dt: f64,
}

impl Default for CpgParams {
    fn default() -> Self {
        Self {
            alpha: 50.0,
            dt: 1e-3,
        }
    }
}

/// Gait templates with built-in phase relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gait {
    Walk,
    Trot,
    Bound,
    Pronk,
    Uncoupled,
}

impl Gait {
    pub const ALL: [Gait; 5] = [Gait::Walk, Gait::Trot, Gait::Bound, Gait::Pronk, Gait::Uncoupled];

    /// Phase lags (A, B, C) of FR, HL, HR behind FL.
    pub fn phase_offsets(self) -> [f64; 3] {
        match self {
            Gait::Walk => [PI, 1.5 * PI, 0.5 * PI],
            Gait::Trot => [PI, PI, 0.0],
            Gait::Bound => [0.0, PI, PI],
            Gait::Pronk | Gait::Uncoupled => [0.0, 0.0, 0.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gait::Walk => "walk",
            Gait::Trot => "trot",
            Gait::Bound => "bound",
            Gait::Pronk => "pronk",
            Gait::Uncoupled => "uncoupled",
        }
    }
}

impl std::str::FromStr for Gait {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Gait::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| crate::Error::Config(format!("unknown gait `{s}`")))
    }
}

/// Coupling strengths `w[i][j]` and phase biases `phi[i][j]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub w: [[f64; 4]; 4],
    pub phi: [[f64; 4]; 4],
}

impl CouplingSpec {
    pub fn uncoupled() -> Self {
        Self {
            w: [[0.0; 4]; 4],
            phi: [[0.0; 4]; 4],
        }
    }

    /// Builds the bias matrix from lags `(A, B, C)` of FR, HL, HR behind FL, with unit
    /// coupling strength off the diagonal.
    pub fn from_offsets(offsets: [f64; 3]) -> Self {
        let lag = [0.0, offsets[0], offsets[1], offsets[2]];
        let mut phi = [[0.0; 4]; 4];
        let mut w = [[0.0; 4]; 4];
        for i in 0..NUM_LIMBS {
            for j in 0..NUM_LIMBS {
                if i != j {
                    phi[i][j] = lag[i] - lag[j];
                    w[i][j] = 1.0;
                }
            }
        }
        Self { w, phi }
    }

    /// Steady-state `θ_i − θ_j` implied by the biases, wrapped to `(−π, π]`, in
    /// [`PAIRS`] order.
    pub fn expected_phase_differences(&self) -> [f64; 6] {
        PAIRS.map(|(i, j)| wrap_to_pi(self.phi[j][i]))
    }
}

/// Returns the coupling for a gait template.
pub fn build_coupling(gait: Gait) -> CouplingSpec {
    match gait {
        Gait::Uncoupled => CouplingSpec::uncoupled(),
        g => CouplingSpec::from_offsets(g.phase_offsets()),
    }
}

/// Unordered limb pairs reported by [`phase_differences`]:
/// FL–FR, FL–HL, FL–HR, FR–HL, FR–HR, HL–HR.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// `θ_i − θ_j` for each pair in [`PAIRS`], wrapped to `(−π, π]`.
pub fn phase_differences(state: &CpgState) -> [f64; 6] {
    PAIRS.map(|(i, j)| wrap_to_pi(state.theta[i] - state.theta[j]))
}

pub fn wrap_to_two_pi(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Wraps to `(−π, π]`.
pub fn wrap_to_pi(x: f64) -> f64 {
    let w = wrap_to_two_pi(x);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Phase rates for the given state and drives.
pub fn phase_rates(state: &CpgState, drives: &CpgDrives, coupling: &CouplingSpec) -> [f64; 4] {
    let mut rates = drives.omega;
    for (i, rate) in rates.iter_mut().enumerate() {
        for j in 0..NUM_LIMBS {
            let w = coupling.w[i][j];
            if i != j && w != 0.0 {
                *rate += state.r[j] * w * (state.theta[j] - state.theta[i] - coupling.phi[i][j]).sin();
            }
        }
    }
    rates
}

/// Advances the oscillators by one `params.dt`.
pub fn step_cpg(
    state: &CpgState,
    drives: &CpgDrives,
    coupling: &CouplingSpec,
    params: &CpgParams,
) -> Result<CpgState> {
    state.check_finite()?;
    ensure_finite("CpgDrives.mu", &drives.mu)?;
    ensure_finite("CpgDrives.omega", &drives.omega)?;
    ensure_finite("CpgParams", &[params.alpha, params.dt])?;

    let dt = params.dt;
    let a = params.alpha;
    let theta_dot = phase_rates(state, drives, coupling);
    let mut next = *state;
    for i in 0..NUM_LIMBS {
        let r_ddot = a * (a / 4.0 * (drives.mu[i] - state.r[i]) - state.r_dot[i]);
        next.r_dot[i] = state.r_dot[i] + dt * r_ddot;
        next.r[i] = state.r[i] + dt * next.r_dot[i];
        next.theta[i] = state.theta[i] + dt * theta_dot[i];
    }
    next.theta_dot = theta_dot;
    Ok(next)
}
