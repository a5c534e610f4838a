//! Closed-loop locomotion environment: policy at 100 Hz, oscillators and simulator
//! at 1 kHz.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cpg::{build_coupling, step_cpg, CouplingSpec, CpgParams, CpgState, Gait};
use crate::error::{Error, Result};
use crate::learn::{action_to_drives, mlp_forward, ActionSpec, Env, EnvStep, PolicyParams, Scenario as ActionScenario};
use crate::pattern::{clamp_to_workspace, foot_target, leg_ik, FootTrajectoryParams, JointState, JointVec};
use crate::reward::{reward_flat, reward_gap, RewardBreakdown, RewardWeightsFlat, RewardWeightsGap, TransitionData, DEFAULT_D_MAX};
use crate::sensing::{assemble_observation, ObservationConfig, WorldSnapshot};
use crate::sim::{
    check_termination, foot_positions, step_world, ContactRecord, EndReason, EpisodeLog, Gap, GapCourse, LogMeta, LogRow,
    RobotModel, SimConfig, Terrain, TrunkState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TerrainSpec {
    Flat,
    /// Fixed gap list.
    Fixed { gaps: Vec<Gap>, beam_width: f64 },
    /// Fresh random course at every reset.
    Random { course: GapCourse },
}

impl TerrainSpec {
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Terrain> {
        match self {
            TerrainSpec::Flat => Ok(Terrain::flat()),
            TerrainSpec::Fixed { gaps, beam_width } => Terrain::with_gaps(gaps.clone(), *beam_width),
            TerrainSpec::Random { course } => Terrain::random_gaps(course, rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RewardSpec {
    Flat(RewardWeightsFlat),
    Gap(RewardWeightsGap),
}

impl RewardSpec {
    pub fn evaluate(&self, td: &TransitionData) -> RewardBreakdown {
        match self {
            RewardSpec::Flat(w) => reward_flat(td, w),
            RewardSpec::Gap(w) => reward_gap(td, w),
        }
    }
}

/// Everything that defines an episode apart from the controller and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub terrain: TerrainSpec,
    pub coupling: Gait,
    pub action: ActionSpec,
    pub observation: ObservationConfig,
    pub reward: RewardSpec,
    /// Episode length, s.
    pub horizon: f64,
    pub v_des_range: (f64, f64),
    pub foot: FootTrajectoryParams,
    /// Multiplies `foot.l_step`; 1 leaves the trained stride length.
    pub l_step_scale: f64,
    pub model: RobotModel,
    pub sim: SimConfig,
    pub cpg: CpgParams,
    pub control_dt: f64,
    pub d_max: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::gaps(TerrainSpec::Random { course: GapCourse::default() })
    }
}

impl Scenario {
    pub fn gaps(terrain: TerrainSpec) -> Self {
        let action = ActionSpec::gap();
        Self {
            terrain,
            coupling: Gait::Uncoupled,
            observation: ObservationConfig {
                feet_gap_distances: true,
                ..ObservationConfig::blind(action.dim())
            },
            action,
            reward: RewardSpec::Gap(RewardWeightsGap::default()),
            horizon: 10.0,
            v_des_range: (0.0, 0.0),
            foot: FootTrajectoryParams::default(),
            l_step_scale: 1.0,
            model: RobotModel::default(),
            sim: SimConfig::default(),
            cpg: CpgParams::default(),
            control_dt: 0.01,
            d_max: DEFAULT_D_MAX,
        }
    }

    pub fn flat(gait: Gait, frequency: crate::learn::FrequencyBound) -> Self {
        let action = ActionSpec::flat(frequency);
        Self {
            terrain: TerrainSpec::Flat,
            coupling: gait,
            observation: ObservationConfig::blind(action.dim()),
            action,
            reward: RewardSpec::Flat(RewardWeightsFlat::default()),
            v_des_range: (frequency.v_min, frequency.v_max),
            ..Self::gaps(TerrainSpec::Flat)
        }
    }

    pub fn inner_steps(&self) -> usize {
        (self.control_dt / self.sim.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.action.validate()?;
        self.observation.validate()?;
        self.foot.validate()?;
        self.model.validate()?;
        if self.observation.action_dim != self.action.dim() {
            return Err(Error::Config(format!(
                "observation.action_dim = {} but the action space has {} entries",
                self.observation.action_dim,
                self.action.dim()
            )));
        }
        if !(self.horizon > 0.0) || !(self.control_dt > 0.0) || !(self.sim.dt > 0.0) || !(self.cpg.dt > 0.0) {
            return Err(Error::Config("horizon and time steps must be positive".into()));
        }
        let ratio = self.control_dt / self.sim.dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::Config("control_dt must be an integer multiple of sim.dt".into()));
        }
        if (self.cpg.dt - self.sim.dt).abs() > 1e-15 {
            return Err(Error::Config("oscillators and simulator must share the inner step".into()));
        }
        if !(self.l_step_scale >= 0.0) {
            return Err(Error::Config("l_step_scale must be non-negative".into()));
        }
        if self.v_des_range.0 > self.v_des_range.1 {
            return Err(Error::Config("v_des_range must be ordered".into()));
        }
        if let TerrainSpec::Random { course } = &self.terrain {
            if course.min_width > course.max_width || !(course.min_width > 0.0) {
                return Err(Error::Config("gap width range must be positive and ordered".into()));
            }
        }
        if self.action.scenario == ActionScenario::Flat && self.terrain != TerrainSpec::Flat {
            return Err(Error::Config("flat action space requires flat terrain".into()));
        }
        Ok(())
    }
}

/// Initial oscillator phases placing the limbs on the coupling's limit cycle
/// (trot offsets when uncoupled).
pub fn initial_cpg(gait: Gait) -> CpgState {
    let lags = match gait {
        Gait::Uncoupled => Gait::Trot.phase_offsets(),
        g => g.phase_offsets(),
    };
    CpgState::new([0.0, -lags[0], -lags[1], -lags[2]], [0.0; 4])
}

/// Result of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    pub obs: Vec<f64>,
    pub reward: RewardBreakdown,
    pub fell: bool,
    pub truncated: bool,
    pub row: LogRow,
}

#[derive(Debug, Clone)]
pub struct LocomotionEnv {
    pub scenario: Scenario,
    coupling: CouplingSpec,
    terrain: Terrain,
    trunk: TrunkState,
    joints: JointState,
    contacts: ContactRecord,
    cpg: CpgState,
    foot: FootTrajectoryParams,
    time: f64,
    steps: usize,
    v_des: f64,
    prev_action: Vec<f64>,
}

impl LocomotionEnv {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let coupling = build_coupling(scenario.coupling);
        let dim = scenario.action.dim();
        let mut foot = scenario.foot;
        foot.l_step *= scenario.l_step_scale;
        Ok(Self {
            coupling,
            terrain: Terrain::flat(),
            trunk: TrunkState::at_height(scenario.foot.h),
            joints: JointState::at_rest([0.0; 12]),
            contacts: ContactRecord::default(),
            cpg: CpgState::default(),
            foot,
            time: 0.0,
            steps: 0,
            v_des: scenario.v_des_range.0,
            prev_action: vec![0.0; dim],
            scenario,
        })
    }

    pub fn terrain(&self) -> &Terrain {
        &self.terrain
    }

    pub fn trunk(&self) -> &TrunkState {
        &self.trunk
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn v_des(&self) -> f64 {
        self.v_des
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            time: self.time,
            trunk: self.trunk,
            joints: self.joints,
            contacts: self.contacts,
            feet: foot_positions(&self.trunk, &self.joints, &self.scenario.model.geom),
            cpg: self.cpg,
            prev_action: self.prev_action.clone(),
            v_des: self.v_des,
            body_length: self.scenario.model.body_length,
        }
    }

    pub fn observe(&self) -> Vec<f64> {
        assemble_observation(&self.snapshot(), &self.terrain, &self.scenario.observation)
    }

    fn joint_targets(&self) -> Result<JointVec> {
        let geom = &self.scenario.model.geom;
        let mut q = [0.0; 12];
        for leg in 0..4 {
            let target = foot_target(self.cpg.theta[leg], self.cpg.r[leg], &self.foot, geom, leg);
            let leg_q = leg_ik(&clamp_to_workspace(&target, geom), geom, leg)?;
            q[3 * leg..3 * leg + 3].copy_from_slice(&leg_q);
        }
        Ok(q)
    }

    /// Samples terrain and desired velocity, and places the robot standing at x = 0.
    pub fn reset_with(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        self.terrain = self.scenario.terrain.build(rng)?;
        let (lo, hi) = self.scenario.v_des_range;
        self.v_des = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        self.cpg = initial_cpg(self.scenario.coupling);
        self.foot = self.scenario.foot;
        self.foot.l_step *= self.scenario.l_step_scale;
        self.trunk = TrunkState::at_height(self.foot.h + 0.002);
        self.joints = JointState::at_rest(self.joint_targets()?);
        self.contacts = ContactRecord::default();
        self.time = 0.0;
        self.steps = 0;
        self.prev_action = vec![0.0; self.scenario.action.dim()];
        Ok(self.observe())
    }

    /// Applies one raw action for one control period.
    pub fn control_step(&mut self, raw: &[f64]) -> Result<ControlStep> {
        let s = &self.scenario;
        let cmd = action_to_drives(raw, &s.action, self.v_des)?;
        if s.action.scenario == ActionScenario::Gap {
            self.foot.x_off = cmd.x_off;
        }
        let x0 = self.trunk.p.x;
        let q_dot_prev = self.joints.q_dot;
        let mut peak = [0.0f64; 4];
        let mut torques = [0.0; 12];
        for _ in 0..s.inner_steps() {
            self.cpg = step_cpg(&self.cpg, &cmd.drives, &self.coupling, &s.cpg)?;
            let q_des = self.joint_targets()?;
            let ws = step_world(&self.trunk, &self.joints, &self.contacts, &q_des, &s.model, &self.terrain, &s.sim, self.time)?;
            self.trunk = ws.trunk;
            self.joints = ws.joints;
            self.contacts = ws.contacts;
            torques = ws.torques;
            for (p, f) in peak.iter_mut().zip(self.contacts.normal_forces()) {
                *p = p.max(f);
            }
            self.time += s.sim.dt;
        }
        self.steps += 1;
        // exact multiple of the control period, free of accumulated rounding
        self.time = self.steps as f64 * s.control_dt;
        let clamped_action: Vec<f64> = raw.iter().map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) }).collect();
        self.prev_action = clamped_action.clone();

        let rpy = self.trunk.rpy();
        let f_x = self.trunk.p.x - x0;
        let td = TransitionData {
            f_x,
            d_max: s.d_max,
            v_des: self.v_des,
            v_real: f_x / s.control_dt,
            tau: torques,
            q_dot_now: self.joints.q_dot,
            q_dot_prev,
            orientation_error: rpy,
            contact_forces: peak,
        };
        let reward = s.reward.evaluate(&td);
        let fell = check_termination(&self.trunk).is_some();
        let truncated = !fell && self.time >= s.horizon - 1e-9;
        let feet = foot_positions(&self.trunk, &self.joints, &s.model.geom);
        let row = LogRow {
            time: self.time,
            trunk: self.trunk,
            q: self.joints.q,
            q_dot: self.joints.q_dot,
            tau: torques,
            contact: self.contacts.in_contact(),
            normal_force: self.contacts.normal_forces(),
            peak_force: peak,
            feet: feet.map(|p| [p.x, p.y, p.z]),
            cpg: self.cpg,
            v_des: self.v_des,
            action: clamped_action,
            reward_terms: reward.terms,
            reward: reward.total,
            clamped: cmd.clamped,
        };
        Ok(ControlStep {
            obs: self.observe(),
            reward,
            fell,
            truncated,
            row,
        })
    }
}

impl Env for LocomotionEnv {
    fn obs_dim(&self) -> usize {
        self.scenario.observation.len()
    }

    fn act_dim(&self) -> usize {
        self.scenario.action.dim()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        self.reset_with(rng)
    }

    fn step(&mut self, action: &[f64], _rng: &mut ChaCha8Rng) -> Result<EnvStep> {
        let s = self.control_step(action)?;
        Ok(EnvStep {
            obs: s.obs,
            reward: s.reward.total,
            terminated: s.fell,
            truncated: s.truncated,
        })
    }
}

/// Maps an observation (and, for scripted controllers, the full world state) to a raw action.
pub trait Controller {
    fn act(&mut self, obs: &[f64], world: &WorldSnapshot, terrain: &Terrain) -> Result<Vec<f64>>;
}

/// Deterministic policy (distribution mean).
pub struct PolicyController<'a> {
    pub params: &'a PolicyParams,
}

impl Controller for PolicyController<'_> {
    fn act(&mut self, obs: &[f64], _world: &WorldSnapshot, _terrain: &Terrain) -> Result<Vec<f64>> {
        Ok(mlp_forward(self.params, obs)?.0)
    }
}

/// Runs one episode from a seeded reset until fall, divergence or the horizon.
/// A diverged simulation ends the episode with [`EndReason::Diverged`].
pub fn run_episode(controller: &mut dyn Controller, scenario: &Scenario, seed: u64) -> Result<EpisodeLog> {
    let mut env = LocomotionEnv::new(scenario.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = env.reset_with(&mut rng)?;
    let mut rows = Vec::with_capacity((scenario.horizon / scenario.control_dt).ceil() as usize);
    let end = loop {
        let action = controller.act(&obs, &env.snapshot(), env.terrain())?;
        match env.control_step(&action) {
            Ok(step) => {
                rows.push(step.row);
                if step.fell {
                    break EndReason::Fall;
                }
                if step.truncated {
                    break EndReason::Horizon;
                }
                obs = step.obs;
            }
            Err(Error::Diverged { .. }) => break EndReason::Diverged,
            Err(e) => return Err(e),
        }
    };
    Ok(EpisodeLog {
        rows,
        meta: LogMeta {
            seed,
            mass: scenario.model.mass,
            gravity: scenario.sim.gravity,
            terrain: env.terrain().clone(),
            end,
            control_dt: scenario.control_dt,
        },
    })
}
