//! Experiment configuration files (TOML). Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use gaitlab::cpg::{CpgDrives, Gait};
use gaitlab::env::{Controller, PolicyController, RewardSpec, Scenario, TerrainSpec};
use gaitlab::learn::{ActionSpec, Checkpoint, FrequencyBound, PolicyParams, TrainConfig, Trainer};
use gaitlab::metrics::MetricsConfig;
use gaitlab::reward::{weight_grid, RewardWeightsFlat};
use gaitlab::scripted::{ConstantDrives, GapSchedule};
use gaitlab::sensing::preset;
use gaitlab::sim::GapCourse;
use gaitlab::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerrainKind {
    Flat,
    Gaps,
    /// One-dimensional velocity-tracking point mass; `train` only.
    Toy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub terrain: TerrainKind,
    /// Oscillator coupling; defaults to trot on flat ground and to the observation
    /// preset's coupling on gaps.
    #[serde(default)]
    pub gait: Option<Gait>,
    /// Observation preset name; defaults to `blind` on flat ground and
    /// `case-01-feet-dist` on gaps.
    #[serde(default)]
    pub observation: Option<String>,
    /// Reward-grid case (1–27) for gaps.
    #[serde(default = "default_reward_case")]
    pub reward_case: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// Desired-velocity range; defaults to the frequency-bound range of the gait on
    /// flat ground and to zero on gaps.
    #[serde(default)]
    pub v_des: Option<(f64, f64)>,
    #[serde(default = "one")]
    pub l_step_scale: f64,
    #[serde(default)]
    pub gaps: GapCourse,
}

fn default_reward_case() -> usize {
    19
}

fn default_horizon() -> f64 {
    10.0
}

fn one() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario> {
        let mut sc = match self.terrain {
            TerrainKind::Toy => return Err(Error::Config("the toy environment has no locomotion scenario".into())),
            TerrainKind::Flat => {
                let gait = self.gait.unwrap_or(Gait::Trot);
                let bound = if gait == Gait::Walk { FrequencyBound::WALK } else { FrequencyBound::TROT };
                let mut sc = Scenario::flat(gait, bound);
                sc.v_des_range = self.v_des.unwrap_or((bound.v_min, bound.v_max));
                sc.reward = RewardSpec::Flat(RewardWeightsFlat::default());
                sc
            }
            TerrainKind::Gaps => {
                let mut sc = Scenario::gaps(TerrainSpec::Random { course: self.gaps });
                if let Some(v) = self.v_des {
                    sc.v_des_range = v;
                }
                let cell = weight_grid()
                    .into_iter()
                    .find(|c| c.case == self.reward_case)
                    .ok_or_else(|| Error::Config(format!("reward_case must lie in 1..=27, got {}", self.reward_case)))?;
                sc.reward = RewardSpec::Gap(cell.weights);
                sc
            }
        };
        let name = self.observation.clone().unwrap_or_else(|| match self.terrain {
            TerrainKind::Gaps => "case-01-feet-dist".into(),
            _ => "blind".into(),
        });
        let p = preset(&name, sc.action.dim())?;
        sc.observation = p.config;
        sc.coupling = match (self.gait, self.terrain) {
            (Some(g), _) => g,
            (None, TerrainKind::Gaps) => p.coupling,
            (None, _) => sc.coupling,
        };
        sc.horizon = self.horizon;
        sc.l_step_scale = self.l_step_scale;
        sc.validate()?;
        Ok(sc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerConfig {
    /// Mean action of a policy; untrained (seeded initialization) without a checkpoint.
    Policy {
        #[serde(default)]
        checkpoint: Option<PathBuf>,
    },
    /// Fixed drives; `frequency` in Hz.
    Constant {
        mu: f64,
        frequency: f64,
        #[serde(default)]
        x_off: [f64; 4],
    },
    GapSchedule(GapSchedule),
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig::Policy { checkpoint: None }
    }
}

/// A controller that can be cloned per evaluation episode.
#[derive(Debug, Clone)]
pub enum ControllerKind {
    Policy(PolicyParams),
    Constant(ConstantDrives),
    GapSchedule(GapSchedule),
}

impl ControllerKind {
    pub fn controller(&self) -> Box<dyn Controller + '_> {
        match self {
            ControllerKind::Policy(p) => Box::new(PolicyController { params: p }),
            ControllerKind::Constant(c) => Box::new(*c),
            ControllerKind::GapSchedule(s) => Box::new(*s),
        }
    }
}

impl ControllerConfig {
    pub fn build(&self, sc: &Scenario, train: &TrainConfig, seed: u64) -> Result<ControllerKind> {
        Ok(match self {
            ControllerConfig::Policy { checkpoint: Some(path) } => {
                let params = load_policy(path)?;
                if params.obs_dim() != sc.observation.len() || params.act_dim() != sc.action.dim() {
                    return Err(Error::Config(format!(
                        "checkpoint {} expects {} observations and {} actions; the scenario has {} and {}",
                        path.display(),
                        params.obs_dim(),
                        params.act_dim(),
                        sc.observation.len(),
                        sc.action.dim()
                    )));
                }
                ControllerKind::Policy(params)
            }
            ControllerConfig::Policy { checkpoint: None } => {
                // same initialization a training run with this seed starts from
                ControllerKind::Policy(Trainer::new(sc.observation.scales(), sc.action.dim(), train, seed)?.params)
            }
            ControllerConfig::Constant { mu, frequency, x_off } => {
                let a = sc.action;
                let omega = frequency * std::f64::consts::TAU;
                let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
                if !inside(*mu, a.mu) || !inside(omega, a.omega) || !x_off.iter().all(|&x| inside(x, a.x_off)) {
                    return Err(Error::Config(format!(
                        "constant drives outside the action bounds: mu in [{}, {}], frequency in [{}, {:.3}] Hz, x_off in [{}, {}]",
                        a.mu.0,
                        a.mu.1,
                        a.omega.0 / std::f64::consts::TAU,
                        a.omega.1 / std::f64::consts::TAU,
                        a.x_off.0,
                        a.x_off.1
                    )));
                }
                ControllerKind::Constant(ConstantDrives::new(CpgDrives::uniform(*mu, omega), *x_off, a))
            }
            ControllerConfig::GapSchedule(s) => {
                let mut s = *s;
                s.spec = gap_spec(sc)?;
                ControllerKind::GapSchedule(s)
            }
        })
    }
}

fn gap_spec(sc: &Scenario) -> Result<ActionSpec> {
    if sc.action.dim() != 12 {
        return Err(Error::Config("the gap schedule needs the gap action space".into()));
    }
    Ok(sc.action)
}

pub fn load_policy(path: &Path) -> Result<PolicyParams> {
    Ok(Checkpoint::load(path)?.trainer.params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    /// Evaluation episode length, s; training episodes use `scenario.horizon`.
    pub horizon: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 7, horizon: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    #[serde(flatten)]
    pub config: TrainConfig,
    /// Updates between evaluations; 0 disables them.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Updates between intermediate checkpoints; 0 keeps only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            config: TrainConfig::default(),
            eval_every: 10,
            eval_episodes: 10,
            checkpoint_every: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.terrain != TerrainKind::Toy {
            self.scenario.build()?;
        }
        self.train.config.validate()?;
        if self.eval.episodes == 0 || !(self.eval.horizon > 0.0) {
            return Err(Error::Config("eval.episodes and eval.horizon must be positive".into()));
        }
        if !(self.metrics.debounce > 0.0 && self.metrics.froude_height > 0.0) {
            return Err(Error::Config("metrics debounce and froude_height must be positive".into()));
        }
        Ok(())
    }
}
