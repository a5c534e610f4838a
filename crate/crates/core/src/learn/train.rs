//! Vectorized rollout collection, the training loop and checkpoints.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::Activation;
use super::ppo::{gaussian_sample, ppo_update, Adam, PolicyParams, PpoConfig, RolloutBuffer, UpdateStats};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "gaitlab-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Terminal state: no bootstrap.
    pub terminated: bool,
    /// Time limit reached: bootstrap from `obs`.
    pub truncated: bool,
}

/// Episodic environment with raw actions in (nominally) `[-1, 1]^act_dim`.
pub trait Env: Send {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64], rng: &mut ChaCha8Rng) -> Result<EnvStep>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Parallel environment instances; `batch_size` must be divisible by it.
    pub num_envs: usize,
    pub updates: usize,
    /// Worker threads for rollout collection (results do not depend on it).
    pub parallel: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ppo: PpoConfig::default(),
            hidden: vec![256, 256],
            activation: Activation::Tanh,
            num_envs: 8,
            updates: 100,
            parallel: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(format!("hidden sizes must be non-empty and positive, got {:?}", self.hidden)));
        }
        if self.num_envs == 0 || self.ppo.batch_size % self.num_envs != 0 {
            return Err(Error::Config(format!(
                "batch size {} is not divisible by num_envs {}",
                self.ppo.batch_size, self.num_envs
            )));
        }
        if self.parallel == 0 {
            return Err(Error::Config("parallel must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps_per_env(&self) -> usize {
        self.ppo.batch_size / self.num_envs
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    pub episodes: usize,
    /// Mean return of episodes that ended inside the rollout.
    pub mean_episode_return: Option<f64>,
    pub mean_step_reward: f64,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub update: usize,
    pub samples: u64,
    pub rollout: RolloutStats,
    pub stats: UpdateStats,
    /// Optional caller-supplied evaluation score.
    pub eval: Option<f64>,
}

fn run_parallel<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Every environment is reset, then stepped `steps` times under the stochastic
/// policy. Rows are env-major; the last row of each env closes its trace.
pub fn collect_rollout<E: Env>(
    params: &PolicyParams,
    envs: &mut [E],
    rngs: &mut [ChaCha8Rng],
    steps: usize,
    parallel: usize,
) -> Result<(RolloutBuffer, RolloutStats)> {
    let n_env = envs.len();
    let (obs_dim, act_dim) = (params.obs_dim(), params.act_dim());
    let total = n_env * steps;
    let mut buf = RolloutBuffer {
        observations: Array2::zeros((total, obs_dim)),
        actions: Array2::zeros((total, act_dim)),
        log_probs: vec![0.0; total],
        rewards: vec![0.0; total],
        values: vec![0.0; total],
        next_values: vec![0.0; total],
        dones: vec![false; total],
    };
    let mut current: Vec<Vec<f64>> = envs
        .iter_mut()
        .zip(rngs.iter_mut())
        .map(|(e, r)| e.reset(r))
        .collect::<Result<_>>()?;
    let mut ep_return = vec![0.0; n_env];
    let mut stats = RolloutStats::default();
    let mut finished_sum = 0.0;
    let ls = params.log_std.to_vec();

    for t in 0..steps {
        let obs_mat = stack(&current, obs_dim)?;
        let (mean, value) = params.evaluate(obs_mat.view())?;
        let mut actions = Vec::with_capacity(n_env);
        for e in 0..n_env {
            let (a, lp) = gaussian_sample(mean.row(e).as_slice().expect("row"), &ls, &mut rngs[e]);
            let row = e * steps + t;
            buf.observations.row_mut(row).assign(&obs_mat.row(e));
            buf.actions.row_mut(row).assign(&Array1::from(a.clone()));
            buf.log_probs[row] = lp;
            buf.values[row] = value[e];
            actions.push(a);
        }
        let results: Vec<Result<EnvStep>> = run_parallel(parallel, || {
            envs.par_iter_mut()
                .zip(rngs.par_iter_mut())
                .zip(actions.par_iter())
                .map(|((env, rng), a)| env.step(a, rng))
                .collect()
        });

        let mut bootstrap_rows = Vec::new();
        for (e, res) in results.into_iter().enumerate() {
            let row = e * steps + t;
            let (step, diverged) = match res {
                Ok(s) => (s, false),
                Err(err @ Error::Diverged { .. }) => {
                    log::warn!("environment {e} diverged at rollout step {t}: {err}; episode dropped");
                    stats.diverged += 1;
                    let stop = EnvStep {
                        obs: current[e].clone(),
                        reward: 0.0,
                        terminated: true,
                        truncated: false,
                    };
                    (stop, true)
                }
                Err(other) => return Err(other),
            };
            buf.rewards[row] = step.reward;
            ep_return[e] += step.reward;
            let last = t + 1 == steps;
            if step.terminated || step.truncated {
                if !diverged {
                    stats.episodes += 1;
                    finished_sum += ep_return[e];
                }
                ep_return[e] = 0.0;
                buf.dones[row] = true;
                if step.truncated && !step.terminated {
                    bootstrap_rows.push((row, step.obs.clone()));
                }
                current[e] = envs[e].reset(&mut rngs[e])?;
            } else {
                if last {
                    buf.dones[row] = true;
                    bootstrap_rows.push((row, step.obs.clone()));
                }
                current[e] = step.obs;
            }
        }
        if !bootstrap_rows.is_empty() {
            let obs: Vec<Vec<f64>> = bootstrap_rows.iter().map(|(_, o)| o.clone()).collect();
            let (_, v) = params.evaluate(stack(&obs, obs_dim)?.view())?;
            for (k, (row, _)) in bootstrap_rows.iter().enumerate() {
                buf.next_values[*row] = v[k];
            }
        }
    }
    for e in 0..n_env {
        for t in 0..steps.saturating_sub(1) {
            let row = e * steps + t;
            if !buf.dones[row] {
                buf.next_values[row] = buf.values[row + 1];
            }
        }
    }
    stats.mean_step_reward = buf.rewards.iter().sum::<f64>() / total.max(1) as f64;
    stats.mean_episode_return = (stats.episodes > 0).then(|| finished_sum / stats.episodes as f64);
    Ok((buf, stats))
}

fn stack(rows: &[Vec<f64>], dim: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((rows.len(), dim));
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::Shape { expected: dim, got: r.len() });
        }
        m.row_mut(i).assign(&ndarray::ArrayView1::from(r.as_slice()));
    }
    Ok(m)
}

/// Complete training state; serializes into a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trainer {
    pub params: PolicyParams,
    pub adam: Adam,
    pub update: usize,
    pub samples: u64,
    pub rng: ChaCha8Rng,
    pub env_rngs: Vec<ChaCha8Rng>,
    pub curve: Vec<CurvePoint>,
}

impl Trainer {
    /// Parameter init and optimizer shuffles draw from `seed`; env `i` draws from
    /// its own stream derived from `(seed, i)`.
    pub fn new(obs_scale: Vec<f64>, act_dim: usize, cfg: &TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = PolicyParams::new(obs_scale, act_dim, &cfg.hidden, cfg.activation, &mut rng)?;
        let adam = Adam::for_policy(&params);
        let env_rngs = (0..cfg.num_envs)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(1 + i as u64);
                r
            })
            .collect();
        Ok(Self {
            params,
            adam,
            update: 0,
            samples: 0,
            rng,
            env_rngs,
            curve: Vec::new(),
        })
    }

    /// One rollout plus one PPO update.
    pub fn step<E: Env>(&mut self, envs: &mut [E], cfg: &TrainConfig) -> Result<CurvePoint> {
        if envs.len() != self.env_rngs.len() {
            return Err(Error::Shape {
                expected: self.env_rngs.len(),
                got: envs.len(),
            });
        }
        let (buffer, rollout) = collect_rollout(&self.params, envs, &mut self.env_rngs, cfg.steps_per_env(), cfg.parallel)?;
        let stats = ppo_update(&mut self.params, &mut self.adam, &buffer, &cfg.ppo, &mut self.rng)?;
        self.update += 1;
        self.samples += buffer.len() as u64;
        let point = CurvePoint {
            update: self.update,
            samples: self.samples,
            rollout,
            stats,
            eval: None,
        };
        self.curve.push(point.clone());
        Ok(point)
    }

    /// Runs updates until `cfg.updates` is reached or `on_update` returns `true`.
    /// The callback may fill in `eval` on the last curve point.
    pub fn train<E: Env>(
        &mut self,
        envs: &mut [E],
        cfg: &TrainConfig,
        mut on_update: impl FnMut(&mut Trainer) -> Result<bool>,
    ) -> Result<()> {
        while self.update < cfg.updates {
            self.step(envs, cfg)?;
            if on_update(self)? {
                break;
            }
        }
        Ok(())
    }

    pub fn checkpoint(&self, meta: serde_json::Value) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            trainer: self.clone(),
            meta,
        }
    }
}

/// Versioned JSON container: layer shapes and weights, optimizer and RNG state,
/// learning curve, and caller metadata (action spec, observation config, scenario).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub trainer: Trainer,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let ck: Self = serde_json::from_reader(f)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                ck.format, ck.version
            )));
        }
        Ok(ck)
    }
}
