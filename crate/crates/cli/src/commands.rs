//! Subcommand implementations. Every command writes its outputs and a manifest into
//! the output directory.

use std::path::{Path, PathBuf};

use gaitlab::env::{run_episode, LocomotionEnv, Scenario};
use gaitlab::learn::{Checkpoint, Env, PointMassEnv, PolicyParams, Trainer};
use gaitlab::metrics::{compute_report, fit_quadratic, MetricsConfig, MetricsReport, REPORT_VERSION};
use gaitlab::reward::weight_grid;
use gaitlab::sensing::PRESET_NAMES;
use gaitlab::sim::{EndReason, EpisodeLog, TerrainKind as MapKind};
use gaitlab::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ControllerKind, ExperimentConfig, ScenarioConfig, TerrainKind};
use crate::manifest::Manifest;

/// Evaluation episodes during and after training draw from their own seed range so
/// they never coincide with training resets.
pub const EVAL_SEED_BASE: u64 = 10_000;

pub const CURVE_FILE: &str = "curve.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: Option<ExperimentConfig>,
    pub cfg_text: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; `None` keeps the config value.
    pub parallel: Option<usize>,
    /// Training sample budget; overrides `train.updates`.
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Outputs were written but this many episodes diverged.
    Diverged(usize),
    /// A replayed report disagrees with the stored one.
    Mismatch,
}

impl Context {
    fn cfg(&self) -> Result<&ExperimentConfig> {
        self.cfg.as_ref().ok_or_else(|| Error::Config("this command needs --config".into()))
    }

    fn threads(&self) -> usize {
        self.parallel
            .or(self.cfg.as_ref().map(|c| c.train.config.parallel))
            .unwrap_or(1)
            .max(1)
    }

    fn manifest(&self, command: &str) -> Manifest {
        Manifest::new(command, self.cfg_text.as_deref(), self.seed, self.threads(), self.budget)
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// The metrics report of a log; gap success is scored against the log's own terrain.
pub fn report_for(log: &EpisodeLog, metrics: &MetricsConfig) -> MetricsReport {
    let terrain = (log.meta.terrain.kind == MapKind::Gaps).then_some(&log.meta.terrain);
    compute_report(log, terrain, metrics)
}

pub struct Evaluated {
    pub seed: u64,
    pub log: EpisodeLog,
    pub report: MetricsReport,
}

/// One episode per seed; results are in seed order whatever the thread count.
pub fn evaluate(
    sc: &Scenario,
    ctrl: &ControllerKind,
    seeds: &[u64],
    metrics: &MetricsConfig,
    threads: usize,
) -> Result<Vec<Evaluated>> {
    let one = |&seed: &u64| -> Result<Evaluated> {
        let mut c = ctrl.controller();
        let log = run_episode(c.as_mut(), sc, seed)?;
        let report = report_for(&log, metrics);
        Ok(Evaluated { seed, log, report })
    };
    in_pool(threads, || seeds.par_iter().map(one).collect())
}

/// Means over episodes; optional metrics average the episodes where they are defined.
/// Diverged episodes are counted but left out of the means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub version: u32,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub falls: usize,
    pub diverged: usize,
    pub success_rate: Option<f64>,
    pub mean_velocity: Option<f64>,
    pub cot: Option<f64>,
    pub cv_stride_duration: Option<f64>,
    pub cv_stride_length: Option<f64>,
    pub mean_abs_angular_velocity: Option<f64>,
    pub mean_abs_lateral_dcm_offset: Option<f64>,
    pub peak_force: Option<f64>,
    pub excess_peak_force: Option<f64>,
    pub froude: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn aggregate(results: &[Evaluated]) -> AggregateReport {
    let ok: Vec<&MetricsReport> = results
        .iter()
        .filter(|e| e.log.meta.end != EndReason::Diverged)
        .map(|e| &e.report)
        .collect();
    let m = |f: &dyn Fn(&MetricsReport) -> Option<f64>| mean_of(ok.iter().map(|r| f(r)));
    AggregateReport {
        version: REPORT_VERSION,
        episodes: results.len(),
        seeds: results.iter().map(|e| e.seed).collect(),
        falls: results.iter().filter(|e| e.log.meta.end == EndReason::Fall).count(),
        diverged: results.len() - ok.len(),
        success_rate: m(&|r| r.success_rate),
        mean_velocity: m(&|r| Some(r.mean_velocity)),
        cot: m(&|r| r.cot),
        cv_stride_duration: m(&|r| r.cv_stride_duration),
        cv_stride_length: m(&|r| r.cv_stride_length),
        mean_abs_angular_velocity: m(&|r| Some(r.mean_abs_angular_velocity)),
        mean_abs_lateral_dcm_offset: m(&|r| r.mean_abs_lateral_dcm_offset),
        peak_force: m(&|r| Some(r.peak_force)),
        excess_peak_force: m(&|r| Some(r.excess_peak_force)),
        froude: m(&|r| Some(r.froude)),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn eval_scenario(cfg: &ExperimentConfig) -> Result<Scenario> {
    let mut sc = cfg.scenario.build()?;
    sc.horizon = cfg.eval.horizon;
    Ok(sc)
}

fn eval_seeds(n: usize) -> Vec<u64> {
    (0..n as u64).map(|k| EVAL_SEED_BASE + k).collect()
}

fn outcome(diverged: usize) -> Outcome {
    if diverged > 0 {
        Outcome::Diverged(diverged)
    } else {
        Outcome::Ok
    }
}

pub fn cmd_run(ctx: &Context) -> Result<Outcome> {
    let cfg = ctx.cfg()?;
    let sc = eval_scenario(cfg)?;
    let ctrl = cfg.controller.build(&sc, &cfg.train.config, ctx.seed)?;
    let seeds: Vec<u64> = (0..cfg.eval.episodes as u64).map(|k| ctx.seed + k).collect();
    std::fs::create_dir_all(&ctx.out)?;
    let results = evaluate(&sc, &ctrl, &seeds, &cfg.metrics, ctx.threads())?;
    for (k, e) in results.iter().enumerate() {
        e.log.save(&ctx.out.join(format!("episode_{k:03}.csv")))?;
        write_json(&ctx.out.join(format!("episode_{k:03}.report.json")), &e.report)?;
    }
    let agg = aggregate(&results);
    write_json(&ctx.out.join(REPORT_FILE), &agg)?;
    let mut man = ctx.manifest("run");
    man.seeds = seeds;
    man.write(&ctx.out)?;
    Ok(outcome(agg.diverged))
}

#[derive(Debug, Serialize)]
struct CurveRow {
    update: usize,
    samples: u64,
    episodes: usize,
    mean_episode_return: Option<f64>,
    mean_step_reward: f64,
    diverged: usize,
    mean_kl: f64,
    clip_fraction: f64,
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
    epochs_run: usize,
    eval: Option<f64>,
}

fn write_curve(path: &Path, trainer: &Trainer) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in &trainer.curve {
        w.serialize(CurveRow {
            update: p.update,
            samples: p.samples,
            episodes: p.rollout.episodes,
            mean_episode_return: p.rollout.mean_episode_return,
            mean_step_reward: p.rollout.mean_step_reward,
            diverged: p.rollout.diverged,
            mean_kl: p.stats.mean_kl,
            clip_fraction: p.stats.clip_fraction,
            policy_loss: p.stats.policy_loss,
            value_loss: p.stats.value_loss,
            entropy: p.stats.entropy,
            epochs_run: p.stats.epochs_run,
            eval: p.eval,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluation score used in learning curves: gap success rate on gap courses, mean
/// episode return on flat ground, and the fraction of the optimal return on the toy task.
pub fn eval_score(cfg: &ExperimentConfig, params: &PolicyParams, threads: usize) -> Result<f64> {
    let episodes = cfg.train.eval_episodes.max(1);
    if cfg.scenario.terrain == TerrainKind::Toy {
        return PointMassEnv::default().evaluate(params, episodes.max(2));
    }
    let sc = eval_scenario(cfg)?;
    let ctrl = ControllerKind::Policy(params.clone());
    let results = evaluate(&sc, &ctrl, &eval_seeds(episodes), &cfg.metrics, threads)?;
    Ok(match cfg.scenario.terrain {
        TerrainKind::Gaps => aggregate(&results).success_rate.unwrap_or(0.0),
        _ => results.iter().map(|e| e.log.rows.iter().map(|r| r.reward).sum::<f64>()).sum::<f64>() / results.len() as f64,
    })
}

/// Trains in `dir` (curve, periodic and final checkpoints) and returns the trainer.
pub fn train_in(ctx: &Context, cfg: &ExperimentConfig, dir: &Path, resume: Option<&Path>) -> Result<Trainer> {
    let mut tc = cfg.train.config.clone();
    tc.parallel = ctx.threads();
    if let Some(b) = ctx.budget {
        tc.updates = b.div_ceil(tc.ppo.batch_size as u64).max(1) as usize;
    }
    tc.validate()?;
    std::fs::create_dir_all(dir)?;
    match cfg.scenario.terrain {
        TerrainKind::Toy => {
            let mut envs = vec![PointMassEnv::default(); tc.num_envs];
            let obs_scale = vec![1.0; PointMassEnv::OBS_DIM];
            train_envs(ctx, cfg, &tc, &mut envs, obs_scale, 1, dir, resume, None)
        }
        _ => {
            let sc = cfg.scenario.build()?;
            let meta = serde_json::json!({
                "scenario": cfg.scenario,
                "action": sc.action,
                "observation": sc.observation,
            });
            let mut envs = (0..tc.num_envs)
                .map(|_| LocomotionEnv::new(sc.clone()))
                .collect::<Result<Vec<_>>>()?;
            let (scale, act_dim) = (sc.observation.scales(), sc.action.dim());
            train_envs(ctx, cfg, &tc, &mut envs, scale, act_dim, dir, resume, Some(meta))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn train_envs<E: Env>(
    ctx: &Context,
    cfg: &ExperimentConfig,
    tc: &gaitlab::learn::TrainConfig,
    envs: &mut [E],
    obs_scale: Vec<f64>,
    act_dim: usize,
    dir: &Path,
    resume: Option<&Path>,
    extra: Option<serde_json::Value>,
) -> Result<Trainer> {
    let mut trainer = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            // everything but the update count must match, or the continuation is a different run
            let without_updates = |v: Option<&serde_json::Value>| {
                v.cloned().map(|mut v| {
                    if let Some(o) = v.as_object_mut() {
                        o.remove("updates");
                    }
                    v
                })
            };
            let stored_train = without_updates(ck.meta.get("train"));
            let wanted_train = without_updates(Some(&serde_json::to_value(tc)?));
            let stored_extra = ck.meta.get("extra").cloned().unwrap_or(serde_json::Value::Null);
            let wanted_extra = extra.clone().unwrap_or(serde_json::Value::Null);
            let t = ck.trainer;
            if t.params.obs_dim() != obs_scale.len()
                || t.params.act_dim() != act_dim
                || t.env_rngs.len() != tc.num_envs
                || stored_train != wanted_train
                || stored_extra != wanted_extra
            {
                return Err(Error::Config(format!(
                    "checkpoint {} was trained with a different scenario or training config",
                    path.display()
                )));
            }
            t
        }
        None => Trainer::new(obs_scale, act_dim, tc, ctx.seed)?,
    };
    let meta = serde_json::json!({
        "seed": ctx.seed,
        "train": tc,
        "config": ctx.cfg_text,
        "extra": extra,
    });
    let (eval_every, ck_every) = (cfg.train.eval_every, cfg.train.checkpoint_every);
    let threads = ctx.threads();
    trainer.train(envs, tc, |t| {
        let last = t.update == tc.updates;
        if (eval_every > 0 && t.update % eval_every == 0) || last {
            let score = eval_score(cfg, &t.params, threads)?;
            if let Some(p) = t.curve.last_mut() {
                p.eval = Some(score);
            }
        }
        if let Some(p) = t.curve.last() {
            log::info!(
                "update {} samples {} return {:?} kl {:.4} eval {:?}",
                p.update,
                p.samples,
                p.rollout.mean_episode_return,
                p.stats.mean_kl,
                p.eval
            );
        }
        if ck_every > 0 && t.update % ck_every == 0 {
            t.checkpoint(meta.clone()).save(&dir.join(format!("checkpoint_{:05}.json", t.update)))?;
        }
        Ok(false)
    })?;
    write_curve(&dir.join(CURVE_FILE), &trainer)?;
    trainer.checkpoint(meta).save(&dir.join(CHECKPOINT_FILE))?;
    Ok(trainer)
}

pub fn cmd_train(ctx: &Context, resume: Option<&Path>) -> Result<Outcome> {
    let cfg = ctx.cfg()?;
    // diverged training episodes are terminated and logged, not fatal
    train_in(ctx, cfg, &ctx.out, resume)?;
    let mut man = ctx.manifest("train");
    man.seeds = vec![ctx.seed];
    man.write(&ctx.out)?;
    Ok(Outcome::Ok)
}

fn require_gaps(cfg: &ExperimentConfig, command: &str) -> Result<()> {
    if cfg.scenario.terrain != TerrainKind::Gaps {
        return Err(Error::Config(format!("{command} needs a gaps scenario")));
    }
    Ok(())
}

/// Trains one policy per sweep entry and evaluates it on held-out seeds.
fn train_and_evaluate(ctx: &Context, cfg: &ExperimentConfig, dir: &Path) -> Result<(AggregateReport, u64)> {
    let trainer = train_in(ctx, cfg, dir, None)?;
    let sc = eval_scenario(cfg)?;
    let ctrl = ControllerKind::Policy(trainer.params.clone());
    let results = evaluate(&sc, &ctrl, &eval_seeds(cfg.eval.episodes), &cfg.metrics, ctx.threads())?;
    let agg = aggregate(&results);
    write_json(&dir.join(REPORT_FILE), &agg)?;
    Ok((agg, trainer.samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSweepRow {
    pub case: usize,
    pub label: String,
    pub viability: String,
    pub cot_level: String,
    pub force_level: String,
    pub samples: u64,
    pub success_rate: Option<f64>,
    pub cot: Option<f64>,
    pub excess_peak_force: Option<f64>,
}

pub const REWARD_SWEEP_FILE: &str = "sweep_rewards.csv";
pub const OBSERVATION_SWEEP_FILE: &str = "sweep_observations.csv";

pub fn cmd_sweep_rewards(ctx: &Context) -> Result<Outcome> {
    let base = ctx.cfg()?;
    require_gaps(base, "sweep-rewards")?;
    std::fs::create_dir_all(&ctx.out)?;
    let mut w = csv::Writer::from_path(ctx.out.join(REWARD_SWEEP_FILE))?;
    let mut diverged = 0;
    for cell in weight_grid() {
        let mut cfg = base.clone();
        cfg.scenario.reward_case = cell.case;
        let (agg, samples) = train_and_evaluate(ctx, &cfg, &ctx.out.join(format!("case_{:02}", cell.case)))?;
        diverged += agg.diverged;
        w.serialize(RewardSweepRow {
            case: cell.case,
            label: cell.label(),
            viability: cell.viability.name().into(),
            cot_level: cell.cot.name().into(),
            force_level: cell.force.name().into(),
            samples,
            success_rate: agg.success_rate,
            cot: agg.cot,
            excess_peak_force: agg.excess_peak_force,
        })?;
        w.flush()?;
    }
    let mut man = ctx.manifest("sweep-rewards");
    man.seeds = std::iter::once(ctx.seed).chain(eval_seeds(base.eval.episodes)).collect();
    man.write(&ctx.out)?;
    Ok(outcome(diverged))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSweepRow {
    pub case: usize,
    pub preset: String,
    pub coupling: String,
    pub samples: u64,
    pub success_rate: Option<f64>,
    pub mean_abs_angular_velocity: Option<f64>,
    pub cv_stride_duration: Option<f64>,
    pub cv_stride_length: Option<f64>,
    pub cot: Option<f64>,
    pub mean_abs_lateral_dcm_offset: Option<f64>,
}

/// Cases 11–13 differ only in coupling, so the base config's `gait` is ignored and
/// every case trains with its preset's coupling.
pub fn cmd_sweep_observations(ctx: &Context) -> Result<Outcome> {
    let base = ctx.cfg()?;
    require_gaps(base, "sweep-observations")?;
    std::fs::create_dir_all(&ctx.out)?;
    let mut w = csv::Writer::from_path(ctx.out.join(OBSERVATION_SWEEP_FILE))?;
    let mut diverged = 0;
    for (i, name) in PRESET_NAMES.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.scenario.observation = Some(name.to_string());
        cfg.scenario.gait = None;
        let coupling = cfg.scenario.build()?.coupling;
        let (agg, samples) = train_and_evaluate(ctx, &cfg, &ctx.out.join(name))?;
        diverged += agg.diverged;
        w.serialize(ObservationSweepRow {
            case: i + 1,
            preset: name.to_string(),
            coupling: coupling.name().into(),
            samples,
            success_rate: agg.success_rate,
            mean_abs_angular_velocity: agg.mean_abs_angular_velocity,
            cv_stride_duration: agg.cv_stride_duration,
            cv_stride_length: agg.cv_stride_length,
            cot: agg.cot,
            mean_abs_lateral_dcm_offset: agg.mean_abs_lateral_dcm_offset,
        })?;
        w.flush()?;
    }
    let mut man = ctx.manifest("sweep-observations");
    man.seeds = std::iter::once(ctx.seed).chain(eval_seeds(base.eval.episodes)).collect();
    man.write(&ctx.out)?;
    Ok(outcome(diverged))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedGaitRow {
    pub scale: f64,
    pub mean_velocity: Option<f64>,
    pub cot: Option<f64>,
    pub viable: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitFit {
    /// Viable `(velocity, CoT)` points.
    pub points: Vec<(f64, f64)>,
    /// `c0 + c1·v + c2·v²`.
    pub coefficients: Option<[f64; 3]>,
    pub error: Option<String>,
}

pub const EXTENDED_GAIT_FILE: &str = "extended_gait.csv";
pub const FIT_FILE: &str = "fit.json";
pub const DEFAULT_SCALES: [f64; 5] = [0.6, 0.8, 1.0, 1.2, 1.4];

/// Replays a frozen policy with the stride length scaled. Scenario settings come from
/// `--config` when given, otherwise from the checkpoint.
pub fn cmd_extended_gait(ctx: &Context, checkpoint: &Path, scales: &[f64]) -> Result<Outcome> {
    let ck = Checkpoint::load(checkpoint)?;
    let (scenario_cfg, eval, metrics) = match &ctx.cfg {
        Some(c) => (c.scenario.clone(), c.eval.clone(), c.metrics),
        None => {
            let sc: ScenarioConfig = ck
                .meta
                .pointer("/extra/scenario")
                .cloned()
                .map(serde_json::from_value)
                .transpose()?
                .ok_or_else(|| Error::Config("checkpoint has no scenario; pass --config".into()))?;
            (sc, Default::default(), MetricsConfig::default())
        }
    };
    let params = ck.trainer.params;
    let ctrl = ControllerKind::Policy(params);
    std::fs::create_dir_all(&ctx.out)?;
    let seeds: Vec<u64> = (0..eval.episodes as u64).map(|k| ctx.seed + k).collect();
    let mut rows = Vec::new();
    let mut diverged = 0;
    for &scale in scales {
        if !(scale > 0.0) || !scale.is_finite() {
            rows.push(ExtendedGaitRow {
                scale,
                mean_velocity: None,
                cot: None,
                viable: false,
                note: "degenerate stride".into(),
            });
            continue;
        }
        let mut scfg = scenario_cfg.clone();
        scfg.l_step_scale = scale;
        let mut sc = scfg.build()?;
        sc.horizon = eval.horizon;
        if ctrl_dims(&ctrl) != (sc.observation.len(), sc.action.dim()) {
            return Err(Error::Config("checkpoint does not match the scenario's observation or action size".into()));
        }
        let results = evaluate(&sc, &ctrl, &seeds, &metrics, ctx.threads())?;
        let agg = aggregate(&results);
        diverged += agg.diverged;
        let note = if agg.falls + agg.diverged > 0 {
            "fall".to_string()
        } else if agg.cot.is_none() {
            "no forward progress".to_string()
        } else {
            String::new()
        };
        rows.push(ExtendedGaitRow {
            scale,
            mean_velocity: agg.mean_velocity,
            cot: agg.cot,
            viable: note.is_empty(),
            note,
        });
    }
    let mut w = csv::Writer::from_path(ctx.out.join(EXTENDED_GAIT_FILE))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.viable)
        .filter_map(|r| Some((r.mean_velocity?, r.cot?)))
        .collect();
    let fit = match fit_quadratic(&points) {
        Ok(c) => GaitFit { points, coefficients: Some(c), error: None },
        Err(e) => GaitFit { points, coefficients: None, error: Some(e.to_string()) },
    };
    write_json(&ctx.out.join(FIT_FILE), &fit)?;
    let mut man = ctx.manifest("extended-gait");
    man.seeds = seeds;
    man.write(&ctx.out)?;
    Ok(outcome(diverged))
}

fn ctrl_dims(c: &ControllerKind) -> (usize, usize) {
    match c {
        ControllerKind::Policy(p) => (p.obs_dim(), p.act_dim()),
        _ => (0, 0),
    }
}

/// Largest absolute difference between numeric leaves of two JSON documents, or
/// `None` when their structure or non-numeric leaves differ.
pub fn json_max_diff(a: &serde_json::Value, b: &serde_json::Value) -> Option<f64> {
    use serde_json::Value::*;
    match (a, b) {
        (Number(x), Number(y)) => Some((x.as_f64()? - y.as_f64()?).abs()),
        (Array(x), Array(y)) if x.len() == y.len() => {
            x.iter().zip(y).try_fold(0.0, |m: f64, (p, q)| Some(m.max(json_max_diff(p, q)?)))
        }
        (Object(x), Object(y)) if x.len() == y.len() => x
            .iter()
            .try_fold(0.0, |m: f64, (k, p)| Some(m.max(json_max_diff(p, y.get(k)?)?))),
        _ => (a == b).then_some(0.0),
    }
}

pub const REPLAY_TOLERANCE: f64 = 1e-9;

/// Recomputes the report of a logged episode. Metric settings come from `--config`,
/// else from a manifest next to the log, else the defaults. The result is compared
/// with `against` (default: the `<stem>.report.json` beside the log, if any).
pub fn cmd_replay(ctx: &Context, log_path: &Path, against: Option<&Path>) -> Result<Outcome> {
    let metrics = match &ctx.cfg {
        Some(c) => c.metrics,
        None => log_path
            .parent()
            .and_then(|d| Manifest::read(d).ok())
            .and_then(|m| m.config)
            .map(|text| ExperimentConfig::parse(&text))
            .transpose()?
            .map(|c| c.metrics)
            .unwrap_or_default(),
    };
    let log = EpisodeLog::load(log_path)?;
    let report = report_for(&log, &metrics);
    let text = serde_json::to_string_pretty(&report)?;
    if ctx.out.as_os_str().is_empty() {
        println!("{text}");
    } else {
        std::fs::create_dir_all(&ctx.out)?;
        std::fs::write(ctx.out.join(REPORT_FILE), &text)?;
        ctx.manifest("replay").write(&ctx.out)?;
    }
    let sibling = log_path.with_extension("report.json");
    let stored = match against {
        Some(p) => Some(p.to_path_buf()),
        None => sibling.exists().then_some(sibling),
    };
    if let Some(path) = stored {
        let old: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        let new = serde_json::to_value(&report)?;
        match json_max_diff(&old, &new) {
            Some(d) if d <= REPLAY_TOLERANCE => {
                eprintln!("report matches {} (max difference {d:e})", path.display());
            }
            Some(d) => {
                eprintln!("report differs from {}: max difference {d:e}", path.display());
                return Ok(Outcome::Mismatch);
            }
            None => {
                eprintln!("report differs from {} in structure or flags", path.display());
                return Ok(Outcome::Mismatch);
            }
        }
    }
    Ok(Outcome::Ok)
}
