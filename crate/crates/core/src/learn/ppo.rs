//! Gaussian actor–critic, generalized advantage estimation and the clipped PPO update.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp, MlpGrads};
use crate::error::{Error, Result};

const HALF_LOG_TWO_PI: f64 = 0.918_938_533_204_672_7;
pub const LOG_STD_MIN: f64 = -4.0;
pub const LOG_STD_MAX: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub clip: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub desired_kl: f64,
    pub learning_rate: f64,
    /// Global gradient-norm ceiling per minibatch step; `None` disables it.
    pub max_grad_norm: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            batch_size: 4096,
            minibatch_size: 128,
            epochs: 10,
            clip: 0.2,
            entropy_coef: 0.01,
            value_coef: 1.0,
            gamma: 0.99,
            lambda: 0.95,
            desired_kl: 0.01,
            learning_rate: 1e-4,
            max_grad_norm: Some(1.0),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.gamma, self.lambda, self.desired_kl];
        if self.batch_size == 0 || self.minibatch_size == 0 || self.epochs == 0 || self.minibatch_size > self.batch_size {
            return Err(Error::Config("batch, minibatch and epochs must be positive with minibatch ≤ batch".into()));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::Config(format!("clip must lie in (0, 1), got {}", self.clip)));
        }
        if pos.iter().any(|v| !(*v > 0.0)) || self.gamma > 1.0 || self.lambda > 1.0 {
            return Err(Error::Config("gamma, lambda in (0, 1] and desired_kl > 0 required".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.entropy_coef >= 0.0) || !(self.value_coef >= 0.0) {
            return Err(Error::Config("learning rate and loss coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

/// Separate actor and critic networks with a state-independent log-std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
    pub log_std: Array1<f64>,
    /// Fixed divisors applied to observations before the networks.
    pub obs_scale: Array1<f64>,
}

impl PolicyParams {
    pub fn new<R: Rng + ?Sized>(
        obs_scale: Vec<f64>,
        act_dim: usize,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if obs_scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("observation scales must be positive".into()));
        }
        let obs_dim = obs_scale.len();
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        Ok(Self {
            actor: Mlp::new(&sizes(act_dim), activation, 0.01, rng)?,
            critic: Mlp::new(&sizes(1), activation, 1.0, rng)?,
            log_std: Array1::zeros(act_dim),
            obs_scale: Array1::from(obs_scale),
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_scale.len()
    }

    pub fn act_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn normalize(&self, obs: ArrayView2<f64>) -> Result<Array2<f64>> {
        if obs.ncols() != self.obs_dim() {
            return Err(Error::Shape {
                expected: self.obs_dim(),
                got: obs.ncols(),
            });
        }
        Ok(&obs / &self.obs_scale)
    }

    /// Action means and values for a batch of raw observations.
    pub fn evaluate(&self, obs: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
        let x = self.normalize(obs)?;
        let mean = self.actor.predict(x.view())?;
        let value = self.critic.predict(x.view())?.column(0).to_owned();
        Ok((mean, value))
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.actor.tensors_mut();
        t.extend(self.critic.tensors_mut());
        t.push(self.log_std.as_slice_mut().expect("standard layout"));
        t
    }
}

/// Action mean and value for a single observation.
pub fn mlp_forward(params: &PolicyParams, obs: &[f64]) -> Result<(Vec<f64>, f64)> {
    let view = ArrayView2::from_shape((1, obs.len()), obs).map_err(|_| Error::Shape {
        expected: params.obs_dim(),
        got: obs.len(),
    })?;
    let (mean, value) = params.evaluate(view)?;
    Ok((mean.into_raw_vec_and_offset().0, value[0]))
}

pub fn gaussian_log_prob(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((a, m), s)| {
            let z = (a - m) * (-s).exp();
            -0.5 * z * z - s - HALF_LOG_TWO_PI
        })
        .sum()
}

/// Diagonal Gaussian sample and its log-density.
pub fn gaussian_sample<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, s)| {
            let z: f64 = StandardNormal.sample(rng);
            m + s.exp() * z
        })
        .collect();
    let lp = gaussian_log_prob(&action, mean, log_std);
    (action, lp)
}

/// Deterministic action (the distribution mode).
pub fn gaussian_mode(mean: &[f64]) -> Vec<f64> {
    mean.to_vec()
}

/// Advantages and returns. `next_values[t]` is the bootstrap value after step `t`
/// (zero for true terminals); `dones[t]` cuts the advantage trace after step `t`.
pub fn gae(rewards: &[f64], values: &[f64], next_values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    for len in [values.len(), next_values.len(), dones.len()] {
        if len != n {
            return Err(Error::Shape { expected: n, got: len });
        }
    }
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        if dones[t] {
            running = 0.0;
        }
        let delta = rewards[t] + gamma * next_values[t] - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Transitions ready for an update, row-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub observations: Array2<f64>,
    pub actions: Array2<f64>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    pub dones: Vec<bool>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for len in [
            self.observations.nrows(),
            self.actions.nrows(),
            self.log_probs.len(),
            self.values.len(),
            self.next_values.len(),
            self.dones.len(),
        ] {
            if len != n {
                return Err(Error::Shape { expected: n, got: len });
            }
        }
        Ok(())
    }
}

/// Adam over a flat list of tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: shapes.iter().map(|n| vec![0.0; *n]).collect(),
            v: shapes.iter().map(|n| vec![0.0; *n]).collect(),
        }
    }

    pub fn for_policy(p: &PolicyParams) -> Self {
        let mut p = p.clone();
        let shapes: Vec<usize> = p.tensors_mut().iter().map(|t| t.len()).collect();
        Self::new(&shapes)
    }

    pub fn update(&mut self, params: Vec<&mut [f64]>, grads: &[Vec<f64>], lr: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (t, p) in params.into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[t], &mut self.v[t], &grads[t]);
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                p[k] -= lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub epochs_run: usize,
}

/// Per-sample clipped surrogate `min(ρA, clip(ρ, 1 ± ε)A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

fn entropy(log_std: &Array1<f64>) -> f64 {
    log_std.iter().map(|s| s + 0.5 + HALF_LOG_TWO_PI).sum()
}

/// Mean surrogate, clip fraction and `k3` KL estimate of `params` on a batch.
pub fn surrogate_stats(
    params: &PolicyParams,
    obs: ArrayView2<f64>,
    actions: ArrayView2<f64>,
    old_log_probs: &[f64],
    advantages: &[f64],
    clip: f64,
) -> Result<(f64, f64, f64)> {
    let (mean, _) = params.evaluate(obs)?;
    let ls = params.log_std.as_slice().expect("standard layout");
    let n = advantages.len() as f64;
    let (mut surr, mut clipped, mut kl) = (0.0, 0.0, 0.0);
    for i in 0..advantages.len() {
        let lp = gaussian_log_prob(&actions.row(i).to_vec(), &mean.row(i).to_vec(), ls);
        let log_ratio = lp - old_log_probs[i];
        let ratio = log_ratio.exp();
        surr += clipped_surrogate(ratio, advantages[i], clip);
        if (ratio - 1.0).abs() > clip {
            clipped += 1.0;
        }
        kl += ratio - 1.0 - log_ratio;
    }
    Ok((surr / n, clipped / n, kl / n))
}

/// Advantages normalized to zero mean and unit variance (centred only when flat).
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let scale = if std > 1e-8 { 1.0 / std } else { 1.0 };
    adv.iter().map(|a| (a - mean) * scale).collect()
}

fn flatten_grads(actor: &MlpGrads, critic: &MlpGrads, log_std: Vec<f64>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = actor.tensors().iter().map(|t| t.to_vec()).collect();
    out.extend(critic.tensors().iter().map(|t| t.to_vec()));
    out.push(log_std);
    out
}

/// Clipped-surrogate PPO with an entropy bonus and a squared-error value loss.
/// The epoch loop stops early once the batch KL exceeds 1.5 × `desired_kl`.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    adam: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats> {
    buffer.validate()?;
    let (adv_raw, returns) = gae(&buffer.rewards, &buffer.values, &buffer.next_values, &buffer.dones, cfg.gamma, cfg.lambda)?;
    let adv = normalize_advantages(&adv_raw);
    let n = buffer.len();
    let mb = cfg.minibatch_size.min(n);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut stats = UpdateStats::default();
    let act_dim = params.act_dim();

    for _ in 0..cfg.epochs {
        idx.shuffle(rng);
        let (mut pl_sum, mut vl_sum, mut count) = (0.0, 0.0, 0usize);
        for chunk in idx.chunks(mb) {
            let m = chunk.len();
            let obs = buffer.observations.select(Axis(0), chunk);
            let acts = buffer.actions.select(Axis(0), chunk);
            let x = params.normalize(obs.view())?;
            let (mean, actor_cache) = params.actor.forward_batch(x.view())?;
            let (value, critic_cache) = params.critic.forward_batch(x.view())?;
            let inv_var: Vec<f64> = params.log_std.iter().map(|s| (-2.0 * s).exp()).collect();
            let ls = params.log_std.to_vec();

            let mut g_mean = Array2::<f64>::zeros((m, act_dim));
            let mut g_log_std = vec![0.0; act_dim];
            let mut g_value = Array2::<f64>::zeros((m, 1));
            let mut policy_loss = 0.0;
            let mut value_loss = 0.0;
            for (r, &i) in chunk.iter().enumerate() {
                let a = acts.row(r);
                let mu = mean.row(r);
                let lp = gaussian_log_prob(&a.to_vec(), &mu.to_vec(), &ls);
                let ratio = (lp - buffer.log_probs[i]).exp();
                let ai = adv[i];
                policy_loss -= clipped_surrogate(ratio, ai, cfg.clip);
                // gradient flows only while the unclipped branch is active
                let active = (ai >= 0.0 && ratio < 1.0 + cfg.clip) || (ai < 0.0 && ratio > 1.0 - cfg.clip);
                if active {
                    let coeff = -ratio * ai / m as f64;
                    for k in 0..act_dim {
                        let d = a[k] - mu[k];
                        g_mean[[r, k]] = coeff * d * inv_var[k];
                        g_log_std[k] += coeff * (d * d * inv_var[k] - 1.0);
                    }
                }
                let dv = value[[r, 0]] - returns[i];
                value_loss += dv * dv;
                g_value[[r, 0]] = cfg.value_coef * 2.0 * dv / m as f64;
            }
            for g in &mut g_log_std {
                *g -= cfg.entropy_coef;
            }
            let actor_grads = params.actor.backward(&actor_cache, g_mean.view());
            let critic_grads = params.critic.backward(&critic_cache, g_value.view());
            let mut grads = flatten_grads(&actor_grads, &critic_grads, g_log_std);
            if let Some(max_norm) = cfg.max_grad_norm {
                let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    let s = max_norm / norm;
                    grads.iter_mut().flatten().for_each(|g| *g *= s);
                }
            }
            adam.update(params.tensors_mut(), &grads, cfg.learning_rate);
            params.log_std.mapv_inplace(|s| s.clamp(LOG_STD_MIN, LOG_STD_MAX));

            pl_sum += policy_loss / m as f64;
            vl_sum += value_loss / m as f64;
            count += 1;
        }
        stats.epochs_run += 1;
        stats.policy_loss = pl_sum / count as f64;
        stats.value_loss = vl_sum / count as f64;
        let (_, clip_frac, kl) = surrogate_stats(
            params,
            buffer.observations.view(),
            buffer.actions.view(),
            &buffer.log_probs,
            &adv,
            cfg.clip,
        )?;
        stats.mean_kl = kl;
        stats.clip_fraction = clip_frac;
        if kl > 1.5 * cfg.desired_kl {
            break;
        }
    }
    stats.entropy = entropy(&params.log_std);
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// O(T²) discounted sums of TD errors.
    fn brute_force_gae(r: &[f64], v: &[f64], nv: &[f64], d: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
        (0..r.len())
            .map(|t| {
                let mut sum = 0.0;
                let mut w = 1.0;
                for k in t..r.len() {
                    sum += w * (r[k] + gamma * nv[k] - v[k]);
                    if d[k] {
                        break;
                    }
                    w *= gamma * lambda;
                }
                sum
            })
            .collect()
    }

    #[test]
    fn gae_examples() {
        let (a, ret) = gae(&[1.0], &[0.5], &[2.0], &[false], 1.0, 1.0).unwrap();
        assert_eq!(a, vec![2.5]);
        assert_eq!(ret, vec![3.0]);
        let r = [1.0, 0.0, -1.0];
        let v = [0.2, 0.4, 0.1];
        let nv = [0.4, 0.1, 0.7];
        let (a, _) = gae(&r, &v, &nv, &[false; 3], 0.9, 0.0).unwrap();
        for t in 0..3 {
            assert_abs_diff_eq!(a[t], r[t] + 0.9 * nv[t] - v[t], epsilon = 1e-15);
        }
        assert!(gae(&r, &v, &nv[..2], &[false; 3], 0.9, 0.0).is_err());
    }

    #[test]
    fn gae_random_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 50;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nv: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let (a, _) = gae(&r, &v, &nv, &d, 0.99, 0.95).unwrap();
        for (x, y) in a.iter().zip(brute_force_gae(&r, &v, &nv, &d, 0.99, 0.95)) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn log_prob_at_mean() {
        let ls = [0.3, -0.5];
        let lp = gaussian_log_prob(&[1.0, 2.0], &[1.0, 2.0], &ls);
        assert_abs_diff_eq!(lp, -(0.3 + HALF_LOG_TWO_PI) - (-0.5 + HALF_LOG_TWO_PI), epsilon = 1e-14);
        assert_abs_diff_eq!(HALF_LOG_TWO_PI, 0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);
    }

    #[test]
    fn sample_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mean, ls) = ([0.5, -1.0], [(0.2f64).ln(), (1.5f64).ln()]);
        let n = 100_000;
        let mut sums = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let (a, _) = gaussian_sample(&mean, &ls, &mut rng);
            for k in 0..2 {
                sums[k] += a[k];
                sq[k] += a[k] * a[k];
            }
        }
        for k in 0..2 {
            let sigma = ls[k].exp();
            let m = sums[k] / n as f64;
            let sd = (sq[k] / n as f64 - m * m).sqrt();
            assert!((m - mean[k]).abs() < 3.0 * sigma / (n as f64).sqrt());
            // std of the sample std ≈ σ / √(2n)
            assert!((sd - sigma).abs() < 3.0 * sigma / (2.0 * n as f64).sqrt());
        }
        // vanishing spread collapses onto the mean
        let (a, _) = gaussian_sample(&mean, &[-60.0, -60.0], &mut rng);
        assert_abs_diff_eq!(a[0], mean[0], epsilon = 1e-20);
        assert_eq!(gaussian_mode(&mean), mean.to_vec());
    }

    #[test]
    fn surrogate_clip_example() {
        assert_abs_diff_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
        assert_abs_diff_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
        assert_abs_diff_eq!(clipped_surrogate(1.0, 3.0, 0.2), 3.0);
    }

    fn synthetic(seed: u64, obs_dim: usize, act_dim: usize, n: usize) -> (PolicyParams, RolloutBuffer) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = PolicyParams::new(vec![1.0; obs_dim], act_dim, &[16, 16], Activation::Tanh, &mut rng).unwrap();
        let obs = Array2::from_shape_simple_fn((n, obs_dim), || rng.random_range(-1.0..1.0));
        let (mean, values) = params.evaluate(obs.view()).unwrap();
        let ls = params.log_std.to_vec();
        let mut actions = Array2::zeros((n, act_dim));
        let mut log_probs = vec![];
        for i in 0..n {
            let (a, lp) = gaussian_sample(&mean.row(i).to_vec(), &ls, &mut rng);
            actions.row_mut(i).assign(&Array1::from(a));
            log_probs.push(lp);
        }
        let rewards = (0..n).map(|i| actions[[i, 0]] - 0.5 * actions[[i, 1]].powi(2)).collect();
        let buffer = RolloutBuffer {
            observations: obs,
            actions,
            log_probs,
            rewards,
            values: values.to_vec(),
            next_values: vec![0.0; n],
            dones: vec![true; n],
        };
        (params, buffer)
    }

    #[test]
    fn unchanged_params_have_unit_ratio() {
        let (params, buf) = synthetic(3, 4, 2, 64);
        let adv = vec![1.0; 64];
        let (surr, clip, kl) = surrogate_stats(&params, buf.observations.view(), buf.actions.view(), &buf.log_probs, &adv, 0.2).unwrap();
        assert_abs_diff_eq!(surr, 1.0, epsilon = 1e-12);
        assert_eq!(clip, 0.0);
        assert_abs_diff_eq!(kl, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn update_improves_surrogate() {
        let (mut params, buf) = synthetic(4, 4, 2, 256);
        let before = params.clone();
        let cfg = PpoConfig {
            batch_size: 256,
            minibatch_size: 64,
            epochs: 1,
            learning_rate: 1e-3,
            entropy_coef: 0.0,
            ..PpoConfig::default()
        };
        let (adv, _) = gae(&buf.rewards, &buf.values, &buf.next_values, &buf.dones, cfg.gamma, cfg.lambda).unwrap();
        let adv = normalize_advantages(&adv);
        let mut adam = Adam::for_policy(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        ppo_update(&mut params, &mut adam, &buf, &cfg, &mut rng).unwrap();
        let s = |p: &PolicyParams| surrogate_stats(p, buf.observations.view(), buf.actions.view(), &buf.log_probs, &adv, 0.2).unwrap().0;
        assert!(s(&params) > s(&before), "{} vs {}", s(&params), s(&before));
    }

    #[test]
    fn zero_lr_and_zero_signal_leave_params() {
        let (mut params, buf) = synthetic(6, 3, 2, 128);
        let before = params.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = PpoConfig {
            batch_size: 128,
            minibatch_size: 32,
            learning_rate: 0.0,
            ..PpoConfig::default()
        };
        let mut adam = Adam::for_policy(&params);
        ppo_update(&mut params, &mut adam, &buf, &cfg, &mut rng).unwrap();
        assert_eq!(params, before);

        // zero advantages (rewards equal to the value targets) and no entropy bonus
        let mut flat = buf.clone();
        flat.rewards = flat.values.clone();
        let cfg = PpoConfig {
            batch_size: 128,
            minibatch_size: 32,
            entropy_coef: 0.0,
            ..PpoConfig::default()
        };
        let mut params = before.clone();
        let mut adam = Adam::for_policy(&params);
        ppo_update(&mut params, &mut adam, &flat, &cfg, &mut rng).unwrap();
        assert_eq!(params.actor, before.actor);
        assert_eq!(params.log_std, before.log_std);
    }

    #[test]
    fn config_validation() {
        assert!(PpoConfig::default().validate().is_ok());
        assert!(PpoConfig { clip: 1.0, ..PpoConfig::default() }.validate().is_err());
        assert!(PpoConfig { minibatch_size: 0, ..PpoConfig::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn gae_matches_brute_force(
            seq in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, prop::bool::weighted(0.15)), 1..100),
            gamma in 0.5f64..1.0,
            lambda in 0.0f64..1.0,
        ) {
            let r: Vec<f64> = seq.iter().map(|s| s.0).collect();
            let v: Vec<f64> = seq.iter().map(|s| s.1).collect();
            let nv: Vec<f64> = seq.iter().map(|s| s.2).collect();
            let d: Vec<bool> = seq.iter().map(|s| s.3).collect();
            let (a, ret) = gae(&r, &v, &nv, &d, gamma, lambda).unwrap();
            for (t, oracle) in brute_force_gae(&r, &v, &nv, &d, gamma, lambda).into_iter().enumerate() {
                prop_assert!((a[t] - oracle).abs() < 1e-10);
                prop_assert!((ret[t] - a[t] - v[t]).abs() < 1e-12);
            }
        }
    }
}
