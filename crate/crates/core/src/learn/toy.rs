//! One-dimensional point mass that must track a commanded velocity. Small enough to
//! solve analytically, used to validate the learner end to end.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ppo::{mlp_forward, PolicyParams};
use super::train::{Env, EnvStep};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassEnv {
    pub dt: f64,
    pub a_max: f64,
    pub horizon: usize,
    pub v_des_range: (f64, f64),
    v: f64,
    v_des: f64,
    t: usize,
}

impl Default for PointMassEnv {
    fn default() -> Self {
        Self {
            dt: 0.1,
            a_max: 2.0,
            horizon: 50,
            v_des_range: (0.5, 1.5),
            v: 0.0,
            v_des: 1.0,
            t: 0,
        }
    }
}

impl PointMassEnv {
    pub const OBS_DIM: usize = 3;

    fn obs(&self) -> Vec<f64> {
        vec![self.v, self.v_des, self.v_des - self.v]
    }

    pub fn reward(v: f64, v_des: f64) -> f64 {
        let e = v - v_des;
        (-(e * e) / 0.25).exp()
    }

    pub fn reset_to(&mut self, v_des: f64) -> Vec<f64> {
        self.v = 0.0;
        self.v_des = v_des;
        self.t = 0;
        self.obs()
    }

    fn advance(&mut self, a: f64) -> EnvStep {
        let a = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
        self.v += self.a_max * a * self.dt;
        self.t += 1;
        EnvStep {
            obs: self.obs(),
            reward: Self::reward(self.v, self.v_des),
            terminated: false,
            truncated: self.t >= self.horizon,
        }
    }

    /// Best achievable return: each step the reachable velocities form an interval,
    /// and moving as close to the target as possible is optimal now and later.
    pub fn optimal_return(&self, v_des: f64) -> f64 {
        let dv = self.a_max * self.dt;
        let mut v = 0.0;
        (0..self.horizon)
            .map(|_| {
                v += (v_des - v).clamp(-dv, dv);
                Self::reward(v, v_des)
            })
            .sum()
    }

    /// Return of the deterministic (mean) policy.
    pub fn policy_return(&mut self, params: &PolicyParams, v_des: f64) -> Result<f64> {
        let mut obs = self.reset_to(v_des);
        let mut total = 0.0;
        loop {
            let (mean, _) = mlp_forward(params, &obs)?;
            let s = self.advance(mean[0]);
            total += s.reward;
            if s.truncated {
                return Ok(total);
            }
            obs = s.obs;
        }
    }

    /// Deterministic-policy return over evenly spaced targets as a fraction of optimum.
    pub fn evaluate(&mut self, params: &PolicyParams, points: usize) -> Result<f64> {
        let (lo, hi) = self.v_des_range;
        let mut got = 0.0;
        let mut best = 0.0;
        for k in 0..points {
            let v_des = lo + (hi - lo) * k as f64 / (points.max(2) - 1) as f64;
            got += self.policy_return(params, v_des)?;
            best += self.optimal_return(v_des);
        }
        Ok(got / best)
    }
}

impl Env for PointMassEnv {
    fn obs_dim(&self) -> usize {
        Self::OBS_DIM
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let (lo, hi) = self.v_des_range;
        let v_des = rng.random_range(lo..=hi);
        Ok(self.reset_to(v_des))
    }

    fn step(&mut self, action: &[f64], _rng: &mut ChaCha8Rng) -> Result<EnvStep> {
        Ok(self.advance(action[0]))
    }
}
