//! Post-hoc gait analysis: cost of transport, stride variability, body angular
//! velocity, DCM offset, contact force peaks, Froude number and CoT–speed fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::DEFAULT_F_C_MAX;
use crate::sim::{gap_outcomes, gap_success_rate, EpisodeLog, LogRow, Terrain};

pub const REPORT_VERSION: u32 = 1;
/// Minimum contact duration for a touchdown to count, s.
pub const DEFAULT_DEBOUNCE: f64 = 0.010;
/// Nominal leg length for the Froude number, back-solved from 1.3 m/s ↔ 0.574.
pub const DEFAULT_FROUDE_HEIGHT: f64 = 0.30;
/// Trailing window for the CoM height entering ω₀, s.
pub const DCM_HEIGHT_WINDOW: f64 = 0.5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LimbStrides {
    pub touchdown_times: Vec<f64>,
    pub touchdown_x: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StrideEvents {
    pub limbs: [LimbStrides; 4],
}

impl StrideEvents {
    /// Times between consecutive touchdowns of the same foot, pooled over limbs.
    pub fn durations(&self) -> Vec<f64> {
        self.limbs
            .iter()
            .flat_map(|l| l.touchdown_times.windows(2).map(|w| w[1] - w[0]))
            .collect()
    }

    /// Forward distance between consecutive touchdowns of the same foot.
    pub fn lengths(&self) -> Vec<f64> {
        self.limbs
            .iter()
            .flat_map(|l| l.touchdown_x.windows(2).map(|w| w[1] - w[0]))
            .collect()
    }

    /// Keeps only touchdowns inside `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> Self {
        let mut out = Self::default();
        for (o, l) in out.limbs.iter_mut().zip(&self.limbs) {
            for (t, x) in l.touchdown_times.iter().zip(&l.touchdown_x) {
                if *t >= t0 && *t <= t1 {
                    o.touchdown_times.push(*t);
                    o.touchdown_x.push(*x);
                }
            }
        }
        out
    }
}

/// Touchdowns are false→true contact transitions that then stay in contact for at
/// least `debounce` seconds (each sample counts for one period `dt`).
pub fn detect_strides(contact: &[[bool; 4]], foot_x: &[[f64; 4]], dt: f64, debounce: f64) -> StrideEvents {
    let mut ev = StrideEvents::default();
    let need = (debounce / dt - 1e-9).ceil().max(1.0) as usize;
    for leg in 0..4 {
        let mut k = 1;
        while k < contact.len() {
            if contact[k][leg] && !contact[k - 1][leg] {
                let run = contact[k..].iter().take_while(|c| c[leg]).count();
                if run >= need {
                    ev.limbs[leg].touchdown_times.push(k as f64 * dt);
                    ev.limbs[leg].touchdown_x.push(foot_x[k][leg]);
                }
                k += run.max(1);
            } else {
                k += 1;
            }
        }
    }
    ev
}

/// Strides from a log, with touchdown times on the log's own clock.
pub fn log_strides(log: &EpisodeLog, debounce: f64) -> StrideEvents {
    let contact: Vec<[bool; 4]> = log.rows.iter().map(|r| r.contact).collect();
    let foot_x: Vec<[f64; 4]> = log.rows.iter().map(|r| r.feet.map(|f| f[0])).collect();
    let dt = log.meta.control_dt;
    let mut ev = detect_strides(&contact, &foot_x, dt, debounce);
    let t0 = log.rows.first().map(|r| r.time).unwrap_or(0.0);
    for l in &mut ev.limbs {
        for t in &mut l.touchdown_times {
            *t += t0;
        }
    }
    ev
}

/// Population standard deviation over mean.
pub fn coefficient_of_variation(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::UndefinedCv("fewer than two samples"));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::UndefinedCv("zero mean"));
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

/// Mean mechanical power `Σ|τ q̇|` over rows.
pub fn mean_power(rows: &[LogRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter()
        .map(|r| r.tau.iter().zip(&r.q_dot).map(|(t, w)| (t * w).abs()).sum::<f64>())
        .sum::<f64>()
        / rows.len() as f64
}

/// Net forward displacement over elapsed time between first and last row.
pub fn mean_velocity(rows: &[LogRow]) -> f64 {
    match (rows.first(), rows.last()) {
        (Some(a), Some(b)) if b.time > a.time => (b.trunk.p.x - a.trunk.p.x) / (b.time - a.time),
        _ => 0.0,
    }
}

/// `P̄ / (m g v̄)`.
pub fn cost_of_transport(rows: &[LogRow], mass: f64, g: f64) -> Result<f64> {
    let v = mean_velocity(rows);
    if !(v > 0.0) {
        return Err(Error::UndefinedCot(v));
    }
    Ok(mean_power(rows) / (mass * g * v))
}

pub fn mean_abs_angular_velocity(rows: &[LogRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(|r| r.trunk.w.iter().map(|w| w.abs()).sum::<f64>()).sum::<f64>() / (3.0 * rows.len() as f64)
}

pub fn dcm(r_com: [f64; 2], v_com: [f64; 2], omega0: f64) -> [f64; 2] {
    [r_com[0] + v_com[0] / omega0, r_com[1] + v_com[1] / omega0]
}

pub fn dcm_offset(xi: [f64; 2], cop: [f64; 2]) -> [f64; 2] {
    [xi[0] - cop[0], xi[1] - cop[1]]
}

pub fn lipm_omega(g: f64, dz: f64) -> f64 {
    (g / dz).sqrt()
}

/// Normal-force-weighted mean of the stance feet.
pub fn cop_estimate(in_contact: &[bool; 4], normal_force: &[f64; 4], feet_xy: &[[f64; 2]; 4]) -> Result<[f64; 2]> {
    let mut sum = 0.0;
    let mut acc = [0.0; 2];
    for leg in 0..4 {
        if in_contact[leg] && normal_force[leg] > 0.0 {
            sum += normal_force[leg];
            acc[0] += normal_force[leg] * feet_xy[leg][0];
            acc[1] += normal_force[leg] * feet_xy[leg][1];
        }
    }
    if !(sum > 0.0) {
        return Err(Error::NoSupport);
    }
    Ok([acc[0] / sum, acc[1] / sum])
}

/// CoM and DCM of the linear inverted pendulum under a constant CoP, from
/// `ẍ = ω²(x − cop)`. With `ξ₀ = x₀ + v₀/ω`:
/// `ξ(t) = (ξ₀ − cop)e^{ωt} + cop` and
/// `x(t) = cop + ½(ξ₀ − cop)e^{ωt} + (x₀ − ξ₀ + ½(ξ₀ − cop))e^{−ωt}`,
/// which reduces to `x(t) = (x₀ − ξ₀)e^{−ωt} + ξ₀` when the DCM offset vanishes.
pub fn lipm_closed_form(x0: f64, v0: f64, cop: f64, omega0: f64, t: f64) -> (f64, f64) {
    let xi0 = x0 + v0 / omega0;
    let b = xi0 - cop;
    let grow = (omega0 * t).exp();
    let decay = (-omega0 * t).exp();
    let x = cop + 0.5 * b * grow + (x0 - xi0 + 0.5 * b) * decay;
    let xi = b * grow + cop;
    (x, xi)
}

pub fn froude(v: f64, h: f64, g: f64) -> f64 {
    v * v / (g * h)
}

/// Least-squares `c0 + c1 v + c2 v²`.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<[f64; 3]> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit("fewer than three points"));
    }
    let mut vs: Vec<f64> = points.iter().map(|p| p.0).collect();
    vs.sort_by(f64::total_cmp);
    vs.dedup();
    if vs.len() < 3 {
        return Err(Error::DegenerateFit("fewer than three distinct speeds"));
    }
    let a = DMatrix::from_fn(points.len(), 3, |i, j| points[i].0.powi(j as i32));
    let b = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-12 {
        return Err(Error::DegenerateFit("rank-deficient design"));
    }
    let c = svd.solve(&b, smax * 1e-14).map_err(|_| Error::DegenerateFit("solve failed"))?;
    Ok([c[0], c[1], c[2]])
}

pub fn eval_quadratic(c: &[f64; 3], v: f64) -> f64 {
    c[0] + c[1] * v + c[2] * v * v
}

/// Speed inside `v_range` where the trot curve drops below the walk curve.
pub fn eots(walk: &[f64; 3], trot: &[f64; 3], v_range: (f64, f64)) -> Result<f64> {
    let d = [walk[0] - trot[0], walk[1] - trot[1], walk[2] - trot[2]];
    let scale = walk.iter().chain(trot).map(|c| c.abs()).fold(1e-300, f64::max);
    let tiny = 1e-12 * scale;
    let (lo, hi) = v_range;
    let no_hit = || Error::NoIntersection { lo, hi };
    if d.iter().all(|c| c.abs() <= tiny) {
        return Err(Error::DegenerateFit("identical fits intersect everywhere"));
    }
    let mut roots = Vec::new();
    if d[2].abs() <= tiny {
        if d[1].abs() > tiny {
            roots.push(-d[0] / d[1]);
        }
    } else {
        let disc = d[1] * d[1] - 4.0 * d[2] * d[0];
        if disc >= 0.0 {
            let s = disc.sqrt();
            // numerically stable pair
            let q = -0.5 * (d[1] + d[1].signum() * s);
            let q = if q == 0.0 { -0.5 * s } else { q };
            roots.push(q / d[2]);
            if q != 0.0 {
                roots.push(d[0] / q);
            }
        }
    }
    let slope = |v: f64| d[1] + 2.0 * d[2] * v;
    roots.retain(|v| *v >= lo && *v <= hi);
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    roots
        .iter()
        .copied()
        .find(|v| slope(*v) > 0.0)
        .or_else(|| roots.first().copied())
        .ok_or_else(no_hit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub debounce: f64,
    pub froude_height: f64,
    pub f_c_max: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            debounce: DEFAULT_DEBOUNCE,
            froude_height: DEFAULT_FROUDE_HEIGHT,
            f_c_max: DEFAULT_F_C_MAX,
        }
    }
}

/// Metrics of one log (or a time window of it). Undefined quantities are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    pub duration: f64,
    pub fell: bool,
    pub cot: Option<f64>,
    pub cv_stride_duration: Option<f64>,
    pub cv_stride_length: Option<f64>,
    pub mean_abs_angular_velocity: f64,
    pub mean_abs_lateral_dcm_offset: Option<f64>,
    pub mean_x_dcm_offset: Option<f64>,
    pub peak_force: f64,
    /// Mean over samples of the largest per-foot excess above the force limit, N.
    pub excess_peak_force: f64,
    pub success_rate: Option<f64>,
    pub froude: f64,
    pub mean_velocity: f64,
}

fn dcm_offsets(rows: &[LogRow], all: &[LogRow], g: f64) -> Vec<[f64; 2]> {
    rows.iter()
        .filter_map(|r| {
            let window: Vec<f64> = all
                .iter()
                .filter(|o| o.time <= r.time && o.time >= r.time - DCM_HEIGHT_WINDOW)
                .map(|o| o.trunk.p.z)
                .collect();
            let dz = window.iter().sum::<f64>() / window.len().max(1) as f64;
            if !(dz > 0.0) {
                return None;
            }
            let w0 = lipm_omega(g, dz);
            let xi = dcm([r.trunk.p.x, r.trunk.p.y], [r.trunk.v.x, r.trunk.v.y], w0);
            let feet = r.feet.map(|f| [f[0], f[1]]);
            let cop = cop_estimate(&r.contact, &r.normal_force, &feet).ok()?;
            Some(dcm_offset(xi, cop))
        })
        .collect()
}

pub fn compute_report(log: &EpisodeLog, terrain: Option<&Terrain>, cfg: &MetricsConfig) -> MetricsReport {
    report_for(log, log_strides(log, cfg.debounce), &log.rows, terrain, cfg)
}

/// Report restricted to rows and touchdowns with time in `[t0, t1]`; the gap
/// success rate is left out.
pub fn compute_window_report(log: &EpisodeLog, t0: f64, t1: f64, cfg: &MetricsConfig) -> MetricsReport {
    let strides = log_strides(log, cfg.debounce).window(t0, t1);
    let lo = log.rows.partition_point(|r| r.time < t0);
    let hi = log.rows.partition_point(|r| r.time <= t1);
    report_for(log, strides, &log.rows[lo..hi.max(lo)], None, cfg)
}

fn report_for(log: &EpisodeLog, strides: StrideEvents, rows: &[LogRow], terrain: Option<&Terrain>, cfg: &MetricsConfig) -> MetricsReport {
    let (mass, g) = (log.meta.mass, log.meta.gravity);
    let offsets = dcm_offsets(rows, &log.rows, g);
    let mean = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let v = mean_velocity(rows);
    let peak = rows.iter().flat_map(|r| r.peak_force).fold(0.0, f64::max);
    let excess = if rows.is_empty() {
        0.0
    } else {
        rows.iter()
            .map(|r| r.peak_force.iter().map(|f| (f - cfg.f_c_max).max(0.0)).fold(0.0, f64::max))
            .sum::<f64>()
            / rows.len() as f64
    };
    let success_rate = terrain.filter(|t| !t.gaps.is_empty()).map(|t| gap_success_rate(&gap_outcomes(log, t)));
    MetricsReport {
        version: REPORT_VERSION,
        duration: match (rows.first(), rows.last()) {
            (Some(a), Some(b)) => b.time - a.time + log.meta.control_dt,
            _ => 0.0,
        },
        fell: log.fell(),
        cot: cost_of_transport(rows, mass, g).ok(),
        cv_stride_duration: coefficient_of_variation(&strides.durations()).ok(),
        cv_stride_length: coefficient_of_variation(&strides.lengths()).ok(),
        mean_abs_angular_velocity: mean_abs_angular_velocity(rows),
        mean_abs_lateral_dcm_offset: mean(offsets.iter().map(|b| b[1].abs()).collect()),
        mean_x_dcm_offset: mean(offsets.iter().map(|b| b[0]).collect()),
        peak_force: peak,
        excess_peak_force: excess,
        success_rate,
        froude: froude(v.max(0.0), cfg.froude_height, g),
        mean_velocity: v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpg::CpgState;
    use crate::sim::{LogMeta, TrunkState};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn blank_row(t: f64) -> LogRow {
        LogRow {
            time: t,
            trunk: TrunkState::at_height(0.3),
            q: [0.0; 12],
            q_dot: [0.0; 12],
            tau: [0.0; 12],
            contact: [false; 4],
            normal_force: [0.0; 4],
            peak_force: [0.0; 4],
            feet: [[0.0; 3]; 4],
            cpg: CpgState::default(),
            v_des: 0.0,
            action: vec![],
            reward_terms: [0.0; 4],
            reward: 0.0,
            clamped: false,
        }
    }

    #[test]
    fn square_wave_strides() {
        let dt = 0.01;
        let contact: Vec<[bool; 4]> = (0..400).map(|k| [(k / 25) % 2 == 1; 4]).collect();
        let x: Vec<[f64; 4]> = (0..400).map(|k| [k as f64 * 0.001; 4]).collect();
        let ev = detect_strides(&contact, &x, dt, DEFAULT_DEBOUNCE);
        let d = ev.durations();
        assert!(!d.is_empty());
        for s in d {
            assert_abs_diff_eq!(s, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn short_blip_is_ignored() {
        let dt = 0.001;
        let mut contact = vec![[false; 4]; 100];
        for c in &mut contact[40..45] {
            c[0] = true;
        }
        for c in &mut contact[60..80] {
            c[0] = true;
        }
        let ev = detect_strides(&contact, &vec![[0.0; 4]; 100], dt, DEFAULT_DEBOUNCE);
        assert_eq!(ev.limbs[0].touchdown_times.len(), 1);
        assert_abs_diff_eq!(ev.limbs[0].touchdown_times[0], 0.060, epsilon = 1e-12);
    }

    #[test]
    fn hand_labelled_timeline() {
        // leg 1: touchdowns at samples 3, 9 (2-sample runs), a 1-sample blip at 14 at 1 kHz-equivalent
        let dt = 0.005;
        let pattern = "0001100001100001000";
        let contact: Vec<[bool; 4]> = pattern.chars().map(|c| [false, c == '1', false, false]).collect();
        let x: Vec<[f64; 4]> = (0..pattern.len()).map(|k| [0.0, k as f64, 0.0, 0.0]).collect();
        let ev = detect_strides(&contact, &x, dt, DEFAULT_DEBOUNCE);
        assert_eq!(ev.limbs[1].touchdown_times.len(), 2);
        assert_abs_diff_eq!(ev.limbs[1].touchdown_times[0], 0.015, epsilon = 1e-15);
        assert_abs_diff_eq!(ev.limbs[1].touchdown_times[1], 0.045, epsilon = 1e-15);
        assert_eq!(ev.limbs[1].touchdown_x, vec![3.0, 9.0]);
        assert!(ev.limbs[0].touchdown_times.is_empty());
    }

    #[test]
    fn cv_examples() {
        assert_eq!(coefficient_of_variation(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(coefficient_of_variation(&[1.0, 3.0]).unwrap(), 0.5);
        assert!(coefficient_of_variation(&[1.0]).is_err());
        assert!(coefficient_of_variation(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn cot_examples() {
        // 12 joints × |τ q̇| = 98.1 W, 1 m/s
        let rows: Vec<LogRow> = (0..11)
            .map(|k| {
                let mut r = blank_row(k as f64 * 0.1);
                r.trunk.p.x = k as f64 * 0.1;
                r.tau = [98.1 / 12.0; 12];
                r.q_dot = [if k % 2 == 0 { 1.0 } else { -1.0 }; 12];
                r
            })
            .collect();
        assert_abs_diff_eq!(cost_of_transport(&rows, 12.0, 9.81).unwrap(), 98.1 / (12.0 * 9.81), epsilon = 1e-12);
        let mut still = rows.clone();
        for r in &mut still {
            r.tau = [0.0; 12];
        }
        assert_eq!(cost_of_transport(&still, 12.0, 9.81).unwrap(), 0.0);
        for r in &mut still {
            r.trunk.p.x = 0.0;
        }
        assert!(matches!(cost_of_transport(&still, 12.0, 9.81), Err(Error::UndefinedCot(_))));
    }

    #[test]
    fn angular_velocity_examples() {
        let mut rows = vec![blank_row(0.0), blank_row(0.01)];
        assert_eq!(mean_abs_angular_velocity(&rows), 0.0);
        rows[0].trunk.w = nalgebra::Vector3::new(1.0, 2.0, 3.0);
        rows[1].trunk.w = nalgebra::Vector3::new(-1.0, 2.0, -3.0);
        assert_abs_diff_eq!(mean_abs_angular_velocity(&rows), 2.0);
    }

    #[test]
    fn dcm_and_cop_examples() {
        assert_eq!(dcm([0.2, 0.1], [0.0, 0.0], 5.0), [0.2, 0.1]);
        let w0 = lipm_omega(9.81, 0.3);
        assert_abs_diff_eq!(w0, 5.7184, epsilon = 1e-4);
        assert_abs_diff_eq!(dcm([0.0, 0.0], [0.3, 0.0], w0)[0], 0.05246, epsilon = 1e-5);
        let b = dcm_offset([0.1, 0.02], [0.08, 0.0]);
        assert_abs_diff_eq!(b[0], 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], 0.02, epsilon = 1e-15);
        let feet = [[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [7.0, 7.0]];
        assert_eq!(cop_estimate(&[true, false, false, false], &[10.0, 0.0, 0.0, 0.0], &feet).unwrap(), [0.0, 0.0]);
        assert_eq!(cop_estimate(&[true, true, false, false], &[20.0, 20.0, 0.0, 0.0], &feet).unwrap(), [0.5, 0.0]);
        assert_abs_diff_eq!(cop_estimate(&[true, true, false, false], &[10.0, 30.0, 0.0, 0.0], &feet).unwrap()[0], 0.75);
        assert!(matches!(cop_estimate(&[false; 4], &[0.0; 4], &feet), Err(Error::NoSupport)));
    }

    /// RK4 on `ẍ = ω²(x − cop)`.
    fn lipm_rk4(x0: f64, v0: f64, cop: f64, w: f64, t: f64, h: f64) -> (f64, f64) {
        let f = |x: f64, v: f64| (v, w * w * (x - cop));
        let (mut x, mut v) = (x0, v0);
        let n = (t / h).round() as usize;
        for _ in 0..n {
            let k1 = f(x, v);
            let k2 = f(x + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
            let k3 = f(x + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
            let k4 = f(x + h * k3.0, v + h * k3.1);
            x += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (x, x + v / w)
    }

    #[test]
    fn lipm_matches_integration() {
        let w = lipm_omega(9.81, 0.3);
        for (x0, v0, cop) in [(0.0, 0.3, 0.02), (0.1, -0.2, 0.0), (-0.05, 0.0, 0.05)] {
            for t in [0.25, 0.5, 1.0] {
                let (x, xi) = lipm_closed_form(x0, v0, cop, w, t);
                let (xn, xin) = lipm_rk4(x0, v0, cop, w, t, 1e-4);
                assert_abs_diff_eq!(x, xn, epsilon = 1e-6);
                assert_abs_diff_eq!(xi, xin, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn lipm_zero_offset_cases() {
        let w = 5.0;
        // ξ₀ = cop: the DCM stays put and the CoM converges to it
        let (x0, v0) = (0.1, 0.25);
        let xi0 = x0 + v0 / w;
        for t in [0.0, 0.3, 1.0] {
            let (x, xi) = lipm_closed_form(x0, v0, xi0, w, t);
            assert_abs_diff_eq!(xi, xi0, epsilon = 1e-14);
            assert_abs_diff_eq!(x, (x0 - xi0) * (-w * t).exp() + xi0, epsilon = 1e-14);
        }
        // x₀ = ξ₀ (v₀ = 0) with the CoP underneath: stationary
        let (x, _) = lipm_closed_form(0.2, 0.0, 0.2, w, 0.7);
        assert_abs_diff_eq!(x, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn froude_examples() {
        assert_eq!(froude(0.0, 0.3, 9.81), 0.0);
        assert!((froude(1.3, 0.30, 9.81) - 0.574).abs() < 1e-3);
        assert_abs_diff_eq!(froude(2.6, 0.3, 9.81), 4.0 * froude(1.3, 0.3, 9.81), epsilon = 1e-12);
    }

    /// Normal equations solved by Cramer's rule.
    fn normal_equation_fit(p: &[(f64, f64)]) -> [f64; 3] {
        let mut s = [0.0; 5];
        let mut t = [0.0; 3];
        for (v, y) in p {
            for (k, sk) in s.iter_mut().enumerate() {
                *sk += v.powi(k as i32);
            }
            for (k, tk) in t.iter_mut().enumerate() {
                *tk += y * v.powi(k as i32);
            }
        }
        let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        let d = det3(m);
        std::array::from_fn(|c| {
            let mut mc = m;
            for r in 0..3 {
                mc[r][c] = t[r];
            }
            det3(mc) / d
        })
    }

    #[test]
    fn quadratic_fit_examples() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (0.3 + 0.2 * i as f64, (0.3 + 0.2 * i as f64).powi(2))).collect();
        let c = fit_quadratic(&pts).unwrap();
        assert_abs_diff_eq!(c[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c[1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c[2], 1.0, epsilon = 1e-9);
        let three = [(0.0, 1.0), (1.0, 0.0), (2.0, 3.0)];
        let c = fit_quadratic(&three).unwrap();
        for (v, y) in three {
            assert_abs_diff_eq!(eval_quadratic(&c, v), y, epsilon = 1e-12);
        }
        // noisy samples against the normal-equation oracle, residuals orthogonal to the design
        let noisy: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let v = 0.2 + 0.1 * i as f64;
                (v, 0.9 - 0.4 * v + 0.3 * v * v + 0.01 * ((i * 7919) % 13) as f64 / 13.0)
            })
            .collect();
        let c = fit_quadratic(&noisy).unwrap();
        let o = normal_equation_fit(&noisy);
        for k in 0..3 {
            assert_abs_diff_eq!(c[k], o[k], epsilon = 1e-8);
            let dot: f64 = noisy.iter().map(|(v, y)| (y - eval_quadratic(&c, *v)) * v.powi(k as i32)).sum();
            assert!(dot.abs() < 1e-9);
        }
        assert!(fit_quadratic(&[(1.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn eots_examples() {
        // walk 1 + (v − 0.5)², trot 1 + (v − 1.5)²
        let walk = [1.25, -1.0, 1.0];
        let trot = [3.25, -3.0, 1.0];
        assert_abs_diff_eq!(eots(&walk, &trot, (0.0, 3.0)).unwrap(), 1.0, epsilon = 1e-12);
        let shifted = [walk[0] + 1.0, walk[1], walk[2]];
        assert!(matches!(eots(&walk, &shifted, (0.0, 3.0)), Err(Error::NoIntersection { .. })));
        assert!(matches!(eots(&walk, &walk, (0.0, 3.0)), Err(Error::DegenerateFit(_))));
        // two crossings: pick the one where trot becomes cheaper
        let walk2 = [1.0, 0.0, 1.0];
        let trot2 = [1.0 + 0.5, -1.0, 0.0];
        let v = eots(&walk2, &trot2, (0.0, 3.0)).unwrap();
        let d = |v: f64| eval_quadratic(&walk2, v) - eval_quadratic(&trot2, v);
        assert_abs_diff_eq!(d(v), 0.0, epsilon = 1e-12);
        assert!(d(v + 1e-3) > 0.0);
    }

    #[test]
    fn window_report_excludes_outside_rows() {
        let rows: Vec<LogRow> = (1..=100)
            .map(|k| {
                let mut r = blank_row(k as f64 * 0.01);
                r.trunk.w.x = if k <= 50 { 1.0 } else { 3.0 };
                r
            })
            .collect();
        let log = EpisodeLog {
            rows,
            meta: LogMeta::default(),
        };
        let early = compute_window_report(&log, 0.0, 0.5, &MetricsConfig::default());
        let late = compute_window_report(&log, 0.505, 1.0, &MetricsConfig::default());
        assert_abs_diff_eq!(early.mean_abs_angular_velocity, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(late.mean_abs_angular_velocity, 1.0, epsilon = 1e-12);
        assert!(early.cot.is_none());
    }

    proptest! {
        #[test]
        fn cv_is_scale_invariant(s in prop::collection::vec(0.1f64..5.0, 2..30), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = s.iter().map(|x| x * c).collect();
            let a = coefficient_of_variation(&s).unwrap();
            let b = coefficient_of_variation(&scaled).unwrap();
            prop_assert!((a - b).abs() < 1e-10 * a.max(1.0));
        }

        #[test]
        fn cot_invariant_to_time_reparameterization(v in 0.1f64..2.0, p in 1.0f64..200.0, n in 5usize..50, stretch in 0.2f64..5.0) {
            let make = |dt: f64| -> Vec<LogRow> {
                (0..n).map(|k| {
                    let mut r = blank_row(k as f64 * dt);
                    r.trunk.p.x = v * k as f64 * dt;
                    r.tau = [p / 12.0; 12];
                    r.q_dot = [1.0; 12];
                    r
                }).collect()
            };
            let a = cost_of_transport(&make(0.01), 12.0, 9.81).unwrap();
            let b = cost_of_transport(&make(0.01 * stretch), 12.0, 9.81).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a);
        }

        #[test]
        fn dcm_drift_scales_with_offset(x0 in -0.5f64..0.5, v0 in -1.0f64..1.0, cop in -0.5f64..0.5, t in 0.0f64..1.0) {
            let w = 5.0;
            let b = dcm_offset([x0 + v0 / w, 0.0], [cop, 0.0])[0];
            let (_, xi) = lipm_closed_form(x0, v0, cop, w, t);
            let drift = xi - (x0 + v0 / w);
            prop_assert!((drift - b * ((w * t).exp() - 1.0)).abs() < 1e-12);
            let (_, still) = lipm_closed_form(x0, v0, x0 + v0 / w, w, t);
            prop_assert!((still - (x0 + v0 / w)).abs() < 1e-14);
        }
    }
}
