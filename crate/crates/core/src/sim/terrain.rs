use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerrainKind {
    Flat,
    Gaps,
}

/// A gap occupying the open interval `(start, start + width)` along x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub start: f64,
    pub width: f64,
}

impl Gap {
    pub fn end(&self) -> f64 {
        self.start + self.width
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.start && x < self.end()
    }
}

/// Height field invariant in y: support at z = 0 everywhere except inside gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Terrain {
    pub kind: TerrainKind,
    pub gaps: Vec<Gap>,
    pub beam_width: f64,
    pub gap_floor_z: f64,
}

/// Parameters for randomized gap courses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapCourse {
    pub count: usize,
    /// x of the first gap start, m.
    pub first_start: f64,
    pub min_width: f64,
    pub max_width: f64,
    pub beam_width: f64,
    /// The first start is shifted forward by up to this much, m.
    pub start_jitter: f64,
}

impl Default for GapCourse {
    fn default() -> Self {
        Self {
            count: 8,
            first_start: 0.8,
            min_width: 0.14,
            max_width: 0.20,
            beam_width: 0.14,
            start_jitter: 0.0,
        }
    }
}

pub const DEFAULT_GAP_FLOOR_Z: f64 = -1.0;

impl Terrain {
    pub fn flat() -> Self {
        Self {
            kind: TerrainKind::Flat,
            gaps: Vec::new(),
            beam_width: 0.0,
            gap_floor_z: DEFAULT_GAP_FLOOR_Z,
        }
    }

    pub fn with_gaps(gaps: Vec<Gap>, beam_width: f64) -> Result<Self> {
        let t = Self {
            kind: TerrainKind::Gaps,
            gaps,
            beam_width,
            gap_floor_z: DEFAULT_GAP_FLOOR_Z,
        };
        t.validate()?;
        Ok(t)
    }

    /// Gap widths drawn uniformly from `[min_width, max_width]`, separated by beams.
    pub fn random_gaps<R: Rng + ?Sized>(course: &GapCourse, rng: &mut R) -> Result<Self> {
        if !(course.min_width > 0.0 && course.min_width <= course.max_width) {
            return Err(Error::Config(format!(
                "gap width range [{}, {}] is empty or non-positive",
                course.min_width, course.max_width
            )));
        }
        if !(course.start_jitter >= 0.0) {
            return Err(Error::Config("start_jitter must be non-negative".into()));
        }
        let mut x = course.first_start;
        if course.start_jitter > 0.0 {
            x += rng.random_range(0.0..=course.start_jitter);
        }
        let mut gaps = Vec::with_capacity(course.count);
        for _ in 0..course.count {
            let width = if course.max_width > course.min_width {
                rng.random_range(course.min_width..=course.max_width)
            } else {
                course.min_width
            };
            gaps.push(Gap { start: x, width });
            x += width + course.beam_width;
        }
        Self::with_gaps(gaps, course.beam_width)
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev_end = f64::NEG_INFINITY;
        for g in &self.gaps {
            if !(g.width > 0.0) || !g.start.is_finite() || g.start < prev_end {
                return Err(Error::Config(format!(
                    "gaps must be ascending, non-overlapping and of positive width (at start {})",
                    g.start
                )));
            }
            prev_end = g.end();
        }
        if self.gap_floor_z >= 0.0 {
            return Err(Error::Config("gap floor must lie below the support plane".into()));
        }
        Ok(())
    }

    pub fn gap_at(&self, x: f64) -> Option<&Gap> {
        // gaps are sorted; the list is short
        self.gaps.iter().find(|g| g.contains(x))
    }

    /// Nearest gap whose end lies ahead of `x`.
    pub fn next_gap(&self, x: f64) -> Option<&Gap> {
        self.gaps.iter().find(|g| g.end() > x)
    }

    /// Distance from `x` to the nearest gap edge, for wall contact.
    pub fn nearest_edge(&self, x: f64) -> Option<f64> {
        self.gaps
            .iter()
            .flat_map(|g| [g.start, g.end()])
            .min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs()))
    }
}

/// Ground height at `(x, y)`.
pub fn terrain_height(t: &Terrain, x: f64, _y: f64) -> f64 {
    match t.gap_at(x) {
        Some(_) => t.gap_floor_z,
        None => 0.0,
    }
}

/// First intersection of a ray with the terrain profile in the x–z plane.
///
/// `dir_xz` need not be normalized; the returned distance is along the full 3-D ray
/// whose horizontal-forward and vertical components are `dir_xz` and whose lateral
/// component `dir_y` only stretches the path length.
pub fn ray_hit_distance(t: &Terrain, origin_xz: (f64, f64), dir: [f64; 3], max_range: f64) -> f64 {
    let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if norm == 0.0 {
        return max_range;
    }
    let (dx, dz) = (dir[0] / norm, dir[2] / norm);
    let (ox, oz) = origin_xz;
    if dz >= 0.0 {
        return max_range;
    }
    // support plane
    let s = -oz / dz;
    if s < 0.0 {
        return max_range;
    }
    let x_hit = ox + s * dx;
    let dist = match t.gap_at(x_hit) {
        None => s,
        Some(g) => {
            // the ray continues down the gap column
            let s_floor = (t.gap_floor_z - oz) / dz;
            let x_floor = ox + s_floor * dx;
            if g.contains(x_floor) {
                s_floor
            } else if dx > 0.0 {
                (g.end() - ox) / dx
            } else if dx < 0.0 {
                (g.start - ox) / dx
            } else {
                s_floor
            }
        }
    };
    dist.min(max_range)
}
