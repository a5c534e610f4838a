//! Penalty-based point contact: spring–damper normal force and an anchored tangential
//! spring limited by a Coulomb cone.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::terrain::{terrain_height, Terrain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactConfig {
    pub k_n: f64,
    pub d_n: f64,
    pub k_t: f64,
    pub d_t: f64,
    pub mu_f: f64,
    /// Penetrations deeper than this next to a gap edge are resolved against the wall.
    pub wall_depth: f64,
}

impl Default for ContactConfig {
    fn default() -> Self {
        Self {
            k_n: 1e4,
            d_n: 200.0,
            k_t: 5e3,
            d_t: 50.0,
            mu_f: 0.8,
            wall_depth: 0.02,
        }
    }
}

/// Contact state of a single foot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactSlot {
    pub in_contact: bool,
    pub normal_force: f64,
    /// Tangential anchor set at touchdown, cleared at liftoff.
    pub anchor: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactRecord {
    pub slots: [ContactSlot; 4],
}

impl ContactRecord {
    pub fn in_contact(&self) -> [bool; 4] {
        self.slots.map(|s| s.in_contact)
    }

    pub fn normal_forces(&self) -> [f64; 4] {
        self.slots.map(|s| s.normal_force)
    }
}

/// Ground reaction force on a foot (world frame) and the updated slot.
pub fn contact_force(
    foot_p: &Vector3<f64>,
    foot_v: &Vector3<f64>,
    slot: &ContactSlot,
    terrain: &Terrain,
    cfg: &ContactConfig,
) -> (Vector3<f64>, ContactSlot) {
    let ground = terrain_height(terrain, foot_p.x, foot_p.y);
    let depth = ground - foot_p.z;
    if depth <= 0.0 {
        return (Vector3::zeros(), ContactSlot::default());
    }

    if depth > cfg.wall_depth && ground == 0.0 {
        if let Some(edge) = terrain.nearest_edge(foot_p.x) {
            let lateral = (foot_p.x - edge).abs();
            if lateral < depth {
                return (wall_force(foot_p, foot_v, edge, lateral, cfg), ContactSlot::default());
            }
        }
    }

    let f_n = (cfg.k_n * depth - cfg.d_n * foot_v.z).max(0.0);
    let p_xy = Vector2::new(foot_p.x, foot_p.y);
    let v_xy = Vector2::new(foot_v.x, foot_v.y);
    let anchor = slot
        .anchor
        .map(|a| Vector2::new(a[0], a[1]))
        .unwrap_or(p_xy);
    let (f_t, anchor) = tangential(p_xy, v_xy, anchor, f_n, cfg);
    (
        Vector3::new(f_t.x, f_t.y, f_n),
        ContactSlot {
            in_contact: true,
            normal_force: f_n,
            anchor: Some([anchor.x, anchor.y]),
        },
    )
}

/// Anchored spring–damper clamped to the friction cone; on saturation the anchor slips
/// so the spring alone reproduces the clamped force.
fn tangential(
    p: Vector2<f64>,
    v: Vector2<f64>,
    anchor: Vector2<f64>,
    f_n: f64,
    cfg: &ContactConfig,
) -> (Vector2<f64>, Vector2<f64>) {
    let demand = -cfg.k_t * (p - anchor) - cfg.d_t * v;
    let limit = cfg.mu_f * f_n;
    let mag = demand.norm();
    if mag <= limit {
        return (demand, anchor);
    }
    let f = if mag > 0.0 { demand * (limit / mag) } else { demand };
    let slipped = p + (f + cfg.d_t * v) / cfg.k_t;
    (f, slipped)
}

/// Horizontal push out of a gap wall. Frictionless.
fn wall_force(
    foot_p: &Vector3<f64>,
    foot_v: &Vector3<f64>,
    edge: f64,
    depth: f64,
    cfg: &ContactConfig,
) -> Vector3<f64> {
    // push back toward the edge, into the gap column
    let n = if foot_p.x >= edge { -1.0 } else { 1.0 };
    let f = (cfg.k_n * depth - cfg.d_n * foot_v.x * n).max(0.0);
    Vector3::new(n * f, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::terrain::Gap;
    use approx::assert_abs_diff_eq;

    #[test]
    fn foot_above_ground() {
        let (f, slot) = contact_force(
            &Vector3::new(0.0, 0.0, 0.01),
            &Vector3::zeros(),
            &ContactSlot::default(),
            &Terrain::flat(),
            &ContactConfig::default(),
        );
        assert_eq!(f, Vector3::zeros());
        assert!(!slot.in_contact && slot.anchor.is_none() && slot.normal_force == 0.0);
    }

    #[test]
    fn static_penetration() {
        let (f, slot) = contact_force(
            &Vector3::new(0.3, 0.1, -1e-3),
            &Vector3::zeros(),
            &ContactSlot::default(),
            &Terrain::flat(),
            &ContactConfig::default(),
        );
        assert_abs_diff_eq!(f.z, 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.x, 0.0);
        assert_eq!(slot.anchor, Some([0.3, 0.1]));
    }

    #[test]
    fn friction_cone_saturates_and_slips() {
        let cfg = ContactConfig::default();
        // depth 5 mm gives 50 N; anchor 2 cm behind gives 100 N tangential demand
        let p = Vector3::new(0.02, 0.0, -0.005);
        let slot = ContactSlot {
            in_contact: true,
            normal_force: 50.0,
            anchor: Some([0.0, 0.0]),
        };
        let (f, next) = contact_force(&p, &Vector3::zeros(), &slot, &Terrain::flat(), &cfg);
        assert_abs_diff_eq!(f.z, 50.0, epsilon = 1e-9);
        assert_abs_diff_eq!(f.x, -40.0, epsilon = 1e-9);
        let a = next.anchor.unwrap();
        assert_abs_diff_eq!(a[0], 0.02 - 40.0 / 5e3, epsilon = 1e-12);
        // re-evaluating at the slipped anchor reproduces the cone-limited force
        let (f2, _) = contact_force(&p, &Vector3::zeros(), &next, &Terrain::flat(), &cfg);
        assert_abs_diff_eq!(f2.x, -40.0, epsilon = 1e-9);
    }

    #[test]
    fn no_support_over_gap() {
        let t = Terrain::with_gaps(vec![Gap { start: 0.5, width: 0.2 }], 0.14).unwrap();
        let (f, slot) = contact_force(
            &Vector3::new(0.6, 0.0, -0.2),
            &Vector3::zeros(),
            &ContactSlot::default(),
            &t,
            &ContactConfig::default(),
        );
        assert_eq!(f, Vector3::zeros());
        assert!(!slot.in_contact);
    }

    #[test]
    fn deep_foot_near_edge_hits_wall() {
        let t = Terrain::with_gaps(vec![Gap { start: 0.5, width: 0.2 }], 0.14).unwrap();
        // foot just past the far edge, 10 cm below the support plane
        let (f, _) = contact_force(
            &Vector3::new(0.705, 0.0, -0.1),
            &Vector3::zeros(),
            &ContactSlot::default(),
            &t,
            &ContactConfig::default(),
        );
        assert!(f.x < 0.0 && f.z == 0.0);
        let (f, _) = contact_force(
            &Vector3::new(0.495, 0.0, -0.1),
            &Vector3::zeros(),
            &ContactSlot::default(),
            &t,
            &ContactConfig::default(),
        );
        assert!(f.x > 0.0);
    }
}
