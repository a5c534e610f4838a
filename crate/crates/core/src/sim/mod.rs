//! Simplified quadruped simulator and episode runner.

pub mod contact;
pub mod episode;
pub mod terrain;
pub mod world;

pub use contact::{contact_force, ContactConfig, ContactRecord, ContactSlot};
pub use episode::{
    check_termination, gap_outcomes, gap_success_rate, EndReason, EpisodeLog, GapOutcome, LogMeta, LogRow, Termination,
    FALL_HEIGHT,
};
pub use terrain::{ray_hit_distance, terrain_height, Gap, GapCourse, Terrain, TerrainKind};
pub use world::{foot_kinematics, foot_positions, step_world, RobotModel, SimConfig, TrunkState, WorldStep};
