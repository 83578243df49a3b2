//! Lane-exit planning for an ego vehicle with a stereo camera at
//! unsignalized T-intersections.
//!
//! - [`depth`]: depth error model and bounds on computed depth
//! - [`closing_speed`]: closing-speed bounds and adaptive depth sampling
//! - [`path`]: quadratic Bézier lane-exit paths
//! - [`conflict`]: obstacle regions and the proceed/wait decision
//! - [`sim`]: time-stepped scenario simulation with trace output
//! - [`config`]: scenario configuration files

pub mod closing_speed;
pub mod config;
pub mod conflict;
pub mod depth;
pub mod error;
pub mod geometry;
pub mod par;
pub mod path;
pub mod sim;
pub mod tables;

pub use config::ScenarioConfig;
pub use closing_speed::{
    closing_speed, next_sample_depth, sample_stream, upper_deviation, ClosingSpeedEstimate,
    ClosingSpeedTracker, DepthStream, SamplingPlan,
};
pub use conflict::{
    centerline_crossings, evaluate_decision, obstacle_region, regions_intersect, run_wait_loop,
    ConflictInputs, Decision, LaneAxis, NeighborObservation, ObstacleRegion, Verdict, VehicleDims,
};
pub use depth::{BoundCoefficients, DepthErrorModel, DepthEstimate, ModelParams};
pub use error::{Error, Result};
pub use geometry::{ConvexPolygon, Vec2};
pub use path::{intermediate_control_point, LaneExitPath, LaneGeometry};
pub use sim::{run_config, run_scenario, EgoMode, EgoState, Scenario};
