//! Scenario configuration (TOML).
//!
//! ```toml
//! seed = 7
//! epsilon = 0.2
//! safety_distance = 3.8
//! ego_speed = 7.0
//!
//! [model]
//! beta1 = 0.002797
//! beta2 = -0.004249
//! beta3 = 0.007311
//! r_squared = 0.9
//!
//! [vehicle]
//! length = 3.8
//! width = 1.8
//!
//! [ego]
//! start = [-13.88, -2.7]
//!
//! [[intersection]]
//! p_i = [2.5, -2.7]
//! p_f = [11.65, 6.95]
//! theta_i = 0.0
//! theta_f = 1.5707963267948966
//! neighbor_lane = { point = [0.0, 1.8], heading = 3.141592653589793 }
//!
//! [[tracks.synthetic]]
//! id = "n1"
//! intersection = 0
//! start = [45.06, 1.8]
//! speed_profile = [[0.0, 8.0]]
//! duration_s = 12.0
//! ```
//!
//! Lengths are metres, times seconds, angles radians.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conflict::VehicleDims;
use crate::depth::{DepthErrorModel, ModelParams};
use crate::error::{Error, Result};
use crate::geometry::{line_line_params, Vec2};

/// Positional tolerance for route continuity checks, in m.
const ROUTE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub epsilon: f64,
    pub safety_distance: f64,
    pub ego_speed: f64,
    #[serde(default = "default_tick")]
    pub tick_s: f64,
    #[serde(default = "default_camera_rate")]
    pub camera_rate_hz: f64,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
    #[serde(default = "default_wait_timeout")]
    pub wait_timeout_s: f64,
    /// Half-width of the band around a neighbor-lane centerline inside
    /// which a measured vehicle is assigned to that lane.
    #[serde(default = "default_corridor")]
    pub corridor_half_width: f64,
    /// Measurement noise on or off.
    #[serde(default = "default_true")]
    pub noise: bool,
    pub model: ModelParams,
    pub vehicle: VehicleDims,
    pub ego: EgoConfig,
    #[serde(rename = "intersection")]
    pub intersections: Vec<IntersectionConfig>,
    #[serde(default)]
    pub tracks: TracksConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoConfig {
    pub start: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionConfig {
    pub p_i: Vec2,
    pub p_f: Vec2,
    pub theta_i: f64,
    pub theta_f: f64,
    pub neighbor_lane: NeighborLaneConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeighborLaneConfig {
    pub point: Vec2,
    /// Direction of neighbor travel.
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracksConfig {
    /// Trajectory CSV, relative to the config file.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default = "default_frame_rate")]
    pub frame_rate_hz: f64,
    #[serde(default)]
    pub transform: AffineTransform,
    #[serde(default)]
    pub synthetic: Vec<SyntheticTrack>,
}

impl Default for TracksConfig {
    fn default() -> Self {
        TracksConfig {
            file: None,
            frame_rate_hz: default_frame_rate(),
            transform: AffineTransform::default(),
            synthetic: Vec::new(),
        }
    }
}

/// Maps raw track coordinates into scenario coordinates:
/// `p' = offset + scale · R(rotation) · p`, `t' = frame / rate + time_offset_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineTransform {
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub rotation: f64,
    #[serde(default)]
    pub offset: Vec2,
    #[serde(default)]
    pub time_offset_s: f64,
}

impl Default for AffineTransform {
    fn default() -> Self {
        AffineTransform {
            scale: 1.0,
            rotation: 0.0,
            offset: Vec2::ZERO,
            time_offset_s: 0.0,
        }
    }
}

impl AffineTransform {
    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.offset + (p * self.scale).rotate(self.rotation)
    }
}

/// Lane follower with a piecewise-constant speed profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTrack {
    pub id: String,
    /// Index of the intersection whose neighbor lane the vehicle drives.
    pub intersection: usize,
    pub start: Vec2,
    #[serde(default)]
    pub start_time_s: f64,
    /// `[t, v]` pairs; `v` holds from `t` until the next entry.
    pub speed_profile: Vec<[f64; 2]>,
    pub duration_s: f64,
}

fn default_tick() -> f64 {
    0.01
}
fn default_camera_rate() -> f64 {
    20.0
}
fn default_max_range() -> f64 {
    150.0
}
fn default_wait_timeout() -> f64 {
    60.0
}
fn default_corridor() -> f64 {
    2.0
}
fn default_true() -> bool {
    true
}
fn default_frame_rate() -> f64 {
    10.0
}
fn default_scale() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::parse(line, e.message().to_string())
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// The validated depth model.
    pub fn depth_model(&self) -> Result<DepthErrorModel> {
        DepthErrorModel::try_from(self.model).map_err(|e| match e {
            Error::InvalidModel(m) => Error::validation("model", m),
            other => other,
        })
    }

    /// Check every value before any computation starts.
    pub fn validate(&self) -> Result<()> {
        self.depth_model()?;
        positive("epsilon", self.epsilon)?;
        positive("safety_distance", self.safety_distance)?;
        positive("ego_speed", self.ego_speed)?;
        positive("tick_s", self.tick_s)?;
        positive("camera_rate_hz", self.camera_rate_hz)?;
        positive("max_range", self.max_range)?;
        positive("wait_timeout_s", self.wait_timeout_s)?;
        positive("corridor_half_width", self.corridor_half_width)?;
        positive("vehicle.length", self.vehicle.length)?;
        positive("vehicle.width", self.vehicle.width)?;
        positive("tracks.frame_rate_hz", self.tracks.frame_rate_hz)?;
        positive("tracks.transform.scale", self.tracks.transform.scale)?;
        finite("tracks.transform.rotation", self.tracks.transform.rotation)?;
        finite("tracks.transform.time_offset_s", self.tracks.transform.time_offset_s)?;
        finite_point("tracks.transform.offset", self.tracks.transform.offset)?;
        finite_point("ego.start", self.ego.start)?;

        if self.intersections.is_empty() {
            return Err(Error::validation("intersection", "at least one intersection is required"));
        }
        let mut entry = (self.ego.start, None::<f64>);
        for (k, ix) in self.intersections.iter().enumerate() {
            let field = |name: &str| format!("intersection[{k}].{name}");
            finite_point(&field("p_i"), ix.p_i)?;
            finite_point(&field("p_f"), ix.p_f)?;
            finite(&field("theta_i"), ix.theta_i)?;
            finite(&field("theta_f"), ix.theta_f)?;
            finite_point(&field("neighbor_lane.point"), ix.neighbor_lane.point)?;
            finite(&field("neighbor_lane.heading"), ix.neighbor_lane.heading)?;

            let dir_i = Vec2::from_angle(ix.theta_i);
            let dir_f = Vec2::from_angle(ix.theta_f);
            let (s, u) = line_line_params(ix.p_i, dir_i, ix.p_f, dir_f)
                .ok_or_else(|| Error::validation(field("theta_f"), "entry and exit lanes are parallel"))?;
            if !(s > 0.0 && u < 0.0) {
                return Err(Error::validation(
                    field("p_f"),
                    "exit lane must be reached by driving forward from p_i",
                ));
            }

            // the approach leg must run straight along theta_i into p_i
            let (from, heading) = entry;
            if let Some(h) = heading {
                if angle_diff(h, ix.theta_i).abs() > ROUTE_TOL {
                    return Err(Error::validation(
                        field("theta_i"),
                        "must equal theta_f of the previous intersection",
                    ));
                }
            }
            let leg = ix.p_i - from;
            if dir_i.cross(leg).abs() > ROUTE_TOL || dir_i.dot(leg) < -ROUTE_TOL {
                let src = if k == 0 { "ego.start" } else { "the previous p_f" };
                return Err(Error::validation(
                    field("p_i"),
                    format!("must lie ahead of {src} along theta_i"),
                ));
            }
            entry = (ix.p_f, Some(ix.theta_f));
        }

        for (j, st) in self.tracks.synthetic.iter().enumerate() {
            let field = |name: &str| format!("tracks.synthetic[{j}].{name}");
            if st.id.is_empty() {
                return Err(Error::validation(field("id"), "must not be empty"));
            }
            if self.tracks.synthetic[..j].iter().any(|o| o.id == st.id) {
                return Err(Error::validation(field("id"), format!("duplicate id {:?}", st.id)));
            }
            let Some(ix) = self.intersections.get(st.intersection) else {
                return Err(Error::validation(
                    field("intersection"),
                    format!("no intersection with index {}", st.intersection),
                ));
            };
            finite_point(&field("start"), st.start)?;
            finite(&field("start_time_s"), st.start_time_s)?;
            positive(&field("duration_s"), st.duration_s)?;
            let lane_dir = Vec2::from_angle(ix.neighbor_lane.heading);
            let offset = lane_dir.cross(st.start - ix.neighbor_lane.point).abs();
            if offset > self.corridor_half_width {
                return Err(Error::validation(
                    field("start"),
                    format!("{offset} m from the neighbor-lane centerline"),
                ));
            }
            if st.speed_profile.is_empty() {
                return Err(Error::validation(field("speed_profile"), "must not be empty"));
            }
            if st.speed_profile[0][0] != 0.0 {
                return Err(Error::validation(field("speed_profile"), "first entry must start at t = 0"));
            }
            for (i, &[t, v]) in st.speed_profile.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::validation(
                        field("speed_profile"),
                        format!("entry {i}: speed must be finite and non-negative"),
                    ));
                }
                if i > 0 && !(t > st.speed_profile[i - 1][0]) {
                    return Err(Error::validation(
                        field("speed_profile"),
                        format!("entry {i}: times must be strictly increasing"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Track file resolved against the directory holding the config.
    pub fn track_file(&self, base_dir: Option<&Path>) -> Option<PathBuf> {
        self.tracks.file.as_ref().map(|f| match base_dir {
            Some(dir) if f.is_relative() => dir.join(f),
            _ => f.clone(),
        })
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite, got {v}")))
    }
}

fn finite_point(field: &str, p: Vec2) -> Result<()> {
    if p.x.is_finite() && p.y.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, "coordinates must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive, got {v}")))
    }
}

/// Signed difference wrapped to (−π, π].
pub(crate) fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    if d > std::f64::consts::PI {
        d - std::f64::consts::TAU
    } else {
        d
    }
}
