//! Conflict resolution at the start of a lane-exit path.
//!
//! Two certificates allow the ego to leave `p_i`:
//!
//! * `d_v1`: the neighbor has already crossed the exit path and is more
//!   than `d_s` past the near crossing `X_P1`.
//! * `d_v2`: the neighbor is more than `d_s` short of the far crossing
//!   `X_P2`, and still will be after the traversal time `t_C` when it is
//!   advanced at the worst-case speed `v_upper + V_E`.
//!
//! Both also require the obstacle rectangle `N_s` to miss the control-point
//! hull. Without either certificate the ego waits and re-evaluates.
//!
//! Positions along the neighbor lane use a coordinate that *decreases* as
//! the neighbor advances, so "already passed" is `x_N < x_p1 − d_s` for
//! any lane orientation.

use serde::{Deserialize, Serialize};

use crate::depth::DepthEstimate;
use crate::error::{Error, Result};
use crate::geometry::{line_line_params, ConvexPolygon, Vec2, BOUNDARY_TOL};

/// Vehicle footprint, shared by ego and neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleDims {
    pub length: f64,
    pub width: f64,
}

/// Centerline of the neighbor lane with its direction of travel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneAxis {
    pub origin: Vec2,
    /// Unit vector along the neighbor's direction of travel.
    pub direction: Vec2,
}

impl LaneAxis {
    pub fn new(origin: Vec2, heading: f64) -> Self {
        LaneAxis {
            origin,
            direction: Vec2::from_angle(heading),
        }
    }

    /// Along-lane coordinate; decreases as a vehicle travels along the lane.
    pub fn coordinate(&self, p: Vec2) -> f64 {
        -(p - self.origin).dot(self.direction)
    }

    /// Point on the centerline with the given coordinate.
    pub fn point_at(&self, coordinate: f64) -> Vec2 {
        self.origin - self.direction * coordinate
    }

    /// Unsigned distance from `p` to the centerline.
    pub fn lateral_offset(&self, p: Vec2) -> f64 {
        self.direction.cross(p - self.origin).abs()
    }
}

/// Rectangle around the neighbor, inflated by the depth band.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleRegion {
    corners: [Vec2; 4],
}

impl ObstacleRegion {
    pub fn corners(&self) -> &[Vec2; 4] {
        &self.corners
    }

    pub fn polygon(&self) -> ConvexPolygon {
        ConvexPolygon::from_ccw(self.corners.to_vec())
    }

    pub fn translated(&self, d: Vec2) -> ObstacleRegion {
        ObstacleRegion {
            corners: self.corners.map(|c| c + d),
        }
    }
}

/// `N_s` for a neighbor seen from an ego at `ego_pos` with heading `ego_heading`.
///
/// A missing lower depth bound is replaced by 0, stretching the region
/// back to the camera.
pub fn obstacle_region(
    ego_pos: Vec2,
    ego_heading: f64,
    estimate: &DepthEstimate,
    y_m: f64,
    dims: VehicleDims,
) -> ObstacleRegion {
    let near = estimate.lower_or_zero() - 0.5 * dims.length;
    let far = estimate.upper + 0.5 * dims.length;
    let right = y_m - 0.5 * dims.width;
    let left = y_m + 0.5 * dims.width;
    let body = [
        Vec2::new(near, right),
        Vec2::new(far, right),
        Vec2::new(far, left),
        Vec2::new(near, left),
    ];
    ObstacleRegion {
        corners: body.map(|c| ego_pos + c.rotate(ego_heading)),
    }
}

/// Crossings of the neighbor centerline with segments `p_i–p_f` and `p_int–p_f`.
pub fn centerline_crossings(
    p_i: Vec2,
    p_int: Vec2,
    p_f: Vec2,
    lane: &LaneAxis,
) -> Result<(Vec2, Vec2)> {
    let x_p1 = segment_crossing(p_i, p_f, lane).ok_or(Error::NoCrossing("p_i-p_f"))?;
    let x_p2 = segment_crossing(p_int, p_f, lane).ok_or(Error::NoCrossing("p_int-p_f"))?;
    Ok((x_p1, x_p2))
}

fn segment_crossing(a: Vec2, b: Vec2, lane: &LaneAxis) -> Option<Vec2> {
    let (s, _) = line_line_params(a, b - a, lane.origin, lane.direction)?;
    let slack = 1e-9 / (b - a).norm();
    if s < -slack || s > 1.0 + slack {
        return None;
    }
    Some(if s >= 1.0 - slack {
        b
    } else if s <= slack {
        a
    } else {
        a.lerp(b, s)
    })
}

/// Overlap test between `N_s` and the hull; touching counts as overlap.
pub fn regions_intersect(region: &ObstacleRegion, hull: &ConvexPolygon) -> bool {
    region.polygon().intersects(hull, BOUNDARY_TOL)
}

/// Per-intersection data needed to evaluate the decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictInputs {
    pub hull: ConvexPolygon,
    pub x_p1: Vec2,
    pub x_p2: Vec2,
    pub lane: LaneAxis,
    /// Minimum centre-to-centre separation.
    pub d_s: f64,
    /// Ego speed while executing the path.
    pub v_e: f64,
    /// Path traversal time.
    pub t_c: f64,
}

impl ConflictInputs {
    pub fn new(
        hull: ConvexPolygon,
        x_p1: Vec2,
        x_p2: Vec2,
        lane: LaneAxis,
        d_s: f64,
        v_e: f64,
        t_c: f64,
    ) -> Result<Self> {
        if !(d_s > 0.0) {
            return Err(Error::validation("d_s", "must be positive"));
        }
        if !(t_c > 0.0) {
            return Err(Error::validation("t_c", "must be positive"));
        }
        if !(v_e > 0.0) {
            return Err(Error::NonPositiveSpeed(v_e));
        }
        Ok(ConflictInputs {
            hull,
            x_p1,
            x_p2,
            lane,
            d_s,
            v_e,
            t_c,
        })
    }

    pub fn x_p1_coordinate(&self) -> f64 {
        self.lane.coordinate(self.x_p1)
    }

    pub fn x_p2_coordinate(&self) -> f64 {
        self.lane.coordinate(self.x_p2)
    }
}

/// What the ego knows about one neighbor at decision time.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborObservation {
    /// Along-lane coordinate of the neighbor.
    pub x_n: f64,
    pub region: ObstacleRegion,
    /// Upper closing-speed bound, if one has been sampled.
    pub v_upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Proceed,
    Wait,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Proceed => "proceed",
            Verdict::Wait => "wait",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub d_v1: i8,
    pub d_v2: i8,
    pub verdict: Verdict,
    pub evaluated_at: f64,
}

impl Decision {
    fn from_flags(d_v1: bool, d_v2: bool, t: f64) -> Self {
        let flag = |b: bool| if b { 1 } else { -1 };
        Decision {
            d_v1: flag(d_v1),
            d_v2: flag(d_v2),
            verdict: if d_v1 || d_v2 {
                Verdict::Proceed
            } else {
                Verdict::Wait
            },
            evaluated_at: t,
        }
    }
}

/// Evaluate both decision variables for one neighbor at time `t`.
pub fn evaluate_decision(inputs: &ConflictInputs, obs: &NeighborObservation, t: f64) -> Decision {
    let clear_now = !regions_intersect(&obs.region, &inputs.hull);
    let xp1 = inputs.x_p1_coordinate();
    let xp2 = inputs.x_p2_coordinate();

    let d_v1 = clear_now && obs.x_n < xp1 - inputs.d_s;

    let d_v2 = match obs.v_upper {
        Some(v_upper) if clear_now && obs.x_n > xp2 + inputs.d_s => {
            let advance = (v_upper + inputs.v_e) * inputs.t_c;
            let predicted = obs.x_n - advance;
            let region_then = obs.region.translated(inputs.lane.direction * advance);
            predicted > xp2 + inputs.d_s && !regions_intersect(&region_then, &inputs.hull)
        }
        _ => false,
    };

    Decision::from_flags(d_v1, d_v2, t)
}

/// One logged evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionEvent {
    pub t: f64,
    /// `None` when no neighbor was relevant and the ego proceeded unopposed.
    pub neighbor: Option<String>,
    pub decision: Decision,
    pub x_n: Option<f64>,
    pub v_upper: Option<f64>,
}

/// Evaluate every observed neighbor; proceed only if all of them allow it.
pub fn evaluate_all(
    inputs: &ConflictInputs,
    observations: &[(String, NeighborObservation)],
    t: f64,
) -> (Verdict, Vec<DecisionEvent>) {
    if observations.is_empty() {
        let event = DecisionEvent {
            t,
            neighbor: None,
            decision: Decision::from_flags(true, true, t),
            x_n: None,
            v_upper: None,
        };
        return (Verdict::Proceed, vec![event]);
    }
    let mut verdict = Verdict::Proceed;
    let events = observations
        .iter()
        .map(|(id, obs)| {
            let decision = evaluate_decision(inputs, obs, t);
            if decision.verdict == Verdict::Wait {
                verdict = Verdict::Wait;
            }
            DecisionEvent {
                t,
                neighbor: Some(id.clone()),
                decision,
                x_n: Some(obs.x_n),
                v_upper: obs.v_upper,
            }
        })
        .collect();
    (verdict, events)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaitStatus {
    Execute,
    Wait,
    TimedOut,
}

/// Hold-and-retry state machine for a single intersection.
///
/// Once it returns [`WaitStatus::Execute`] the decision is committed and
/// never revisited.
#[derive(Debug, Clone)]
pub struct WaitLoop {
    arrived_at: f64,
    timeout: f64,
    wait_ticks: u64,
    committed_at: Option<f64>,
    timed_out: bool,
    events: Vec<DecisionEvent>,
}

impl WaitLoop {
    pub fn new(arrived_at: f64, timeout: f64) -> Self {
        WaitLoop {
            arrived_at,
            timeout,
            wait_ticks: 0,
            committed_at: None,
            timed_out: false,
            events: Vec::new(),
        }
    }

    pub fn evaluate(
        &mut self,
        inputs: &ConflictInputs,
        observations: &[(String, NeighborObservation)],
        t: f64,
    ) -> WaitStatus {
        if self.committed_at.is_some() {
            return WaitStatus::Execute;
        }
        if self.timed_out {
            return WaitStatus::TimedOut;
        }
        let (verdict, events) = evaluate_all(inputs, observations, t);
        self.events.extend(events);
        match verdict {
            Verdict::Proceed => {
                self.committed_at = Some(t);
                WaitStatus::Execute
            }
            Verdict::Wait if t - self.arrived_at >= self.timeout => {
                self.timed_out = true;
                WaitStatus::TimedOut
            }
            Verdict::Wait => {
                self.wait_ticks += 1;
                WaitStatus::Wait
            }
        }
    }

    pub fn wait_ticks(&self) -> u64 {
        self.wait_ticks
    }

    pub fn committed_at(&self) -> Option<f64> {
        self.committed_at
    }

    pub fn arrived_at(&self) -> f64 {
        self.arrived_at
    }

    pub fn events(&self) -> &[DecisionEvent] {
        &self.events
    }

    pub fn take_events(&mut self) -> Vec<DecisionEvent> {
        std::mem::take(&mut self.events)
    }
}

/// Callbacks that let [`run_wait_loop`] drive an external simulation.
pub trait WaitHooks {
    fn now(&self) -> f64;
    /// Observations of the neighbors relevant to this intersection.
    fn observe(&mut self) -> Vec<(String, NeighborObservation)>;
    /// Advance the world one tick with the ego holding at `p_i`.
    fn hold_tick(&mut self);
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaitOutcome {
    pub status: WaitStatus,
    /// Time of the final evaluation (commit or timeout).
    pub t: f64,
    pub wait_ticks: u64,
    pub events: Vec<DecisionEvent>,
}

/// Wait at `p_i` until a proceed verdict or the timeout.
pub fn run_wait_loop<H: WaitHooks>(inputs: &ConflictInputs, hooks: &mut H, timeout: f64) -> WaitOutcome {
    let mut wl = WaitLoop::new(hooks.now(), timeout);
    loop {
        let t = hooks.now();
        let obs = hooks.observe();
        match wl.evaluate(inputs, &obs, t) {
            WaitStatus::Wait => hooks.hold_tick(),
            status => {
                return WaitOutcome {
                    status,
                    t,
                    wait_ticks: wl.wait_ticks(),
                    events: wl.take_events(),
                }
            }
        }
    }
}
