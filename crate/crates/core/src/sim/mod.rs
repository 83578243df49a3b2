//! Time-stepped scenario simulation.
//!
//! The ego is a point mass at constant speed `V_E`: it follows its lane,
//! stops at each `p_i` until the conflict check allows it to go, drives
//! the Bézier path, and continues on the exit lane towards the next
//! intersection. Neighbors replay their tracks and are observed through a
//! simulated stereo camera running at its own frame rate.
//!
//! Time is `k · tick_s` for integer `k`, so runs are bitwise repeatable.

pub mod sensor;
pub mod trace;
pub mod tracks;

use std::path::Path;

use crate::closing_speed::{ClosingSpeedTracker, SamplingPlan};
use crate::config::ScenarioConfig;
use crate::conflict::{
    centerline_crossings, obstacle_region, ConflictInputs, DecisionEvent, LaneAxis,
    NeighborObservation, WaitLoop, WaitStatus,
};
use crate::depth::{DepthErrorModel, DepthEstimate};
use crate::error::{Error, Result};
use crate::geometry::{line_line_params, Vec2};
use crate::path::{LaneExitPath, LaneGeometry};

use sensor::{synthesize_measurement, to_body, to_world, NoiseSource, Visibility};
use trace::{
    DecisionRow, DistanceRow, EgoRow, IntersectionSummary, MeasurementRow, NeighborRow,
    ScenarioTrace, Summary,
};
use tracks::{load_tracks_file, synthetic_track, NeighborTrack};

/// Slack when deciding whether a camera frame is due at a tick, in s.
const FRAME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EgoMode {
    LaneFollow,
    Waiting,
    /// Driving the path of intersection `intersection`, `progress_s`
    /// metres along it.
    ExecutingPath { intersection: usize, progress_s: f64 },
}

impl EgoMode {
    pub fn label(&self) -> &'static str {
        match self {
            EgoMode::LaneFollow => "lane_follow",
            EgoMode::Waiting => "waiting",
            EgoMode::ExecutingPath { .. } => "executing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub mode: EgoMode,
}

/// Advance the ego by one tick. `route` holds the path of every
/// intersection, indexed as in [`EgoMode::ExecutingPath`].
pub fn step_ego(state: &EgoState, dt: f64, route: &[LaneExitPath]) -> EgoState {
    advance(state, state.speed * dt, route)
}

fn advance(state: &EgoState, distance: f64, route: &[LaneExitPath]) -> EgoState {
    match state.mode {
        EgoMode::Waiting => *state,
        EgoMode::LaneFollow => EgoState {
            position: state.position + Vec2::from_angle(state.heading) * distance,
            ..*state
        },
        EgoMode::ExecutingPath {
            intersection,
            progress_s,
        } => {
            let path = &route[intersection];
            let s = progress_s + distance;
            if s >= path.arc_length() {
                let heading = path.heading(1.0).unwrap_or(state.heading);
                let extra = s - path.arc_length();
                return EgoState {
                    position: path.p_f() + Vec2::from_angle(heading) * extra,
                    heading,
                    speed: state.speed,
                    mode: EgoMode::LaneFollow,
                };
            }
            let tau = path.arc_length_to_tau(s).expect("progress within arc length");
            EgoState {
                position: path.evaluate(tau).expect("tau in range"),
                heading: path.heading(tau).unwrap_or(state.heading),
                speed: state.speed,
                mode: EgoMode::ExecutingPath {
                    intersection,
                    progress_s: s,
                },
            }
        }
    }
}

/// Per-intersection planning data.
#[derive(Debug, Clone)]
pub struct Leg {
    pub geometry: LaneGeometry,
    pub path: LaneExitPath,
    pub inputs: ConflictInputs,
}

/// A validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub model: DepthErrorModel,
    pub plan: SamplingPlan,
    pub legs: Vec<Leg>,
    /// Sorted by id.
    pub tracks: Vec<NeighborTrack>,
}

impl Scenario {
    /// Validate `config` and load its tracks (file paths relative to `base_dir`).
    pub fn from_config(config: ScenarioConfig, base_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let mut tracks = match config.track_file(base_dir) {
            Some(p) => load_tracks_file(&p, config.tracks.frame_rate_hz, &config.tracks.transform)?,
            None => Vec::new(),
        };
        for st in &config.tracks.synthetic {
            let heading = config.intersections[st.intersection].neighbor_lane.heading;
            tracks.push(synthetic_track(st, heading, config.tracks.frame_rate_hz)?);
        }
        Self::with_tracks(config, tracks)
    }

    /// Validate `config` and use `tracks` instead of its track sources.
    pub fn with_tracks(config: ScenarioConfig, mut tracks: Vec<NeighborTrack>) -> Result<Self> {
        config.validate()?;
        tracks.sort_by(|a, b| a.id().cmp(b.id()));
        if let Some(w) = tracks.windows(2).find(|w| w[0].id() == w[1].id()) {
            return Err(Error::validation("tracks", format!("duplicate vehicle id {:?}", w[0].id())));
        }
        let model = config.depth_model()?;
        let plan = SamplingPlan::new(config.epsilon, model)
            .map_err(|e| Error::validation("epsilon", e.to_string()))?;
        let mut legs = Vec::with_capacity(config.intersections.len());
        for (k, ix) in config.intersections.iter().enumerate() {
            let geometry = LaneGeometry {
                p_i: ix.p_i,
                p_f: ix.p_f,
                theta_i: ix.theta_i,
                theta_f: ix.theta_f,
            };
            let path = LaneExitPath::from_geometry(&geometry)
                .map_err(|e| Error::validation(format!("intersection[{k}]"), e.to_string()))?;
            let lane = LaneAxis::new(ix.neighbor_lane.point, ix.neighbor_lane.heading);
            let (x_p1, x_p2) = centerline_crossings(path.p_i(), path.p_int(), path.p_f(), &lane)
                .map_err(|e| {
                    Error::validation(format!("intersection[{k}].neighbor_lane"), e.to_string())
                })?;
            let t_c = path.traversal_time(config.ego_speed)?;
            let inputs = ConflictInputs::new(
                path.convex_hull().clone(),
                x_p1,
                x_p2,
                lane,
                config.safety_distance,
                config.ego_speed,
                t_c,
            )?;
            legs.push(Leg {
                geometry,
                path,
                inputs,
            });
        }
        Ok(Scenario {
            config,
            model,
            plan,
            legs,
            tracks,
        })
    }

    /// Distance driven from the start to the final `p_f`.
    pub fn route_length(&self) -> f64 {
        let mut from = self.config.ego.start;
        let mut total = 0.0;
        for leg in &self.legs {
            total += from.distance(leg.path.p_i()) + leg.path.arc_length();
            from = leg.path.p_f();
        }
        total
    }
}

/// Validate, load and run in one call.
pub fn run_config(config: ScenarioConfig, base_dir: Option<&Path>) -> Result<ScenarioTrace> {
    Ok(run_scenario(&Scenario::from_config(config, base_dir)?))
}

/// Run independent scenarios, in parallel when the feature is enabled.
pub fn run_batch(scenarios: &[Scenario]) -> Vec<ScenarioTrace> {
    crate::par::map(scenarios, run_scenario)
}

pub fn run_batch_sequential(scenarios: &[Scenario]) -> Vec<ScenarioTrace> {
    crate::par::map_sequential(scenarios, run_scenario)
}

#[derive(Debug, Clone, Copy)]
struct Seen {
    estimate: DepthEstimate,
    y_m: f64,
    ego_pos: Vec2,
    ego_heading: f64,
    /// Neighbor position implied by the computed depth.
    world: Vec2,
}

/// What the ego currently knows about one neighbor.
#[derive(Debug, Clone)]
struct Perception {
    tracker: ClosingSpeedTracker,
    seen: Option<Seen>,
    /// Seen in the most recent frame.
    visible: bool,
    /// Last seen ahead, now behind the camera plane.
    passed: bool,
}

impl Perception {
    fn new(plan: SamplingPlan) -> Self {
        Perception {
            tracker: ClosingSpeedTracker::new(plan),
            seen: None,
            visible: false,
            passed: false,
        }
    }

    fn clear(&mut self) {
        self.tracker.reset();
        self.seen = None;
        self.visible = false;
        self.passed = false;
    }
}

struct Run<'a> {
    s: &'a Scenario,
    route: Vec<LaneExitPath>,
    ego: EgoState,
    perception: Vec<Perception>,
    noise: NoiseSource,
    trace: ScenarioTrace,
}

impl<'a> Run<'a> {
    fn new(s: &'a Scenario) -> Self {
        let cfg = &s.config;
        Run {
            s,
            route: s.legs.iter().map(|l| l.path.clone()).collect(),
            ego: EgoState {
                position: cfg.ego.start,
                heading: cfg.intersections[0].theta_i,
                speed: cfg.ego_speed,
                mode: EgoMode::LaneFollow,
            },
            perception: s.tracks.iter().map(|_| Perception::new(s.plan)).collect(),
            noise: NoiseSource::new(cfg.seed, cfg.noise),
            trace: ScenarioTrace {
                ego: Vec::new(),
                neighbors: Vec::new(),
                measurements: Vec::new(),
                decisions: Vec::new(),
                distances: Vec::new(),
                summary: Summary {
                    completed: false,
                    seed: cfg.seed,
                    end_time_s: 0.0,
                    ticks: 0,
                    frames: 0,
                    samples: 0,
                    decisions: 0,
                    total_wait_s: 0.0,
                    min_separation_m: None,
                    min_separation_t_s: None,
                    min_separation_id: None,
                    intersection: (0..cfg.intersections.len())
                        .map(|index| IntersectionSummary {
                            index,
                            arrived_at_s: None,
                            proceeded_at_s: None,
                            wait_s: 0.0,
                            timed_out: false,
                        })
                        .collect(),
                },
            },
        }
    }

    fn record(&mut self, t: f64, intersection: usize) {
        let e = self.ego;
        self.trace.ego.push(EgoRow {
            t,
            x: e.position.x,
            y: e.position.y,
            heading: e.heading,
            speed: e.speed,
            mode: e.mode.label(),
            intersection,
        });
        let summary = &mut self.trace.summary;
        for tr in &self.s.tracks {
            let Some(p) = tr.position_at(t) else { continue };
            let d = e.position.distance(p);
            self.trace.neighbors.push(NeighborRow {
                t,
                id: tr.id().to_string(),
                x: p.x,
                y: p.y,
            });
            self.trace.distances.push(DistanceRow {
                t,
                id: tr.id().to_string(),
                distance: d,
            });
            if summary.min_separation_m.map_or(true, |m| d < m) {
                summary.min_separation_m = Some(d);
                summary.min_separation_t_s = Some(t);
                summary.min_separation_id = Some(tr.id().to_string());
            }
        }
    }

    fn perceive(&mut self, t: f64) {
        let cfg = &self.s.config;
        let model = &self.s.model;
        self.trace.summary.frames += 1;
        for (tr, per) in self.s.tracks.iter().zip(self.perception.iter_mut()) {
            let Some(p) = tr.position_at(t) else {
                per.clear();
                continue;
            };
            let frame = synthesize_measurement(
                model,
                self.ego.position,
                self.ego.heading,
                p,
                t,
                cfg.max_range,
                &mut self.noise,
            );
            match frame {
                Ok(frame) => {
                    let Ok(estimate) = model.estimate_from_measurement(frame.x_m) else {
                        continue;
                    };
                    let sample = per.tracker.push_estimate(t, estimate).ok().flatten();
                    per.seen = Some(Seen {
                        estimate,
                        y_m: frame.y_m,
                        ego_pos: self.ego.position,
                        ego_heading: self.ego.heading,
                        world: to_world(
                            self.ego.position,
                            self.ego.heading,
                            Vec2::new(estimate.computed, frame.y_m),
                        ),
                    });
                    per.visible = true;
                    per.passed = false;
                    if sample.is_some() {
                        self.trace.summary.samples += 1;
                    }
                    let truth = to_body(self.ego.position, self.ego.heading, p);
                    let latest = per.tracker.latest();
                    self.trace.measurements.push(MeasurementRow {
                        t,
                        id: tr.id().to_string(),
                        x_true: truth.x,
                        y_true: truth.y,
                        x_m: frame.x_m,
                        y_m: frame.y_m,
                        x: estimate.computed,
                        x_lower: estimate.lower,
                        x_upper: estimate.upper,
                        sampled: sample.is_some(),
                        v_nom: latest.map(|e| e.v_nom),
                        v_upper: latest.map(|e| e.v_upper),
                        v_lower: latest.map(|e| e.v_lower),
                    });
                }
                Err(Visibility::Behind) => {
                    per.passed = per.seen.is_some();
                    per.visible = false;
                }
                Err(_) => {
                    per.passed = false;
                    per.visible = false;
                }
            }
        }
    }

    /// Observations of the neighbors assigned to intersection `k`.
    fn observe(&self, k: usize) -> Vec<(String, NeighborObservation)> {
        let cfg = &self.s.config;
        let lane = &self.s.legs[k].inputs.lane;
        let mut out = Vec::new();
        for (tr, per) in self.s.tracks.iter().zip(&self.perception) {
            let Some(seen) = per.seen else { continue };
            if lane.lateral_offset(seen.world) > cfg.corridor_half_width {
                continue;
            }
            let (x_n, region) = if per.visible {
                let region = obstacle_region(
                    seen.ego_pos,
                    seen.ego_heading,
                    &seen.estimate,
                    seen.y_m,
                    cfg.vehicle,
                );
                (lane.coordinate(seen.world), region)
            } else if per.passed {
                // bounded by where the camera plane meets the centerline
                let left = Vec2::from_angle(self.ego.heading).perp();
                let Some((y, _)) =
                    line_line_params(self.ego.position, left, lane.origin, lane.direction)
                else {
                    continue;
                };
                let ghost = self.ego.position + left * y;
                let region = obstacle_region(
                    self.ego.position,
                    self.ego.heading,
                    &DepthEstimate::exact(0.0),
                    y,
                    cfg.vehicle,
                );
                (lane.coordinate(ghost), region)
            } else {
                continue;
            };
            out.push((
                tr.id().to_string(),
                NeighborObservation {
                    x_n,
                    region,
                    v_upper: per.tracker.latest().map(|e| e.v_upper),
                },
            ));
        }
        out
    }

    fn log(&mut self, k: usize, events: Vec<DecisionEvent>) {
        self.trace.summary.decisions += events.len() as u64;
        self.trace
            .decisions
            .extend(events.into_iter().map(|event| DecisionRow {
                intersection: k,
                event,
            }));
    }

    fn start_path(&mut self, k: usize, t: f64) {
        self.ego.mode = EgoMode::ExecutingPath {
            intersection: k,
            progress_s: 0.0,
        };
        self.ego.speed = self.s.config.ego_speed;
        self.trace.summary.intersection[k].proceeded_at_s = Some(t);
    }

    fn execute(mut self) -> ScenarioTrace {
        let cfg = &self.s.config;
        let n = self.s.legs.len();
        let dt = cfg.tick_s;
        let v = cfg.ego_speed;
        let budget = self.s.route_length() / v + n as f64 * (cfg.wait_timeout_s + 1.0) + 10.0;
        let max_ticks = (budget / dt).ceil() as u64;

        // k / rate is exact for whole ticks-per-second, k * dt is not
        let per_s = 1.0 / dt;
        let clock = |k: u64| {
            if (per_s - per_s.round()).abs() < 1e-9 {
                k as f64 / per_s.round()
            } else {
                k as f64 * dt
            }
        };

        let mut next = 0usize;
        let mut wait: Option<WaitLoop> = None;
        let mut frame_idx: u64 = 0;
        let mut end = 0.0;
        self.record(0.0, 0);

        for k in 0..max_ticks {
            let t = clock(k);
            if frame_idx as f64 / cfg.camera_rate_hz <= t + FRAME_SLACK {
                while frame_idx as f64 / cfg.camera_rate_hz <= t + FRAME_SLACK {
                    frame_idx += 1;
                }
                if !matches!(self.ego.mode, EgoMode::ExecutingPath { .. }) {
                    self.perceive(t);
                }
            }

            let mut drove_path = matches!(self.ego.mode, EgoMode::ExecutingPath { .. });
            match self.ego.mode {
                EgoMode::Waiting => {
                    let obs = self.observe(next);
                    let wl = wait.as_mut().expect("waiting without a wait loop");
                    let status = wl.evaluate(&self.s.legs[next].inputs, &obs, t);
                    let events = wl.take_events();
                    self.log(next, events);
                    match status {
                        WaitStatus::Execute => {
                            wait = None;
                            drove_path = true;
                            self.start_path(next, t);
                            self.ego = advance(&self.ego, v * dt, &self.route);
                        }
                        WaitStatus::Wait => {}
                        WaitStatus::TimedOut => {
                            self.trace.summary.intersection[next].timed_out = true;
                            end = t;
                            break;
                        }
                    }
                }
                EgoMode::LaneFollow => {
                    let d = v * dt;
                    let p_i = self.route[next].p_i();
                    let remaining = (p_i - self.ego.position)
                        .dot(Vec2::from_angle(self.ego.heading))
                        .max(0.0);
                    if remaining <= d + 1e-12 {
                        let t_arr = t + remaining / v;
                        self.ego.position = p_i;
                        self.trace.summary.intersection[next].arrived_at_s = Some(t_arr);
                        let mut wl = WaitLoop::new(t_arr, cfg.wait_timeout_s);
                        let obs = self.observe(next);
                        let status = wl.evaluate(&self.s.legs[next].inputs, &obs, t_arr);
                        let events = wl.take_events();
                        self.log(next, events);
                        match status {
                            WaitStatus::Execute => {
                                drove_path = true;
                                self.start_path(next, t_arr);
                                self.ego = advance(&self.ego, d - remaining, &self.route);
                            }
                            _ => {
                                self.ego.mode = EgoMode::Waiting;
                                self.ego.speed = 0.0;
                                for per in &mut self.perception {
                                    per.tracker.reanchor();
                                }
                                wait = Some(wl);
                            }
                        }
                    } else {
                        self.ego = advance(&self.ego, d, &self.route);
                    }
                }
                EgoMode::ExecutingPath { .. } => {
                    self.ego = advance(&self.ego, v * dt, &self.route);
                }
            }

            let t_next = clock(k + 1);
            if drove_path && self.ego.mode == EgoMode::LaneFollow {
                // exit lane reached: a lane change invalidates all tracking
                for per in &mut self.perception {
                    per.clear();
                }
                next += 1;
                if next == n {
                    self.record(t_next, n - 1);
                    self.trace.summary.completed = true;
                    end = t_next;
                    break;
                }
            }
            self.record(t_next, next);
            end = t_next;
        }

        let summary = &mut self.trace.summary;
        summary.end_time_s = end;
        summary.ticks = self.trace.ego.len() as u64;
        for ix in &mut summary.intersection {
            if let Some(a) = ix.arrived_at_s {
                ix.wait_s = ix.proceeded_at_s.unwrap_or(end) - a;
            }
        }
        summary.total_wait_s = summary.intersection.iter().map(|i| i.wait_s).sum();
        self.trace
    }
}

/// Run one scenario to completion, timeout or the time budget.
pub fn run_scenario(scenario: &Scenario) -> ScenarioTrace {
    Run::new(scenario).execute()
}
