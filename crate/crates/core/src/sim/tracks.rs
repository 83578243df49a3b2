//! Neighbor trajectories: replayed from CSV or generated.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use crate::config::{AffineTransform, SyntheticTrack};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

pub const TRACK_COLUMNS: [&str; 4] = ["vehicle_id", "frame", "local_x_m", "local_y_m"];

/// Piecewise-linear trajectory. The vehicle exists only between its
/// first and last sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTrack {
    id: String,
    samples: Vec<(f64, Vec2)>,
}

impl NeighborTrack {
    pub fn new(id: impl Into<String>, samples: Vec<(f64, Vec2)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation("track", "no samples"));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::NonMonotoneTime(i + 1));
            }
        }
        Ok(NeighborTrack {
            id: id.into(),
            samples,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &[(f64, Vec2)] {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    fn segment(&self, t: f64) -> Option<usize> {
        if t < self.start_time() || t > self.end_time() || self.samples.len() < 2 {
            return None;
        }
        let i = self.samples.partition_point(|s| s.0 <= t);
        Some(i.clamp(1, self.samples.len() - 1) - 1)
    }

    /// Position at `t`, `None` outside the track's time span.
    pub fn position_at(&self, t: f64) -> Option<Vec2> {
        if self.samples.len() == 1 {
            return (t == self.samples[0].0).then_some(self.samples[0].1);
        }
        let i = self.segment(t)?;
        let (t0, p0) = self.samples[i];
        let (t1, p1) = self.samples[i + 1];
        Some(p0.lerp(p1, (t - t0) / (t1 - t0)))
    }

    /// Velocity of the segment containing `t` (the later one at a knot).
    pub fn velocity_at(&self, t: f64) -> Option<Vec2> {
        let i = self.segment(t)?;
        let (t0, p0) = self.samples[i];
        let (t1, p1) = self.samples[i + 1];
        Some((p1 - p0) * (1.0 / (t1 - t0)))
    }

    /// Largest segment speed over `[t0, t1]`.
    pub fn max_speed_between(&self, t0: f64, t1: f64) -> f64 {
        self.samples
            .windows(2)
            .filter(|w| w[1].0 > t0 && w[0].0 < t1)
            .map(|w| w[1].1.distance(w[0].1) / (w[1].0 - w[0].0))
            .fold(0.0, f64::max)
    }
}

/// Parse a trajectory CSV (`vehicle_id,frame,local_x_m,local_y_m`).
///
/// Frames are converted to seconds with `frame_rate_hz` and positions
/// mapped through `transform`. Tracks come back sorted by id.
pub fn load_tracks<R: Read>(
    reader: R,
    frame_rate_hz: f64,
    transform: &AffineTransform,
) -> Result<Vec<NeighborTrack>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let mut idx = [usize::MAX; 4];
    for (i, h) in headers.iter().enumerate() {
        match TRACK_COLUMNS.iter().position(|c| *c == h) {
            Some(k) if idx[k] == usize::MAX => idx[k] = i,
            Some(_) => return Err(Error::parse(1, format!("duplicate column {h:?}"))),
            None => return Err(Error::parse(1, format!("unknown column {h:?}"))),
        }
    }
    if let Some(k) = idx.iter().position(|&i| i == usize::MAX) {
        return Err(Error::parse(1, format!("missing column {:?}", TRACK_COLUMNS[k])));
    }

    let mut by_id: BTreeMap<String, Vec<(i64, Vec2)>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != headers.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", headers.len(), rec.len()),
            ));
        }
        let id = rec[idx[0]].to_string();
        if id.is_empty() {
            return Err(Error::parse(line, "empty vehicle_id"));
        }
        let frame: i64 = rec[idx[1]]
            .parse()
            .map_err(|_| Error::parse(line, format!("frame {:?} is not an integer", &rec[idx[1]])))?;
        let coord = |k: usize| -> Result<f64> {
            let v: f64 = rec[idx[k]].parse().map_err(|_| {
                Error::parse(line, format!("{} {:?} is not a number", TRACK_COLUMNS[k], &rec[idx[k]]))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(line, format!("{} is not finite", TRACK_COLUMNS[k])))
            }
        };
        let p = Vec2::new(coord(2)?, coord(3)?);
        let rows = by_id.entry(id.clone()).or_default();
        if let Some(&(prev, _)) = rows.last() {
            if frame <= prev {
                let what = if frame == prev { "duplicated" } else { "non-monotone" };
                return Err(Error::parse(
                    line,
                    format!("{what} frame {frame} for vehicle {id} (previous {prev})"),
                ));
            }
        }
        rows.push((frame, p));
    }

    by_id
        .into_iter()
        .map(|(id, rows)| {
            let samples = rows
                .into_iter()
                .map(|(f, p)| {
                    (
                        f as f64 / frame_rate_hz + transform.time_offset_s,
                        transform.apply(p),
                    )
                })
                .collect();
            NeighborTrack::new(id, samples)
        })
        .collect()
}

pub fn load_tracks_file(
    path: &Path,
    frame_rate_hz: f64,
    transform: &AffineTransform,
) -> Result<Vec<NeighborTrack>> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    load_tracks(file, frame_rate_hz, transform)
}

/// Lane follower along `lane_heading` with a piecewise-constant speed,
/// sampled at `rate_hz` plus every speed change, so interpolation is exact.
pub fn synthetic_track(spec: &SyntheticTrack, lane_heading: f64, rate_hz: f64) -> Result<NeighborTrack> {
    let dir = Vec2::from_angle(lane_heading);
    let mut knots: Vec<f64> = spec
        .speed_profile
        .iter()
        .map(|e| e[0])
        .filter(|&t| t < spec.duration_s)
        .collect();
    let n = (spec.duration_s * rate_hz).floor() as u64;
    knots.extend((0..=n).map(|k| k as f64 / rate_hz));
    knots.push(spec.duration_s);
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut samples = Vec::with_capacity(knots.len());
    let mut dist = 0.0;
    let mut prev = 0.0;
    let mut seg = 0;
    for &t in &knots {
        // integrate the profile from `prev` to `t`
        let mut s = prev;
        while s < t {
            while seg + 1 < spec.speed_profile.len() && spec.speed_profile[seg + 1][0] <= s {
                seg += 1;
            }
            let end = spec
                .speed_profile
                .get(seg + 1)
                .map_or(t, |e| e[0].min(t));
            dist += spec.speed_profile[seg][1] * (end - s);
            s = end;
        }
        prev = t;
        samples.push((spec.start_time_s + t, spec.start + dir * dist));
    }
    NeighborTrack::new(spec.id.clone(), samples)
}
