//! Stereo measurement synthesis from ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::depth::DepthErrorModel;
use crate::geometry::Vec2;

/// One stereo reading of one neighbor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementFrame {
    pub t: f64,
    /// Measured depth (biased by the error polynomial plus noise).
    pub x_m: f64,
    /// Lateral offset, noise-free.
    pub y_m: f64,
}

/// Field-of-view gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visibility {
    Visible,
    /// At or behind the camera plane.
    Behind,
    OutOfRange,
}

/// Position of `p` in the body frame of an ego at `pos` with `heading`
/// (x forward, y to the left).
pub fn to_body(pos: Vec2, heading: f64, p: Vec2) -> Vec2 {
    (p - pos).rotate(-heading)
}

pub fn to_world(pos: Vec2, heading: f64, body: Vec2) -> Vec2 {
    pos + body.rotate(heading)
}

pub fn visibility(rel: Vec2, max_range: f64) -> Visibility {
    if rel.x <= 0.0 {
        Visibility::Behind
    } else if rel.x > max_range {
        Visibility::OutOfRange
    } else {
        Visibility::Visible
    }
}

/// Seeded noise `η ~ U[−h, h]`, or zero when disabled.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: Option<ChaCha8Rng>,
}

impl NoiseSource {
    pub fn new(seed: u64, enabled: bool) -> Self {
        NoiseSource {
            rng: enabled.then(|| ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn disabled() -> Self {
        NoiseSource { rng: None }
    }

    pub fn sample(&mut self, half_width: f64) -> f64 {
        match &mut self.rng {
            Some(rng) => half_width * rng.gen_range(-1.0..=1.0),
            None => 0.0,
        }
    }
}

/// Measurement of a neighbor at `neighbor`, or the reason there is none.
///
/// Readings that would fall below the error offset `β3` are treated as
/// being at the camera plane.
pub fn synthesize_measurement(
    model: &DepthErrorModel,
    ego_pos: Vec2,
    ego_heading: f64,
    neighbor: Vec2,
    t: f64,
    max_range: f64,
    noise: &mut NoiseSource,
) -> Result<MeasurementFrame, Visibility> {
    let rel = to_body(ego_pos, ego_heading, neighbor);
    match visibility(rel, max_range) {
        Visibility::Visible => {}
        gate => return Err(gate),
    }
    let f = model.error_at(rel.x).map_err(|_| Visibility::Behind)?;
    let eta = noise.sample(model.uncertainty_factor() * f);
    let x_m = rel.x + f + eta;
    if x_m < model.beta3() {
        return Err(Visibility::Behind);
    }
    Ok(MeasurementFrame { t, x_m, y_m: rel.y })
}
