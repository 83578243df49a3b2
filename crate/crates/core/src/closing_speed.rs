//! Closing speed from successive depth estimates and the adaptive
//! sampling rule that pins the relative deviation of its upper bound.
//!
//! Given two computed depths `x1 > x2` taken `Δt` apart,
//!
//! ```text
//! v_nom   = −(x2  − x1 ) / Δt
//! v_upper = −(x2l − x1u) / Δt
//! v_lower = −(x2u − x1l) / Δt
//! ```
//!
//! and the relative deviation `γ_u = (v_upper − v_nom) / v_nom` depends
//! only on the depths. [`next_sample_depth`] picks `x2` so that
//! `γ_u = ε` exactly, i.e. it solves
//! `(1 + ε)(x1 − x2) = x1u − x2l(x2)` for `x2 ∈ (0, x1)`.

use std::io::Read;

use crate::depth::{DepthErrorModel, DepthEstimate};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosingSpeedEstimate {
    pub v_nom: f64,
    pub v_upper: f64,
    pub v_lower: f64,
    pub first: DepthEstimate,
    pub second: DepthEstimate,
    pub t1: f64,
    pub t2: f64,
    pub dt: f64,
    /// `x2 − x1`; negative while approaching.
    pub dx: f64,
}

impl ClosingSpeedEstimate {
    /// `(v_upper − v_nom) / v_nom`.
    pub fn gamma_upper(&self) -> f64 {
        (self.v_upper - self.v_nom) / self.v_nom
    }
}

/// Closing speed and its bounds between two depth estimates.
pub fn closing_speed(
    first: &DepthEstimate,
    t1: f64,
    second: &DepthEstimate,
    t2: f64,
) -> Result<ClosingSpeedEstimate> {
    let dt = t2 - t1;
    if !(dt > 0.0) {
        return Err(Error::NonPositiveInterval(dt));
    }
    if !(first.computed > second.computed) {
        return Err(Error::NotApproaching {
            x1: first.computed,
            x2: second.computed,
        });
    }
    let x1l = first.lower.ok_or(Error::OutOfDomain(first.computed))?;
    let x2l = second.lower.ok_or(Error::OutOfDomain(second.computed))?;
    let dx = second.computed - first.computed;
    Ok(ClosingSpeedEstimate {
        v_nom: -dx / dt,
        v_upper: -(x2l - first.upper) / dt,
        v_lower: -(second.upper - x1l) / dt,
        first: *first,
        second: *second,
        t1,
        t2,
        dt,
        dx,
    })
}

/// `γ_u` for an arbitrary pair of computed depths, evaluated from the bounds.
pub fn upper_deviation(model: &DepthErrorModel, x1: f64, x2: f64) -> Result<f64> {
    if !(x1 > x2) {
        return Err(Error::NotApproaching { x1, x2 });
    }
    let (_, x1u) = model.depth_bounds(x1)?;
    let (x2l, _) = model.depth_bounds(x2)?;
    let x2l = x2l.ok_or(Error::OutOfDomain(x2))?;
    Ok((x1u - x2l - (x1 - x2)) / (x1 - x2))
}

/// Relative deviation threshold paired with the depth model it applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    epsilon: f64,
    model: DepthErrorModel,
}

impl SamplingPlan {
    pub fn new(epsilon: f64, model: DepthErrorModel) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(SamplingPlan { epsilon, model })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn model(&self) -> &DepthErrorModel {
        &self.model
    }
}

/// Next sampling depth `x2 < x1` at which `γ_u` equals `ε`.
///
/// The implicit equation is squared into a quadratic in `x2`; the root
/// that lies in the lower-bound domain and satisfies the unsquared
/// equation is kept and then polished with safeguarded Newton steps.
/// Bisection takes over if neither quadratic root qualifies.
pub fn next_sample_depth(plan: &SamplingPlan, x1: f64) -> Result<f64> {
    let model = &plan.model;
    let c = model.bound_coefficients();
    let start = c.lower_domain_start;
    if !(x1 >= start) || !x1.is_finite() {
        return Err(Error::OutOfDomain(x1));
    }
    let k = 1.0 + plan.epsilon;
    let x1u = model.upper_bound(x1)?;

    // h is strictly increasing on [start, x1] with h(x1) = x1u − x1l > 0
    let h = |x2: f64| -> Result<f64> { Ok(x1u - model.lower_bound_raw(x2)? - k * (x1 - x2)) };
    let h_lo = h(start)?;
    if h_lo > 0.0 {
        return Err(Error::EpsilonInfeasible {
            x1,
            epsilon: plan.epsilon,
        });
    }
    if h_lo == 0.0 {
        return Ok(start);
    }

    // sqrt(C1l + C2l·x2 + C3l·x2²) = A + k·x2
    let a_shift = x1u - c.c0l - k * x1;
    let qa = k * k - c.c3l;
    let qb = 2.0 * a_shift * k - c.c2l;
    // A² − C1l = (A − C0l)(A + C0l) − (C1l − C0l²)
    let qc = (a_shift - c.c0l) * (x1u - k * x1) - (c.c1l - c.c0l * c.c0l);

    let mut best: Option<(f64, f64)> = None;
    for root in quadratic_roots(qa, qb, qc) {
        if root < start || root > x1 || a_shift + k * root < 0.0 {
            continue;
        }
        let r = h(root)?.abs();
        if best.map_or(true, |(_, br)| r < br) {
            best = Some((root, r));
        }
    }

    let (mut lo, mut hi) = (start, x1);
    let mut x2 = match best {
        Some((root, _)) => root,
        None => 0.5 * (lo + hi),
    };
    for _ in 0..200 {
        let hx = h(x2)?;
        if hx == 0.0 {
            return Ok(x2);
        }
        if hx < 0.0 {
            lo = x2;
        } else {
            hi = x2;
        }
        let slope = k - lower_bound_slope(model, x2);
        let newton = x2 - hx / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x2).abs() <= 1e-13 * x1.max(1.0) {
            return Ok(next);
        }
        x2 = next;
    }
    Ok(x2)
}

/// d x_l / d x.
fn lower_bound_slope(model: &DepthErrorModel, x: f64) -> f64 {
    let c = model.bound_coefficients();
    let rad = c.c1l + (c.c2l + c.c3l * x) * x;
    (c.c2l + 2.0 * c.c3l * x) / (2.0 * rad.max(f64::MIN_POSITIVE).sqrt())
}

/// Real roots of `a·x² + b·x + c`, computed without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b != 0.0 { vec![-c / b] } else { vec![] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(c / q);
    }
    roots
}

/// Timestamped measured depths of one target.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DepthStream {
    samples: Vec<(f64, f64)>,
}

impl DepthStream {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(t, x)) in samples.iter().enumerate() {
            if !t.is_finite() || !x.is_finite() {
                return Err(Error::validation(
                    format!("sample[{i}]"),
                    "values must be finite",
                ));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(Error::NonMonotoneTime(i));
            }
        }
        Ok(DepthStream { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Parse a `t_s,x_m_m` CSV (header required).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t_s", "x_m_m"] {
            return Err(Error::parse(1, format!("expected header `t_s,x_m_m`, got `{}`", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::parse(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let field = |i: usize, name: &str| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::parse(line, format!("missing `{name}`")))?
                    .parse::<f64>()
                    .map_err(|e| Error::parse(line, format!("`{name}`: {e}")))
            };
            let t = field(0, "t_s")?;
            let x = field(1, "x_m_m")?;
            if let Some(&(prev, _)) = samples.last() {
                if t <= prev {
                    return Err(Error::parse(line, format!("timestamp {t} not after {prev}")));
                }
            }
            samples.push((t, x));
        }
        DepthStream::new(samples)
    }
}

/// Incremental form of [`sample_stream`]: feed measurements one at a time.
///
/// The first measurement with a lower bound becomes the anchor. Each time
/// the computed depth drops to or below the target returned by
/// [`next_sample_depth`], an estimate is emitted and the crossing
/// measurement becomes the new anchor. Between samples the last estimate
/// stays in force.
#[derive(Debug, Clone)]
pub struct ClosingSpeedTracker {
    plan: SamplingPlan,
    anchor: Option<(f64, DepthEstimate)>,
    target: Option<f64>,
    latest: Option<ClosingSpeedEstimate>,
    last_t: Option<f64>,
}

impl ClosingSpeedTracker {
    pub fn new(plan: SamplingPlan) -> Self {
        ClosingSpeedTracker {
            plan,
            anchor: None,
            target: None,
            latest: None,
            last_t: None,
        }
    }

    pub fn plan(&self) -> &SamplingPlan {
        &self.plan
    }

    /// Most recent estimate, if any.
    pub fn latest(&self) -> Option<&ClosingSpeedEstimate> {
        self.latest.as_ref()
    }

    /// Depth at which the next sample is due, `None` when halted or unanchored.
    pub fn target(&self) -> Option<f64> {
        self.target
    }

    pub fn anchor(&self) -> Option<(f64, DepthEstimate)> {
        self.anchor
    }

    /// Drop the anchor but keep the latest estimate in force.
    pub fn reanchor(&mut self) {
        self.anchor = None;
        self.target = None;
    }

    /// Forget everything.
    pub fn reset(&mut self) {
        self.reanchor();
        self.latest = None;
    }

    pub fn push(&mut self, t: f64, x_m: f64) -> Result<Option<ClosingSpeedEstimate>> {
        let est = self.plan.model.estimate_from_measurement(x_m)?;
        self.push_estimate(t, est)
    }

    pub fn push_estimate(
        &mut self,
        t: f64,
        est: DepthEstimate,
    ) -> Result<Option<ClosingSpeedEstimate>> {
        if let Some(prev) = self.last_t {
            if !(t > prev) {
                return Err(Error::NonPositiveInterval(t - prev));
            }
        }
        self.last_t = Some(t);

        let Some((t1, first)) = self.anchor else {
            if est.lower.is_some() {
                self.set_anchor(t, est);
            }
            return Ok(None);
        };
        let Some(target) = self.target else {
            return Ok(None);
        };
        if est.computed > target {
            return Ok(None);
        }
        if est.lower.is_none() {
            // crossed below the lower-bound domain: hold the last estimate
            self.target = None;
            return Ok(None);
        }
        let out = closing_speed(&first, t1, &est, t)?;
        self.latest = Some(out);
        self.set_anchor(t, est);
        Ok(Some(out))
    }

    fn set_anchor(&mut self, t: f64, est: DepthEstimate) {
        self.anchor = Some((t, est));
        self.target = next_sample_depth(&self.plan, est.computed).ok();
    }
}

/// Run the adaptive sampler over a whole stream.
pub fn sample_stream(plan: &SamplingPlan, stream: &DepthStream) -> Result<Vec<ClosingSpeedEstimate>> {
    let mut tracker = ClosingSpeedTracker::new(*plan);
    let mut out = Vec::new();
    for &(t, x_m) in stream.samples() {
        if let Some(e) = tracker.push(t, x_m)? {
            out.push(e);
        }
    }
    Ok(out)
}
