//! Plot-ready CSV tables.

use std::fmt::Write as _;

use crate::closing_speed::{next_sample_depth, sample_stream, DepthStream, SamplingPlan};
use crate::depth::DepthErrorModel;
use crate::error::{Error, Result};

pub const DEPTH_PROFILE_HEADER: &str = "x,f,x_l,x_u,half_width";
pub const SAMPLING_PLAN_HEADER: &str = "epsilon,x1,x2,dx_abs,status";
pub const CLOSING_SPEED_HEADER: &str = "t1,t2,x1,x2,v_nom,v_upper,v_lower,gamma_u";

/// Inclusive grid `start, start + step, ..., end`.
pub fn grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite()) {
        return Err(Error::validation("range", "bounds must be finite"));
    }
    if end < start {
        return Err(Error::validation("range", format!("end {end} is below start {start}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::validation("step", format!("must be positive, got {step}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as u64;
    if n > 10_000_000 {
        return Err(Error::validation("step", "grid has more than 10^7 points"));
    }
    let mut xs: Vec<f64> = (0..=n).map(|k| start + k as f64 * step).collect();
    if end - xs[xs.len() - 1] > 1e-9 * step {
        xs.push(end);
    }
    Ok(xs)
}

/// Error polynomial, bounds and band half-width `U_f·f(x)` over computed depth.
pub fn depth_profile(model: &DepthErrorModel, xs: &[f64]) -> Result<String> {
    let mut out = format!("{DEPTH_PROFILE_HEADER}\n");
    let u = model.uncertainty_factor();
    for &x in xs {
        let f = model.error_at(x)?;
        let (lo, up) = model.depth_bounds(x)?;
        let lo = lo.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{x},{f},{lo},{up},{}", u * f);
    }
    Ok(out)
}

/// Next sampling depth for every `(ε, x1)` pair, long format.
///
/// Infeasible pairs are reported in the `status` column.
pub fn sampling_plan(model: &DepthErrorModel, epsilons: &[f64], xs: &[f64]) -> Result<String> {
    let plans = epsilons
        .iter()
        .map(|&e| SamplingPlan::new(e, *model).map_err(|err| Error::validation("epsilon", err.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(SamplingPlan, f64)> = plans
        .iter()
        .flat_map(|p| xs.iter().map(move |&x| (*p, x)))
        .collect();
    let rows = crate::par::map(&jobs, |&(plan, x1)| match next_sample_depth(&plan, x1) {
        Ok(x2) => format!("{},{x1},{x2},{},ok", plan.epsilon(), x1 - x2),
        Err(e) => format!("{},{x1},,,{}", plan.epsilon(), csv_safe(&e.to_string())),
    });
    let mut out = format!("{SAMPLING_PLAN_HEADER}\n");
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

/// Closing-speed estimates produced by the adaptive sampler on `stream`.
pub fn closing_speed(plan: &SamplingPlan, stream: &DepthStream) -> Result<String> {
    let mut out = format!("{CLOSING_SPEED_HEADER}\n");
    for e in sample_stream(plan, stream)? {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.t1,
            e.t2,
            e.first.computed,
            e.second.computed,
            e.v_nom,
            e.v_upper,
            e.v_lower,
            e.gamma_upper()
        );
    }
    Ok(out)
}

fn csv_safe(s: &str) -> String {
    s.replace([',', '\n'], ";")
}
