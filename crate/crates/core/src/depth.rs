//! Stereo depth error model.
//!
//! The measured depth `x_m` of a stereo camera overestimates the true
//! (computed) depth `x` by a quadratic error `f(x) = β1·x² + β2·x + β3`.
//! Scaling the error by `1 ∓ U_f`, with the uncertainty factor
//! `U_f = 1 − R²` of the curve fit, brackets the computed depth between a
//! lower bound `x_l` and an upper bound `x_u`. Both bounds are roots of a
//! quadratic and are written as `C0 + sqrt(C1 + C2·x + C3·x²)`.
//!
//! Every closed form below is evaluated in a rationalised shape
//! (`D / (sqrt(C0² + D) − C0)` instead of `C0 + sqrt(C0² + D)`) because
//! `C0` is large and negative for realistic coefficients, and the direct
//! form loses five or more digits to cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radicands above this negative value are rounding noise and are clamped to zero.
const RADICAND_FLOOR: f64 = -1e-12;

/// Raw coefficients as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub r_squared: f64,
}

/// Calibrated quadratic depth-error model with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelParams", into = "ModelParams")]
pub struct DepthErrorModel {
    beta1: f64,
    beta2: f64,
    beta3: f64,
    r_squared: f64,
    coeffs: BoundCoefficients,
}

/// Coefficients of the closed-form depth bounds.
///
/// `upper = c0u + sqrt(c1u + c2u·x + c3u·x²)` holds for every `x ≥ 0`;
/// the matching lower-bound expression is only non-negative for
/// `x ≥ lower_domain_start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCoefficients {
    pub c0u: f64,
    pub c1u: f64,
    pub c2u: f64,
    pub c3u: f64,
    pub c0l: f64,
    pub c1l: f64,
    pub c2l: f64,
    pub c3l: f64,
    pub lower_domain_start: f64,
    // c1 − c0², kept separately to avoid cancellation
    excess_u: f64,
    excess_l: f64,
}

/// One measurement mapped to computed depth plus bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthEstimate {
    pub measured: f64,
    pub computed: f64,
    /// Absent when the measurement lies below `β3·(1 + U_f)`.
    pub lower: Option<f64>,
    pub upper: f64,
}

impl DepthEstimate {
    /// An estimate with zero uncertainty, mostly useful in tests and replay.
    pub fn exact(depth: f64) -> Self {
        DepthEstimate {
            measured: depth,
            computed: depth,
            lower: Some(depth),
            upper: depth,
        }
    }

    /// Lower bound, or the pessimistic value 0 when it is absent.
    pub fn lower_or_zero(&self) -> f64 {
        self.lower.unwrap_or(0.0)
    }
}

impl TryFrom<ModelParams> for DepthErrorModel {
    type Error = Error;

    fn try_from(p: ModelParams) -> Result<Self> {
        DepthErrorModel::new(p.beta1, p.beta2, p.beta3, p.r_squared)
    }
}

impl From<DepthErrorModel> for ModelParams {
    fn from(m: DepthErrorModel) -> Self {
        m.params()
    }
}

impl DepthErrorModel {
    /// Build and validate a model.
    ///
    /// Requires `β1 > 0`, `β3 > 0`, `R² ∈ (0, 1)` and
    /// `1 + (1 + U_f)·β2 > 0`; the last condition keeps `x + c·f(x)`
    /// increasing on `[0, ∞)` for every scale `c ∈ [1 − U_f, 1 + U_f]`,
    /// without which the bounds lose their ordering.
    pub fn new(beta1: f64, beta2: f64, beta3: f64, r_squared: f64) -> Result<Self> {
        let finite = [beta1, beta2, beta3, r_squared].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("coefficients must be finite".into()));
        }
        if beta1 <= 0.0 {
            return Err(Error::InvalidModel(format!("beta1 must be > 0, got {beta1}")));
        }
        if beta3 <= 0.0 {
            return Err(Error::InvalidModel(format!("beta3 must be > 0, got {beta3}")));
        }
        if !(r_squared > 0.0 && r_squared < 1.0) {
            return Err(Error::InvalidModel(format!(
                "r_squared must lie in (0, 1), got {r_squared}"
            )));
        }
        let uf = 1.0 - r_squared;
        if 1.0 + (1.0 + uf) * beta2 <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "beta2 must exceed -1/(1 + U_f) = {}, got {beta2}",
                -1.0 / (1.0 + uf)
            )));
        }
        let coeffs = BoundCoefficients::compute(beta1, beta2, beta3, uf);
        Ok(DepthErrorModel {
            beta1,
            beta2,
            beta3,
            r_squared,
            coeffs,
        })
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            beta1: self.beta1,
            beta2: self.beta2,
            beta3: self.beta3,
            r_squared: self.r_squared,
        }
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn beta3(&self) -> f64 {
        self.beta3
    }

    pub fn r_squared(&self) -> f64 {
        self.r_squared
    }

    /// `U_f = 1 − R²`.
    pub fn uncertainty_factor(&self) -> f64 {
        1.0 - self.r_squared
    }

    pub fn bound_coefficients(&self) -> &BoundCoefficients {
        &self.coeffs
    }

    /// Smallest measured depth for which the lower bound exists.
    pub fn lower_bound_threshold(&self) -> f64 {
        self.beta3 * (1.0 + self.uncertainty_factor())
    }

    /// Depth measurement error `f(x)`.
    pub fn error_at(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Err(Error::NegativeDepth(x));
        }
        Ok(self.poly(x))
    }

    fn poly(&self, x: f64) -> f64 {
        (self.beta1 * x + self.beta2) * x + self.beta3
    }

    /// Computed depth `x ≥ 0` with `x + f(x) = x_m`.
    pub fn solve_depth(&self, x_m: f64) -> Result<f64> {
        if !(x_m >= self.beta3) {
            return Err(Error::BelowOffset {
                measured: x_m,
                offset: self.beta3,
            });
        }
        let b = self.beta2 + 1.0;
        let excess = x_m - self.beta3;
        let disc = b * b + 4.0 * self.beta1 * excess;
        // b > 0 is guaranteed by validation, so the rationalised root is stable
        Ok(2.0 * excess / (b + disc.sqrt()))
    }

    /// Lower and upper bounds on the computed depth `x`.
    ///
    /// The lower bound is `None` below `lower_domain_start`.
    pub fn depth_bounds(&self, x: f64) -> Result<(Option<f64>, f64)> {
        if x < 0.0 {
            return Err(Error::NegativeDepth(x));
        }
        let upper = self.upper_bound(x)?;
        let lower = if x >= self.coeffs.lower_domain_start {
            Some(self.lower_bound_raw(x)?.max(0.0))
        } else {
            None
        };
        Ok((lower, upper))
    }

    pub(crate) fn upper_bound(&self, x: f64) -> Result<f64> {
        let c = &self.coeffs;
        let d = c.excess_u + (c.c2u + c.c3u * x) * x;
        rationalised_root(c.c0u, d)
    }

    /// Lower-bound expression without the domain check; negative below the domain.
    pub(crate) fn lower_bound_raw(&self, x: f64) -> Result<f64> {
        let c = &self.coeffs;
        let d = c.excess_l + (c.c2l + c.c3l * x) * x;
        rationalised_root(c.c0l, d)
    }

    /// Convert a measured depth into computed depth with bounds.
    pub fn estimate_from_measurement(&self, x_m: f64) -> Result<DepthEstimate> {
        let computed = self.solve_depth(x_m)?;
        let upper = self.upper_bound(computed)?.max(computed);
        let lower = if x_m >= self.lower_bound_threshold() {
            Some(self.lower_bound_raw(computed)?.clamp(0.0, computed))
        } else {
            None
        };
        Ok(DepthEstimate {
            measured: x_m,
            computed,
            lower,
            upper,
        })
    }
}

/// `c0 + sqrt(c0² + d)`, evaluated without cancellation when `c0 < 0`.
fn rationalised_root(c0: f64, d: f64) -> Result<f64> {
    let mut rad = c0 * c0 + d;
    if rad < 0.0 {
        if rad > RADICAND_FLOOR {
            rad = 0.0;
        } else {
            return Err(Error::NegativeRadicand(rad));
        }
    }
    let s = rad.sqrt();
    if c0 < 0.0 {
        let den = s - c0;
        if den == 0.0 {
            return Ok(0.0);
        }
        Ok(d / den)
    } else {
        Ok(c0 + s)
    }
}

impl BoundCoefficients {
    fn compute(beta1: f64, beta2: f64, beta3: f64, uf: f64) -> Self {
        let b = beta2 + 1.0;
        let up = 1.0 - uf;
        let lo = 1.0 + uf;

        let c0u = -(b - beta2 * uf) / (2.0 * beta1 * up);
        let excess_u = beta3 * uf / (beta1 * up);
        let c0l = -(b + beta2 * uf) / (2.0 * beta1 * lo);
        let excess_l = -beta3 * uf / (beta1 * lo);

        // computed depth whose measurement equals β3·(1 + U_f)
        let shift = beta3 * uf;
        let lower_domain_start = 2.0 * shift / (b + (b * b + 4.0 * beta1 * shift).sqrt());

        BoundCoefficients {
            c0u,
            c1u: c0u * c0u + excess_u,
            c2u: b / (beta1 * up),
            c3u: 1.0 / up,
            c0l,
            c1l: c0l * c0l + excess_l,
            c2l: b / (beta1 * lo),
            c3l: 1.0 / lo,
            lower_domain_start,
            excess_u,
            excess_l,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> DepthErrorModel {
        DepthErrorModel::new(0.002797, -0.004249, 0.007311, 0.9).unwrap()
    }

    /// Solve `x_m − y = scale·f(y)` for `y` by bisection.
    fn bisect_bound(m: &DepthErrorModel, x_m: f64, scale: f64) -> f64 {
        let g = |y: f64| y + scale * (m.beta1 * y * y + m.beta2 * y + m.beta3) - x_m;
        let (mut a, mut b) = (-1.0, x_m + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if g(mid) > 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn error_polynomial_values() {
        let m = reference();
        assert_eq!(m.error_at(0.0).unwrap(), 0.007311);
        // 0.002797·1e4 − 0.4249 + 0.007311
        assert!((m.error_at(100.0).unwrap() - 27.552411).abs() < 1e-10);
        let band = m.uncertainty_factor() * m.error_at(40.0).unwrap();
        assert!((band - 0.431).abs() < 0.01, "{band}");
        assert!(matches!(m.error_at(-1.0), Err(Error::NegativeDepth(_))));
    }

    #[test]
    fn model_validation() {
        assert!(DepthErrorModel::new(0.0, 0.0, 0.1, 0.9).is_err());
        assert!(DepthErrorModel::new(0.01, 0.0, 0.0, 0.9).is_err());
        assert!(DepthErrorModel::new(0.01, 0.0, 0.1, 1.0).is_err());
        assert!(DepthErrorModel::new(0.01, 0.0, 0.1, 0.0).is_err());
        assert!(DepthErrorModel::new(0.01, -1.5, 0.1, 0.9).is_err());
        assert!(DepthErrorModel::new(f64::NAN, 0.0, 0.1, 0.9).is_err());
    }

    #[test]
    fn solve_depth_edges() {
        let m = reference();
        assert_eq!(m.solve_depth(m.beta3()).unwrap(), 0.0);
        let xm = 100.0 + m.error_at(100.0).unwrap();
        assert!((m.solve_depth(xm).unwrap() - 100.0).abs() < 1e-9);
        assert!(matches!(
            m.solve_depth(m.beta3() - 0.001),
            Err(Error::BelowOffset { .. })
        ));
    }

    #[test]
    fn coefficients_match_quadratic_formula() {
        // Independent route: write each bound as the root of
        // a·y² + b·y + (c0 − β1x² − (β2+1)x) = 0 and read off the coefficients.
        let m = reference();
        let uf = 0.1;
        let c = m.bound_coefficients();
        for (scale, c0, c1, c2, c3) in [
            (1.0 - uf, c.c0u, c.c1u, c.c2u, c.c3u),
            (1.0 + uf, c.c0l, c.c1l, c.c2l, c.c3l),
        ] {
            let a = scale * m.beta1;
            let b = scale * m.beta2 + 1.0;
            let konst = m.beta3 * (scale - 1.0);
            // y = −b/2a ± sqrt(b²/4a² − konst/a + β1x²/a + (β2+1)x/a)
            let e0 = -b / (2.0 * a);
            let e1 = b * b / (4.0 * a * a) - konst / a;
            let e2 = (m.beta2 + 1.0) / a;
            let e3 = m.beta1 / a;
            for (got, want) in [(c0, e0), (c1, e1), (c2, e2), (c3, e3)] {
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
            }
        }
        assert!(c.c3u > 1.0 && c.c3l < 1.0);
    }

    #[test]
    fn coefficients_collapse_without_uncertainty() {
        let m = DepthErrorModel::new(0.002797, -0.004249, 0.007311, 1.0 - 1e-12).unwrap();
        let c = m.bound_coefficients();
        assert!((c.c3u - 1.0).abs() < 1e-9 && (c.c3l - 1.0).abs() < 1e-9);
        assert!((c.c0u - c.c0l).abs() < 1e-6);
        for x in [0.0, 1.0, 40.0, 150.0] {
            let (lo, up) = m.depth_bounds(x).unwrap();
            let lo = lo.unwrap_or(0.0);
            assert!(up - lo < 1e-4 * x + 1e-4);
        }
    }

    #[test]
    fn lower_domain_start_is_preimage_of_threshold() {
        let m = reference();
        let start = m.bound_coefficients().lower_domain_start;
        assert!(start > 0.0 && start < 0.01, "{start}");
        let want = m.solve_depth(m.lower_bound_threshold()).unwrap();
        assert!((start - want).abs() < 1e-15);
        let (lo, _) = m.depth_bounds(start).unwrap();
        assert!(lo.unwrap().abs() < 1e-12);
        let (lo, _) = m.depth_bounds(start * 0.5).unwrap();
        assert!(lo.is_none());
    }

    #[test]
    fn bounds_at_forty_metres() {
        let m = reference();
        let (lo, up) = m.depth_bounds(40.0).unwrap();
        let lo = lo.unwrap();
        assert!(lo < 40.0 && 40.0 < up);
        let xm = 40.0 + m.error_at(40.0).unwrap();
        assert!((up - bisect_bound(&m, xm, 0.9)).abs() < 1e-9);
        assert!((lo - bisect_bound(&m, xm, 1.1)).abs() < 1e-9);
        // the computed-depth band is narrower than the ±0.431 m measurement band
        assert!(((up - lo) - 0.707_515_674_6).abs() < 1e-6, "{}", up - lo);
    }

    #[test]
    fn defining_identities_hold() {
        let m = reference();
        let uf = m.uncertainty_factor();
        let mut x = 0.0;
        while x <= 300.0 {
            let xm = x + m.poly(x);
            let (lo, up) = m.depth_bounds(x).unwrap();
            assert!((xm - up - (1.0 - uf) * m.poly(up)).abs() < 1e-9);
            assert!(up >= x);
            if let Some(lo) = lo {
                assert!((xm - lo - (1.0 + uf) * m.poly(lo)).abs() < 1e-9);
                assert!(lo <= x);
            }
            x += 0.37;
        }
    }

    #[test]
    fn estimate_edges() {
        let m = reference();
        let e = m.estimate_from_measurement(m.beta3()).unwrap();
        assert_eq!(e.computed, 0.0);
        assert!(e.upper > 0.0);
        assert!(e.lower.is_none());

        let e = m.estimate_from_measurement(100.0).unwrap();
        let lo = e.lower.unwrap();
        assert!(lo < e.computed && e.computed < e.upper);
    }

    #[test]
    fn bounds_are_monotone_and_band_grows() {
        let m = reference();
        let start = m.bound_coefficients().lower_domain_start;
        let mut prev: Option<(f64, f64)> = None;
        let mut x = start;
        while x < 200.0 {
            let (lo, up) = m.depth_bounds(x).unwrap();
            let lo = lo.unwrap();
            if let Some((plo, pup)) = prev {
                assert!(lo > plo && up > pup);
                // the band narrows slightly below ~0.77 m, where the lower
                // bound climbs off zero
                if x >= 1.0 {
                    assert!(up - lo >= pup - plo - 1e-12);
                }
            }
            prev = Some((lo, up));
            x += 0.05;
        }
    }

    #[test]
    fn serde_roundtrip_validates() {
        let m: DepthErrorModel =
            toml::from_str("beta1 = 0.002797\nbeta2 = -0.004249\nbeta3 = 0.007311\nr_squared = 0.9")
                .unwrap();
        assert_eq!(m, reference());
        let bad: std::result::Result<DepthErrorModel, _> =
            toml::from_str("beta1 = -1.0\nbeta2 = 0.0\nbeta3 = 0.1\nr_squared = 0.9");
        assert!(bad.is_err());
    }
}
