//! Execution rule `chi(|e|) <= sigma * alpha1(|x|)` and crossing location.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Comparison function of class K-infinity.
#[derive(Clone)]
pub enum ComparisonFn {
    /// `coef * s^exponent`.
    Power { coef: f64, exponent: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ComparisonFn {
    pub fn power(coef: f64, exponent: f64) -> Self {
        ComparisonFn::Power { coef, exponent }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ComparisonFn::Power { coef, exponent } => coef * s.powf(*exponent),
            ComparisonFn::Custom(f) => f(s),
        }
    }

    /// Checks `f(0) = 0` and strict increase on a sampled grid over `[0, s_max]`.
    pub fn check_class_k(&self, s_max: f64, samples: usize) -> bool {
        if self.eval(0.0) != 0.0 {
            return false;
        }
        let mut prev = 0.0;
        (1..=samples).all(|i| {
            let v = self.eval(s_max * i as f64 / samples as f64);
            let increasing = v > prev;
            prev = v;
            increasing
        })
    }
}

impl fmt::Debug for ComparisonFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComparisonFn::Power { coef, exponent } => write!(f, "{coef}*s^{exponent}"),
            ComparisonFn::Custom(_) => f.write_str("custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TriggerRule {
    pub chi: ComparisonFn,
    pub alpha1: ComparisonFn,
    pub sigma: f64,
}

impl TriggerRule {
    pub fn new(chi: ComparisonFn, alpha1: ComparisonFn, sigma: f64) -> Result<Self> {
        let rule = Self { chi, alpha1, sigma };
        rule.validate()?;
        Ok(rule)
    }

    /// Quadratic rule `e^2 = sigma0 x^2` of the scalar example family.
    pub fn quadratic(sigma0: f64) -> Result<Self> {
        Self::new(ComparisonFn::power(1.0, 2.0), ComparisonFn::power(1.0, 2.0), sigma0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::validation("sigma", "must be positive"));
        }
        if !self.chi.check_class_k(10.0, 1000) {
            return Err(Error::validation("chi", "not zero at 0 or not strictly increasing"));
        }
        if !self.alpha1.check_class_k(10.0, 1000) {
            return Err(Error::validation("alpha1", "not zero at 0 or not strictly increasing"));
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `sigma * alpha1(|x|) - chi(|e|)`; the event fires when this reaches zero
/// from above.
pub fn trigger_margin(x: &[f64], e: &[f64], rule: &TriggerRule) -> f64 {
    rule.sigma * rule.alpha1.eval(norm(x)) - rule.chi.eval(norm(e))
}

/// Stopping rule for [`locate_crossing_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingTolerance {
    /// Absolute bracket width.
    pub abs: f64,
    /// Bracket width relative to the distance of the upper end from `origin`;
    /// zero disables it.
    pub rel: f64,
    pub origin: f64,
}

/// Bisection for the first time the margin is `<= 0` in `[t_lo, t_hi]`,
/// refined to bracket width `<= tol`.
pub fn locate_crossing<F>(margin_at: F, t_lo: f64, t_hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    locate_crossing_with(
        margin_at,
        t_lo,
        t_hi,
        CrossingTolerance {
            abs: tol,
            rel: 0.0,
            origin: t_lo,
        },
    )
}

/// Like [`locate_crossing`] with an additional relative width requirement.
/// Crossings that sit a tiny distance after `origin` are resolved to relative
/// precision instead of being rounded up to the absolute tolerance.
pub fn locate_crossing_with<F>(
    mut margin_at: F,
    t_lo: f64,
    t_hi: f64,
    tol: CrossingTolerance,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(tol.abs > 0.0) || t_hi < t_lo {
        return Err(Error::Precondition(format!(
            "bad bracket [{t_lo}, {t_hi}] or tolerance {}",
            tol.abs
        )));
    }
    if margin_at(t_lo)? <= 0.0 {
        return Ok(t_lo);
    }
    if margin_at(t_hi)? > 0.0 {
        return Err(Error::Precondition(format!(
            "margin does not change sign on [{t_lo}, {t_hi}]"
        )));
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    loop {
        let width = hi - lo;
        let rel_ok = tol.rel <= 0.0 || width <= tol.rel * (hi - tol.origin);
        if width <= tol.abs && rel_ok {
            break;
        }
        let mid = lo + 0.5 * width;
        if mid <= lo || mid >= hi {
            // Bracket exhausted at floating-point resolution.
            break;
        }
        if margin_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn margin_examples() {
        let rule = TriggerRule::quadratic(0.36).unwrap();
        assert_abs_diff_eq!(trigger_margin(&[1.0], &[0.0], &rule), 0.36, epsilon = 1e-15);
        assert_abs_diff_eq!(trigger_margin(&[1.0], &[0.6], &rule), 0.0, epsilon = 1e-15);
        assert_eq!(trigger_margin(&[0.0], &[0.0], &rule), 0.0);
    }

    #[test]
    fn linear_root() {
        let t = locate_crossing(|t| Ok(1.0 - t), 0.0, 2.0, 1e-9).unwrap();
        assert_abs_diff_eq!(t, 1.0, epsilon = 1e-9);
        assert!(1.0 - t <= 0.0);
    }

    #[test]
    fn first_zeno_segment_crossing() {
        // x(t) = 1 - 0.3 t, e(t) = 0.3 t, rule e^2 = 0.36 x^2.
        let rule = TriggerRule::quadratic(0.36).unwrap();
        let t = locate_crossing(
            |t| Ok(trigger_margin(&[1.0 - 0.3 * t], &[0.3 * t], &rule)),
            0.0,
            2.0,
            1e-9,
        )
        .unwrap();
        assert_abs_diff_eq!(t, 1.25, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_bracket_returns_lower_end() {
        assert_eq!(locate_crossing(|_| Ok(-1.0), 0.5, 2.0, 1e-9).unwrap(), 0.5);
    }

    #[test]
    fn missing_sign_change_is_an_error() {
        assert!(matches!(
            locate_crossing(|_| Ok(1.0), 0.0, 1.0, 1e-9),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn relative_tolerance_resolves_tiny_offsets() {
        let root = 1e-40;
        let tol = CrossingTolerance { abs: 1e-9, rel: 1e-6, origin: 0.0 };
        let t = locate_crossing_with(|t| Ok(root - t), 0.0, 1e-3, tol).unwrap();
        assert!((t - root).abs() <= 1e-6 * root * 1.01, "{t}");
    }

    #[test]
    fn rule_validation() {
        assert!(TriggerRule::quadratic(0.0).is_err());
        assert!(TriggerRule::new(ComparisonFn::power(1.0, 2.0), ComparisonFn::power(-1.0, 2.0), 1.0).is_err());
        let shifted = ComparisonFn::Custom(Arc::new(|s| s + 1.0));
        assert!(!shifted.check_class_k(1.0, 10));
    }
}
