//! Confidence intervals for a binomial proportion.
//!
//! Bounds are reported unclipped; [`ConfidenceInterval::clipped`] gives the
//! view restricted to `[0, 1]`.

use crate::estimators::{probability_estimate, probability_estimate_derivative};
use crate::special::{normal_mass, upper_quantile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CiKind {
    /// `p̂ ± z·sqrt(p̂(1 − p̂)/n)` around any point estimate.
    NormalApprox,
    /// Wilson-type interval centred at `(x + 2)/(n + 4)`.
    WilsonAC,
    /// Delta-method interval around the interval estimate on (0, 1).
    DeltaIQ,
}

impl CiKind {
    pub fn name(&self) -> &'static str {
        match self {
            CiKind::NormalApprox => "normal",
            CiKind::WilsonAC => "wilson_ac",
            CiKind::DeltaIQ => "delta_iq",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [CiKind::NormalApprox, CiKind::WilsonAC, CiKind::DeltaIQ]
            .into_iter()
            .find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub kind: CiKind,
    /// Nominal coverage. The fixed-multiplier intervals report `2Φ(2) − 1`.
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Closed-interval membership on the unclipped bounds.
    pub fn covers(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }

    /// Bounds clipped to `[0, 1]`, for display.
    pub fn clipped(&self) -> (f64, f64) {
        (self.lo.clamp(0.0, 1.0), self.hi.clamp(0.0, 1.0))
    }
}

/// Nominal level of a `± 2` standard-error interval.
pub fn two_sigma_level() -> f64 {
    normal_mass(-2.0, 2.0)
}

pub fn ci_normal(p_hat: f64, n: u64, level: f64) -> Result<ConfidenceInterval> {
    if !(0.0 < p_hat && p_hat < 1.0) {
        return Err(Error::domain(format!(
            "normal interval needs 0 < p_hat < 1, got {p_hat}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("normal interval needs n >= 1"));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::domain(format!("level must lie in (0, 1), got {level}")));
    }
    let z = upper_quantile(0.5 * (1.0 - level))?;
    let half = z * (p_hat * (1.0 - p_hat) / n as f64).sqrt();
    Ok(ConfidenceInterval {
        lo: p_hat - half,
        hi: p_hat + half,
        center: p_hat,
        kind: CiKind::NormalApprox,
        level,
    })
}

pub fn ci_wilson_ac(x: u64, n: u64) -> Result<ConfidenceInterval> {
    check_counts(x, n)?;
    let (xf, nf) = (x as f64, n as f64);
    let center = (xf + 2.0) / (nf + 4.0);
    let half = 2.0 * (nf.sqrt() / (nf + 2.0)) * (xf * (nf - xf) / (nf * nf) + 1.0 / nf).sqrt();
    Ok(ConfidenceInterval {
        lo: center - half,
        hi: center + half,
        center,
        kind: CiKind::WilsonAC,
        level: two_sigma_level(),
    })
}

pub fn ci_delta_iq(x: u64, n: u64) -> Result<ConfidenceInterval> {
    check_counts(x, n)?;
    let nf = n as f64;
    let center = probability_estimate(x, n)?;
    let slope = probability_estimate_derivative(nf * center, nf);
    let var = slope * slope * nf * center * (1.0 - center);
    let half = 2.0 * var.sqrt();
    Ok(ConfidenceInterval {
        lo: center - half,
        hi: center + half,
        center,
        kind: CiKind::DeltaIQ,
        level: two_sigma_level(),
    })
}

fn check_counts(x: u64, n: u64) -> Result<()> {
    if n == 0 || x > n {
        return Err(Error::domain(format!("need 0 <= x <= n and n >= 1, got ({x}, {n})")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::probability_estimate_real;

    #[test]
    fn normal_examples() {
        let ci = ci_normal(0.5, 100, 0.95).unwrap();
        assert!((ci.lo - (0.5 - 1.959_963_984_540_054 * 0.05)).abs() < 1e-12);
        assert!((ci.hi - 0.598).abs() < 1e-3);
        assert!(ci_normal(0.0, 10, 0.95).is_err());
        assert!(ci_normal(1.0, 10, 0.95).is_err());
        let wide = ci_normal(0.3, 50, 0.95).unwrap().width();
        let narrow = ci_normal(0.3, 200, 0.95).unwrap().width();
        assert!((narrow / wide - 0.5).abs() < 1e-10);
    }

    #[test]
    fn wilson_examples() {
        let ci = ci_wilson_ac(0, 15).unwrap();
        assert!((ci.center - 2.0 / 19.0).abs() < 1e-15);
        let half = 2.0 * (15f64.sqrt() / 17.0) * (1.0f64 / 15.0).sqrt();
        assert!((ci.hi - ci.center - half).abs() < 1e-15);
        assert!((ci_wilson_ac(19, 97).unwrap().center - 21.0 / 101.0).abs() < 1e-15);
        let mid = ci_wilson_ac(10, 20).unwrap();
        assert_eq!(mid.center, 0.5);
        assert!((mid.hi - 0.5 - (0.5 - mid.lo)).abs() < 1e-15);
    }

    #[test]
    fn wilson_reflection() {
        for x in 0..=15 {
            let a = ci_wilson_ac(x, 15).unwrap();
            let b = ci_wilson_ac(15 - x, 15).unwrap();
            assert!((a.lo - (1.0 - b.hi)).abs() < 1e-12);
            assert!((a.hi - (1.0 - b.lo)).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_examples() {
        let mid = ci_delta_iq(8, 16).unwrap();
        assert_eq!(mid.center, 0.5);
        assert!((mid.hi - 0.5 - (0.5 - mid.lo)).abs() < 1e-15);
        let c = ci_delta_iq(19, 97).unwrap().center;
        assert!((c - 0.204_954).abs() < 1e-6, "{c}");
    }

    #[test]
    fn analytic_derivative_matches_finite_differences() {
        let h = 1e-4;
        for n in [15u64, 100] {
            let nf = n as f64;
            for x in 1..n {
                let xf = x as f64;
                let fd = (probability_estimate_real(xf + h, nf) - probability_estimate_real(xf - h, nf)) / (2.0 * h);
                let an = probability_estimate_derivative(xf, nf);
                assert!(((fd - an) / an).abs() < 1e-6, "x={x} n={n}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn intervals_contain_their_center() {
        for x in 1..15 {
            for ci in [ci_wilson_ac(x, 15).unwrap(), ci_delta_iq(x, 15).unwrap()] {
                assert!(ci.lo < ci.center && ci.center < ci.hi);
            }
        }
        let ci = ci_wilson_ac(0, 15).unwrap();
        assert!(ci.lo < 0.0);
        assert_eq!(ci.clipped().0, 0.0);
        assert!((ci.level - 0.954_499_736_103_642).abs() < 1e-12);
    }
}
