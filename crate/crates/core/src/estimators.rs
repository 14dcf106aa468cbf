//! Bayes estimators.
//!
//! Closed forms:
//!
//! - scale mean of order `k` (minimizes `E[L_k]`): `(E[θ^k]/E[θ^-k])^{1/(2k)}`,
//!   with scale variance `2·sqrt(E[θ^k]·E[θ^-k]) − 2`;
//! - precautionary estimator: `sqrt(E[θ²])`, with risk `2(sqrt(E[θ²]) − E[θ])`;
//! - interval estimator on `(a, b)`: the root in `(a, b)` of
//!   `(a + b − 2m1)·d² + 2(m2 − ab)·d + 2ab·m1 − (a + b)·m2 = 0`.
//!
//! [`numeric_minimize`] minimizes any univariate posterior expected loss
//! directly and serves as the oracle for all of them.

use crate::loss::LossFunction;
use crate::minimize::brent;
use crate::moments::{beta_moments, MomentSet, PosteriorModel};
use crate::spaces::ParameterSpace;
use crate::special::upper_quantile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    NumericMinimize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult {
    pub point: f64,
    /// Minimized posterior expected loss, when computed.
    pub achieved_risk: Option<f64>,
    pub method: Method,
}

impl EstimatorResult {
    fn closed(point: f64, risk: f64) -> Self {
        EstimatorResult {
            point,
            achieved_risk: Some(risk.max(0.0)),
            method: Method::ClosedForm,
        }
    }
}

/// Relative width of the band around the interval midpoint where the
/// interval estimator returns the midpoint itself.
pub const MIDPOINT_BAND: f64 = 1e-9;

/// Minimizer of `E[(d/θ)^k + (θ/d)^k − 2]`.
pub fn scale_mean(moments: &MomentSet) -> Result<EstimatorResult> {
    let (Some(k), Some(mk), Some(mn)) = (moments.k, moments.mk, moments.mnegk) else {
        return Err(Error::MissingMoment("E[θ^k] and E[θ^-k]"));
    };
    scale_mean_from(k, mk, mn)
}

/// [`scale_mean`] from `E[θ^k]` and `E[θ^-k]` alone.
pub fn scale_mean_from(k: f64, mk: f64, mn: f64) -> Result<EstimatorResult> {
    if !(mk > 0.0 && mn > 0.0 && mk.is_finite() && mn.is_finite()) {
        return Err(Error::domain(format!(
            "scale mean needs finite positive moments, got {mk}, {mn}"
        )));
    }
    let point = (mk / mn).powf(0.5 / k);
    Ok(EstimatorResult::closed(point, 2.0 * (mk * mn).sqrt() - 2.0))
}

/// Minimizer of `E[(d − θ)²/d]`.
pub fn precautionary_estimate(moments: &MomentSet) -> Result<EstimatorResult> {
    let (m1, m2) = (moments.m1, moments.m2);
    if !(m2 > 0.0 && m2.is_finite() && m1.is_finite()) {
        return Err(Error::domain(format!(
            "precautionary estimate needs finite m2 > 0, got {m2}"
        )));
    }
    let point = m2.sqrt();
    Ok(EstimatorResult::closed(point, 2.0 * (point - m1)))
}

/// Minimizer of `E[(d − θ)²/((d − a)(b − d))]` for a posterior inside `(a, b)`.
pub fn interval_estimate(moments: &MomentSet, a: f64, b: f64) -> Result<EstimatorResult> {
    check_interval(a, b)?;
    let (m1, m2) = (moments.m1, moments.m2);
    if !(a < m1 && m1 < b) {
        return Err(Error::domain(format!("posterior mean {m1} outside ({a}, {b})")));
    }
    // E[(θ − a)(b − θ)] > 0 for any posterior with mass inside (a, b)
    if (a + b) * m1 - a * b - m2 <= 0.0 {
        return Err(Error::domain(format!(
            "second moment {m2} inconsistent with a posterior inside ({a}, {b})"
        )));
    }
    interval_root(m1, m2, a, b)
}

/// [`interval_estimate`] without the support check, for posteriors that
/// spill outside `(a, b)`.
pub fn interval_estimate_untruncated(moments: &MomentSet, a: f64, b: f64) -> Result<EstimatorResult> {
    check_interval(a, b)?;
    interval_root(moments.m1, moments.m2, a, b)
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    ParameterSpace::interval(a, b).map(|_| ())
}

fn interval_root(m1: f64, m2: f64, a: f64, b: f64) -> Result<EstimatorResult> {
    if !(m1.is_finite() && m2.is_finite()) {
        return Err(Error::domain(format!("non-finite moments ({m1}, {m2})")));
    }
    let s = a + b - 2.0 * m1;
    let point = if s.abs() < MIDPOINT_BAND * (b - a) {
        0.5 * (a + b)
    } else {
        let half_b = a * b - m2;
        let c = 2.0 * a * b * m1 - (a + b) * m2;
        let mut disc = half_b * half_b - s * c;
        if disc < 0.0 {
            if disc < -1e-12 * half_b.abs().max(1.0).powi(2) {
                return Err(Error::numerical(format!("negative discriminant {disc}")));
            }
            disc = 0.0;
        }
        let root = disc.sqrt();
        // the same root either way; pick the form without cancellation
        if half_b <= 0.0 {
            c / (half_b - root)
        } else {
            (half_b + root) / s
        }
    };
    if !(a < point && point < b) {
        return Err(Error::numerical(format!(
            "interval estimate {point} not inside ({a}, {b})"
        )));
    }
    let risk = (point * point - 2.0 * point * m1 + m2) / ((point - a) * (b - point));
    Ok(EstimatorResult::closed(point, risk))
}

/// Interval estimate on (0, 1) for `x` successes in `n` trials under a uniform prior:
/// `1/(1 + sqrt((n − x + 1)(n − x + 2)/((x + 1)(x + 2))))`.
pub fn probability_estimate(x: u64, n: u64) -> Result<f64> {
    if x > n {
        return Err(Error::domain(format!("successes {x} exceed trials {n}")));
    }
    Ok(probability_estimate_real(x as f64, n as f64))
}

/// [`probability_estimate`] as a smooth function of a real-valued count.
pub fn probability_estimate_real(x: f64, n: f64) -> f64 {
    let r = ((n - x + 1.0) * (n - x + 2.0)) / ((x + 1.0) * (x + 2.0));
    1.0 / (1.0 + r.sqrt())
}

/// Derivative of [`probability_estimate_real`] in `x`.
pub fn probability_estimate_derivative(x: f64, n: f64) -> f64 {
    let r = ((n - x + 1.0) * (n - x + 2.0)) / ((x + 1.0) * (x + 2.0));
    let sr = r.sqrt();
    let sum = 1.0 / (n - x + 1.0) + 1.0 / (n - x + 2.0) + 1.0 / (x + 1.0) + 1.0 / (x + 2.0);
    sr / (2.0 * (1.0 + sr).powi(2)) * sum
}

/// Minimizes the posterior expected loss over `bracket` by Brent's method.
///
/// Expectations use the posterior's discretization (quadrature nodes or
/// samples). Fails with [`Error::Bracket`] when the minimizer sits at an end
/// of the bracket.
pub fn numeric_minimize(
    loss: &LossFunction,
    posterior: &PosteriorModel,
    bracket: (f64, f64),
) -> Result<EstimatorResult> {
    if loss.kind().dimension() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            found: loss.kind().dimension(),
        });
    }
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::domain(format!("invalid bracket ({lo}, {hi})")));
    }
    let space = loss.space();
    let probe = [lo + 1e-3 * (hi - lo), 0.5 * (lo + hi), hi - 1e-3 * (hi - lo)];
    if probe.iter().any(|&d| !space.contains_scalar(d)) || !bracket_within(space, lo, hi) {
        return Err(Error::domain(format!("bracket ({lo}, {hi}) not inside {space:?}")));
    }
    let measure = posterior.discretize()?;
    if let Some(bad) = measure.points.iter().find(|&&t| !space.contains_scalar(t)) {
        return Err(Error::domain(format!("posterior mass at {bad} outside {space:?}")));
    }
    let risk = |d: f64| measure.expect(|t| loss.scalar_value(t, d));
    let xtol = 1e-10 * (hi - lo);
    let m = brent(risk, lo, hi, xtol, 500);
    let edge = 1e-7 * (hi - lo);
    if m.x - lo <= edge || hi - m.x <= edge {
        return Err(Error::Bracket { lo, hi });
    }
    if !m.fx.is_finite() {
        return Err(Error::numerical(format!("expected loss {} at the minimizer", m.fx)));
    }
    Ok(EstimatorResult {
        point: m.x,
        achieved_risk: Some(m.fx.max(0.0)),
        method: Method::NumericMinimize,
    })
}

fn bracket_within(space: &ParameterSpace, lo: f64, hi: f64) -> bool {
    match *space {
        ParameterSpace::PositiveHalfLine => lo >= 0.0,
        ParameterSpace::Interval { a, b } => a <= lo && hi <= b,
        _ => true,
    }
}

/// Per-arm sample size of a one-sided two-proportion comparison, rounded up.
pub fn required_sample_size(p_target: f64, p_placebo: f64, alpha: f64, beta: f64) -> Result<u64> {
    if !(0.0 < p_placebo && p_placebo < p_target && p_target < 1.0) {
        return Err(Error::domain(format!(
            "need 0 < p_placebo < p_target < 1, got ({p_placebo}, {p_target})"
        )));
    }
    for (name, v) in [("alpha", alpha), ("beta", beta)] {
        if !(0.0 < v && v < 0.5) {
            return Err(Error::domain(format!("{name} must lie in (0, 0.5), got {v}")));
        }
    }
    let z_a = upper_quantile(alpha)?;
    let z_b = upper_quantile(beta)?;
    let pbar = 0.5 * (p_target + p_placebo);
    let spread = (p_target * (1.0 - p_target) + p_placebo * (1.0 - p_placebo)).sqrt();
    let num = z_a * (2.0 * pbar * (1.0 - pbar)).sqrt() + z_b * spread;
    let n = (num / (p_target - p_placebo)).powi(2);
    Ok(n.ceil() as u64)
}

/// Sample size from `x` of `n` historical successes, with the placebo rate
/// estimated either naively (`x/n`) or by the interval estimator on `(a, b)`
/// applied to the untruncated Beta posterior.
pub fn historical_placebo_rate(x: u64, n: u64, interval: Option<(f64, f64)>) -> Result<f64> {
    if n == 0 || x > n {
        return Err(Error::domain(format!("need 0 <= x <= n and n >= 1, got ({x}, {n})")));
    }
    match interval {
        None => Ok(x as f64 / n as f64),
        Some((a, b)) => Ok(interval_estimate_untruncated(&beta_moments(x, n, None)?, a, b)?.point),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossKind;
    use crate::moments::{mc_moments, Grid1D};

    #[test]
    fn lognormal_scale_mean_is_exp_mu() {
        let (mu, sigma) = (0.7f64, 1.3f64);
        for k in [0.5, 1.0, 2.0, 3.0] {
            let mk = (k * mu + 0.5 * k * k * sigma * sigma).exp();
            let mn = (-k * mu + 0.5 * k * k * sigma * sigma).exp();
            let r = scale_mean(&MomentSet::with_order(0.0, 0.0, k, mk, mn)).unwrap();
            assert!((r.point - mu.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_estimates() {
        let m = mc_moments(&[3.0; 5], Some(2.0)).unwrap();
        let r = scale_mean(&m).unwrap();
        assert!((r.point - 3.0).abs() < 1e-15);
        assert!(r.achieved_risk.unwrap() < 1e-14);
        let p = precautionary_estimate(&MomentSet::point_mass(2.0, None)).unwrap();
        assert_eq!((p.point, p.achieved_risk), (2.0, Some(0.0)));
        assert!(matches!(
            scale_mean(&MomentSet::raw(1.0, 1.0)),
            Err(Error::MissingMoment(_))
        ));
    }

    #[test]
    fn precautionary_examples() {
        let m = beta_moments(7, 15, None).unwrap();
        let p = precautionary_estimate(&m).unwrap();
        assert!((p.point - (72.0f64 / 306.0).sqrt()).abs() < 1e-15);
        assert!(p.point >= m.m1);
        let u = precautionary_estimate(&beta_moments(0, 0, None).unwrap()).unwrap();
        assert!((u.point - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn interval_examples() {
        let sym = interval_estimate(&MomentSet::raw(0.0, 1.0), -2.0, 2.0).unwrap();
        assert_eq!(sym.point, 0.0);
        let m = beta_moments(19, 97, None).unwrap();
        let r = interval_estimate(&m, 0.1, 1.0).unwrap();
        assert!((r.point - 0.209).abs() < 5e-4, "{}", r.point);
        let m = beta_moments(7, 15, None).unwrap();
        let r = interval_estimate(&m, 0.0, 1.0).unwrap();
        assert!((r.point - probability_estimate(7, 15).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn interval_estimate_is_continuous_through_the_midpoint() {
        let at = |m1: f64| {
            interval_estimate(&MomentSet::raw(m1, m1 * m1 + 0.1), -2.0, 2.0)
                .unwrap()
                .point
        };
        let mid = at(0.0);
        for eps in [1e-12, 1e-10, 1e-9, 2e-9, 1e-8] {
            assert!((at(eps) - mid).abs() < 1e-7);
            assert!((at(-eps) - mid).abs() < 1e-7);
        }
        // slope is finite across the band
        let slope = (at(1e-6) - at(-1e-6)) / 2e-6;
        let inner = (at(2e-9) - at(-2e-9)) / 4e-9;
        assert!((slope - inner).abs() < 1e-3 * slope.abs().max(1.0));
    }

    #[test]
    fn interval_estimate_rejects_outside_posteriors() {
        assert!(interval_estimate(&MomentSet::raw(2.0, 5.0), 0.0, 1.0).is_err());
        // mean inside, but the second moment needs mass outside
        assert!(interval_estimate(&MomentSet::raw(0.5, 0.9), 0.0, 1.0).is_err());
        assert!(interval_estimate(&MomentSet::raw(0.5, 0.3), 1.0, 0.0).is_err());
        let m = beta_moments(0, 10, None).unwrap();
        assert!(interval_estimate(&m, 0.1, 1.0).is_err());
        let r = interval_estimate_untruncated(&m, 0.1, 1.0).unwrap();
        assert!(r.point > 0.1 && r.point < 1.0);
    }

    #[test]
    fn probability_estimate_examples() {
        assert_eq!(probability_estimate(10, 20).unwrap(), 0.5);
        let p = probability_estimate(0, 15).unwrap();
        assert!((p - 1.0 / (1.0 + 136f64.sqrt())).abs() < 1e-15);
        assert!(probability_estimate(16, 15).is_err());
        assert!(probability_estimate(15, 15).unwrap() < 1.0);
    }

    #[test]
    fn numeric_minimizer_matches_closed_forms() {
        let post = PosteriorModel::BetaConjugate {
            successes: 7,
            trials: 15,
        };
        let sq = LossFunction::squared_error(ParameterSpace::interval(0.0, 1.0).unwrap()).unwrap();
        let r = numeric_minimize(&sq, &post, (0.0, 1.0)).unwrap();
        assert!((r.point - 8.0 / 17.0).abs() < 1e-8);
        assert_eq!(r.method, Method::NumericMinimize);
        let pre = LossFunction::new(LossKind::Precautionary).unwrap();
        let r = numeric_minimize(&pre, &post, (1e-6, 1.0)).unwrap();
        assert!((r.point - (72.0f64 / 306.0).sqrt()).abs() < 1e-7);
        let iq = LossFunction::new(LossKind::IntervalSquared { a: 0.0, b: 1.0 }).unwrap();
        let r = numeric_minimize(&iq, &post, (0.0, 1.0)).unwrap();
        let closed = interval_estimate(&beta_moments(7, 15, None).unwrap(), 0.0, 1.0).unwrap();
        assert!((r.point - closed.point).abs() < 1e-6);
        assert!((r.achieved_risk.unwrap() - closed.achieved_risk.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn numeric_minimizer_on_a_lognormal_grid() {
        let (mu, sigma) = (0.3f64, 0.4f64);
        let g = Grid1D::new(1e-3, 30.0, 4001, move |t: f64| {
            let z = (t.ln() - mu) / sigma;
            -0.5 * z * z - t.ln()
        })
        .unwrap()
        .with_cutoffs(true, true);
        let post = PosteriorModel::Grid1D(g);
        let l3 = LossFunction::new(LossKind::ScaleFamily { k: 3.0 }).unwrap();
        let r = numeric_minimize(&l3, &post, (0.1, 10.0)).unwrap();
        let closed = scale_mean(&post.moments(Some(3.0)).unwrap()).unwrap();
        assert!((r.point - closed.point).abs() < 1e-6);
        assert!((r.point - mu.exp()).abs() < 1e-6);
    }

    #[test]
    fn numeric_minimizer_reports_edge_minima() {
        let post = PosteriorModel::BetaConjugate {
            successes: 7,
            trials: 15,
        };
        let sq = LossFunction::squared_error(ParameterSpace::interval(0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(
            numeric_minimize(&sq, &post, (0.6, 0.9)),
            Err(Error::Bracket { .. })
        ));
        assert!(numeric_minimize(&sq, &post, (0.5, 1.5)).is_err());
    }

    #[test]
    fn sample_size_examples() {
        assert_eq!(required_sample_size(0.5, 19.0 / 97.0, 0.05, 0.10).unwrap(), 41);
        assert_eq!(required_sample_size(0.5, 0.196, 0.05, 0.10).unwrap(), 41);
        assert_eq!(required_sample_size(0.5, 0.209, 0.05, 0.10).unwrap(), 45);
        let near = required_sample_size(0.5, 0.49, 0.05, 0.10).unwrap();
        assert!(near > 10_000);
        assert!(near > required_sample_size(0.5, 0.48, 0.05, 0.10).unwrap());
        assert!(required_sample_size(0.2, 0.5, 0.05, 0.1).is_err());
        assert!(required_sample_size(0.5, 0.2, 0.6, 0.1).is_err());
    }

    #[test]
    fn historical_rates() {
        assert_eq!(historical_placebo_rate(19, 97, None).unwrap(), 19.0 / 97.0);
        let iq = historical_placebo_rate(19, 97, Some((0.1, 1.0))).unwrap();
        assert!((iq - 0.2086).abs() < 1e-4);
    }
}
