//! The loss catalog.
//!
//! | kind | `L(θ, d)` | space |
//! |------|-----------|-------|
//! | `SquaredError` | `(d − θ)²` | any univariate |
//! | `Precautionary` | `(d − θ)²/d` | positive half-line |
//! | `ScaleFamily(k)` | `(d/θ)^k + (θ/d)^k − 2` | positive half-line |
//! | `ScaleInvariantPrecautionary` | `(d − θ)²/(θd)` | positive half-line |
//! | `NormalizedSquared` | `(d/θ − 1)²` | positive half-line |
//! | `Stein` | `d/θ − 1 − log(d/θ)` | positive half-line |
//! | `BrownLog` | `(log θ − log d)²` | positive half-line |
//! | `IntervalSquared` | `(d − θ)²/((d − a)(b − d))` | `(a, b)` |
//! | `IntervalBrownLogit` | `(logit d − logit θ)²` | `(a, b)` |
//! | `MultivariateScaleFamily(k, m)` | `Σ_j [(d_j/θ_j)^k + (θ_j/d_j)^k] − 2m` | positive orthant |
//! | `MultivariatePrecautionary(m)` | `Σ_j (d_j − θ_j)²/d_j` | positive orthant |
//!
//! The additive multivariate scale family is the sum of univariate scale-family
//! losses. It is sometimes printed with a minus sign between the two ratio
//! powers; that form is unbounded below and is not used here.

use crate::spaces::{logit_unchecked, ParameterSpace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    SquaredError,
    Precautionary,
    ScaleFamily { k: f64 },
    ScaleInvariantPrecautionary,
    NormalizedSquared,
    Stein,
    BrownLog,
    IntervalSquared { a: f64, b: f64 },
    IntervalBrownLogit { a: f64, b: f64 },
    MultivariateScaleFamily { k: f64, m: usize },
    MultivariatePrecautionary { m: usize },
}

impl LossKind {
    pub fn name(&self) -> &'static str {
        match self {
            LossKind::SquaredError => "squared_error",
            LossKind::Precautionary => "precautionary",
            LossKind::ScaleFamily { .. } => "scale_family",
            LossKind::ScaleInvariantPrecautionary => "scale_invariant_precautionary",
            LossKind::NormalizedSquared => "normalized_squared",
            LossKind::Stein => "stein",
            LossKind::BrownLog => "brown_log",
            LossKind::IntervalSquared { .. } => "interval_squared",
            LossKind::IntervalBrownLogit { .. } => "interval_brown_logit",
            LossKind::MultivariateScaleFamily { .. } => "multivariate_scale_family",
            LossKind::MultivariatePrecautionary { .. } => "multivariate_precautionary",
        }
    }

    /// Point dimension the kind expects.
    pub fn dimension(&self) -> usize {
        match *self {
            LossKind::MultivariateScaleFamily { m, .. } | LossKind::MultivariatePrecautionary { m } => m,
            _ => 1,
        }
    }
}

/// A loss together with the space its arguments must lie in.
#[derive(Debug, Clone, PartialEq)]
pub struct LossFunction {
    kind: LossKind,
    space: ParameterSpace,
}

impl LossFunction {
    /// Squared error on an arbitrary univariate space.
    pub fn squared_error(space: ParameterSpace) -> Result<Self> {
        match space {
            ParameterSpace::RealLine | ParameterSpace::PositiveHalfLine | ParameterSpace::Interval { .. } => {
                Ok(LossFunction {
                    kind: LossKind::SquaredError,
                    space,
                })
            }
            other => Err(Error::domain(format!(
                "squared error needs a univariate space, got {other:?}"
            ))),
        }
    }

    /// Builds a loss on its natural space. `SquaredError` lands on the real line.
    pub fn new(kind: LossKind) -> Result<Self> {
        let space = match kind {
            LossKind::SquaredError => ParameterSpace::RealLine,
            LossKind::ScaleFamily { k } => {
                check_order(k)?;
                ParameterSpace::PositiveHalfLine
            }
            LossKind::Precautionary
            | LossKind::ScaleInvariantPrecautionary
            | LossKind::NormalizedSquared
            | LossKind::Stein
            | LossKind::BrownLog => ParameterSpace::PositiveHalfLine,
            LossKind::IntervalSquared { a, b } | LossKind::IntervalBrownLogit { a, b } => {
                ParameterSpace::interval(a, b)?
            }
            LossKind::MultivariateScaleFamily { k, m } => {
                check_order(k)?;
                check_m(m)?;
                ParameterSpace::PositiveHalfLine
            }
            LossKind::MultivariatePrecautionary { m } => {
                check_m(m)?;
                ParameterSpace::PositiveHalfLine
            }
        };
        Ok(LossFunction { kind, space })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    /// `L(θ, d)` for points strictly inside the space.
    pub fn evaluate(&self, theta: &[f64], d: &[f64]) -> Result<f64> {
        let dim = self.kind.dimension();
        for (what, x) in [("theta", theta), ("d", d)] {
            if x.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: x.len(),
                });
            }
            self.space.check(what, x)?;
        }
        Ok(self.value_unchecked(theta, d))
    }

    pub fn evaluate_scalar(&self, theta: f64, d: f64) -> Result<f64> {
        self.evaluate(&[theta], &[d])
    }

    /// Formula only; callers guarantee membership and dimension.
    pub(crate) fn value_unchecked(&self, theta: &[f64], d: &[f64]) -> f64 {
        match self.kind {
            LossKind::MultivariateScaleFamily { k, .. } => {
                theta.iter().zip(d).map(|(&t, &x)| scale_family(t, x, k)).sum()
            }
            LossKind::MultivariatePrecautionary { .. } => theta.iter().zip(d).map(|(&t, &x)| (x - t).powi(2) / x).sum(),
            _ => self.scalar_value(theta[0], d[0]),
        }
    }

    pub(crate) fn scalar_value(&self, t: f64, x: f64) -> f64 {
        match self.kind {
            LossKind::SquaredError => (x - t).powi(2),
            LossKind::Precautionary => (x - t).powi(2) / x,
            LossKind::ScaleFamily { k } => scale_family(t, x, k),
            LossKind::ScaleInvariantPrecautionary => (x - t).powi(2) / (t * x),
            LossKind::NormalizedSquared => (x / t - 1.0).powi(2),
            LossKind::Stein => {
                let u = x / t - 1.0;
                (u - u.ln_1p()).max(0.0)
            }
            LossKind::BrownLog => (t / x).ln().powi(2),
            LossKind::IntervalSquared { a, b } => (x - t).powi(2) / ((x - a) * (b - x)),
            LossKind::IntervalBrownLogit { a, b } => (logit_unchecked(x, a, b) - logit_unchecked(t, a, b)).powi(2),
            LossKind::MultivariateScaleFamily { .. } | LossKind::MultivariatePrecautionary { .. } => {
                self.value_unchecked(&[t], &[x])
            }
        }
    }
}

// r^k + r^-k − 2 = (r^{k/2} − r^{-k/2})², which stays non-negative in floating point
fn scale_family(theta: f64, d: f64, k: f64) -> f64 {
    let h = 0.5 * k * (d / theta).ln();
    (2.0 * h.sinh()).powi(2)
}

fn check_order(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("loss order k must be positive, got {k}")));
    }
    Ok(())
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::domain("multivariate loss needs m >= 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss(kind: LossKind) -> LossFunction {
        LossFunction::new(kind).unwrap()
    }

    #[test]
    fn catalog_examples() {
        let l1 = loss(LossKind::ScaleFamily { k: 1.0 });
        assert_eq!(l1.evaluate_scalar(2.0, 2.0).unwrap(), 0.0);
        assert!((l1.evaluate_scalar(1.0, 4.0).unwrap() - 2.25).abs() < 1e-14);
        assert!((l1.evaluate_scalar(1.0, 0.25).unwrap() - 2.25).abs() < 1e-14);

        let iq = loss(LossKind::IntervalSquared { a: 0.0, b: 1.0 });
        assert!((iq.evaluate_scalar(0.5, 0.25).unwrap() - 1.0 / 3.0).abs() < 1e-15);

        let mp = loss(LossKind::MultivariatePrecautionary { m: 2 });
        assert!((mp.evaluate(&[1.0, 2.0], &[2.0, 1.0]).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn scale_family_k1_is_scale_invariant_precautionary() {
        let l1 = loss(LossKind::ScaleFamily { k: 1.0 });
        let lsi = loss(LossKind::ScaleInvariantPrecautionary);
        for &(t, d) in &[(1.0, 3.0), (0.2, 0.7), (5.0, 0.01)] {
            let a = l1.evaluate_scalar(t, d).unwrap();
            let b = lsi.evaluate_scalar(t, d).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn multivariate_scale_family_is_sum_of_univariate() {
        let lm = loss(LossKind::MultivariateScaleFamily { k: 2.0, m: 3 });
        let l = loss(LossKind::ScaleFamily { k: 2.0 });
        let t = [0.5, 2.0, 7.0];
        let d = [1.5, 1.0, 6.0];
        let sum: f64 = t.iter().zip(&d).map(|(&t, &d)| l.evaluate_scalar(t, d).unwrap()).sum();
        assert!((lm.evaluate(&t, &d).unwrap() - sum).abs() < 1e-13);
        assert_eq!(lm.evaluate(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let iq = loss(LossKind::IntervalSquared { a: 0.0, b: 1.0 });
        assert!(matches!(iq.evaluate_scalar(0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(iq.evaluate_scalar(0.0, 0.5), Err(Error::Domain(_))));
        let p = loss(LossKind::Precautionary);
        assert!(p.evaluate_scalar(1.0, 0.0).is_err());
        let mp = loss(LossKind::MultivariatePrecautionary { m: 2 });
        assert!(matches!(mp.evaluate(&[1.0], &[1.0, 2.0]), Err(Error::Dimension { .. })));
        assert!(LossFunction::new(LossKind::ScaleFamily { k: 0.0 }).is_err());
        assert!(LossFunction::new(LossKind::IntervalSquared { a: 1.0, b: 0.0 }).is_err());
    }

    #[test]
    fn stein_and_normalized_vanish_on_the_diagonal() {
        for kind in [LossKind::Stein, LossKind::NormalizedSquared, LossKind::BrownLog] {
            assert_eq!(loss(kind).evaluate_scalar(3.7, 3.7).unwrap(), 0.0);
        }
    }

    // (d − θ)²/(θ(1 − θ)) stays finite as d reaches a bound; L_iq does not.
    #[test]
    fn weighted_squared_error_does_not_penalize_bounds() {
        let weighted = |t: f64, d: f64| (d - t).powi(2) / (t * (1.0 - t));
        let iq = loss(LossKind::IntervalSquared { a: 0.0, b: 1.0 });
        let t = 0.3;
        assert!(weighted(t, 1e-12) < 1.0);
        assert!(weighted(t, 1.0 - 1e-12) < 3.0);
        assert!(iq.evaluate_scalar(t, 1e-12).unwrap() > 1e6);
        assert!(iq.evaluate_scalar(t, 1.0 - 1e-12).unwrap() > 1e6);
    }
}
