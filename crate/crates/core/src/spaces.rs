//! Restricted parameter spaces and the distances that define symmetry on them.
//!
//! All spaces are open sets. `RealLine` and `PositiveHalfLine` act
//! coordinate-wise on points of any dimension, so `PositiveHalfLine` with a
//! two-component point is the positive quadrant.

use crate::{Error, Result};

/// Simplex membership tolerance on `Σ x_i = 1`.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ParameterSpace {
    RealLine,
    PositiveHalfLine,
    Interval { a: f64, b: f64 },
    Rectangle { bounds: Vec<(f64, f64)> },
    UnitSimplex { m: usize },
}

impl ParameterSpace {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        check_bounds(a, b)?;
        Ok(ParameterSpace::Interval { a, b })
    }

    pub fn rectangle(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::domain("rectangle needs at least one component"));
        }
        for &(a, b) in &bounds {
            check_bounds(a, b)?;
        }
        Ok(ParameterSpace::Rectangle { bounds })
    }

    pub fn simplex(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain(format!("simplex needs m >= 2, got {m}")));
        }
        Ok(ParameterSpace::UnitSimplex { m })
    }

    /// Fixed dimension, or `None` for the coordinate-wise spaces.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            ParameterSpace::RealLine | ParameterSpace::PositiveHalfLine => None,
            ParameterSpace::Interval { .. } => Some(1),
            ParameterSpace::Rectangle { bounds } => Some(bounds.len()),
            ParameterSpace::UnitSimplex { m } => Some(*m),
        }
    }

    /// Strict (open-set) membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ParameterSpace::RealLine => true,
            ParameterSpace::PositiveHalfLine => x.iter().all(|&v| v > 0.0),
            ParameterSpace::Interval { a, b } => x.len() == 1 && *a < x[0] && x[0] < *b,
            ParameterSpace::Rectangle { bounds } => {
                x.len() == bounds.len() && x.iter().zip(bounds).all(|(&v, &(a, b))| a < v && v < b)
            }
            ParameterSpace::UnitSimplex { m } => {
                x.len() == *m && x.iter().all(|&v| v > 0.0) && (x.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_SUM_TOL
            }
        }
    }

    pub fn contains_scalar(&self, x: f64) -> bool {
        self.contains(&[x])
    }

    /// Checks dimension and membership, naming the offending argument.
    pub fn check(&self, what: &str, x: &[f64]) -> Result<()> {
        if let Some(dim) = self.dimension() {
            if x.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: x.len(),
                });
            }
        }
        if !self.contains(x) {
            return Err(Error::domain(format!("{what} = {x:?} is not inside {self:?}")));
        }
        Ok(())
    }
}

fn check_bounds(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::domain(format!("need finite a < b, got ({a}, {b})")));
    }
    Ok(())
}

/// `log((x − a)/(b − x))`, mapping `(a, b)` onto the real line.
pub fn generalized_logit(x: f64, a: f64, b: f64) -> Result<f64> {
    check_bounds(a, b)?;
    if !(a < x && x < b) {
        return Err(Error::domain(format!("logit argument {x} outside ({a}, {b})")));
    }
    Ok(logit_unchecked(x, a, b))
}

pub(crate) fn logit_unchecked(x: f64, a: f64, b: f64) -> f64 {
    let num = x - a;
    let den = b - x;
    let ratio = num / den;
    if (0.5..=2.0).contains(&ratio) {
        // near the midpoint: log1p of the exactly-formed offset 2x − a − b
        ((2.0 * x - (a + b)) / den).ln_1p()
    } else {
        ratio.ln()
    }
}

/// Inverse of [`generalized_logit`].
pub fn inverse_logit(l: f64, a: f64, b: f64) -> f64 {
    let w = b - a;
    if l < 0.0 {
        let e = l.exp();
        a + w * (e / (1.0 + e))
    } else {
        let e = (-l).exp();
        b - w * (e / (1.0 + e))
    }
}

/// The decision `d2` that the space's symmetry pairs with `d1` around `theta`.
///
/// Real line: `2θ − d1`; positive half-line: `θ²/d1`; interval: reflection of
/// `logit(d1)` about `logit(θ)`.
pub fn symmetric_counterpart(space: &ParameterSpace, theta: f64, d1: f64) -> Result<f64> {
    match space {
        ParameterSpace::RealLine | ParameterSpace::PositiveHalfLine | ParameterSpace::Interval { .. } => {}
        other => {
            return Err(Error::domain(format!(
                "symmetric counterpart is defined for univariate spaces only, got {other:?}"
            )))
        }
    }
    space.check("theta", &[theta])?;
    space.check("d1", &[d1])?;
    match *space {
        ParameterSpace::RealLine => Ok(2.0 * theta - d1),
        ParameterSpace::PositiveHalfLine => Ok(theta * (theta / d1)),
        ParameterSpace::Interval { a, b } => {
            let l = 2.0 * logit_unchecked(theta, a, b) - logit_unchecked(d1, a, b);
            let d2 = inverse_logit(l, a, b);
            if !(a < d2 && d2 < b) {
                return Err(Error::numerical(format!(
                    "counterpart of {d1} about {theta} saturates at the bound of ({a}, {b})"
                )));
            }
            Ok(d2)
        }
        _ => unreachable!(),
    }
}

fn check_pair(space: &ParameterSpace, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    space.check("x", x)?;
    space.check("y", y)
}

/// The distance that defines multivariate symmetry on `space`.
///
/// Euclidean on the real line, log-ratio Euclidean on the positive orthant,
/// logit Euclidean on intervals and rectangles, Aitchison on the simplex.
pub fn multivariate_distance(space: &ParameterSpace, x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(space, x, y)?;
    let sq: f64 = match space {
        ParameterSpace::RealLine => x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum(),
        ParameterSpace::PositiveHalfLine => x.iter().zip(y).map(|(a, b)| (a / b).ln().powi(2)).sum(),
        ParameterSpace::Interval { a, b } => (logit_unchecked(x[0], *a, *b) - logit_unchecked(y[0], *a, *b)).powi(2),
        ParameterSpace::Rectangle { bounds } => x
            .iter()
            .zip(y)
            .zip(bounds)
            .map(|((&u, &v), &(a, b))| (logit_unchecked(u, a, b) - logit_unchecked(v, a, b)).powi(2))
            .sum(),
        ParameterSpace::UnitSimplex { m } => {
            let mut s = 0.0;
            for i in 0..*m {
                for j in (i + 1)..*m {
                    let dx = (x[i] / x[j]).ln();
                    let dy = (y[i] / y[j]).ln();
                    s += (dx - dy).powi(2);
                }
            }
            s / *m as f64
        }
    };
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn membership_is_strict() {
        let unit = ParameterSpace::interval(0.0, 1.0).unwrap();
        assert!(!unit.contains_scalar(0.0));
        assert!(!unit.contains_scalar(1.0));
        assert!(unit.contains_scalar(0.5));
        assert!(!ParameterSpace::PositiveHalfLine.contains_scalar(0.0));
        assert!(ParameterSpace::PositiveHalfLine.contains(&[1.0, 2.0]));
        let simplex = ParameterSpace::simplex(3).unwrap();
        assert!(simplex.contains(&[0.2, 0.3, 0.5]));
        assert!(!simplex.contains(&[0.2, 0.3, 0.6]));
        assert!(!simplex.contains(&[0.0, 0.5, 0.5]));
    }

    #[test]
    fn constructors_validate() {
        assert!(ParameterSpace::interval(1.0, 1.0).is_err());
        assert!(ParameterSpace::interval(0.0, f64::INFINITY).is_err());
        assert!(ParameterSpace::simplex(1).is_err());
        assert!(ParameterSpace::rectangle(vec![(0.0, 1.0), (3.0, 2.0)]).is_err());
    }

    #[test]
    fn logit_values() {
        assert_eq!(generalized_logit(0.5, 0.0, 1.0).unwrap(), 0.0);
        assert!(close(generalized_logit(0.75, 0.0, 1.0).unwrap(), 3f64.ln(), 1e-15));
        assert!(close(
            generalized_logit(1.0, 0.0, 4.0).unwrap(),
            (1.0f64 / 3.0).ln(),
            1e-15
        ));
        assert!(generalized_logit(0.0, 0.0, 1.0).is_err());
        assert!(generalized_logit(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn inverse_logit_round_trips() {
        for &(a, b) in &[(0.0, 1.0), (-3.0, 7.5), (1e-9, 1e9)] {
            for i in 1..50 {
                let x = a + (b - a) * i as f64 / 50.0;
                let back = inverse_logit(logit_unchecked(x, a, b), a, b);
                assert!(close(back, x, 1e-12 * (b - a)), "{x} -> {back}");
            }
        }
    }

    #[test]
    fn counterpart_examples() {
        assert_eq!(
            symmetric_counterpart(&ParameterSpace::RealLine, 0.0, 3.0).unwrap(),
            -3.0
        );
        assert_eq!(
            symmetric_counterpart(&ParameterSpace::PositiveHalfLine, 10.0, 100.0).unwrap(),
            1.0
        );
        let unit = ParameterSpace::interval(0.0, 1.0).unwrap();
        assert!(close(symmetric_counterpart(&unit, 0.5, 0.25).unwrap(), 0.75, 1e-15));
        assert!(symmetric_counterpart(&unit, 1.0, 0.25).is_err());
        assert!(symmetric_counterpart(&ParameterSpace::simplex(2).unwrap(), 0.5, 0.5).is_err());
    }

    #[test]
    fn distance_examples() {
        let rect = ParameterSpace::rectangle(vec![(0.0, 1.0)]).unwrap();
        assert!(close(
            multivariate_distance(&rect, &[0.5], &[0.75]).unwrap(),
            3f64.ln(),
            1e-15
        ));
        let e = std::f64::consts::E;
        let d = multivariate_distance(&ParameterSpace::PositiveHalfLine, &[1.0, 1.0], &[e, e]).unwrap();
        assert!(close(d, 2f64.sqrt(), 1e-15));
        let s = ParameterSpace::simplex(2).unwrap();
        assert_eq!(multivariate_distance(&s, &[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let r2 = multivariate_distance(&ParameterSpace::RealLine, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r2, 5.0);
    }

    #[test]
    fn distance_errors() {
        let s = ParameterSpace::simplex(3).unwrap();
        assert!(matches!(
            multivariate_distance(&s, &[0.5, 0.5], &[0.2, 0.3, 0.5]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            multivariate_distance(&ParameterSpace::PositiveHalfLine, &[1.0, -1.0], &[1.0, 1.0]),
            Err(Error::Domain(_))
        ));
    }
}
