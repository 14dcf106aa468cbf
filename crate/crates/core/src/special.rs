//! Normal-distribution and gamma-function helpers.
//!
//! `erfc` and `lgamma` come from `libm`, which is accurate to a few ulps far
//! into the tails; `statrs` supplies the starting point of the quantile.

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 − Φ(x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `Φ(hi) − Φ(lo)` computed on whichever tail avoids cancellation.
pub fn normal_mass(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    }
}

/// Inverse standard normal CDF.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("quantile level {p} outside (0, 1)")));
    }
    let mut z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // Newton polish on whichever tail keeps the residual relative
    for _ in 0..3 {
        let dens = normal_pdf(z);
        if !(dens > 0.0) {
            break;
        }
        let resid = if p < 0.5 {
            normal_cdf(z) - p
        } else {
            (1.0 - p) - normal_sf(z)
        };
        z -= resid / dens;
    }
    Ok(z)
}

/// Upper quantile `z_α` with `P(Z > z_α) = α`.
pub fn upper_quantile(alpha: f64) -> Result<f64> {
    normal_quantile(1.0 - alpha)
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_match_tables() {
        assert!((upper_quantile(0.05).unwrap() - 1.644_853_626_951_472_2).abs() < 1e-12);
        assert!((upper_quantile(0.10).unwrap() - 1.281_551_565_544_600_4).abs() < 1e-12);
        assert!((upper_quantile(0.025).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert!(normal_quantile(0.0).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 1e-4, 0.2, 0.5, 0.9, 1.0 - 1e-9] {
            let z = normal_quantile(p).unwrap();
            let back = normal_cdf(z);
            assert!(((back - p) / p).abs() < 1e-12, "p={p} back={back}");
        }
    }

    #[test]
    fn mass_in_far_tail_is_relative_accurate() {
        // 1 − Φ(10) ≈ 7.6199e-24
        let m = normal_mass(10.0, f64::INFINITY);
        assert!((m / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
