//! Estimating a normal mean known to lie in `(−a, a)`.
//!
//! With a flat prior on `(−a, a)` the posterior is `N(x̄, σ²/n)` truncated to
//! `(−a, a)`. Estimators: `J = x̄`, `U1` the posterior mean, `U2` the interval
//! estimate on `(−a, a)` and `U2prime` the interval estimate from the same
//! posterior moments on the wider `(−1.25a, 1.25a)`.

use rand_distr::{Distribution, Normal};

use super::{require_study, run_sweep, Channel, ExperimentSpec, Layout, Outcome, Study, SweepResult};
use crate::estimators::interval_estimate;
use crate::moments::truncated_normal_moments;
use crate::{Error, Result};

/// Widening factor of the `U2prime` loss interval.
pub const WIDENING: f64 = 1.25;

pub fn run_restricted_normal_study(spec: &ExperimentSpec) -> Result<SweepResult> {
    require_study(spec, Study::RestrictedNormalMean)?;
    spec.validate()?;
    let a = spec.extras.a;
    let sigma = spec.extras.sigma2.sqrt();
    let n = spec.n;
    let post_sd = sigma / (n as f64).sqrt();
    let tags: Vec<&str> = Study::RestrictedNormalMean
        .estimator_tags()
        .iter()
        .copied()
        .filter(|t| spec.has(t))
        .collect();
    let dists: Vec<Normal<f64>> = spec
        .grid
        .iter()
        .map(|p| Normal::new(p.p1, sigma).map_err(|e| Error::config(format!("normal({}, {sigma}): {e}", p.p1))))
        .collect::<Result<_>>()?;

    let layout = |g: usize| Layout {
        channels: tags
            .iter()
            .enumerate()
            .map(|(i, t)| Channel::new(i, *t, None, spec.grid[g].p1))
            .collect(),
        differences: Vec::new(),
    };
    run_sweep(spec, layout, |g, rng| {
        let xbar = (0..n).map(|_| dists[g].sample(rng)).sum::<f64>() / n as f64;
        let needs_posterior = tags.iter().any(|t| *t != "J");
        let moments = if needs_posterior {
            Some(truncated_normal_moments(xbar, post_sd, -a, a)?)
        } else {
            None
        };
        let values = tags
            .iter()
            .map(|tag| {
                let m = moments.as_ref();
                match *tag {
                    "J" => Ok(xbar),
                    "U1" => Ok(m.expect("posterior computed").m1),
                    "U2" => Ok(interval_estimate(m.expect("posterior computed"), -a, a)?.point),
                    _ => Ok(interval_estimate(m.expect("posterior computed"), -WIDENING * a, WIDENING * a)?.point),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Outcome {
            values,
            covered: Vec::new(),
        })
    })
}
