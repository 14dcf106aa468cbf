//! Estimating both parameters of a Weibull distribution.
//!
//! Density `f(t) = (λ/ν)(t/ν)^{λ−1} exp(−(t/ν)^λ)` with shape `λ` and scale
//! `ν`; each parameter carries an independent `Γ(shape, rate)` prior.
//! Estimators per parameter: the posterior mean (`mean`) and the scale means
//! `(E[·^k]/E[·^-k])^{1/(2k)}` (`scale`) for every order in the k-list. `ν`
//! rows are repeated as `nu_scaled/…` with MSE and variance divided by `ν^λ`
//! and bias by `ν^{λ/2}`. Paired MSE differences are reported as
//! `…/mean-scale` (posterior mean minus scale mean of order `k`) and
//! `…/scale-scale` (first order in the k-list minus order `k`).

use std::sync::Arc;

use rand_distr::{Distribution, Weibull};

use super::gamma::check_sample;
use super::{require_study, run_sweep, Channel, DiffChannel, ExperimentSpec, Layout, Outcome, Study, SweepResult};
use crate::estimators::scale_mean_from;
use crate::moments::{Grid2D, LogDensity2D};
use crate::{Error, Result};

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Unnormalized log-posterior of `(shape λ, scale ν)` given a Weibull sample.
#[derive(Debug, Clone)]
pub struct WeibullPosteriorDensity {
    ln_t: Vec<f64>,
    sum_ln: f64,
    prior_shape: f64,
    prior_rate: f64,
}

pub fn weibull_posterior_density(sample: &[f64], prior_shape: f64, prior_rate: f64) -> Result<WeibullPosteriorDensity> {
    check_sample(sample)?;
    let ln_t: Vec<f64> = sample.iter().map(|t| t.ln()).collect();
    Ok(WeibullPosteriorDensity {
        sum_ln: ln_t.iter().sum(),
        ln_t,
        prior_shape,
        prior_rate,
    })
}

impl WeibullPosteriorDensity {
    fn n(&self) -> f64 {
        self.ln_t.len() as f64
    }

    /// `log Σ t^λ`
    fn ln_power_sum(&self, lambda: f64) -> f64 {
        let top = self.ln_t.iter().map(|l| lambda * l).fold(f64::NEG_INFINITY, f64::max);
        top + self.ln_t.iter().map(|l| (lambda * l - top).exp()).sum::<f64>().ln()
    }

    fn shape_part(&self, lambda: f64) -> f64 {
        self.n() * lambda.ln() + (lambda - 1.0) * self.sum_ln + (self.prior_shape - 1.0) * lambda.ln()
            - self.prior_rate * lambda
    }

    fn scale_part(&self, lambda: f64, ln_s: f64, nu: f64, ln_nu: f64) -> f64 {
        -self.n() * lambda * ln_nu - (ln_s - lambda * ln_nu).exp() + (self.prior_shape - 1.0) * ln_nu
            - self.prior_rate * nu
    }
}

impl LogDensity2D for WeibullPosteriorDensity {
    fn log_density(&self, lambda: f64, nu: f64) -> f64 {
        if !(lambda > 0.0 && nu > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.shape_part(lambda) + self.scale_part(lambda, self.ln_power_sum(lambda), nu, nu.ln())
    }

    fn fill(&self, xs: &[f64], ys: &[f64], out: &mut [f64]) {
        let ln_ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        for (i, &lambda) in xs.iter().enumerate() {
            let base = self.shape_part(lambda);
            let ln_s = self.ln_power_sum(lambda);
            let row = &mut out[i * ys.len()..(i + 1) * ys.len()];
            for ((o, &nu), &ln_nu) in row.iter_mut().zip(ys).zip(&ln_ys) {
                *o = base + self.scale_part(lambda, ln_s, nu, ln_nu);
            }
        }
    }
}

/// Grid posterior of `(λ, ν)`, started from the log-moment fit.
pub fn weibull_posterior(sample: &[f64], prior_shape: f64, prior_rate: f64, nodes: usize) -> Result<Grid2D> {
    let density = weibull_posterior_density(sample, prior_shape, prior_rate)?;
    let n = density.n();
    let mean = density.sum_ln / n;
    let sd = (density.ln_t.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n).sqrt();
    // ln t has sd π/(λ√6) and mean ln ν − γ/λ
    let lambda0 = if sd > 0.0 {
        std::f64::consts::PI / (6f64.sqrt() * sd)
    } else {
        1.0
    };
    let nu0 = (mean + EULER_GAMMA / lambda0).exp();
    let positive = (0.0, f64::INFINITY);
    Grid2D::around_mode(Arc::new(density), [lambda0, nu0], [positive, positive], nodes)
}

pub fn run_weibull_study(spec: &ExperimentSpec) -> Result<SweepResult> {
    require_study(spec, Study::WeibullParams)?;
    spec.validate()?;
    let x = &spec.extras;
    let dists: Vec<Weibull<f64>> = spec
        .grid
        .iter()
        .map(|p| {
            let nu = p.p2.expect("validated");
            Weibull::new(nu, p.p1).map_err(|e| Error::config(format!("weibull({}, {nu}): {e}", p.p1)))
        })
        .collect::<Result<_>>()?;
    let use_mean = spec.has("mean");
    let ks: Vec<f64> = if spec.has("scale") {
        x.k_list.clone()
    } else {
        Vec::new()
    };
    let per_param = use_mean as usize + ks.len();
    // reported parameters with their marginal index
    let params: Vec<(usize, &str)> = ["lambda", "nu"]
        .into_iter()
        .enumerate()
        .filter(|(_, name)| spec.reports(name))
        .collect();

    let layout = |g: usize| {
        let p = spec.grid[g];
        let (lambda, nu) = (p.p1, p.p2.expect("validated"));
        let mut l = Layout::default();
        let mut rows = Vec::new();
        for (slot, &(axis, name)) in params.iter().enumerate() {
            let base = slot * per_param;
            if axis == 0 {
                rows.push(("lambda", lambda, base, 1.0));
            } else {
                rows.push(("nu", nu, base, 1.0));
                rows.push(("nu_scaled", nu, base, nu.powf(lambda)));
            }
            let truth = if axis == 0 { lambda } else { nu };
            for (j, &k) in ks.iter().enumerate().skip(1) {
                let first = base + use_mean as usize;
                l.differences.push(DiffChannel {
                    first,
                    second: first + j,
                    name: format!("{name}/scale-scale"),
                    k: Some(k),
                    truth,
                });
            }
            if use_mean {
                for (j, &k) in ks.iter().enumerate() {
                    l.differences.push(DiffChannel {
                        first: base,
                        second: base + 1 + j,
                        name: format!("{name}/mean-scale"),
                        k: Some(k),
                        truth,
                    });
                }
            }
        }
        for (name, truth, base, scale) in rows {
            let mut src = base;
            if use_mean {
                let mut ch = Channel::new(src, format!("{name}/mean"), None, truth);
                ch.scale = scale;
                l.channels.push(ch);
                src += 1;
            }
            for &k in &ks {
                let mut ch = Channel::new(src, format!("{name}/scale"), Some(k), truth);
                ch.scale = scale;
                l.channels.push(ch);
                src += 1;
            }
        }
        l
    };
    run_sweep(spec, layout, |g, rng| {
        let sample: Vec<f64> = (0..spec.n).map(|_| dists[g].sample(rng)).collect();
        let post = weibull_posterior(&sample, x.prior_shape, x.prior_rate, x.grid_nodes)?;
        let marginals = post.discretize()?;
        let mut values = Vec::with_capacity(params.len() * per_param);
        for &(axis, _) in &params {
            let m = if axis == 0 { &marginals.0 } else { &marginals.1 };
            if use_mean {
                values.push(m.power_moment(1.0)?);
            }
            for &k in &ks {
                values.push(scale_mean_from(k, m.power_moment(k)?, m.power_moment(-k)?)?.point);
            }
        }
        Ok(Outcome {
            values,
            covered: Vec::new(),
        })
    })
}
