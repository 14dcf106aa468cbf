//! Estimating both parameters of a Gamma distribution.
//!
//! Observations follow `Γ(shape α1, scale α2)`; each parameter carries an
//! independent `Γ(shape, rate)` prior (by default `Γ(10⁻⁴, 10⁻⁴)`). The joint
//! posterior is integrated on a 2-D grid. Estimators per parameter: the
//! posterior mean (`mean`) and the precautionary estimate `sqrt(E[α²])`.

use std::sync::Arc;

use rand_distr::{Distribution, Gamma};

use super::{require_study, run_sweep, Channel, DiffChannel, ExperimentSpec, Layout, Outcome, Study, SweepResult};
use crate::estimators::precautionary_estimate;
use crate::moments::{Grid2D, LogDensity2D, MomentSet};
use crate::special::ln_gamma;
use crate::{Error, Result};

/// Unnormalized log-posterior of `(shape, scale)` given a Gamma sample.
#[derive(Debug, Clone)]
pub struct GammaPosteriorDensity {
    n: f64,
    sum: f64,
    sum_ln: f64,
    prior_shape: f64,
    prior_rate: f64,
}

pub fn gamma_posterior_density(sample: &[f64], prior_shape: f64, prior_rate: f64) -> Result<GammaPosteriorDensity> {
    check_sample(sample)?;
    Ok(GammaPosteriorDensity {
        n: sample.len() as f64,
        sum: sample.iter().sum(),
        sum_ln: sample.iter().map(|t| t.ln()).sum(),
        prior_shape,
        prior_rate,
    })
}

impl GammaPosteriorDensity {
    fn shape_part(&self, shape: f64) -> f64 {
        (shape - 1.0) * self.sum_ln - self.n * ln_gamma(shape) + (self.prior_shape - 1.0) * shape.ln()
            - self.prior_rate * shape
    }

    fn scale_part(&self, shape: f64, scale: f64, ln_scale: f64) -> f64 {
        -self.sum / scale - self.n * shape * ln_scale + (self.prior_shape - 1.0) * ln_scale - self.prior_rate * scale
    }
}

impl LogDensity2D for GammaPosteriorDensity {
    fn log_density(&self, shape: f64, scale: f64) -> f64 {
        if !(shape > 0.0 && scale > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.shape_part(shape) + self.scale_part(shape, scale, scale.ln())
    }

    fn fill(&self, xs: &[f64], ys: &[f64], out: &mut [f64]) {
        let ln_ys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        for (i, &x) in xs.iter().enumerate() {
            let base = self.shape_part(x);
            let row = &mut out[i * ys.len()..(i + 1) * ys.len()];
            for ((o, &y), &ly) in row.iter_mut().zip(ys).zip(&ln_ys) {
                *o = base + self.scale_part(x, y, ly);
            }
        }
    }
}

/// Grid posterior of `(shape, scale)`, started from the method-of-moments fit.
pub fn gamma_posterior(sample: &[f64], prior_shape: f64, prior_rate: f64, nodes: usize) -> Result<Grid2D> {
    let density = gamma_posterior_density(sample, prior_shape, prior_rate)?;
    let n = sample.len() as f64;
    let mean = density.sum / n;
    let var = sample.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    let start = if var > 0.0 {
        [mean * mean / var, var / mean]
    } else {
        [1.0, mean]
    };
    let positive = (0.0, f64::INFINITY);
    Grid2D::around_mode(Arc::new(density), start, [positive, positive], nodes)
}

pub(super) fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.len() < 2 {
        return Err(Error::domain("a posterior needs at least two observations"));
    }
    if sample.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::domain("observations must be positive and finite"));
    }
    Ok(())
}

pub fn run_gamma_study(spec: &ExperimentSpec) -> Result<SweepResult> {
    require_study(spec, Study::GammaParams)?;
    spec.validate()?;
    let x = &spec.extras;
    let dists: Vec<Gamma<f64>> = spec
        .grid
        .iter()
        .map(|p| {
            let scale = p.p2.expect("validated");
            Gamma::new(p.p1, scale).map_err(|e| Error::config(format!("gamma({}, {scale}): {e}", p.p1)))
        })
        .collect::<Result<_>>()?;
    let use_mean = spec.has("mean");
    let use_prec = spec.has("precautionary");
    let per_param = use_mean as usize + use_prec as usize;

    let reported: Vec<usize> = (0..2).filter(|&i| spec.reports(["alpha1", "alpha2"][i])).collect();

    let layout = |g: usize| {
        let p = spec.grid[g];
        let truths = [p.p1, p.p2.expect("validated")];
        let mut l = Layout::default();
        for (slot, &i) in reported.iter().enumerate() {
            let (name, truth) = (["alpha1", "alpha2"][i], truths[i]);
            let base = slot * per_param;
            let mut src = base;
            if use_mean {
                l.channels.push(Channel::new(src, format!("{name}/mean"), None, truth));
                src += 1;
            }
            if use_prec {
                l.channels
                    .push(Channel::new(src, format!("{name}/precautionary"), None, truth));
            }
            if use_mean && use_prec {
                l.differences.push(DiffChannel {
                    first: base,
                    second: base + 1,
                    name: format!("{name}/mean-precautionary"),
                    k: None,
                    truth,
                });
            }
        }
        l
    };
    run_sweep(spec, layout, |g, rng| {
        let sample: Vec<f64> = (0..spec.n).map(|_| dists[g].sample(rng)).collect();
        let post = gamma_posterior(&sample, x.prior_shape, x.prior_rate, x.grid_nodes)?;
        let marginals = post.discretize()?;
        let mut values = Vec::with_capacity(reported.len() * per_param);
        for &i in &reported {
            let m = if i == 0 { &marginals.0 } else { &marginals.1 };
            let m1 = m.power_moment(1.0)?;
            if use_mean {
                values.push(m1);
            }
            if use_prec {
                values.push(precautionary_estimate(&MomentSet::raw(m1, m.power_moment(2.0)?))?.point);
            }
        }
        Ok(Outcome {
            values,
            covered: Vec::new(),
        })
    })
}
