//! Estimating a probability from `x ~ Bin(n, θ)` under a uniform prior.
//!
//! Estimators: `p_q = (x + 1)/(n + 2)` (posterior mean), `p_ac = (x + 2)/(n + 4)`
//! and `p_iq`, the interval estimate on (0, 1). The normal-approximation
//! interval is built around each selected estimator; the Wilson-type interval
//! belongs to `p_ac` and the delta-method interval to `p_iq`.

use rand_distr::{Binomial, Distribution};

use super::{require_study, run_sweep, Channel, ExperimentSpec, Layout, Outcome, Study, SweepResult};
use crate::estimators::probability_estimate;
use crate::intervals::{ci_delta_iq, ci_normal, ci_wilson_ac, CiKind, ConfidenceInterval};
use crate::{Error, Result};

/// Everything one count `x` produces: estimates and coverage flags.
struct Table {
    values: Vec<Vec<f64>>,
    covered: Vec<Vec<bool>>,
}

pub fn run_binomial_study(spec: &ExperimentSpec) -> Result<SweepResult> {
    require_study(spec, Study::BinomialProbability)?;
    spec.validate()?;
    let n = spec.n as u64;
    let kinds = &spec.extras.ci_kinds;
    let tags: Vec<&str> = Study::BinomialProbability
        .estimator_tags()
        .iter()
        .copied()
        .filter(|t| spec.has(t))
        .collect();

    // coverage flags in channel order
    let mut flags: Vec<(usize, CiKind)> = Vec::new();
    for (i, tag) in tags.iter().enumerate() {
        if kinds.contains(&CiKind::NormalApprox) {
            flags.push((i, CiKind::NormalApprox));
        }
        let own = match *tag {
            "p_ac" => Some(CiKind::WilsonAC),
            "p_iq" => Some(CiKind::DeltaIQ),
            _ => None,
        };
        if let Some(k) = own.filter(|k| kinds.contains(k)) {
            flags.push((i, k));
        }
    }

    let tables: Vec<Table> = spec
        .grid
        .iter()
        .map(|p| table(n, p.p1, &tags, &flags, spec.extras.level))
        .collect::<Result<_>>()?;
    let dists: Vec<Binomial> = spec
        .grid
        .iter()
        .map(|p| Binomial::new(n, p.p1).map_err(|e| Error::config(format!("binomial({n}, {}): {e}", p.p1))))
        .collect::<Result<_>>()?;

    let layout = |g: usize| {
        let theta = spec.grid[g].p1;
        let channels = tags
            .iter()
            .enumerate()
            .map(|(i, tag)| {
                let mut ch = Channel::new(i, *tag, None, theta);
                ch.coverage = flags
                    .iter()
                    .enumerate()
                    .filter(|(_, (src, _))| *src == i)
                    .map(|(f, (_, kind))| (f, *kind))
                    .collect();
                ch
            })
            .collect();
        Layout {
            channels,
            differences: Vec::new(),
        }
    };
    run_sweep(spec, layout, |g, rng| {
        let x = dists[g].sample(rng) as usize;
        let t = &tables[g];
        Ok(Outcome {
            values: t.values[x].clone(),
            covered: t.covered[x].clone(),
        })
    })
}

fn table(n: u64, theta: f64, tags: &[&str], flags: &[(usize, CiKind)], level: f64) -> Result<Table> {
    let nf = n as f64;
    let mut values = Vec::new();
    let mut covered = Vec::new();
    for x in 0..=n {
        let xf = x as f64;
        let est: Vec<f64> = tags
            .iter()
            .map(|tag| match *tag {
                "p_q" => Ok((xf + 1.0) / (nf + 2.0)),
                "p_ac" => Ok((xf + 2.0) / (nf + 4.0)),
                _ => probability_estimate(x, n),
            })
            .collect::<Result<_>>()?;
        let cov = flags
            .iter()
            .map(|&(src, kind)| {
                let ci: Result<ConfidenceInterval> = match kind {
                    CiKind::NormalApprox => ci_normal(est[src], n, level),
                    CiKind::WilsonAC => ci_wilson_ac(x, n),
                    CiKind::DeltaIQ => ci_delta_iq(x, n),
                };
                match ci {
                    Ok(ci) => Ok(ci.covers(theta)),
                    // a degenerate estimate covers only itself
                    Err(Error::Domain(_)) => Ok(est[src] == theta),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_>>()?;
        values.push(est);
        covered.push(cov);
    }
    Ok(Table { values, covered })
}
