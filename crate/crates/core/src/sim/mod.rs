//! Deterministic Monte-Carlo harness for the estimation studies.
//!
//! Each replication draws from its own ChaCha8 stream, seeded with the
//! experiment seed and keyed by `(grid_index, replication_index)`, so results
//! do not depend on the number of worker threads or the order in which
//! replications are scheduled. Replications of one grid point run in
//! parallel and are collected in index order before aggregation.

mod binomial;
mod gamma;
mod normal;
mod weibull;

use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::intervals::CiKind;
use crate::special::compensated_sum;
use crate::{Error, Result};

pub use gamma::{gamma_posterior, gamma_posterior_density};
pub use weibull::{weibull_posterior, weibull_posterior_density};

/// Largest tolerated fraction of aborted replications.
pub const MAX_ABORT_FRACTION: f64 = 1e-3;
/// Fewest replications per grid point.
pub const MIN_REPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    BinomialProbability,
    RestrictedNormalMean,
    GammaParams,
    WeibullParams,
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::BinomialProbability => "binomial",
            Study::RestrictedNormalMean => "normal",
            Study::GammaParams => "gamma",
            Study::WeibullParams => "weibull",
        }
    }

    /// Every estimator tag the study understands, in output order.
    pub fn estimator_tags(&self) -> &'static [&'static str] {
        match self {
            Study::BinomialProbability => &["p_q", "p_ac", "p_iq"],
            Study::RestrictedNormalMean => &["J", "U1", "U2", "U2prime"],
            Study::GammaParams => &["mean", "precautionary"],
            Study::WeibullParams => &["mean", "scale"],
        }
    }

    /// Names of the estimated parameters of the two-parameter studies.
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            Study::GammaParams => &["alpha1", "alpha2"],
            Study::WeibullParams => &["lambda", "nu"],
            _ => &[],
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A true parameter value; `p2` is absent for one-parameter studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub p1: f64,
    pub p2: Option<f64>,
}

impl GridPoint {
    pub fn one(p1: f64) -> Self {
        GridPoint { p1, p2: None }
    }

    pub fn two(p1: f64, p2: f64) -> Self {
        GridPoint { p1, p2: Some(p2) }
    }
}

/// Study-specific settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Extras {
    /// Sampling variance of the normal study.
    pub sigma2: f64,
    /// Half-width `a` of the normal study's restriction `(−a, a)`.
    pub a: f64,
    /// Shape and rate of the Gamma prior placed on each positive parameter.
    pub prior_shape: f64,
    pub prior_rate: f64,
    /// Orders of the Weibull scale means.
    pub k_list: Vec<f64>,
    /// Interval constructions evaluated by the binomial study.
    pub ci_kinds: Vec<CiKind>,
    /// Level of the normal-approximation intervals.
    pub level: f64,
    /// Quadrature nodes per axis of the 2-D posteriors.
    pub grid_nodes: usize,
    /// Parameters a two-parameter study reports; empty means all.
    pub params: Vec<String>,
}

impl Default for Extras {
    fn default() -> Self {
        Extras {
            sigma2: 4.0,
            a: 2.0,
            prior_shape: 1e-4,
            prior_rate: 1e-4,
            k_list: vec![1.0],
            ci_kinds: vec![CiKind::NormalApprox, CiKind::WilsonAC, CiKind::DeltaIQ],
            level: 0.95,
            grid_nodes: 161,
            params: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub study: Study,
    /// Observations per replication.
    pub n: usize,
    /// Replications per grid point.
    pub reps: usize,
    pub grid: Vec<GridPoint>,
    pub estimators: Vec<String>,
    pub seed: u64,
    pub extras: Extras,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl ExperimentSpec {
    /// The study with its default grid, all estimators, `n = 15` and the
    /// default replication count.
    pub fn new(study: Study) -> Self {
        let extras = Extras::default();
        let grid = default_grid(study, &extras);
        ExperimentSpec {
            study,
            n: 15,
            reps: default_reps(study),
            grid,
            estimators: study.estimator_tags().iter().map(|s| s.to_string()).collect(),
            seed: 1,
            extras,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < MIN_REPS {
            return Err(Error::config(format!(
                "reps must be at least {MIN_REPS}, got {}",
                self.reps
            )));
        }
        if self.grid.is_empty() {
            return Err(Error::config("the parameter grid is empty"));
        }
        let min_n = match self.study {
            Study::GammaParams | Study::WeibullParams => 2,
            _ => 1,
        };
        if self.n < min_n {
            return Err(Error::config(format!("n must be at least {min_n}, got {}", self.n)));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be positive"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("no estimators selected"));
        }
        for tag in &self.estimators {
            if !self.study.estimator_tags().contains(&tag.as_str()) {
                return Err(Error::config(format!(
                    "unknown estimator '{tag}' for the {} study (known: {})",
                    self.study,
                    self.study.estimator_tags().join(", ")
                )));
            }
        }
        let x = &self.extras;
        if !(x.level > 0.0 && x.level < 1.0) {
            return Err(Error::config(format!("level must lie in (0, 1), got {}", x.level)));
        }
        if !(x.prior_shape > 0.0 && x.prior_rate > 0.0) {
            return Err(Error::config("prior shape and rate must be positive"));
        }
        for p in &self.grid {
            let ok = match self.study {
                Study::BinomialProbability => p.p2.is_none() && 0.0 < p.p1 && p.p1 < 1.0,
                Study::RestrictedNormalMean => {
                    if !(x.a > 0.0 && x.a.is_finite()) {
                        return Err(Error::config(format!("a must be positive, got {}", x.a)));
                    }
                    if !(x.sigma2 > 0.0 && x.sigma2.is_finite()) {
                        return Err(Error::config(format!("sigma2 must be positive, got {}", x.sigma2)));
                    }
                    p.p2.is_none() && -x.a < p.p1 && p.p1 < x.a
                }
                Study::GammaParams | Study::WeibullParams => {
                    matches!(p.p2, Some(q) if q > 0.0 && q.is_finite()) && p.p1 > 0.0 && p.p1.is_finite()
                }
            };
            if !ok {
                return Err(Error::config(format!(
                    "grid point {p:?} outside the {} parameter space",
                    self.study
                )));
            }
        }
        if self.study == Study::WeibullParams && self.has("scale") {
            if x.k_list.is_empty() || x.k_list.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
                return Err(Error::config(format!(
                    "k-list must hold positive orders, got {:?}",
                    x.k_list
                )));
            }
        }
        for name in &x.params {
            if !self.study.parameter_names().contains(&name.as_str()) {
                return Err(Error::config(format!(
                    "unknown parameter '{name}' for the {} study (known: {})",
                    self.study,
                    self.study.parameter_names().join(", ")
                )));
            }
        }
        if matches!(self.study, Study::GammaParams | Study::WeibullParams)
            && x.grid_nodes < crate::moments::MIN_GRID_NODES
        {
            return Err(Error::config(format!(
                "grid_nodes must be at least {}, got {}",
                crate::moments::MIN_GRID_NODES,
                x.grid_nodes
            )));
        }
        Ok(())
    }

    pub(crate) fn has(&self, tag: &str) -> bool {
        self.estimators.iter().any(|e| e == tag)
    }

    pub(crate) fn reports(&self, param: &str) -> bool {
        self.extras.params.is_empty() || self.extras.params.iter().any(|p| p == param)
    }
}

pub fn default_reps(study: Study) -> usize {
    match study {
        Study::BinomialProbability | Study::RestrictedNormalMean => 100_000,
        Study::GammaParams | Study::WeibullParams => 1_000,
    }
}

pub fn default_grid(study: Study, extras: &Extras) -> Vec<GridPoint> {
    match study {
        Study::BinomialProbability => (1..=99).map(|i| GridPoint::one(i as f64 / 100.0)).collect(),
        Study::RestrictedNormalMean => {
            let a = extras.a;
            (1..20)
                .map(|i| GridPoint::one(-a + 2.0 * a * i as f64 / 20.0))
                .collect()
        }
        Study::GammaParams => {
            let axis = [2.0, 3.5, 5.0, 6.5, 8.0];
            lattice(&axis, &axis)
        }
        Study::WeibullParams => lattice(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 5.0, 10.0, 15.0]),
    }
}

/// All `(x, y)` pairs, `x` outer.
pub fn lattice(xs: &[f64], ys: &[f64]) -> Vec<GridPoint> {
    xs.iter()
        .flat_map(|&x| ys.iter().map(move |&y| GridPoint::two(x, y)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// Error summary of one estimator.
    Estimate,
    /// Paired MSE difference of two estimators.
    Difference,
}

/// Aggregates of one estimator (or estimator pair) at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub grid_index: usize,
    pub point: GridPoint,
    pub estimator: String,
    pub k: Option<f64>,
    pub kind: CellKind,
    pub mse: f64,
    /// Absent for differences.
    pub bias: Option<f64>,
    pub variance: Option<f64>,
    pub mc_se: f64,
    pub coverage: Vec<(CiKind, f64)>,
    pub n_reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: ExperimentSpec,
    pub cells: Vec<SweepCell>,
    /// Replications skipped because a posterior computation failed.
    pub aborted: usize,
}

impl SweepResult {
    pub fn cell(&self, grid_index: usize, estimator: &str, k: Option<f64>) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.grid_index == grid_index && c.estimator == estimator && c.k == k)
    }

    /// Writes the CSV header and one row per cell and coverage kind.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        let s = &self.spec;
        for c in &self.cells {
            let p2 = c.point.p2.map(sci).unwrap_or_default();
            let k = c.k.map(sci).unwrap_or_default();
            let bias = c.bias.map(sci).unwrap_or_default();
            let var = c.variance.map(sci).unwrap_or_default();
            let prefix = format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                s.study,
                s.n,
                c.n_reps,
                s.seed,
                sci(c.point.p1),
                p2,
                c.estimator,
                k,
                sci(c.mse),
                bias,
                var,
                sci(c.mc_se)
            );
            if c.coverage.is_empty() {
                writeln!(w, "{prefix},,")?;
            }
            for (kind, cov) in &c.coverage {
                writeln!(w, "{prefix},{},{}", kind.name(), sci(*cov))?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

pub const CSV_COLUMNS: [&str; 14] = [
    "study",
    "n",
    "reps",
    "seed",
    "param1",
    "param2",
    "estimator",
    "k",
    "mse",
    "bias",
    "variance",
    "mc_se",
    "coverage_kind",
    "coverage",
];

fn sci(x: f64) -> String {
    format!("{x:e}")
}

/// Error summary of replicated estimates of `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mse: f64,
    pub bias: f64,
    /// Population variance of the estimates.
    pub variance: f64,
    /// Monte-Carlo standard error of `mse`.
    pub mc_se: f64,
}

pub fn aggregate(estimates: &[f64], theta: f64) -> Result<Aggregate> {
    let r = estimates.len();
    if r < 2 {
        return Err(Error::domain("aggregation needs at least two estimates"));
    }
    let rf = r as f64;
    let mean = compensated_sum(estimates.iter().copied()) / rf;
    let sq: Vec<f64> = estimates.iter().map(|e| (e - theta).powi(2)).collect();
    let mse = compensated_sum(sq.iter().copied()) / rf;
    let variance = compensated_sum(estimates.iter().map(|e| (e - mean).powi(2))) / rf;
    Ok(Aggregate {
        mse,
        bias: mean - theta,
        variance,
        mc_se: standard_error(&sq, mse),
    })
}

/// `mean((a − θ)² − (b − θ)²)` and its paired standard error.
pub fn paired_difference(a: &[f64], b: &[f64], theta: f64) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::domain("aggregation needs at least two estimates"));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - theta).powi(2) - (y - theta).powi(2))
        .collect();
    let mean = compensated_sum(d.iter().copied()) / d.len() as f64;
    Ok((mean, standard_error(&d, mean)))
}

fn standard_error(values: &[f64], mean: f64) -> f64 {
    let r = values.len() as f64;
    let ss = compensated_sum(values.iter().map(|v| (v - mean).powi(2)));
    (ss / (r - 1.0)).sqrt() / r.sqrt()
}

/// The RNG of one replication.
pub fn replication_rng(seed: u64, grid_index: usize, rep_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((grid_index as u64) << 40) | rep_index as u64);
    rng
}

/// Per-replication output: one value per estimate channel and one flag per
/// coverage channel.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Outcome {
    pub values: Vec<f64>,
    pub covered: Vec<bool>,
}

/// One output estimator: reads `values[source]`.
#[derive(Debug, Clone)]
pub(crate) struct Channel {
    pub source: usize,
    pub name: String,
    pub k: Option<f64>,
    pub truth: f64,
    /// Reported `mse`, `variance` and `mc_se` are divided by `scale`, `bias` by `sqrt(scale)`.
    pub scale: f64,
    /// `(coverage flag index, kind)` pairs attached to this channel.
    pub coverage: Vec<(usize, CiKind)>,
}

impl Channel {
    pub fn new(source: usize, name: impl Into<String>, k: Option<f64>, truth: f64) -> Self {
        Channel {
            source,
            name: name.into(),
            k,
            truth,
            scale: 1.0,
            coverage: Vec::new(),
        }
    }
}

/// Paired MSE difference of two value sources.
#[derive(Debug, Clone)]
pub(crate) struct DiffChannel {
    pub first: usize,
    pub second: usize,
    pub name: String,
    pub k: Option<f64>,
    pub truth: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Layout {
    pub channels: Vec<Channel>,
    pub differences: Vec<DiffChannel>,
}

/// Runs `simulate` for every replication of every grid point and aggregates
/// the outcomes according to the point's layout.
pub(crate) fn run_sweep<S, L>(spec: &ExperimentSpec, layout: L, simulate: S) -> Result<SweepResult>
where
    S: Fn(usize, &mut ChaCha8Rng) -> Result<Outcome> + Sync,
    L: Fn(usize) -> Layout + Sync,
{
    spec.validate()?;
    let body = || -> Result<SweepResult> {
        let mut cells = Vec::new();
        let mut aborted = 0;
        let mut last_error = String::new();
        for (g, point) in spec.grid.iter().enumerate() {
            let outcomes: Vec<Result<Outcome>> = (0..spec.reps)
                .into_par_iter()
                .map(|r| simulate(g, &mut replication_rng(spec.seed, g, r)))
                .collect();
            let mut ok = Vec::with_capacity(outcomes.len());
            for o in outcomes {
                match o {
                    Ok(o) => ok.push(o),
                    Err(e) => {
                        aborted += 1;
                        last_error = e.to_string();
                    }
                }
            }
            let attempted = (g + 1) * spec.reps;
            if aborted as f64 > MAX_ABORT_FRACTION * (spec.grid.len() * spec.reps) as f64 {
                return Err(Error::TooManyAborts {
                    aborted,
                    attempted,
                    last: last_error,
                });
            }
            cells.extend(summarize(g, *point, &layout(g), &ok)?);
        }
        Ok(SweepResult {
            spec: spec.clone(),
            cells,
            aborted,
        })
    };
    match spec.workers {
        None => body(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::config(format!("cannot build a pool of {w} workers: {e}")))?
            .install(body),
    }
}

fn summarize(g: usize, point: GridPoint, layout: &Layout, outcomes: &[Outcome]) -> Result<Vec<SweepCell>> {
    let column = |i: usize| -> Vec<f64> { outcomes.iter().map(|o| o.values[i]).collect() };
    let reps = outcomes.len();
    let mut cells = Vec::new();
    for ch in &layout.channels {
        let agg = aggregate(&column(ch.source), ch.truth)?;
        let coverage = ch
            .coverage
            .iter()
            .map(|&(flag, kind)| {
                let hits = outcomes.iter().filter(|o| o.covered[flag]).count();
                (kind, hits as f64 / reps as f64)
            })
            .collect();
        cells.push(SweepCell {
            grid_index: g,
            point,
            estimator: ch.name.clone(),
            k: ch.k,
            kind: CellKind::Estimate,
            mse: agg.mse / ch.scale,
            bias: Some(agg.bias / ch.scale.sqrt()),
            variance: Some(agg.variance / ch.scale),
            mc_se: agg.mc_se / ch.scale,
            coverage,
            n_reps: reps,
        });
    }
    for d in &layout.differences {
        let (mse, se) = paired_difference(&column(d.first), &column(d.second), d.truth)?;
        cells.push(SweepCell {
            grid_index: g,
            point,
            estimator: d.name.clone(),
            k: d.k,
            kind: CellKind::Difference,
            mse,
            bias: None,
            variance: None,
            mc_se: se,
            coverage: Vec::new(),
            n_reps: reps,
        });
    }
    Ok(cells)
}

/// Runs the study named in `spec.study`.
pub fn run_study(spec: &ExperimentSpec) -> Result<SweepResult> {
    match spec.study {
        Study::BinomialProbability => run_binomial_study(spec),
        Study::RestrictedNormalMean => run_restricted_normal_study(spec),
        Study::GammaParams => run_gamma_study(spec),
        Study::WeibullParams => run_weibull_study(spec),
    }
}

pub use binomial::run_binomial_study;
pub use gamma::run_gamma_study;
pub use normal::run_restricted_normal_study;
pub use weibull::run_weibull_study;

fn require_study(spec: &ExperimentSpec, study: Study) -> Result<()> {
    if spec.study != study {
        return Err(Error::config(format!("expected a {study} spec, got {}", spec.study)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[3.0; 10], 3.0).unwrap();
        assert_eq!((a.mse, a.bias, a.variance, a.mc_se), (0.0, 0.0, 0.0, 0.0));
        let a = aggregate(&[1.0, 3.0], 2.0).unwrap();
        assert_eq!((a.mse, a.bias, a.variance), (1.0, 0.0, 1.0));
        assert!(aggregate(&[1.0], 1.0).is_err());
    }

    #[test]
    fn aggregate_decomposes_mse() {
        let mut rng = replication_rng(9, 0, 0);
        let v: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 3.0).collect();
        let a = aggregate(&v, 0.4).unwrap();
        assert!((a.mse - (a.bias * a.bias + a.variance)).abs() <= 1e-12 * a.mse);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let x: u64 = replication_rng(1, 0, 0).random();
        let y: u64 = replication_rng(1, 0, 1).random();
        let z: u64 = replication_rng(1, 1, 0).random();
        let w: u64 = replication_rng(2, 0, 0).random();
        assert_eq!(x, replication_rng(1, 0, 0).random::<u64>());
        assert!(x != y && x != z && x != w && y != z);
    }

    #[test]
    fn spec_validation() {
        let mut s = ExperimentSpec::new(Study::BinomialProbability);
        s.validate().unwrap();
        s.estimators.push("p_mle".into());
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut s = ExperimentSpec::new(Study::RestrictedNormalMean);
        s.extras.a = 0.0;
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::new(Study::GammaParams);
        s.reps = 10;
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::new(Study::BinomialProbability);
        s.grid = vec![GridPoint::one(1.0)];
        assert!(s.validate().is_err());
    }

    #[test]
    fn default_grids() {
        let x = Extras::default();
        assert_eq!(default_grid(Study::BinomialProbability, &x).len(), 99);
        assert_eq!(default_grid(Study::GammaParams, &x).len(), 25);
        assert_eq!(default_grid(Study::WeibullParams, &x)[5], GridPoint::two(2.0, 1.0));
    }
}
