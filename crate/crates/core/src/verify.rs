//! Oracle cross-check families.
//!
//! Each family compares an implementation against an independent oracle
//! (a numeric minimizer, a quadrature, an algebraic identity) on seeded random
//! inputs and reports one pass/fail verdict. The same families back the
//! `verify` subcommand and the test suite.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::estimators::{
    interval_estimate, numeric_minimize, precautionary_estimate, probability_estimate, probability_estimate_derivative,
    probability_estimate_real, scale_mean,
};
use crate::intervals::{ci_delta_iq, ci_normal, ci_wilson_ac, two_sigma_level};
use crate::loss::{LossFunction, LossKind};
use crate::moments::{
    beta_grid, beta_moments, grid_moments_1d, grid_moments_2d, truncated_normal_grid, truncated_normal_moments, Axis,
    Grid1D, Grid2D, MomentSet, PosteriorModel,
};
use crate::sim::{gamma_posterior, replication_rng, weibull_posterior};
use crate::spaces::{multivariate_distance, symmetric_counterpart, ParameterSpace};
use crate::Result;

/// Failures listed per family before the rest are only counted.
const SHOWN_FAILURES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Symmetry,
    Moments,
    Estimators,
    Limits,
    Intervals,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Symmetry,
        Family::Moments,
        Family::Estimators,
        Family::Limits,
        Family::Intervals,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Symmetry => "symmetry",
            Family::Moments => "moments",
            Family::Estimators => "estimators",
            Family::Limits => "limits",
            Family::Intervals => "intervals",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Family::ALL.into_iter().find(|f| f.name() == name)
    }

    fn stream(&self) -> u64 {
        Family::ALL.iter().position(|f| f == self).expect("listed") as u64
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Verdict of one family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyReport {
    pub family: Family,
    pub checks: usize,
    pub failures: Vec<String>,
    /// Failures beyond the listed ones.
    pub unlisted: usize,
}

impl FamilyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for FamilyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed = self.failures.len() + self.unlisted;
        if self.passed() {
            write!(f, "PASS {} ({} checks)", self.family, self.checks)
        } else {
            write!(f, "FAIL {} ({failed} of {} checks failed", self.family, self.checks)?;
            for msg in &self.failures {
                write!(f, "; {msg}")?;
            }
            if self.unlisted > 0 {
                write!(f, "; {} more", self.unlisted)?;
            }
            write!(f, ")")
        }
    }
}

struct Tally {
    family: Family,
    checks: usize,
    failures: Vec<String>,
    unlisted: usize,
}

impl Tally {
    fn new(family: Family) -> Self {
        Tally {
            family,
            checks: 0,
            failures: Vec::new(),
            unlisted: 0,
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            if self.failures.len() < SHOWN_FAILURES {
                self.failures.push(msg());
            } else {
                self.unlisted += 1;
            }
        }
    }

    /// Records an error from the code under test as a failed check.
    fn ok<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(false, || format!("{what}: {e}"));
                None
            }
        }
    }

    fn close(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, || {
            format!("{what}: got {got:e}, want {want:e} (tol {tol:e})")
        });
    }

    fn close_rel(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let err = ((got - want) / want).abs();
        self.check(err <= tol, || {
            format!("{what}: got {got:e}, want {want:e} (rel {err:e} > {tol:e})")
        });
    }

    fn finish(self) -> FamilyReport {
        FamilyReport {
            family: self.family,
            checks: self.checks,
            failures: self.failures,
            unlisted: self.unlisted,
        }
    }
}

/// Runs one family with a seeded random stream.
pub fn run_family(family: Family, seed: u64) -> FamilyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(family.stream());
    let mut t = Tally::new(family);
    match family {
        Family::Symmetry => symmetry(&mut t, &mut rng),
        Family::Moments => moments(&mut t, &mut rng),
        Family::Estimators => estimators(&mut t, &mut rng),
        Family::Limits => limits(&mut t, &mut rng),
        Family::Intervals => intervals(&mut t, &mut rng),
    }
    t.finish()
}

pub fn run_all(seed: u64) -> Vec<FamilyReport> {
    Family::ALL.iter().map(|&f| run_family(f, seed)).collect()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

fn loss(t: &mut Tally, kind: LossKind) -> Option<LossFunction> {
    t.ok(kind.name(), LossFunction::new(kind))
}

fn symmetry(t: &mut Tally, rng: &mut ChaCha8Rng) {
    const TRIPLES: usize = 10_000;
    let scale_symmetric = [
        LossKind::ScaleFamily { k: 0.5 },
        LossKind::ScaleFamily { k: 1.0 },
        LossKind::ScaleFamily { k: 2.5 },
        LossKind::ScaleInvariantPrecautionary,
        LossKind::BrownLog,
    ];
    let scale_invariant = [
        LossKind::ScaleFamily { k: 1.0 },
        LossKind::ScaleFamily { k: 3.0 },
        LossKind::ScaleInvariantPrecautionary,
        LossKind::NormalizedSquared,
        LossKind::Stein,
        LossKind::BrownLog,
    ];
    let half_line = ParameterSpace::PositiveHalfLine;
    for kind in scale_symmetric {
        let Some(l) = loss(t, kind) else { continue };
        let mut worst: f64 = 0.0;
        for _ in 0..TRIPLES {
            let theta = log_uniform(rng, 1e-3, 1e3);
            let d = theta * log_uniform(rng, 1e-2, 1e2);
            let Some(d2) = t.ok("counterpart", symmetric_counterpart(&half_line, theta, d)) else {
                continue;
            };
            let (a, b) = (l.scalar_value(theta, d), l.scalar_value(theta, d2));
            worst = worst.max((a - b).abs() / a.max(1.0));
        }
        t.check(worst <= 1e-10, || {
            format!("{} scale symmetry off by {worst:e}", kind.name())
        });
    }
    // the un-normalized precautionary loss scales with θ
    if let Some(l) = loss(t, LossKind::Precautionary) {
        let broken = (0..100).any(|_| {
            let theta = log_uniform(rng, 0.1, 10.0);
            let d = theta * log_uniform(rng, 0.2, 5.0);
            let c = log_uniform(rng, 2.0, 10.0);
            let (a, b) = (l.scalar_value(theta, d), l.scalar_value(c * theta, c * d));
            (a - b).abs() > 1e-6 * a.max(1.0)
        });
        t.check(broken, || "precautionary loss passed the scale-invariance check".into());
    }
    for kind in scale_invariant {
        let Some(l) = loss(t, kind) else { continue };
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let theta = log_uniform(rng, 1e-2, 1e2);
            // near d = θ the difference d − θ loses digits to rounding of cθ and cd
            let ratio = log_uniform(rng, 1.05, 10.0);
            let d = if rng.random_bool(0.5) {
                theta * ratio
            } else {
                theta / ratio
            };
            let c = log_uniform(rng, 1e-3, 1e3);
            let (a, b) = (l.scalar_value(theta, d), l.scalar_value(c * theta, c * d));
            worst = worst.max((a - b).abs() / a.max(1e-300));
        }
        t.check(worst <= 1e-12, || {
            format!("{} scale invariance off by {worst:e}", kind.name())
        });
    }

    for (a, b) in [(0.0, 1.0), (-3.0, 5.0), (2.0, 4.5)] {
        let space = ParameterSpace::Interval { a, b };
        for kind in [
            LossKind::IntervalSquared { a, b },
            LossKind::IntervalBrownLogit { a, b },
        ] {
            let Some(l) = loss(t, kind) else { continue };
            let mut worst: f64 = 0.0;
            for _ in 0..TRIPLES {
                let w = b - a;
                let theta = a + w * rng.random_range(0.02..0.98);
                let d = a + w * rng.random_range(0.02..0.98);
                let Some(d2) = t.ok("counterpart", symmetric_counterpart(&space, theta, d)) else {
                    continue;
                };
                let (x, y) = (l.scalar_value(theta, d), l.scalar_value(theta, d2));
                worst = worst.max((x - y).abs() / x.max(1.0));
            }
            t.check(worst <= 1e-10, || {
                format!("{} on ({a}, {b}) interval symmetry off by {worst:e}", kind.name())
            });
        }
    }

    // convexity in d (the scale family only for k ≥ 1)
    let convex = [
        LossKind::ScaleFamily { k: 1.0 },
        LossKind::ScaleFamily { k: 2.0 },
        LossKind::IntervalSquared { a: 0.0, b: 1.0 },
    ];
    for kind in convex {
        let Some(l) = loss(t, kind) else { continue };
        let draw = |rng: &mut ChaCha8Rng| match kind {
            LossKind::IntervalSquared { .. } => rng.random_range(1e-3..1.0 - 1e-3),
            _ => log_uniform(rng, 1e-2, 1e2),
        };
        let mut violations = 0;
        for _ in 0..TRIPLES {
            let (theta, d1, d2) = (draw(rng), draw(rng), draw(rng));
            let lam = rng.random_range(0.0..1.0);
            let mid = l.scalar_value(theta, lam * d1 + (1.0 - lam) * d2);
            let chord = lam * l.scalar_value(theta, d1) + (1.0 - lam) * l.scalar_value(theta, d2);
            if mid > chord + 1e-10 * chord.max(1.0) {
                violations += 1;
            }
        }
        t.check(violations == 0, || {
            format!("{} convexity violated on {violations} triples", kind.name())
        });
    }
    if let Some(l) = loss(t, LossKind::BrownLog) {
        // (ln θ − ln d)² is concave in d beyond θ·e
        let theta = 1.0;
        let nonconvex = (1..200).any(|i| {
            let d = 0.1 * i as f64;
            let h = 1e-3 * d;
            l.scalar_value(theta, d + h) + l.scalar_value(theta, d - h) < 2.0 * l.scalar_value(theta, d)
        });
        t.check(nonconvex, || "Brown's log loss passed the convexity sweep".into());
    }

    // penalization at the boundary
    if let Some(l) = loss(t, LossKind::IntervalSquared { a: 0.0, b: 1.0 }) {
        for theta in [0.1, 0.5, 0.9] {
            let near = [1e-10, 1.0 - 1e-10];
            for d in near {
                t.check(l.scalar_value(theta, d) > 1e6, || {
                    format!("interval loss not penalized at {d}")
                });
            }
        }
    }
    if let Some(l) = loss(t, LossKind::ScaleFamily { k: 1.0 }) {
        for d in [1e-10, 1e10] {
            t.check(l.scalar_value(1.0, d) > 1e6, || {
                format!("scale loss not penalized at {d}")
            });
        }
    }

    // the interval counterpart approaches the real-line and half-line ones
    for _ in 0..100 {
        let theta = rng.random_range(0.1..10.0);
        let d1 = rng.random_range(0.1..10.0);
        let wide = ParameterSpace::Interval { a: -1e6, b: 1e6 };
        if let Some(d2) = t.ok("counterpart", symmetric_counterpart(&wide, theta, d1)) {
            t.close("interval counterpart on (-1e6, 1e6)", d2, 2.0 * theta - d1, 1e-4);
        }
        let positive = ParameterSpace::Interval { a: 1e-9, b: 1e9 };
        if let Some(d2) = t.ok("counterpart", symmetric_counterpart(&positive, theta, d1)) {
            t.close_rel("interval counterpart on (1e-9, 1e9)", d2, theta * theta / d1, 1e-4);
        }
    }

    // Aitchison distance ignores a common rescaling of both compositions
    for m in [2, 3, 5] {
        let Some(simplex) = t.ok("simplex", ParameterSpace::simplex(m)) else {
            continue;
        };
        for _ in 0..200 {
            let raw_x: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let raw_y: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let scale: Vec<f64> = (0..m).map(|_| log_uniform(rng, 0.1, 10.0)).collect();
            let close = |v: Vec<f64>| {
                let s: f64 = v.iter().sum();
                v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
            };
            let perturb = |v: &[f64]| close(v.iter().zip(&scale).map(|(a, b)| a * b).collect());
            let (x, y) = (close(raw_x.clone()), close(raw_y.clone()));
            let (px, py) = (perturb(&raw_x), perturb(&raw_y));
            let (Some(d0), Some(d1)) = (
                t.ok("aitchison", multivariate_distance(&simplex, &x, &y)),
                t.ok("aitchison", multivariate_distance(&simplex, &px, &py)),
            ) else {
                continue;
            };
            t.check((d0 - d1).abs() <= 1e-12 * d0.max(1.0), || {
                format!("Aitchison distance changed under perturbation: {d0:e} vs {d1:e}")
            });
        }
    }
}

/// Log-normal density on a grid over `[0, exp(mu + 12 sigma)]`.
fn lognormal_grid(mu: f64, sigma: f64) -> Result<Grid1D> {
    let hi = (mu + 12.0 * sigma).exp();
    let g = Grid1D::new(0.0, hi, 8001, move |t: f64| {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = (t.ln() - mu) / sigma;
        -t.ln() - 0.5 * z * z
    })?;
    Ok(g.with_cutoffs(false, true))
}

fn moments(t: &mut Tally, rng: &mut ChaCha8Rng) {
    // analytic Beta against quadrature
    for _ in 0..10 {
        // a density like θ^s with s near 0 at the origin is beyond the grid's accuracy
        let n = rng.random_range(8..300u64);
        let x = rng.random_range(4..n);
        let k = rng.random_range(0.5..2.0);
        let Some(exact) = t.ok("beta moments", beta_moments(x, n, Some(k))) else {
            continue;
        };
        let Some(grid) = t.ok("beta grid", beta_grid(x, n, 4001)) else {
            continue;
        };
        let Some(quad) = t.ok("beta quadrature", grid_moments_1d(&grid, Some(k))) else {
            continue;
        };
        for (what, a, b) in moment_pairs(&quad, &exact) {
            t.close_rel(&format!("Beta({x}, {n}) {what}"), a, b, 1e-8);
        }
    }
    // analytic truncated normal against quadrature
    for _ in 0..10 {
        let center = rng.random_range(-3.0..3.0);
        let sd = log_uniform(rng, 0.05, 3.0);
        let (a, b) = (-2.0, 2.0);
        let Some(exact) = t.ok("truncated normal", truncated_normal_moments(center, sd, a, b)) else {
            continue;
        };
        let Some(grid) = t.ok("truncated normal grid", truncated_normal_grid(center, sd, a, b, 4001)) else {
            continue;
        };
        let Some(quad) = t.ok("truncated normal quadrature", grid_moments_1d(&grid, None)) else {
            continue;
        };
        t.close(
            &format!("N({center:.3}, {sd:.3}²) on (-2, 2) m1"),
            quad.m1,
            exact.m1,
            1e-9,
        );
        t.close(
            &format!("N({center:.3}, {sd:.3}²) on (-2, 2) m2"),
            quad.m2,
            exact.m2,
            1e-9,
        );
    }
    // log-normal quadrature against the closed form exp(jμ + j²σ²/2)
    for _ in 0..5 {
        let mu = rng.random_range(-1.0..1.0);
        let sigma = rng.random_range(0.05..0.4);
        let Some(grid) = t.ok("lognormal grid", lognormal_grid(mu, sigma)) else {
            continue;
        };
        let Some(quad) = t.ok("lognormal quadrature", grid_moments_1d(&grid, Some(2.0))) else {
            continue;
        };
        let raw = |j: f64| (j * mu + 0.5 * j * j * sigma * sigma).exp();
        let exact = MomentSet::with_order(raw(1.0), raw(2.0), 2.0, raw(2.0), raw(-2.0));
        for (what, a, b) in moment_pairs(&quad, &exact) {
            t.close_rel(&format!("lognormal({mu:.3}, {sigma:.3}) {what}"), a, b, 1e-8);
        }
    }
    // separable 2-D densities against their 1-D factors
    for _ in 0..3 {
        let (xa, xn) = (rng.random_range(1..20u64), rng.random_range(25..60u64));
        let (ya, yn) = (rng.random_range(1..20u64), rng.random_range(25..60u64));
        let (p, q) = ((xa as f64, (xn - xa) as f64), (ya as f64, (yn - ya) as f64));
        let density = move |u: f64, v: f64| p.0 * u.ln() + p.1 * (-u).ln_1p() + q.0 * v.ln() + q.1 * (-v).ln_1p();
        let (Some(ax), Some(ay)) = (
            t.ok("axis", Axis::natural(0.0, 1.0, 401)),
            t.ok("axis", Axis::natural(0.0, 1.0, 401)),
        ) else {
            continue;
        };
        let Some(grid) = t.ok("2-D grid", Grid2D::new(ax, ay, std::sync::Arc::new(density))) else {
            continue;
        };
        let Some((mx, my)) = t.ok("2-D quadrature", grid_moments_2d(&grid, Some(1.0))) else {
            continue;
        };
        for (m2d, x, n) in [(mx, xa, xn), (my, ya, yn)] {
            let Some(g1) = t.ok(
                "1-D grid",
                Grid1D::new(0.0, 1.0, 401, move |u: f64| {
                    x as f64 * u.ln() + (n - x) as f64 * (-u).ln_1p()
                }),
            ) else {
                continue;
            };
            let Some(m1d) = t.ok("1-D quadrature", grid_moments_1d(&g1, Some(1.0))) else {
                continue;
            };
            for (what, a, b) in moment_pairs(&m2d, &m1d) {
                t.close_rel(&format!("separable Beta({}, {}) {what}", x + 1, n - x + 1), a, b, 1e-7);
            }
        }
    }
    // doubling the nodes of the study posteriors barely moves their moments
    for r in 0..4 {
        let mut srng = replication_rng(rng.random(), 0, r);
        let sample_gamma: Vec<f64> = {
            use rand_distr::{Distribution, Gamma};
            let d = Gamma::new(rng.random_range(2.0..8.0), rng.random_range(2.0..8.0)).expect("valid");
            (0..15).map(|_| d.sample(&mut srng)).collect()
        };
        let sample_weibull: Vec<f64> = {
            use rand_distr::{Distribution, Weibull};
            let d = Weibull::new(1.0, rng.random_range(1.0..5.0)).expect("valid");
            (0..15).map(|_| d.sample(&mut srng)).collect()
        };
        for (what, grid, k) in [
            ("Gamma", gamma_posterior(&sample_gamma, 1e-4, 1e-4, 161), None),
            (
                "Weibull",
                weibull_posterior(&sample_weibull, 1e-4, 1e-4, 161),
                Some(1.0),
            ),
        ] {
            let Some(grid) = t.ok(what, grid) else { continue };
            let (Some(coarse), Some(fine)) = (
                t.ok(what, grid_moments_2d(&grid, k)),
                t.ok(what, grid_moments_2d(&grid.refined(2), k)),
            ) else {
                continue;
            };
            for (c, f) in [(coarse.0, fine.0), (coarse.1, fine.1)] {
                for (m, a, b) in moment_pairs(&c, &f) {
                    t.close_rel(&format!("{what} posterior refinement {m}"), a, b, 1e-6);
                }
            }
        }
    }
}

fn moment_pairs(a: &MomentSet, b: &MomentSet) -> Vec<(&'static str, f64, f64)> {
    let mut v = vec![("m1", a.m1, b.m1), ("m2", a.m2, b.m2)];
    if let (Some(x), Some(y)) = (a.mk, b.mk) {
        v.push(("mk", x, y));
    }
    if let (Some(x), Some(y)) = (a.mnegk, b.mnegk) {
        v.push(("mnegk", x, y));
    }
    v
}

/// A randomized posterior with an interval `(a, b)` that contains it.
fn random_posterior(rng: &mut ChaCha8Rng, i: usize) -> Result<(String, PosteriorModel, (f64, f64))> {
    if i % 2 == 0 {
        let n = rng.random_range(10..400u64);
        let x = rng.random_range(4..n - 3);
        Ok((
            format!("Beta posterior ({x}, {n})"),
            PosteriorModel::BetaConjugate {
                successes: x,
                trials: n,
            },
            (0.0, 1.0),
        ))
    } else {
        let mu = rng.random_range(-1.0..1.0);
        let sigma = rng.random_range(0.05..0.4);
        let grid = lognormal_grid(mu, sigma)?;
        let (lo, hi) = (grid.lo, grid.hi);
        Ok((
            format!("lognormal({mu:.3}, {sigma:.3})"),
            PosteriorModel::Grid1D(grid),
            (0.5 * lo, 2.0 * hi),
        ))
    }
}

fn estimators(t: &mut Tally, rng: &mut ChaCha8Rng) {
    for i in 0..20 {
        let Some((name, post, (a, b))) = t.ok("posterior", random_posterior(rng, i)) else {
            continue;
        };
        let k = rng.random_range(0.5..3.0);
        let Some(m) = t.ok(&name, post.moments(Some(k))) else {
            continue;
        };
        let wide = (1e-6 * a.max(1e-3), 10.0 * b);
        let cases: [(LossKind, Result<f64>, (f64, f64)); 3] = [
            (LossKind::ScaleFamily { k }, scale_mean(&m).map(|e| e.point), wide),
            (
                LossKind::Precautionary,
                precautionary_estimate(&m).map(|e| e.point),
                wide,
            ),
            (
                LossKind::IntervalSquared { a, b },
                interval_estimate(&m, a, b).map(|e| e.point),
                (a + 1e-12 * (b - a), b - 1e-12 * (b - a)),
            ),
        ];
        for (kind, closed, bracket) in cases {
            let what = format!("{name} {}", kind.name());
            let (Some(closed), Some(l)) = (t.ok(&what, closed), loss(t, kind)) else {
                continue;
            };
            if let Some(numeric) = t.ok(&what, numeric_minimize(&l, &post, bracket)) {
                t.close(&what, closed, numeric.point, 1e-6);
            }
        }
    }
    // the probability estimate is the interval estimate of the Beta posterior on (0, 1)
    for n in [1u64, 15, 97, 1000] {
        let mut worst: f64 = 0.0;
        for x in 0..=n {
            let (Some(p), Some(m)) = (
                t.ok("probability estimate", probability_estimate(x, n)),
                t.ok("beta moments", beta_moments(x, n, None)),
            ) else {
                continue;
            };
            if let Some(e) = t.ok("interval estimate", interval_estimate(&m, 0.0, 1.0)) {
                worst = worst.max((p - e.point).abs());
            }
        }
        t.check(worst <= 1e-12, || {
            format!("probability estimate vs interval estimate, n = {n}: {worst:e}")
        });
    }
}

fn limits(t: &mut Tally, rng: &mut ChaCha8Rng) {
    for _ in 0..10 {
        // a stretched Beta density with all its mass in [0.1, 10]
        let p = rng.random_range(2.0..20.0);
        let q = rng.random_range(2.0..20.0);
        let Some(grid) = t.ok(
            "grid",
            Grid1D::new(0.1, 10.0, 2001, move |x: f64| {
                (p - 1.0) * (x - 0.1).ln() + (q - 1.0) * (10.0 - x).ln()
            }),
        ) else {
            continue;
        };
        let Some(m) = t.ok("moments", grid_moments_1d(&grid, None)) else {
            continue;
        };
        if let Some(e) = t.ok("interval estimate on (-1e6, 1e6)", interval_estimate(&m, -1e6, 1e6)) {
            t.close(
                "interval estimate on (-1e6, 1e6) vs posterior mean",
                e.point,
                m.m1,
                1e-4,
            );
        }
        if let Some(e) = t.ok("interval estimate on (1e-9, 1e9)", interval_estimate(&m, 1e-9, 1e9)) {
            t.close_rel(
                "interval estimate on (1e-9, 1e9) vs sqrt(E[θ²])",
                e.point,
                m.m2.sqrt(),
                1e-6,
            );
        }
    }
}

fn intervals(t: &mut Tally, rng: &mut ChaCha8Rng) {
    let level = two_sigma_level();
    if let Some(ci) = t.ok("normal interval", ci_normal(0.3, 50, level)) {
        let z = (ci.hi - ci.lo) / 2.0 / (0.3f64 * 0.7 / 50.0).sqrt();
        t.close("z of the two-sigma level", z, 2.0, 1e-10);
    }
    for _ in 0..200 {
        let n = rng.random_range(1..500u64);
        let x = rng.random_range(0..=n);
        for (name, this, mirror) in [
            ("wilson_ac", ci_wilson_ac(x, n), ci_wilson_ac(n - x, n)),
            ("delta_iq", ci_delta_iq(x, n), ci_delta_iq(n - x, n)),
        ] {
            let (Some(c), Some(m)) = (t.ok(name, this), t.ok(name, mirror)) else {
                continue;
            };
            t.check(c.lo <= c.center && c.center <= c.hi, || {
                format!("{name} ({x}, {n}) excludes its centre")
            });
            t.close(&format!("{name} ({x}, {n}) reflection lo"), c.lo, 1.0 - m.hi, 1e-12);
            t.close(&format!("{name} ({x}, {n}) reflection hi"), c.hi, 1.0 - m.lo, 1e-12);
        }
        // analytic slope of the probability estimate against central differences
        let (xf, nf) = (x as f64 + 0.5, n as f64 + 1.0);
        let h = 1e-5;
        let fd = (probability_estimate_real(xf + h, nf) - probability_estimate_real(xf - h, nf)) / (2.0 * h);
        t.close(
            &format!("slope at ({xf}, {nf})"),
            probability_estimate_derivative(xf, nf),
            fd,
            1e-7,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_family_passes() {
        for report in run_all(1) {
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn names_round_trip() {
        for f in Family::ALL {
            assert_eq!(Family::from_name(f.name()), Some(f));
        }
        assert_eq!(Family::from_name("nope"), None);
    }
}
