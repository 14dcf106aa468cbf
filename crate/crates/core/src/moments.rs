//! Posterior moment providers.
//!
//! Every Bayes estimator in [`crate::estimators`] consumes a [`MomentSet`]:
//! `E[θ]`, `E[θ²]` and optionally `E[θ^k]`, `E[θ^-k]` for one order `k`.
//! Analytic providers cover the conjugate Beta and the truncated normal;
//! numeric providers integrate an unnormalized log-density on composite
//! Gauss–Legendre grids, or average a Monte-Carlo sample.

use std::fmt;
use std::sync::Arc;

use crate::quadrature::{CompositeRule, PANEL_ORDER};
use crate::special::{compensated_sum, ln_gamma, normal_mass, normal_pdf};
use crate::{Error, Result};

/// Grid densities at a truncated edge must fall below this fraction of the peak.
pub const DECAY_RATIO: f64 = 1e-12;
/// Largest posterior mass tolerated in the outermost panel at a truncated edge.
pub const EDGE_MASS_LIMIT: f64 = 1e-9;
/// Largest share of a moment `E[θ^j]` tolerated in the outermost panel at a
/// truncated edge.
pub const MOMENT_SHARE_LIMIT: f64 = 1e-6;
/// Fewest grid nodes accepted per axis.
pub const MIN_GRID_NODES: usize = 101;
/// Half-width of automatically chosen supports, in posterior standard deviations.
pub const SUPPORT_SDS: f64 = 12.0;
/// Furthest a log-scale axis reaches from the mode, in units of `ln θ`.
pub const LOG_REACH_LIMIT: f64 = 60.0;
/// Minimum number of nodes per curvature standard deviation on a 2-D axis.
pub const NODES_PER_SD: f64 = 4.0;
/// Upper bound on the nodes of one 2-D axis.
pub const MAX_AXIS_NODES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    /// `E[θ]`
    pub m1: f64,
    /// `E[θ²]`
    pub m2: f64,
    /// Order `k` of `mk`/`mnegk`, when computed.
    pub k: Option<f64>,
    /// `E[θ^k]`
    pub mk: Option<f64>,
    /// `E[θ^-k]`
    pub mnegk: Option<f64>,
}

impl MomentSet {
    pub fn raw(m1: f64, m2: f64) -> Self {
        MomentSet {
            m1,
            m2,
            k: None,
            mk: None,
            mnegk: None,
        }
    }

    pub fn with_order(m1: f64, m2: f64, k: f64, mk: f64, mnegk: f64) -> Self {
        MomentSet {
            m1,
            m2,
            k: Some(k),
            mk: Some(mk),
            mnegk: Some(mnegk),
        }
    }

    /// Moments of a point mass at `theta`.
    pub fn point_mass(theta: f64, k: Option<f64>) -> Self {
        let mut m = MomentSet::raw(theta, theta * theta);
        if let Some(k) = k {
            m.k = Some(k);
            m.mk = Some(theta.powf(k));
            m.mnegk = Some(theta.powf(-k));
        }
        m
    }

    pub fn variance(&self) -> f64 {
        self.m2 - self.m1 * self.m1
    }

    /// Jensen (`m2 ≥ m1²`) and Cauchy–Schwarz (`mk·mnegk ≥ 1`) to `1e-10` relative.
    pub fn check_invariants(&self) -> Result<()> {
        let finite = [Some(self.m1), Some(self.m2), self.mk, self.mnegk]
            .into_iter()
            .flatten()
            .all(f64::is_finite);
        if !finite {
            return Err(Error::numerical(format!("non-finite moments {self:?}")));
        }
        if self.m2 < self.m1 * self.m1 * (1.0 - 1e-10) {
            return Err(Error::numerical(format!("m2 < m1² in {self:?}")));
        }
        if let (Some(mk), Some(mn)) = (self.mk, self.mnegk) {
            if mk * mn < 1.0 - 1e-10 {
                return Err(Error::numerical(format!("mk·mnegk < 1 in {self:?}")));
            }
        }
        Ok(())
    }
}

/// Posterior Beta(x + 1, n − x + 1) moments under a uniform prior.
pub fn beta_moments(x: u64, n: u64, k: Option<f64>) -> Result<MomentSet> {
    if x > n {
        return Err(Error::domain(format!("successes {x} exceed trials {n}")));
    }
    let alpha = x as f64 + 1.0;
    let beta = (n - x) as f64 + 1.0;
    let s = alpha + beta;
    let mut m = MomentSet::raw(alpha / s, alpha * (alpha + 1.0) / (s * (s + 1.0)));
    if let Some(k) = k {
        check_order(k)?;
        if k >= alpha {
            return Err(Error::DivergentMoment {
                k,
                reason: format!("E[θ^-k] of Beta({alpha}, {beta}) needs k < {alpha}"),
            });
        }
        let ln_beta_ratio = |j: f64| ln_gamma(alpha + j) + ln_gamma(s) - ln_gamma(alpha) - ln_gamma(s + j);
        m.k = Some(k);
        m.mk = Some(ln_beta_ratio(k).exp());
        m.mnegk = Some(ln_beta_ratio(-k).exp());
    }
    Ok(m)
}

/// `E[θ]`, `E[θ²]` of `N(center, sd²)` truncated to `(a, b)`.
pub fn truncated_normal_moments(center: f64, sd: f64, a: f64, b: f64) -> Result<MomentSet> {
    check_truncated_normal(center, sd, a, b)?;
    let alpha = (a - center) / sd;
    let beta = (b - center) / sd;
    let z = normal_mass(alpha, beta);
    if !(z >= 1e-300) {
        return Err(Error::numerical(format!(
            "normal mass on ({a}, {b}) underflows for center {center}, sd {sd}"
        )));
    }
    let (pa, pb) = (normal_pdf(alpha), normal_pdf(beta));
    // α·φ(α) → 0 at infinite bounds
    let apa = if alpha.is_finite() { alpha * pa } else { 0.0 };
    let bpb = if beta.is_finite() { beta * pb } else { 0.0 };
    let lambda = (pa - pb) / z;
    let mean = center + sd * lambda;
    let var = sd * sd * (1.0 + (apa - bpb) / z - lambda * lambda);
    Ok(MomentSet::raw(mean, var.max(0.0) + mean * mean))
}

fn check_truncated_normal(center: f64, sd: f64, a: f64, b: f64) -> Result<()> {
    if !(sd > 0.0 && sd.is_finite() && center.is_finite()) {
        return Err(Error::domain(format!(
            "need finite center and sd > 0, got ({center}, {sd})"
        )));
    }
    if !(a < b) {
        return Err(Error::domain(format!("need a < b, got ({a}, {b})")));
    }
    Ok(())
}

/// Plug-in sample averages.
pub fn mc_moments(samples: &[f64], k: Option<f64>) -> Result<MomentSet> {
    if samples.len() < 2 {
        return Err(Error::domain("Monte-Carlo moments need at least two samples"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::numerical("non-finite Monte-Carlo sample"));
    }
    WeightedPoints::uniform(samples.to_vec()).moments(k)
}

/// A normalized discrete measure: quadrature nodes or samples.
#[derive(Debug, Clone)]
pub struct WeightedPoints {
    pub points: Vec<f64>,
    /// Sum to one.
    pub weights: Vec<f64>,
    /// Normalized density at each node, for grid measures.
    density: Option<Vec<f64>>,
    /// The measure reaches a natural lower bound of zero.
    reaches_zero: bool,
    /// Lower and upper ends are cutoffs of an infinite tail.
    cutoffs: (bool, bool),
}

impl WeightedPoints {
    pub fn uniform(points: Vec<f64>) -> Self {
        let w = 1.0 / points.len() as f64;
        WeightedPoints {
            weights: vec![w; points.len()],
            points,
            density: None,
            reaches_zero: false,
            cutoffs: (false, false),
        }
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.points.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)))
    }

    pub fn moments(&self, k: Option<f64>) -> Result<MomentSet> {
        let mut m = MomentSet::raw(self.power_moment(1.0)?, self.power_moment(2.0)?);
        if let Some(k) = k {
            check_order(k)?;
            m.k = Some(k);
            m.mk = Some(self.power_moment(k)?);
            m.mnegk = Some(self.power_moment(-k)?);
        }
        Ok(m)
    }

    /// `E[θ^j]`, refused when the truncated tails could move it.
    pub fn power_moment(&self, j: f64) -> Result<f64> {
        if j == 1.0 || j == 2.0 {
            self.check_edge_share(|x| x.powf(j), MOMENT_SHARE_LIMIT)?;
            return Ok(self.expect(|x| x.powf(j)));
        }
        if self.points.iter().any(|&x| x <= 0.0) {
            return Err(Error::domain(format!(
                "moments of order {j} need strictly positive support"
            )));
        }
        if j < 0.0 {
            if self.reaches_zero {
                self.check_left_decay(-j)?;
            }
            self.check_edge_share(|x| x.powf(j), MOMENT_SHARE_LIMIT)
                .map_err(|e| match e {
                    Error::EdgeMass { mass } => Error::DivergentMoment {
                        k: -j,
                        reason: format!("{mass:e} of E[θ^-k] comes from the outermost grid cells"),
                    },
                    other => other,
                })?;
        } else {
            self.check_edge_share(|x| x.powf(j), MOMENT_SHARE_LIMIT)?;
        }
        Ok(self.expect(|x| x.powf(j)))
    }

    /// Fails when more than `limit` of `E[|f(θ)|]` sits in an outermost panel
    /// at a cutoff.
    pub fn check_edge_share(&self, f: impl Fn(f64) -> f64, limit: f64) -> Result<()> {
        if !(self.cutoffs.0 || self.cutoffs.1) {
            return Ok(());
        }
        let terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x).abs())
            .collect();
        let total = compensated_sum(terms.iter().copied());
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::numerical(format!("grid expectation is {total}")));
        }
        let p = PANEL_ORDER.min(terms.len());
        for (is_cut, panel) in [
            (self.cutoffs.0, &terms[..p]),
            (self.cutoffs.1, &terms[terms.len() - p..]),
        ] {
            let share = panel.iter().sum::<f64>() / total;
            if is_cut && share > limit {
                return Err(Error::EdgeMass { mass: share });
            }
        }
        Ok(())
    }

    // At a natural zero bound θ^-k·density must either have decayed or
    // behave like x^s with s clearly above the divergence threshold s = −1.
    fn check_left_decay(&self, k: f64) -> Result<()> {
        let Some(dens) = &self.density else {
            return Ok(());
        };
        let integrand: Vec<f64> = self.points.iter().zip(dens).map(|(&x, &p)| p * x.powf(-k)).collect();
        let peak = integrand.iter().cloned().fold(0.0, f64::max);
        if !peak.is_finite() {
            return Err(Error::DivergentMoment {
                k,
                reason: "θ^-k·density overflows on the grid".into(),
            });
        }
        let (g0, g1) = (integrand[0], integrand[1]);
        if g0 <= DECAY_RATIO * peak {
            return Ok(());
        }
        let exponent = (g1 / g0).ln() / (self.points[1] / self.points[0]).ln();
        if exponent < -0.5 {
            return Err(Error::DivergentMoment {
                k,
                reason: format!("θ^-k·density grows like θ^{exponent:.2} at the lower bound"),
            });
        }
        Ok(())
    }
}

/// Unnormalized 1-D log-density.
pub type LogDensity1D = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A 1-D posterior on a finite support.
///
/// Each edge is either a natural bound of the parameter (the density may be
/// anything there) or a cutoff of an infinite tail (the density must have
/// decayed below [`DECAY_RATIO`] of its peak).
#[derive(Clone)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    pub lo_cutoff: bool,
    pub hi_cutoff: bool,
    log_density: LogDensity1D,
}

impl fmt::Debug for Grid1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid1D")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("nodes", &self.nodes)
            .field("lo_cutoff", &self.lo_cutoff)
            .field("hi_cutoff", &self.hi_cutoff)
            .finish_non_exhaustive()
    }
}

impl Grid1D {
    /// Both edges are natural bounds until [`Grid1D::with_cutoffs`] says otherwise.
    pub fn new(
        lo: f64,
        hi: f64,
        nodes: usize,
        log_density: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_axis(lo, hi, nodes)?;
        Ok(Grid1D {
            lo,
            hi,
            nodes,
            lo_cutoff: false,
            hi_cutoff: false,
            log_density: Arc::new(log_density),
        })
    }

    pub fn with_cutoffs(mut self, lo_cutoff: bool, hi_cutoff: bool) -> Self {
        self.lo_cutoff = lo_cutoff;
        self.hi_cutoff = hi_cutoff;
        self
    }

    pub fn log_density(&self, x: f64) -> f64 {
        (self.log_density)(x)
    }

    /// Normalized quadrature measure of the posterior.
    pub fn discretize(&self) -> Result<WeightedPoints> {
        let rule = CompositeRule::new(self.lo, self.hi, self.nodes);
        let logs: Vec<f64> = rule.nodes.iter().map(|&x| self.log_density(x)).collect();
        let peak = log_peak(&logs)?;
        for (edge, is_cut) in [(self.lo, self.lo_cutoff), (self.hi, self.hi_cutoff)] {
            if is_cut {
                check_decay(edge, self.log_density(edge), peak)?;
            }
        }
        let dens: Vec<f64> = logs.iter().map(|&l| (l - peak).exp()).collect();
        let z = compensated_sum(dens.iter().zip(&rule.weights).map(|(p, w)| p * w));
        let density: Vec<f64> = dens.iter().map(|p| p / z).collect();
        let weights = density.iter().zip(&rule.weights).map(|(p, w)| p * w).collect();
        let measure = WeightedPoints {
            points: rule.nodes,
            weights,
            density: Some(density),
            reaches_zero: !self.lo_cutoff && self.lo == 0.0,
            cutoffs: (self.lo_cutoff, self.hi_cutoff),
        };
        measure.check_edge_share(|_| 1.0, EDGE_MASS_LIMIT)?;
        Ok(measure)
    }
}

/// Moments of a [`Grid1D`] posterior.
pub fn grid_moments_1d(model: &Grid1D, k: Option<f64>) -> Result<MomentSet> {
    model.discretize()?.moments(k)
}

/// Unnormalized joint log-density on a tensor grid.
pub trait LogDensity2D: Send + Sync {
    fn log_density(&self, x: f64, y: f64) -> f64;

    /// Row-major (`x` outer) evaluation over a tensor grid; override to reuse
    /// per-axis work.
    fn fill(&self, xs: &[f64], ys: &[f64], out: &mut [f64]) {
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                out[i * ys.len() + j] = self.log_density(x, y);
            }
        }
    }
}

impl<F> LogDensity2D for F
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn log_density(&self, x: f64, y: f64) -> f64 {
        self(x, y)
    }
}

/// One axis of a [`Grid2D`].
///
/// A log-scale axis spaces its nodes evenly in `ln θ`: its `lo` and `hi` are
/// logarithms and both ends are cutoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub nodes: usize,
    pub lo_cutoff: bool,
    pub hi_cutoff: bool,
    pub log_scale: bool,
}

impl Axis {
    /// A linear axis whose edges are both natural bounds.
    pub fn natural(lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        check_axis(lo, hi, nodes)?;
        Ok(Axis {
            lo,
            hi,
            nodes,
            lo_cutoff: false,
            hi_cutoff: false,
            log_scale: false,
        })
    }

    /// A log-scale axis over `(exp(ln_lo), exp(ln_hi))`.
    pub fn log(ln_lo: f64, ln_hi: f64, nodes: usize) -> Result<Self> {
        check_axis(ln_lo, ln_hi, nodes)?;
        Ok(Axis {
            lo: ln_lo,
            hi: ln_hi,
            nodes,
            lo_cutoff: true,
            hi_cutoff: true,
            log_scale: true,
        })
    }

    pub fn with_cutoffs(mut self, lo_cutoff: bool, hi_cutoff: bool) -> Self {
        self.lo_cutoff = lo_cutoff;
        self.hi_cutoff = hi_cutoff;
        self
    }

    /// Parameter value at axis coordinate `c`.
    pub fn to_param(&self, c: f64) -> f64 {
        if self.log_scale {
            c.exp()
        } else {
            c
        }
    }

    /// Parameter-space extent of the axis.
    pub fn param_range(&self) -> (f64, f64) {
        (self.to_param(self.lo), self.to_param(self.hi))
    }

    fn log_jacobian(&self, c: f64) -> f64 {
        if self.log_scale {
            c
        } else {
            0.0
        }
    }

    fn rule(&self) -> CompositeRule {
        CompositeRule::new(self.lo, self.hi, self.nodes)
    }
}

/// A 2-D posterior on a rectangle, integrated by tensor-product quadrature.
#[derive(Clone)]
pub struct Grid2D {
    pub x: Axis,
    pub y: Axis,
    density: Arc<dyn LogDensity2D>,
}

impl fmt::Debug for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid2D")
            .field("x", &self.x)
            .field("y", &self.y)
            .finish_non_exhaustive()
    }
}

impl Grid2D {
    pub fn new(x: Axis, y: Axis, density: Arc<dyn LogDensity2D>) -> Result<Self> {
        check_axis(x.lo, x.hi, x.nodes)?;
        check_axis(y.lo, y.hi, y.nodes)?;
        Ok(Grid2D { x, y, density })
    }

    pub fn log_density(&self, x: f64, y: f64) -> f64 {
        self.density.log_density(x, y)
    }

    /// Same density and supports with `nodes` per axis.
    pub fn with_nodes(&self, nodes: usize) -> Self {
        let mut g = self.clone();
        g.x.nodes = nodes;
        g.y.nodes = nodes;
        g
    }

    /// The same grid with `factor` times the nodes on each axis.
    pub fn refined(&self, factor: usize) -> Self {
        let mut g = self.clone();
        g.x.nodes *= factor;
        g.y.nodes *= factor;
        g
    }

    /// Builds the grid around the posterior mode.
    ///
    /// The mode is located by damped Newton iterations (in coordinates that
    /// map each axis' natural `bounds` to the real line) starting at `start`.
    /// Axes over `(0, ∞)` are log-scale; other axes are linear and clipped to
    /// their natural bounds. Each axis spans `mode ± 12·sd` in its own
    /// coordinate, with `sd` from the curvature at the mode. A cutoff edge is
    /// pushed outwards until the density over its outermost panel has
    /// decayed.
    pub fn around_mode(
        density: Arc<dyn LogDensity2D>,
        start: [f64; 2],
        bounds: [(f64, f64); 2],
        nodes: usize,
    ) -> Result<Self> {
        if nodes < MIN_GRID_NODES {
            return Err(Error::config(format!(
                "need at least {MIN_GRID_NODES} nodes per axis, got {nodes}"
            )));
        }
        let maps = [AxisMap::new(bounds[0])?, AxisMap::new(bounds[1])?];
        for (s, m) in start.iter().zip(&maps) {
            if !m.contains(*s) {
                return Err(Error::domain(format!("mode search start {s} outside {:?}", m.bounds())));
            }
        }
        let f = |p: [f64; 2]| density.log_density(p[0], p[1]);
        let mode = find_mode(&f, start, &maps)?;

        let log_axis = [maps[0].is_positive(), maps[1].is_positive()];
        let template = |i: usize, lo: f64, hi: f64| -> Axis {
            Axis {
                lo,
                hi,
                nodes,
                lo_cutoff: true,
                hi_cutoff: true,
                log_scale: log_axis[i],
            }
        };
        let probe = [template(0, 0.0, 1.0), template(1, 0.0, 1.0)];
        // log-density in axis coordinates, Jacobian included
        let h = |c: [f64; 2]| {
            f([probe[0].to_param(c[0]), probe[1].to_param(c[1])])
                + probe[0].log_jacobian(c[0])
                + probe[1].log_jacobian(c[1])
        };
        let to_coord = |i: usize, t: f64| if log_axis[i] { t.ln() } else { t };
        let centre = [to_coord(0, mode[0]), to_coord(1, mode[1])];
        let peak = h(centre);
        if !peak.is_finite() {
            return Err(Error::numerical(format!("log-density at mode {mode:?} is {peak}")));
        }
        let coord_bounds = [0, 1].map(|i| {
            if log_axis[i] {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                maps[i].bounds()
            }
        });
        let (sd, width) = curvature_sd(&h, centre, &coord_bounds);

        let mut axes = probe;
        let mut reach = [[SUPPORT_SDS * sd[0]; 2], [SUPPORT_SDS * sd[1]; 2]];
        for _ in 0..24 {
            for i in 0..2 {
                let (lo_nat, hi_nat) = coord_bounds[i];
                let lo = centre[i] - reach[i][0];
                let hi = centre[i] + reach[i][1];
                axes[i] = Axis {
                    lo: lo.max(lo_nat),
                    hi: hi.min(hi_nat),
                    lo_cutoff: lo > lo_nat,
                    hi_cutoff: hi < hi_nat,
                    ..axes[i]
                };
            }
            let mut widened = false;
            for i in 0..2 {
                let line = axes[1 - i].rule();
                for side in 0..2 {
                    let (cut, edge) = if side == 0 {
                        (axes[i].lo_cutoff, axes[i].lo)
                    } else {
                        (axes[i].hi_cutoff, axes[i].hi)
                    };
                    if !cut {
                        continue;
                    }
                    // the whole outermost panel has to sit in the tail
                    let panel = (axes[i].hi - axes[i].lo) / nodes.div_ceil(PANEL_ORDER) as f64;
                    let inner = if side == 0 { edge + panel } else { edge - panel };
                    let worst = line
                        .nodes
                        .iter()
                        .map(|&o| if i == 0 { h([inner, o]) } else { h([o, inner]) })
                        .fold(
                            f64::NEG_INFINITY,
                            |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) },
                        );
                    let limit = if log_axis[i] { LOG_REACH_LIMIT } else { f64::INFINITY };
                    if worst - peak >= (0.1 * DECAY_RATIO).ln() && reach[i][side] < limit {
                        reach[i][side] = (1.5 * reach[i][side]).min(limit);
                        widened = true;
                    }
                }
            }
            if !widened {
                break;
            }
        }
        // resolve the conditional width however wide the support grew
        for i in 0..2 {
            let wanted = (NODES_PER_SD * (axes[i].hi - axes[i].lo) / width[i]).ceil();
            axes[i].nodes = nodes.max(wanted.min(MAX_AXIS_NODES as f64) as usize);
        }
        Grid2D::new(axes[0], axes[1], density)
    }

    /// Per-axis marginal measures.
    pub fn discretize(&self) -> Result<(WeightedPoints, WeightedPoints)> {
        let (rx, ry) = (self.x.rule(), self.y.rule());
        let (nx, ny) = (rx.len(), ry.len());
        let tx: Vec<f64> = rx.nodes.iter().map(|&c| self.x.to_param(c)).collect();
        let ty: Vec<f64> = ry.nodes.iter().map(|&c| self.y.to_param(c)).collect();
        let jx: Vec<f64> = rx.nodes.iter().map(|&c| self.x.log_jacobian(c)).collect();
        let jy: Vec<f64> = ry.nodes.iter().map(|&c| self.y.log_jacobian(c)).collect();
        let mut logs = vec![0.0; nx * ny];
        self.density.fill(&tx, &ty, &mut logs);
        for i in 0..nx {
            for j in 0..ny {
                logs[i * ny + j] += jx[i] + jy[j];
            }
        }
        let peak = log_peak(&logs)?;

        for (axis, other_t, other_j, is_x) in [(&self.x, &ty, &jy, true), (&self.y, &tx, &jx, false)] {
            for (edge, is_cut) in [(axis.lo, axis.lo_cutoff), (axis.hi, axis.hi_cutoff)] {
                if !is_cut {
                    continue;
                }
                let t = [axis.to_param(edge)];
                let mut line = vec![0.0; other_t.len()];
                if is_x {
                    self.density.fill(&t, other_t, &mut line);
                } else {
                    self.density.fill(other_t, &t, &mut line);
                }
                let worst = line
                    .iter()
                    .zip(other_j)
                    .map(|(l, j)| l + j + axis.log_jacobian(edge))
                    .fold(f64::NEG_INFINITY, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) });
                check_decay(t[0], worst, peak)?;
            }
        }

        let mut px = vec![0.0; nx];
        let mut py = vec![0.0; ny];
        for i in 0..nx {
            let row = &logs[i * ny..(i + 1) * ny];
            let mut acc = 0.0;
            for (j, &l) in row.iter().enumerate() {
                let p = (l - peak).exp() * rx.weights[i] * ry.weights[j];
                acc += p;
                py[j] += p;
            }
            px[i] = acc;
        }
        let z = compensated_sum(px.iter().copied());
        let mx = marginal(tx, &rx.weights, px, z, &self.x)?;
        let my = marginal(ty, &ry.weights, py, z, &self.y)?;
        Ok((mx, my))
    }
}

fn marginal(points: Vec<f64>, rule_weights: &[f64], mass: Vec<f64>, z: f64, axis: &Axis) -> Result<WeightedPoints> {
    let weights: Vec<f64> = mass.iter().map(|m| m / z).collect();
    // density per unit of θ
    let density = weights
        .iter()
        .zip(rule_weights)
        .zip(&points)
        .map(|((w, q), t)| if axis.log_scale { w / (q * t) } else { w / q })
        .collect();
    let measure = WeightedPoints {
        points,
        weights,
        density: Some(density),
        reaches_zero: !axis.log_scale && !axis.lo_cutoff && axis.lo == 0.0,
        cutoffs: (axis.lo_cutoff, axis.hi_cutoff),
    };
    measure.check_edge_share(|_| 1.0, EDGE_MASS_LIMIT)?;
    Ok(measure)
}

/// Marginal moments of both coordinates of a [`Grid2D`] posterior.
pub fn grid_moments_2d(model: &Grid2D, k: Option<f64>) -> Result<(MomentSet, MomentSet)> {
    let (mx, my) = model.discretize()?;
    Ok((mx.moments(k)?, my.moments(k)?))
}

/// A posterior that can supply moments.
#[derive(Debug, Clone)]
pub enum PosteriorModel {
    /// Beta(x + 1, n − x + 1): `x` successes in `n` trials under a uniform prior.
    BetaConjugate {
        successes: u64,
        trials: u64,
    },
    /// `N(center, sd²)` truncated to `(lower, upper)`.
    TruncatedNormal {
        center: f64,
        sd: f64,
        lower: f64,
        upper: f64,
    },
    Grid1D(Grid1D),
    Grid2D(Grid2D),
    MonteCarlo(Vec<f64>),
}

/// Nodes used when an analytic posterior is integrated numerically.
pub const ANALYTIC_GRID_NODES: usize = 2001;

impl PosteriorModel {
    /// Moments of a univariate posterior.
    pub fn moments(&self, k: Option<f64>) -> Result<MomentSet> {
        match self {
            PosteriorModel::BetaConjugate { successes, trials } => beta_moments(*successes, *trials, k),
            PosteriorModel::TruncatedNormal {
                center,
                sd,
                lower,
                upper,
            } => {
                if k.is_some() {
                    return Err(Error::MissingMoment("E[θ^±k] of a truncated normal"));
                }
                truncated_normal_moments(*center, *sd, *lower, *upper)
            }
            PosteriorModel::Grid1D(g) => grid_moments_1d(g, k),
            PosteriorModel::Grid2D(_) => Err(Error::Dimension { expected: 1, found: 2 }),
            PosteriorModel::MonteCarlo(s) => mc_moments(s, k),
        }
    }

    /// The posterior as a normalized discrete measure, for expectations of
    /// arbitrary functions.
    pub fn discretize(&self) -> Result<WeightedPoints> {
        match self {
            PosteriorModel::BetaConjugate { successes, trials } => {
                beta_grid(*successes, *trials, ANALYTIC_GRID_NODES)?.discretize()
            }
            PosteriorModel::TruncatedNormal {
                center,
                sd,
                lower,
                upper,
            } => truncated_normal_grid(*center, *sd, *lower, *upper, ANALYTIC_GRID_NODES)?.discretize(),
            PosteriorModel::Grid1D(g) => g.discretize(),
            PosteriorModel::Grid2D(_) => Err(Error::Dimension { expected: 1, found: 2 }),
            PosteriorModel::MonteCarlo(s) => {
                if s.len() < 2 {
                    return Err(Error::domain("Monte-Carlo posterior needs at least two samples"));
                }
                Ok(WeightedPoints::uniform(s.clone()))
            }
        }
    }
}

/// Log-density drop from the peak at which automatic grid windows stop.
const WINDOW_LOG_DROP: f64 = 98.0;

/// Grid for the Beta(x + 1, n − x + 1) posterior, reaching from the mode to
/// where the density has fallen [`WINDOW_LOG_DROP`] below its peak. A tail
/// that decays only polynomially into 0 or 1 is integrated up to the bound.
pub fn beta_grid(x: u64, n: u64, nodes: usize) -> Result<Grid1D> {
    beta_moments(x, n, None)?;
    let (a, b) = (x as f64, (n - x) as f64);
    let f = move |t: f64| a * t.ln() + b * (-t).ln_1p();
    let mode = a / (a + b);
    let peak = f(mode);
    let below = |t: f64| f(t) < peak - WINDOW_LOG_DROP;
    let lo = match bisect_edge(mode, 0.0, below) {
        e if e < 0.5 * mode => 0.0,
        e => e,
    };
    let hi = match bisect_edge(mode, 1.0, below) {
        e if 1.0 - e < 0.5 * (1.0 - mode) => 1.0,
        e => e,
    };
    let grid = Grid1D::new(lo, hi, nodes, f)?;
    Ok(grid.with_cutoffs(lo > 0.0, hi < 1.0))
}

/// Last point between `inside` and `bound` that is not yet `below`, or
/// `bound` itself when the density never falls far enough.
fn bisect_edge(inside: f64, bound: f64, below: impl Fn(f64) -> bool) -> f64 {
    let (mut near, mut far) = (inside, bound);
    for _ in 0..200 {
        let mid = 0.5 * (near + far);
        if mid == near || mid == far {
            break;
        }
        if below(mid) {
            far = mid;
        } else {
            near = mid;
        }
    }
    if far == bound && !below(bound) {
        bound
    } else {
        far
    }
}

/// Grid for a truncated normal density on `(a, b)`, reaching from the peak
/// inside the interval to where the density has fallen [`WINDOW_LOG_DROP`]
/// below it.
pub fn truncated_normal_grid(center: f64, sd: f64, a: f64, b: f64, nodes: usize) -> Result<Grid1D> {
    check_truncated_normal(center, sd, a, b)?;
    let peak = center.clamp(a, b);
    let reach = ((peak - center).powi(2) + 2.0 * WINDOW_LOG_DROP * sd * sd).sqrt();
    let (lo, hi) = (center - reach, center + reach);
    let grid = Grid1D::new(lo.max(a), hi.min(b), nodes, move |t| {
        let z = (t - center) / sd;
        -0.5 * z * z
    })?;
    Ok(grid.with_cutoffs(lo > a, hi < b))
}

fn check_order(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("moment order k must be positive, got {k}")));
    }
    Ok(())
}

fn check_axis(lo: f64, hi: f64, nodes: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::domain(format!(
            "grid support must be finite with lo < hi, got ({lo}, {hi})"
        )));
    }
    if nodes < MIN_GRID_NODES {
        return Err(Error::config(format!(
            "need at least {MIN_GRID_NODES} grid nodes, got {nodes}"
        )));
    }
    Ok(())
}

fn log_peak(logs: &[f64]) -> Result<f64> {
    let mut peak = f64::NEG_INFINITY;
    for &l in logs {
        if l.is_nan() || l == f64::INFINITY {
            return Err(Error::numerical(format!("log-density value {l} on the grid")));
        }
        peak = peak.max(l);
    }
    if !peak.is_finite() {
        return Err(Error::numerical("density vanishes on the whole grid"));
    }
    Ok(peak)
}

fn check_decay(edge: f64, log_edge: f64, peak: f64) -> Result<()> {
    let ratio = (log_edge - peak).exp();
    if ratio.is_nan() || ratio >= DECAY_RATIO {
        return Err(Error::Divergence { edge, ratio });
    }
    Ok(())
}

/// Map from an unconstrained coordinate onto one axis' natural bounds.
#[derive(Debug, Clone, Copy)]
enum AxisMap {
    Free,
    Above(f64),
    Below(f64),
    Between(f64, f64),
}

impl AxisMap {
    fn new((lo, hi): (f64, f64)) -> Result<Self> {
        if !(lo < hi) || lo.is_nan() || hi.is_nan() {
            return Err(Error::domain(format!("invalid natural bounds ({lo}, {hi})")));
        }
        Ok(match (lo.is_finite(), hi.is_finite()) {
            (false, false) => AxisMap::Free,
            (true, false) => AxisMap::Above(lo),
            (false, true) => AxisMap::Below(hi),
            (true, true) => AxisMap::Between(lo, hi),
        })
    }

    fn is_positive(&self) -> bool {
        matches!(self, AxisMap::Above(lo) if *lo == 0.0)
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            AxisMap::Free => (f64::NEG_INFINITY, f64::INFINITY),
            AxisMap::Above(lo) => (lo, f64::INFINITY),
            AxisMap::Below(hi) => (f64::NEG_INFINITY, hi),
            AxisMap::Between(lo, hi) => (lo, hi),
        }
    }

    fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.bounds();
        lo < x && x < hi
    }

    fn to_param(&self, u: f64) -> f64 {
        match *self {
            AxisMap::Free => u,
            AxisMap::Above(lo) => lo + u.exp(),
            AxisMap::Below(hi) => hi - u.exp(),
            AxisMap::Between(lo, hi) => crate::spaces::inverse_logit(u, lo, hi),
        }
    }

    fn to_free(&self, x: f64) -> f64 {
        match *self {
            AxisMap::Free => x,
            AxisMap::Above(lo) => (x - lo).ln(),
            AxisMap::Below(hi) => (hi - x).ln(),
            AxisMap::Between(lo, hi) => crate::spaces::logit_unchecked(x, lo, hi),
        }
    }
}

fn find_mode(f: &impl Fn([f64; 2]) -> f64, start: [f64; 2], maps: &[AxisMap; 2]) -> Result<[f64; 2]> {
    let to_param = |u: [f64; 2]| [maps[0].to_param(u[0]), maps[1].to_param(u[1])];
    let g = |u: [f64; 2]| {
        let v = f(to_param(u));
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut u = [maps[0].to_free(start[0]), maps[1].to_free(start[1])];
    let mut gu = g(u);
    if !gu.is_finite() {
        return Err(Error::numerical(format!(
            "log-density is {gu} at the mode search start {start:?}"
        )));
    }
    for _ in 0..200 {
        let (grad, hess) = derivatives(&g, u, [1e-4, 1e-4]);
        let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
        let newton_ok = hess[0][0] < 0.0 && det > 0.0;
        let mut step = if newton_ok {
            [
                -(hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det,
                -(-hess[1][0] * grad[0] + hess[0][0] * grad[1]) / det,
            ]
        } else {
            let norm = grad[0].hypot(grad[1]).max(1e-300);
            let scale = (1.0 / norm).min(1.0);
            [grad[0] * scale, grad[1] * scale]
        };
        let cap = step[0].abs().max(step[1].abs());
        if cap > 2.0 {
            step = [step[0] * 2.0 / cap, step[1] * 2.0 / cap];
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial = [u[0] + step[0], u[1] + step[1]];
            let gt = g(trial);
            if gt >= gu {
                u = trial;
                gu = gt;
                accepted = true;
                break;
            }
            step = [step[0] * 0.5, step[1] * 0.5];
        }
        if !accepted || step[0].abs().max(step[1].abs()) < 1e-10 {
            break;
        }
    }
    Ok(to_param(u))
}

// central-difference gradient and Hessian with per-axis steps
fn derivatives(g: &impl Fn([f64; 2]) -> f64, u: [f64; 2], h: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let at = |dx: f64, dy: f64| g([u[0] + dx, u[1] + dy]);
    let f0 = at(0.0, 0.0);
    let fxp = at(h[0], 0.0);
    let fxm = at(-h[0], 0.0);
    let fyp = at(0.0, h[1]);
    let fym = at(0.0, -h[1]);
    let grad = [(fxp - fxm) / (2.0 * h[0]), (fyp - fym) / (2.0 * h[1])];
    let hxx = (fxp - 2.0 * f0 + fxm) / (h[0] * h[0]);
    let hyy = (fyp - 2.0 * f0 + fym) / (h[1] * h[1]);
    let hxy = (at(h[0], h[1]) - at(h[0], -h[1]) - at(-h[0], h[1]) + at(-h[0], -h[1])) / (4.0 * h[0] * h[1]);
    (grad, [[hxx, hxy], [hxy, hyy]])
}

// marginal posterior sd estimates from the curvature at the mode
/// Marginal and conditional standard deviations from the curvature at the mode.
fn curvature_sd(f: &impl Fn([f64; 2]) -> f64, mode: [f64; 2], bounds: &[(f64, f64); 2]) -> ([f64; 2], [f64; 2]) {
    let mut h = [0.0; 2];
    for i in 0..2 {
        let (lo, hi) = bounds[i];
        h[i] = 1e-4 * mode[i].abs().max(1.0);
        // keep the stencil inside the natural bounds
        while h[i] > 1e-14 && (mode[i] - 2.0 * h[i] <= lo || mode[i] + 2.0 * h[i] >= hi) {
            h[i] *= 0.1;
        }
    }
    let (_, hess) = derivatives(f, mode, h);
    let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
    let fallback = [0.5 * mode[0].abs() + 1.0, 0.5 * mode[1].abs() + 1.0];
    let conditional = [0, 1].map(|i| {
        if hess[i][i] < 0.0 {
            (-1.0 / hess[i][i]).sqrt()
        } else {
            fallback[i]
        }
    });
    let marginal = if hess[0][0] < 0.0 && det > 0.0 {
        [(-hess[1][1] / det).sqrt(), (-hess[0][0] / det).sqrt()]
    } else {
        conditional
    };
    (marginal, conditional)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn beta_examples() {
        let m = beta_moments(19, 97, None).unwrap();
        assert!((m.m1 - 20.0 / 99.0).abs() < 1e-15);
        assert!((m.m2 - 420.0 / 9900.0).abs() < 1e-15);
        let u = beta_moments(0, 0, None).unwrap();
        assert_eq!(u.m1, 0.5);
        assert!((u.m2 - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn beta_integer_order_moments_are_rising_factorials() {
        // Beta(8, 9): E[θ²] = 8·9/(17·18), E[θ^-2] = (16·15)/(7·6)
        let m = beta_moments(7, 15, Some(2.0)).unwrap();
        assert!(rel(m.mk.unwrap(), 72.0 / 306.0) < 1e-13);
        assert!(rel(m.mnegk.unwrap(), 240.0 / 42.0) < 1e-13);
        m.check_invariants().unwrap();
    }

    #[test]
    fn beta_negative_moment_divergence() {
        assert!(matches!(
            beta_moments(0, 10, Some(1.0)),
            Err(Error::DivergentMoment { .. })
        ));
        assert!(beta_moments(0, 10, Some(0.5)).is_ok());
        assert!(beta_moments(11, 10, None).is_err());
    }

    #[test]
    fn truncated_normal_symmetric_case() {
        let m = truncated_normal_moments(0.0, 1.0, -2.0, 2.0).unwrap();
        assert!(m.m1.abs() < 1e-15);
        // 1 − 4φ(2)/(Φ(2) − Φ(−2))
        assert!((m.m2 - 0.773_741_303_549_923_2).abs() < 1e-12);
    }

    #[test]
    fn truncated_normal_errors() {
        assert!(truncated_normal_moments(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(truncated_normal_moments(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(matches!(
            truncated_normal_moments(0.0, 1.0, 60.0, 61.0),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn truncated_normal_far_tail_stays_inside() {
        let m = truncated_normal_moments(5.0, 0.5, -2.0, 2.0).unwrap();
        assert!(m.m1 < 2.0 && m.m1 > 1.5);
        assert!(m.variance() > 0.0);
    }

    #[test]
    fn mc_examples() {
        let m = mc_moments(&[2.0, 2.0, 2.0], Some(1.5)).unwrap();
        assert_eq!((m.m1, m.m2), (2.0, 4.0));
        assert!(rel(m.mk.unwrap(), 2f64.powf(1.5)) < 1e-15);
        assert!(rel(m.mnegk.unwrap(), 2f64.powf(-1.5)) < 1e-15);
        let m = mc_moments(&[1.0, 4.0], Some(1.0)).unwrap();
        assert_eq!(m.m1, 2.5);
        assert_eq!(m.mnegk.unwrap(), 0.625);
        assert!(mc_moments(&[1.0], None).is_err());
        assert!(matches!(mc_moments(&[1.0, -1.0], Some(1.0)), Err(Error::Domain(_))));
        assert!(mc_moments(&[1.0, -1.0], None).is_ok());
    }

    #[test]
    fn uniform_grid() {
        let g = Grid1D::new(0.0, 1.0, 101, |_| 0.0).unwrap();
        let m = grid_moments_1d(&g, None).unwrap();
        assert!((m.m1 - 0.5).abs() < 1e-14);
        assert!((m.m2 - 1.0 / 3.0).abs() < 1e-14);
        // E[θ^-1] of a uniform diverges
        assert!(matches!(
            grid_moments_1d(&g, Some(1.0)),
            Err(Error::DivergentMoment { .. })
        ));
    }

    #[test]
    fn narrow_gaussian_grid() {
        let g = Grid1D::new(0.0, 1.0, 2001, |t| -0.5 * ((t - 0.5) / 1e-3).powi(2)).unwrap();
        let m = grid_moments_1d(&g, None).unwrap();
        assert!((m.m1 - 0.5).abs() < 1e-5);
        assert!((m.m2 - 0.25).abs() < 1e-5);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid1D::new(0.0, 1.0, 100, |_| 0.0).is_err());
        assert!(Grid1D::new(1.0, 0.0, 200, |_| 0.0).is_err());
        let nan = Grid1D::new(0.0, 1.0, 200, |t| if t > 0.5 { f64::NAN } else { 0.0 }).unwrap();
        assert!(matches!(nan.discretize(), Err(Error::Numerical(_))));
        // a cutoff through the bulk of a density
        let cut = Grid1D::new(0.0, 1.0, 200, |t| -t).unwrap().with_cutoffs(false, true);
        assert!(matches!(cut.discretize(), Err(Error::Divergence { .. })));
    }

    #[test]
    fn symmetric_joint_gives_equal_marginals() {
        let f = |x: f64, y: f64| -0.5 * (x * x + y * y - 1.2 * x * y) / 0.64 + (x * y).cos();
        let ax = Axis::natural(-12.0, 12.0, 161).unwrap().with_cutoffs(true, true);
        let g = Grid2D::new(ax, ax, Arc::new(f)).unwrap();
        let (a, b) = grid_moments_2d(&g, None).unwrap();
        assert!((a.m1 - b.m1).abs() < 1e-10);
        assert!((a.m2 - b.m2).abs() < 1e-10);
    }

    #[test]
    fn around_mode_finds_a_gaussian() {
        // independent N(3, 0.2²) × N(7, 0.5²) on the plane
        let f = |x: f64, y: f64| -0.5 * ((x - 3.0) / 0.2).powi(2) - 0.5 * ((y - 7.0) / 0.5).powi(2);
        let free = (f64::NEG_INFINITY, f64::INFINITY);
        let g = Grid2D::around_mode(Arc::new(f), [1.0, 1.0], [free, free], 161).unwrap();
        assert!(!g.x.log_scale);
        assert!((g.x.lo - (3.0 - 2.4)).abs() < 1e-4, "{:?}", g.x);
        assert!((g.y.hi - (7.0 + 6.0)).abs() < 1e-3, "{:?}", g.y);
        let (a, b) = grid_moments_2d(&g, None).unwrap();
        assert!((a.m1 - 3.0).abs() < 1e-12);
        assert!((b.variance() - 0.25).abs() < 1e-11);
    }

    #[test]
    fn around_mode_uses_log_axes_on_the_positive_quadrant() {
        // Gamma(2, 1) × Gamma(3, 1)
        let f = |x: f64, y: f64| x.ln() - x + 2.0 * y.ln() - y;
        let g = Grid2D::around_mode(Arc::new(f), [0.5, 0.5], [(0.0, f64::INFINITY); 2], 401).unwrap();
        assert!(g.x.log_scale && g.y.log_scale);
        let (a, b) = grid_moments_2d(&g, Some(1.0)).unwrap();
        assert!(rel(a.m1, 2.0) < 1e-9);
        assert!(rel(b.m2, 12.0) < 1e-9);
        // E[1/θ] decays only like θ towards zero, so the cut costs ~e^lo
        assert!(rel(a.mnegk.unwrap(), 1.0) < 1e-7);
        assert!(rel(b.mnegk.unwrap(), 0.5) < 1e-7);
    }

    #[test]
    fn natural_zero_bound_allows_integrable_negative_moments() {
        // Gamma(2, 1) on a linear grid reaching zero: E[1/θ] = 1, E[1/θ²] diverges
        let g = Grid1D::new(0.0, 60.0, 2001, |t: f64| t.ln() - t)
            .unwrap()
            .with_cutoffs(false, true);
        let m = grid_moments_1d(&g, Some(1.0)).unwrap();
        assert!(rel(m.mnegk.unwrap(), 1.0) < 1e-9);
        assert!(matches!(
            grid_moments_1d(&g, Some(2.0)),
            Err(Error::DivergentMoment { .. })
        ));
    }
}
