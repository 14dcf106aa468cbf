//! The 2-D Gamma posterior against an importance-sampling estimate.
//!
//! The proposal is a Student-t (5 df) in `(ln α1, ln α2)` around the
//! posterior mode, with the inverse Hessian there as its scale matrix, widened
//! by 1.5. Nothing about the quadrature grid enters the oracle.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use restricted_loss::moments::{grid_moments_2d, LogDensity2D};
use restricted_loss::sim::{gamma_posterior, gamma_posterior_density, replication_rng};

const DRAWS: usize = 10_000_000;
const CHUNKS: usize = 100;
const DF: f64 = 5.0;

fn sample() -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let d = Gamma::new(2.0, 1.0).unwrap();
    (0..15).map(|_| d.sample(&mut rng)).collect()
}

/// Log-density in log coordinates, Jacobian included.
fn log_target(p: &impl LogDensity2D, u: f64, v: f64) -> f64 {
    p.log_density(u.exp(), v.exp()) + u + v
}

fn hessian(f: &impl Fn(f64, f64) -> f64, u: f64, v: f64) -> [[f64; 2]; 2] {
    let h = 1e-4;
    let f0 = f(u, v);
    let duu = (f(u + h, v) - 2.0 * f0 + f(u - h, v)) / (h * h);
    let dvv = (f(u, v + h) - 2.0 * f0 + f(u, v - h)) / (h * h);
    let duv = (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h)) / (4.0 * h * h);
    [[duu, duv], [duv, dvv]]
}

/// Newton iterations from the method-of-moments fit.
fn mode(f: &impl Fn(f64, f64) -> f64, xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let (mut u, mut v) = ((mean * mean / var).ln(), (var / mean).ln());
    for _ in 0..50 {
        let h = 1e-5;
        let gu = (f(u + h, v) - f(u - h, v)) / (2.0 * h);
        let gv = (f(u, v + h) - f(u, v - h)) / (2.0 * h);
        let m = hessian(f, u, v);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let du = (m[1][1] * gu - m[0][1] * gv) / det;
        let dv = (m[0][0] * gv - m[1][0] * gu) / det;
        u -= du;
        v -= dv;
        if du.abs().max(dv.abs()) < 1e-10 {
            break;
        }
    }
    (u, v)
}

/// Self-normalized estimates of `E[α1], E[α1²], E[α2], E[α2²]` with standard errors.
fn importance_moments(xs: &[f64]) -> ([f64; 4], [f64; 4]) {
    let density = gamma_posterior_density(xs, 1e-4, 1e-4).unwrap();
    let f = |u: f64, v: f64| log_target(&density, u, v);
    let (u0, v0) = mode(&f, xs);
    let h = hessian(&f, u0, v0);
    // covariance = 1.5² · (−H)⁻¹, factored as L Lᵀ
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let c = [
        [-h[1][1] / det * 2.25, h[0][1] / det * 2.25],
        [h[1][0] / det * 2.25, -h[0][0] / det * 2.25],
    ];
    let l00 = c[0][0].sqrt();
    let l10 = c[1][0] / l00;
    let l11 = (c[1][1] - l10 * l10).sqrt();
    let log_det_l = (l00 * l11).ln();
    let chi = ChiSquared::new(DF).unwrap();
    let f_max = f(u0, v0);

    // per chunk: Σw, Σw·g_j, and the squares needed for the delta-method SE
    let chunks: Vec<Vec<(f64, [f64; 4])>> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = replication_rng(42, 1, c);
            (0..DRAWS / CHUNKS)
                .map(|_| {
                    let z0: f64 = StandardNormal.sample(&mut rng);
                    let z1: f64 = StandardNormal.sample(&mut rng);
                    let s = (chi.sample(&mut rng) / DF).sqrt();
                    let (t0, t1) = (z0 / s, z1 / s);
                    let u = u0 + l00 * t0;
                    let v = v0 + l10 * t0 + l11 * t1;
                    // bivariate t log-density up to a constant
                    let q = t0 * t0 + t1 * t1;
                    let log_q = -0.5 * (DF + 2.0) * (1.0 + q / DF).ln() - log_det_l;
                    let w = (f(u, v) - f_max - log_q).exp();
                    let (a1, a2) = (u.exp(), v.exp());
                    (w, [a1, a1 * a1, a2, a2 * a2])
                })
                .collect()
        })
        .collect();
    let all: Vec<&(f64, [f64; 4])> = chunks.iter().flatten().collect();
    let sw: f64 = all.iter().map(|(w, _)| w).sum();
    let mut est = [0.0; 4];
    let mut se = [0.0; 4];
    for j in 0..4 {
        est[j] = all.iter().map(|(w, g)| w * g[j]).sum::<f64>() / sw;
        let var = all.iter().map(|(w, g)| (w * (g[j] - est[j])).powi(2)).sum::<f64>();
        se[j] = var.sqrt() / sw;
    }
    (est, se)
}

#[test]
fn grid_moments_agree_with_importance_sampling() {
    let xs = sample();
    let grid = gamma_posterior(&xs, 1e-4, 1e-4, 161).unwrap();
    let (m1, m2) = grid_moments_2d(&grid, None).unwrap();
    let quad = [m1.m1, m1.m2, m2.m1, m2.m2];
    let (est, se) = importance_moments(&xs);
    for j in 0..4 {
        let z = (quad[j] - est[j]) / se[j];
        assert!(
            z.abs() < 3.0,
            "moment {j}: grid {} vs importance {} ± {} (z = {z:.2})",
            quad[j],
            est[j],
            se[j]
        );
        // the oracle is informative: its SE is small against the value
        assert!(se[j] < 1e-2 * est[j], "moment {j}: importance SE {} too large", se[j]);
    }
}
