use proptest::prelude::*;

use restricted_loss::estimators::{interval_estimate, precautionary_estimate, probability_estimate, scale_mean};
use restricted_loss::intervals::{ci_normal, ci_wilson_ac};
use restricted_loss::moments::{beta_moments, mc_moments, truncated_normal_moments};
use restricted_loss::spaces::{generalized_logit, inverse_logit, symmetric_counterpart};
use restricted_loss::{LossFunction, LossKind, ParameterSpace};

fn half_line_kinds() -> impl Strategy<Value = LossKind> {
    prop_oneof![
        (0.1f64..4.0).prop_map(|k| LossKind::ScaleFamily { k }),
        Just(LossKind::Precautionary),
        Just(LossKind::ScaleInvariantPrecautionary),
        Just(LossKind::NormalizedSquared),
        Just(LossKind::Stein),
        Just(LossKind::BrownLog),
    ]
}

fn positive() -> impl Strategy<Value = f64> {
    (-6.0f64..6.0).prop_map(f64::exp)
}

proptest! {
    #[test]
    fn half_line_losses_are_nonnegative_and_vanish_on_the_diagonal(
        kind in half_line_kinds(), theta in positive(), d in positive()
    ) {
        let l = LossFunction::new(kind).unwrap();
        prop_assert!(l.evaluate_scalar(theta, d).unwrap() >= 0.0);
        prop_assert!(l.evaluate_scalar(theta, theta).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn interval_losses_are_nonnegative_and_vanish_on_the_diagonal(
        a in -5.0f64..5.0, w in 0.1f64..10.0, s in 0.01f64..0.99, t in 0.01f64..0.99
    ) {
        let b = a + w;
        for kind in [LossKind::IntervalSquared { a, b }, LossKind::IntervalBrownLogit { a, b }] {
            let l = LossFunction::new(kind).unwrap();
            let (theta, d) = (a + s * w, a + t * w);
            prop_assert!(l.evaluate_scalar(theta, d).unwrap() >= 0.0);
            prop_assert!(l.evaluate_scalar(theta, theta).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn scale_family_is_scale_symmetric(k in 0.1f64..4.0, theta in positive(), r in -3.0f64..3.0) {
        let l = LossFunction::new(LossKind::ScaleFamily { k }).unwrap();
        let d = theta * r.exp();
        let d2 = symmetric_counterpart(&ParameterSpace::PositiveHalfLine, theta, d).unwrap();
        let (x, y) = (l.evaluate_scalar(theta, d).unwrap(), l.evaluate_scalar(theta, d2).unwrap());
        prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
    }

    #[test]
    fn counterpart_is_an_involution(a in -5.0f64..5.0, w in 0.1f64..10.0, s in 0.05f64..0.95, t in 0.05f64..0.95) {
        let space = ParameterSpace::interval(a, a + w).unwrap();
        let (theta, d) = (a + s * w, a + t * w);
        let d2 = symmetric_counterpart(&space, theta, d).unwrap();
        let back = symmetric_counterpart(&space, theta, d2).unwrap();
        prop_assert!((back - d).abs() <= 1e-9 * w);
    }

    #[test]
    fn logit_round_trips(a in -5.0f64..5.0, w in 0.1f64..10.0, s in 0.001f64..0.999) {
        let x = a + s * w;
        let l = generalized_logit(x, a, a + w).unwrap();
        prop_assert!((inverse_logit(l, a, a + w) - x).abs() <= 1e-12 * w.max(x.abs()));
    }

    #[test]
    fn beta_moments_satisfy_jensen_and_cauchy_schwarz(n in 0u64..500, frac in 0.0f64..1.0, k in 0.1f64..0.99) {
        let x = (frac * n as f64).floor() as u64;
        let m = beta_moments(x, n, Some(k)).unwrap();
        prop_assert!(m.m2 >= m.m1 * m.m1 * (1.0 - 1e-10));
        prop_assert!(m.mk.unwrap() * m.mnegk.unwrap() >= 1.0 - 1e-10);
        m.check_invariants().unwrap();
    }

    #[test]
    fn truncated_normal_mean_stays_inside(center in -10.0f64..10.0, sd in 0.01f64..5.0, a in -3.0f64..0.0, w in 0.1f64..5.0) {
        // a window far out in the tail is refused rather than approximated
        let m = match truncated_normal_moments(center, sd, a, a + w) {
            Ok(m) => m,
            Err(restricted_loss::Error::Numerical(_)) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        prop_assert!(a < m.m1 && m.m1 < a + w);
        prop_assert!(m.m2 >= m.m1 * m.m1 * (1.0 - 1e-10));
    }

    #[test]
    fn precautionary_estimate_bounds_the_mean(n in 0u64..300, frac in 0.0f64..1.0) {
        let x = (frac * n as f64).floor() as u64;
        let m = beta_moments(x, n, None).unwrap();
        prop_assert!(precautionary_estimate(&m).unwrap().point >= m.m1);
    }

    #[test]
    fn interval_estimate_lies_inside(n in 0u64..300, frac in 0.0f64..1.0, lo in 0.0f64..0.5) {
        let x = (frac * n as f64).floor() as u64;
        let m = beta_moments(x, n, None).unwrap();
        prop_assume!(lo < m.m1);
        let e = interval_estimate(&m, lo, 1.0);
        if let Ok(e) = e {
            prop_assert!(lo < e.point && e.point < 1.0);
        }
    }

    #[test]
    fn probability_estimate_is_interior_and_increasing(n in 1u64..2000) {
        let mut last = 0.0;
        for x in 0..=n {
            let p = probability_estimate(x, n).unwrap();
            prop_assert!(p > last && p < 1.0);
            last = p;
        }
    }

    #[test]
    fn scale_mean_is_equivariant(seed in 0u64..1000, c in positive(), k in 0.2f64..3.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect();
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let a = scale_mean(&mc_moments(&xs, Some(k)).unwrap()).unwrap().point;
        let b = scale_mean(&mc_moments(&scaled, Some(k)).unwrap()).unwrap().point;
        prop_assert!((b - c * a).abs() <= 1e-10 * c * a);
    }

    #[test]
    fn normal_interval_width_halves_at_four_times_n(p in 0.01f64..0.99, n in 1u64..10_000) {
        let w1 = ci_normal(p, n, 0.95).unwrap().width();
        let w4 = ci_normal(p, 4 * n, 0.95).unwrap().width();
        prop_assert!((w4 / w1 - 0.5).abs() <= 1e-10);
    }

    #[test]
    fn wilson_interval_reflects(n in 1u64..1000, frac in 0.0f64..1.0) {
        let x = (frac * n as f64).floor() as u64;
        let (c, m) = (ci_wilson_ac(x, n).unwrap(), ci_wilson_ac(n - x, n).unwrap());
        prop_assert!((c.lo - (1.0 - m.hi)).abs() <= 1e-12);
        prop_assert!((c.hi - (1.0 - m.lo)).abs() <= 1e-12);
    }
}
