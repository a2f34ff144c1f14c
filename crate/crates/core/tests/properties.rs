use harmex::extremal::{split_decomposition, split_weights};
use harmex::harmonic_model::{fractional_derivative, ZonalExpansion};
use harmex::norms::{integral_mean, NormOptions};
use harmex::quadrature::{gauss_jacobi, sphere_integral};
use harmex::special_fn::{radial_moment, zonal_value};
use harmex::IntervalSet;
use proptest::prelude::*;

fn expansion(n: usize) -> impl Strategy<Value = ZonalExpansion> {
    prop::collection::vec(-1.0f64..1.0, 1..=11).prop_map(move |c| ZonalExpansion::with_default_pole(n, c).unwrap())
}

fn interval_set() -> impl Strategy<Value = IntervalSet> {
    prop::collection::vec((0.0f64..0.999, 0.0f64..0.2), 0..4).prop_map(|pieces| {
        IntervalSet::from_intervals(pieces.into_iter().map(|(a, len)| (a, (a + len).min(0.999))).filter(|(a, b)| b > a).collect())
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zonal_values_peak_at_the_pole(k in 0usize..=40, n in 2usize..=5, s in -1.0f64..=1.0) {
        let top = zonal_value(k, n, 1.0).unwrap();
        prop_assert!(zonal_value(k, n, s).unwrap().abs() <= top * (1.0 + 1e-12));
    }

    #[test]
    fn radial_moment_is_additive(k in 0usize..30, n in 2usize..=4, alpha in -0.9f64..3.0, a in 0.0f64..0.9, t in 0.01f64..0.99, u in 0.01f64..0.99) {
        let c = a + (1.0 - a) * u;
        let b = a + (c - a) * t;
        let whole = radial_moment(k, alpha, n, &IntervalSet::interval(a, c).unwrap()).unwrap();
        let left = radial_moment(k, alpha, n, &IntervalSet::interval(a, b).unwrap()).unwrap();
        let right = radial_moment(k, alpha, n, &IntervalSet::interval(b, c).unwrap()).unwrap();
        prop_assert!((whole - left - right).abs() <= 1e-12 * whole.max(1e-300).max(1.0));
    }

    #[test]
    fn split_is_exact(n in 2usize..=4, order in -0.5f64..3.0, set in interval_set(), seed_coeffs in prop::collection::vec(-1.0f64..1.0, 1..30)) {
        let f = ZonalExpansion::with_default_pole(n, seed_coeffs).unwrap();
        let (f1, f2) = split_decomposition(&f, order, &set).unwrap();
        for ((a, b), c) in f1.coeffs.iter().zip(&f2.coeffs).zip(&f.coeffs) {
            prop_assert!((a + b - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn multipliers_grow_with_the_set(n in 2usize..=4, order in 0.0f64..3.0, a in interval_set(), b in interval_set()) {
        let big = a.union(&b);
        let wa = split_weights(n, order, &a, 20).unwrap();
        let wb = split_weights(n, order, &big, 20).unwrap();
        for (x, y) in wa.iter().zip(&wb) {
            prop_assert!(*x >= 0.0 && *y <= 1.0 + 1e-12 && x <= &(y + 1e-12));
        }
    }

    #[test]
    fn interval_sets_stay_normalized(a in interval_set(), b in interval_set()) {
        let u = a.union(&b);
        for w in u.intervals().windows(2) {
            prop_assert!(w[0].1 < w[1].0);
        }
        prop_assert!(u.intervals().iter().all(|(x, y)| x < y));
        prop_assert_eq!(u.complement().complement(), u.clone());
        prop_assert!((u.length() + u.complement().length() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_mean_is_the_constant_term(n in 2usize..=4, f in expansion(3), r in 0.0f64..0.99) {
        let f = ZonalExpansion::with_default_pole(n, f.coeffs).unwrap();
        let mean = sphere_integral(|s| f.evaluate(r, s).unwrap(), n, f.degree().max(1)).unwrap();
        prop_assert!((mean - f.coeffs[0]).abs() <= 1e-10);
    }

    #[test]
    fn fractional_derivative_is_linear(f in expansion(3), g in expansion(3), c in -2.0f64..2.0, t in -0.4f64..2.0) {
        let lhs = fractional_derivative(&f.axpy(c, &g).unwrap(), t).unwrap();
        let rhs = fractional_derivative(&f, t).unwrap().axpy(c, &fractional_derivative(&g, t).unwrap()).unwrap();
        for (x, y) in lhs.coeffs.iter().zip(&rhs.coeffs) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn gauss_jacobi_weights_are_positive(m in 1usize..40, a in -0.9f64..4.0, b in -0.9f64..4.0) {
        let (x, w) = gauss_jacobi(m, a, b).unwrap();
        prop_assert!(w.iter().all(|&w| w > 0.0));
        prop_assert!(x.windows(2).all(|p| p[0] < p[1]) && x.iter().all(|x| x.abs() < 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn integral_means_increase(f in expansion(2), q in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let opts = NormOptions::default();
        let mut last = 0.0f64;
        for i in 0..=20 {
            let r = 0.99 * i as f64 / 20.0;
            let m = integral_mean(&f, q, r, &opts).unwrap();
            prop_assert!(m >= last * (1.0 - 1e-12) - 1e-14, "r = {}: {} < {}", r, m, last);
            last = m;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn means_ignore_the_pole(f in expansion(3), v in prop::collection::vec(-1.0f64..1.0, 3), r in 0.0f64..0.95) {
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(len > 0.1);
        let pole: Vec<f64> = v.iter().map(|x| x / len).collect();
        let g = ZonalExpansion::new(3, pole, f.coeffs.clone()).unwrap();
        let opts = NormOptions::default();
        for q in [1.0, 2.0, f64::INFINITY] {
            let a = integral_mean(&f, q, r, &opts).unwrap();
            let b = integral_mean(&g, q, r, &opts).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
