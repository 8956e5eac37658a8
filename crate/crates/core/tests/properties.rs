use lie_taylor::derive::{taylor_data, DerivMethod};
use lie_taylor::fields::catalog;
use lie_taylor::group::registry_get;
use lie_taylor::linalg::inverse;
use lie_taylor::report::Report;
use lie_taylor::riemann::{distance_upper_bound, MetricModel};
use lie_taylor::taylor::{majorant_coefficients, majorant_eval, taylor_eval};
use num_complex::Complex64;
use proptest::prelude::*;

fn coords(d: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, d)
}

fn cvec(xi: &[f64]) -> Vec<Complex64> {
    xi.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Inside the principal chart; U(1) wraps at |xi| = 1/2.
    #[test]
    fn log_inverts_exp(name in prop::sample::select(vec!["U1", "R2", "SL2R", "SU2", "SL2C"]), seed in coords(6, 0.45)) {
        let g = registry_get(name).unwrap();
        let xi = &seed[..g.dim];
        let back = g.log(&g.exp(xi).unwrap()).unwrap();
        for (a, b) in xi.iter().zip(&back) {
            prop_assert!((a - b).abs() < 1e-10, "{name}: {xi:?} -> {back:?}");
        }
    }

    #[test]
    fn exp_stays_in_the_group(name in prop::sample::select(vec!["U1", "Ctimes", "SL2R", "SU2", "SL2C"]), seed in coords(6, 2.0)) {
        let g = registry_get(name).unwrap();
        prop_assert!(g.contains(&g.exp(&seed[..g.dim]).unwrap()));
    }

    /// The series of an entire field at a small offset reproduces the field,
    /// and the majorant dominates the value.
    #[test]
    fn series_reproduces_the_field(field in prop::sample::select(vec!["entry-11", "trace", "adjoint"]), base in coords(3, 0.5), xi in coords(3, 0.2)) {
        let group = registry_get("SL2R").unwrap();
        let f = catalog(field, &group).unwrap();
        let g = group.exp(&base).unwrap();
        let t = taylor_data(&f, &g, 10, &DerivMethod::Exact).unwrap();
        let direct = f.eval(&(&g * group.exp(&xi).unwrap())).unwrap();
        let series = taylor_eval(&t, &cvec(&xi)).unwrap();
        prop_assert!((direct - series).norm() < 1e-9, "{direct} vs {series}");
        let r = xi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = majorant_eval(&majorant_coefficients(&t, 0.0), r, None).unwrap();
        prop_assert!(series.norm() <= bound.value * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn distance_bound_is_left_invariant(a in coords(3, 0.8), b in coords(3, 0.8), k in coords(3, 0.8)) {
        let group = registry_get("SL2R").unwrap();
        let m = MetricModel::standard(group.clone());
        let (g, h, k) = (group.exp(&a).unwrap(), group.exp(&b).unwrap(), group.exp(&k).unwrap());
        let d = distance_upper_bound(&g, &h, &m).unwrap();
        let moved = distance_upper_bound(&(&k * &g), &(&k * &h), &m).unwrap();
        prop_assert!((d - moved).abs() <= 1e-6 * (1.0 + d));
        prop_assert!(d >= 0.0);
        let x = inverse(&g).unwrap() * &h;
        if let Some(l) = m.log_length(&x) {
            prop_assert!(d <= l + 1e-12);
        }
    }

    #[test]
    fn reports_are_consistent(lhs in 0.0..10.0f64, rhs in 0.0..10.0f64) {
        let r = Report::inequality("p", serde_json::json!({}), lhs, rhs, 0.0);
        prop_assert_eq!(r.pass, lhs <= rhs);
        prop_assert!((r.slack - (rhs - lhs)).abs() < 1e-12);
    }
}

/// The bound is an upper bound on a true distance, so it need not obey the
/// triangle inequality exactly; on small balls it does up to the
/// optimizer's slack.
#[test]
fn distance_bound_triangle_on_small_balls() {
    let group = registry_get("SL2R").unwrap();
    let m = MetricModel::standard(group.clone());
    let mut rng = lie_taylor::sample::rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p: Vec<_> = (0..3).map(|_| lie_taylor::sample::element(&mut rng, &group, 0.5)).collect();
        let d = |a: usize, b: usize| distance_upper_bound(&p[a], &p[b], &m).unwrap();
        worst = worst.max(d(0, 2) - d(0, 1) - d(1, 2));
    }
    assert!(worst <= 1e-6, "triangle defect {worst}");
}
