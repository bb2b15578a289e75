use proptest::prelude::*;

use sparseci::bounds::minimax::{lb_noncoverage_g, lb_noncoverage_g_two_sided};
use sparseci::bounds::thresholds::{kappa_hat, kappa_star};
use sparseci::gaussian::{
    quantile_sandwich, std_normal_cdf, std_normal_quantile, std_normal_sf, tail_sandwich,
};
use sparseci::intervals::{bar_width, hat_high_width, Method, Procedure};
use sparseci::model::{MeanVector, Observation, ProblemParams, Side};
use sparseci::selectors::SelectionRule;

fn params() -> impl Strategy<Value = ProblemParams> {
    (2usize..400, 0.0f64..1.0, 0.1f64..12.0, 0.2f64..3.0, 0.01f64..0.3, 0.05f64..0.95, 0.05f64..0.95)
        .prop_map(|(d, s_frac, snr, sigma, alpha, ap_frac, delta)| {
            let s = 1 + ((d - 1) as f64 * s_frac) as usize;
            ProblemParams::new(d, s, snr * sigma, sigma, alpha, alpha * ap_frac, delta).unwrap()
        })
}

fn procedure(m: Method, p: &ProblemParams) -> Procedure {
    match m {
        Method::OneSidedHat => Procedure::one_sided_hat(p, true),
        Method::OneSidedBar => Procedure::one_sided_bar(p, true),
        Method::TwoSidedHat => Procedure::two_sided_hat(p, true),
        Method::TwoSidedBar => Procedure::two_sided_bar(p, true),
        Method::Adaptive => Procedure::adaptive(p.d(), p.sigma(), p.alpha(), p.alpha_prime(), true),
        Method::Bonferroni => Procedure::bonferroni(p.d(), p.sigma(), p.alpha()),
        Method::Oracle => Procedure::oracle(p.d(), p.sigma(), (0..p.s()).collect(), p.alpha()),
        Method::PlugIn => Procedure::plug_in(p.d(), p.sigma(), p.alpha()),
    }
    .unwrap()
}

fn observation(p: &ProblemParams, z: &[f64]) -> Observation {
    let x = (0..p.d()).map(|j| p.sigma() * z[j % z.len()] * 3.0 + if j < p.s() { p.a() } else { 0.0 });
    Observation::new(x.collect(), p.sigma()).unwrap()
}

proptest! {
    #[test]
    fn quantile_round_trip(log_p in -300.0f64..-1e-9) {
        let p = 10f64.powf(log_p);
        for q in [p, 1.0 - p] {
            if q <= 0.0 || q >= 1.0 {
                continue;
            }
            let back = std_normal_cdf(std_normal_quantile(q).unwrap()).unwrap().value();
            prop_assert!((back - q).abs() <= 1e-12 * q.max(1.0 - q), "q={q} back={back}");
        }
    }

    #[test]
    fn tail_sandwich_brackets(y in 1e-6f64..35.0) {
        let (lo, hi) = tail_sandwich(y).unwrap();
        let sf = std_normal_sf(y).unwrap().value();
        prop_assert!(lo.value() < sf && sf <= hi.value());
    }

    #[test]
    fn quantile_sandwich_brackets(log_t in 0.6932f64..300.0) {
        let t = log_t.exp();
        let (lo, hi) = quantile_sandwich(t).unwrap();
        let q = -std_normal_quantile(1.0 / t).unwrap();
        prop_assert!(lo <= q && q <= hi, "t={t}: {lo} <= {q} <= {hi}");
    }

    #[test]
    fn g_bounds_in_unit_interval_and_monotone_in_m(
        dim in 2usize..100_000,
        a_frac in 0.0f64..1.0,
        log_rho in -3.0f64..1.8,
        sigma in 0.1f64..5.0,
        m in 0.0f64..30.0,
        dm in 0.0f64..5.0,
    ) {
        let a = 1 + ((dim / 2 - 1) as f64 * a_frac) as usize;
        let rho = sigma * 10f64.powf(log_rho);
        for two in [false, true] {
            let g = |m: f64| if two {
                lb_noncoverage_g_two_sided(dim, a, rho, m, sigma)
            } else {
                lb_noncoverage_g(dim, a, rho, m, sigma)
            }.unwrap().value();
            let (g1, g2) = (g(m * sigma), g((m + dm) * sigma));
            prop_assert!((0.0..1.0).contains(&g1));
            prop_assert!(g2 <= g1);
        }
    }

    #[test]
    fn high_region_width_is_defined(p in params()) {
        let snr = p.snr();
        prop_assume!(snr >= kappa_star(&p).max(kappa_hat(&p)));
        let u = hat_high_width(&p).unwrap();
        prop_assert!(u.is_finite());
    }

    #[test]
    fn asymptotic_high_width_grows_with_s(
        s in 1usize..10_000,
        alpha in 0.02f64..0.99,
        beta_frac in 0.05f64..0.95,
    ) {
        let beta = (alpha * beta_frac).min(0.6);
        let ap = alpha - beta;
        prop_assume!(ap > 0.0);
        let p1 = ProblemParams::new(2 * s + 2, s, 1.0, 1.0, alpha, ap, 0.5).unwrap();
        let p2 = ProblemParams::new(2 * s + 2, s + 1, 1.0, 1.0, alpha, ap, 0.5).unwrap();
        prop_assert!(bar_width(&p2, true) >= bar_width(&p1, true));
    }

    #[test]
    fn selection_is_coordinatewise(p in params(), z in prop::collection::vec(-2.0f64..2.0, 1..50), other in -50.0f64..50.0) {
        let obs = observation(&p, &z);
        let rule = SelectionRule::one_sided_hat(&p);
        let mut x = obs.x().to_vec();
        let before = rule.selects(0, x[0], p.sigma());
        for v in x.iter_mut().skip(1) {
            *v = other;
        }
        prop_assert_eq!(before, rule.selects(0, x[0], p.sigma()));
        let sel = rule.select_raw(&x, p.sigma());
        prop_assert_eq!(sel.contains(&0), before);
    }

    #[test]
    fn hat_selection_shrinks_as_delta_grows(p in params(), z in prop::collection::vec(-2.0f64..2.0, 1..50), bump in 0.0f64..0.5) {
        let delta2 = (p.delta() + bump).min(0.99);
        let q = ProblemParams::new(p.d(), p.s(), p.a(), p.sigma(), p.alpha(), p.alpha_prime(), delta2).unwrap();
        let obs = observation(&p, &z);
        let wide = SelectionRule::one_sided_hat(&p).select(&obs);
        let narrow = SelectionRule::one_sided_hat(&q).select(&obs);
        prop_assert!(narrow.iter().all(|j| wide.contains(j)));
        let wide = SelectionRule::two_sided_hat(&p).select(&obs);
        let narrow = SelectionRule::two_sided_hat(&q).select(&obs);
        prop_assert!(narrow.iter().all(|j| wide.contains(j)));
    }

    #[test]
    fn two_sided_sets_flip_with_the_data(p in params(), z in prop::collection::vec(-2.0f64..2.0, 1..50)) {
        let obs = observation(&p, &z);
        let neg = Observation::new(obs.x().iter().map(|v| -v).collect(), p.sigma()).unwrap();
        for m in [Method::TwoSidedHat, Method::TwoSidedBar] {
            let proc = procedure(m, &p);
            let a = proc.construct(&obs).unwrap();
            let b = proc.construct(&neg).unwrap();
            prop_assert_eq!(a.selected(), b.selected());
            for j in 0..p.d() {
                prop_assert_eq!(a.lower()[j], -b.upper()[j]);
                prop_assert_eq!(a.upper()[j], -b.lower()[j]);
            }
        }
    }

    #[test]
    fn constructions_satisfy_set_invariants(p in params(), z in prop::collection::vec(-2.0f64..2.0, 1..50)) {
        let obs = observation(&p, &z);
        for m in Method::ALL {
            let proc = procedure(m, &p);
            let set = proc.construct(&obs).unwrap();
            prop_assert!(set.check_invariants().is_ok(), "{m}");
            if m.side() == Side::OneSided {
                prop_assert!(set.check_one_sided(obs.x()).is_ok(), "{m}");
            }
            let theta = vec![0.0; p.d()];
            let c = proc.exact_coverage(&theta).unwrap();
            prop_assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn mean_vector_rejects_entries_just_below_a(a in 0.01f64..20.0, rel in 1e-12f64..0.5) {
        let below = a * (1.0 - rel);
        prop_assert!(MeanVector::new(vec![below, 0.0], Side::OneSided, 1, a).is_err());
        prop_assert!(MeanVector::new(vec![-below, 0.0], Side::TwoSided, 1, a).is_err());
        prop_assert!(MeanVector::new(vec![a, 0.0], Side::OneSided, 1, a).is_ok());
        prop_assert!(MeanVector::new(vec![-a, 0.0], Side::TwoSided, 1, a).is_ok());
        prop_assert!(MeanVector::new(vec![-a, 0.0], Side::OneSided, 1, a).is_err());
    }
}
