use std::f64::consts::E;

use nicholson_core::criteria::{
    check_a4, check_k2, compute_stats, equilibrium_bracket, solve_constant_equilibrium,
};
use nicholson_core::experiments::{
    ex43_alpha_gamma, ex43_exact_alpha_gamma, ex43_model, simulate, verify_attractivity,
    LabeledHistory, RunSettings,
};
use nicholson_core::{evaluate, CriteriaOptions, MapSpec, NicholsonModel};
use proptest::prelude::*;

fn history() -> impl Strategy<Value = LabeledHistory> {
    (0.05f64..5.0, 0.0f64..0.9, 0.3f64..6.0).prop_map(|(c0, r, w)| {
        LabeledHistory::parse(&format!("{c0:.6}+{:.6}*cos({w:.6}*t)", c0 * r)).unwrap()
    })
}

/// `(p, a, τ, σ)` rows with positive entries.
fn terms(max_terms: usize) -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((0.2f64..4.0, 0.3f64..2.0, 0.0f64..2.0, 0.0f64..2.0), 1..=max_terms)
}

fn map_spec() -> impl Strategy<Value = MapSpec> {
    (0.1f64..5.0, 0.1f64..4.0, 0.02f64..1.0).prop_map(|(k, a, m)| {
        MapSpec::new(k, a, 1.0 / (1.0 + m / (a * k))).unwrap()
    })
}

proptest! {
    #[test]
    fn tau_bound_is_largest_delay(rows in terms(4)) {
        let m = NicholsonModel::autonomous(1.0, &rows).unwrap();
        let expected = rows.iter().map(|r| r.2.max(r.3)).fold(0.0, f64::max);
        prop_assert_eq!(m.tau_bound(), expected);
    }

    #[test]
    fn equilibrium_lies_in_bracket(delta in 0.1f64..3.0, rows in terms(4)) {
        let p: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let a: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let f = |k: f64| p.iter().zip(&a).map(|(p, a)| p * (-a * k).exp()).sum::<f64>() - delta;
        match solve_constant_equilibrium(delta, &p, &a) {
            None => prop_assert!(p.iter().sum::<f64>() <= delta),
            Some(k) => {
                let (lo, hi) = equilibrium_bracket(delta, &p, &a);
                prop_assert!(f(lo) >= -1e-12 && f(hi) <= 1e-12);
                prop_assert!(lo - 1e-12 <= k && k <= hi + 1e-12);
                prop_assert!(f(k).abs() < 1e-9 * delta.max(1.0));
            }
        }
    }

    #[test]
    fn a4_at_equilibrium_equals_k2(k in 0.01f64..10.0, a in 0.01f64..5.0, zeta in 0.0f64..3.0) {
        let a4 = check_a4(k, k, a, zeta);
        let k2 = check_k2(k, a, zeta);
        prop_assert!((a4.margin - k2.margin).abs() <= 1e-12 * k2.margin.max(1.0));
        prop_assert_eq!(a4.pass, k2.pass);
    }

    #[test]
    fn map_is_decreasing_self_map(spec in map_spec(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let lo = spec.domain_lo();
        let (x, y) = (lo + u * 10.0 * spec.K, lo + v * 10.0 * spec.K);
        let (hx, hy) = (spec.h(x).unwrap(), spec.h(y).unwrap());
        prop_assert!(hx >= lo && hy >= lo);
        if x < y {
            prop_assert!(hx >= hy);
        }
        prop_assert!((spec.h(spec.K).unwrap() - spec.K).abs() <= 1e-12 * spec.K);
        // h(x) − x is decreasing, so K is its only zero
        if (x - spec.K).abs() > 1e-9 * spec.K {
            prop_assert!((hx - x).signum() == (spec.K - x).signum());
        }
    }

    #[test]
    fn slope_at_fixed_point_matches_margin(spec in map_spec()) {
        let numeric = spec.derivative_at_k_numeric();
        prop_assert!((numeric.abs() - spec.margin()).abs() < 1e-6 * spec.margin().max(1.0));
        prop_assert!(numeric < 0.0);
    }

    #[test]
    fn schwarzian_is_constant(spec in map_spec(), u in 0.01f64..10.0) {
        let x = spec.domain_lo() + u * (spec.K + 5.0 / spec.a_plus);
        let s = spec.schwarzian(x).unwrap();
        prop_assert!((s + 0.5 * spec.a_plus * spec.a_plus).abs() < 1e-4, "S = {}", s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_forms_bound_scanned_extrema(eta0 in 0.05f64..1.0, r in 1.1f64..4.0, eta2 in 0.0f64..0.5) {
        let eta1 = eta0 * r;
        let stats = compute_stats(&ex43_model(eta0, eta1, eta2).unwrap()).unwrap();
        let (a, g) = ex43_alpha_gamma(eta0, eta1, eta2);
        let (ae, ge) = ex43_exact_alpha_gamma(eta0, eta1, eta2);
        prop_assert!(a <= stats.alpha + 1e-9 && stats.gamma <= g + 1e-9);
        prop_assert!((stats.alpha - ae).abs() < 1e-6 && (stats.gamma - ge).abs() < 1e-6);
        prop_assert!(stats.D <= 0.3 * eta0 + 1e-12);
        prop_assert!(stats.P <= 0.3 * (eta1 + eta2) + 1e-12);
    }

    #[test]
    fn k2_star_implies_k2(delta in 0.2f64..2.0, rows in terms(3)) {
        let m = NicholsonModel::autonomous(delta, &rows).unwrap();
        let report = evaluate(&m, &CriteriaOptions::default()).unwrap();
        if report.passes("K2*") {
            prop_assert!(report.passes("K2"));
        }
    }

    #[test]
    fn reports_are_deterministic(delta in 0.2f64..2.0, rows in terms(3)) {
        let m = NicholsonModel::autonomous(delta, &rows).unwrap();
        let first = evaluate(&m, &CriteriaOptions::default()).unwrap().to_json();
        prop_assert_eq!(first, evaluate(&m, &CriteriaOptions::default()).unwrap().to_json());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solutions_stay_positive(p in 0.3f64..20.0, tau in 0.0f64..3.0, sigma in 0.0f64..3.0, h in history()) {
        let m = NicholsonModel::autonomous(1.0, &[(p, 1.0, tau, sigma)]).unwrap();
        let run = RunSettings::defaults(&m).with_t_end(60.0);
        let traj = simulate(&m, &h, &run).unwrap();
        prop_assert!(traj.values().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn passing_criterion_means_passing_simulation(
        p in 1.5f64..5.0,
        tau in 0.2f64..1.0,
        sigma in 0.0f64..0.5,
        h1 in history(),
        h2 in history(),
    ) {
        let m = NicholsonModel::autonomous(1.0, &[(p, 1.0, tau, sigma)]).unwrap();
        let report = evaluate(&m, &CriteriaOptions::default()).unwrap();
        prop_assume!(report.passes("K2") && report.verdict("K2").unwrap().margin < 0.8);
        let run = RunSettings::defaults(&m);
        let section = verify_attractivity(&m, Some(&report), &[(h1, h2)], &run, 1e-4).unwrap();
        prop_assert!(section.pass, "{:?}", section.pairs);
        prop_assert!(section.certificate.is_some());
    }
}

#[test]
fn classic_equilibrium_is_log_ratio() {
    let m = NicholsonModel::autonomous(1.0, &[(E, 1.0, 1.0, 0.5)]).unwrap();
    let report = evaluate(&m, &CriteriaOptions::default()).unwrap();
    assert!((report.K.unwrap().K - 1.0).abs() < 1e-10);
}
