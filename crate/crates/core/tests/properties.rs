mod common;

use billzeta::density::DensityProfile;
use billzeta::green::{q_closed_form, q_generic_recursion};
use billzeta::kernels::{delta, eta, xi};
use billzeta::oracle::{solve_spectrum, GeneralizedProblem};
use billzeta::sigma::{build_sigma_table, TableOptions};
use billzeta::sum_rules::{
    kernel_second_order, presplit_kernel, presplit_kernel_literal, z_closed_form, z_via_trace_inv_sum,
    z_via_trace_one_plus_inv, DiagonalMode, RationalOrderSpec,
};
use billzeta::{ModeBasis, RootOrder};
use proptest::prelude::*;

fn eigen() -> impl Strategy<Value = f64> {
    (-2.0f64..6.0).prop_map(|p| 10f64.powf(p))
}

fn cosine_profile() -> impl Strategy<Value = DensityProfile> {
    prop::collection::vec(-0.3f64..0.3, 1..5).prop_map(|c| DensityProfile::FourierCosine { coefficients: c })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn delta_times_eta_is_the_inverse_sum(n in 1usize..=8, en in eigen(), em in eigen()) {
        let order = RootOrder::new(n).unwrap();
        let lhs = delta(order, en, em).unwrap() * eta(order, en, em).unwrap();
        let rhs = 1.0 / en + 1.0 / em;
        prop_assert!((lhs - rhs).abs() <= 1e-13 * rhs);
    }

    #[test]
    fn kernels_are_symmetric(n in 1usize..=8, en in eigen(), er in eigen(), em in eigen()) {
        let order = RootOrder::new(n).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * a.abs().max(b.abs());
        prop_assert!(close(eta(order, en, em).unwrap(), eta(order, em, en).unwrap()));
        prop_assert!(close(delta(order, en, em).unwrap(), delta(order, em, en).unwrap()));
        prop_assert!(close(xi(order, en, er, em).unwrap(), xi(order, em, er, en).unwrap()));
    }

    #[test]
    fn kernel_rows_for_small_orders(n in 1usize..=4, en in eigen(), er in eigen(), em in eigen()) {
        let order = RootOrder::new(n).unwrap();
        let (d, e, x) = common::table_rows(n, en, er, em);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-13 * a.abs().max(b.abs());
        prop_assert!(close(delta(order, en, em).unwrap(), d));
        prop_assert!(close(eta(order, en, em).unwrap(), e));
        prop_assert!(x == 0.0 && xi(order, en, er, em).unwrap() == 0.0 || close(xi(order, en, er, em).unwrap(), x));
    }

    #[test]
    fn second_order_kernel_is_exactly_symmetric(en in eigen(), em in eigen(), s in 0.55f64..3.0) {
        prop_assert_eq!(kernel_second_order(en, em, s), kernel_second_order(em, en, s));
        prop_assert_eq!(kernel_second_order(en, em, 1.0), 0.0);
    }

    #[test]
    fn presplit_forms_agree_away_from_the_diagonal(en in 1.0f64..100.0, ratio in 1.5f64..50.0, s in 0.55f64..3.0) {
        let em = en * ratio;
        let a = presplit_kernel_literal(en, em, s);
        let b = presplit_kernel(en, em, s);
        prop_assert!((a - b).abs() <= 1e-12 * en.powf(-s));
    }

    #[test]
    fn sigma_tables_are_symmetric(profile in cosine_profile(), size in 2usize..30) {
        let basis = ModeBasis::string(1.0, size).unwrap();
        let table = build_sigma_table(&basis, &profile, 3, &TableOptions::default()).unwrap();
        prop_assert_eq!(table.power(0).unwrap(), &nalgebra::DMatrix::identity(size, size));
        for j in 1..=3 {
            let m = table.power(j).unwrap();
            prop_assert_eq!(m, &m.transpose());
        }
    }

    #[test]
    fn recursion_equals_closed_form(seed in 0u64..1000, n in 2usize..=6) {
        let (ev, table) = common::random_system(7, 2, seed);
        let order = RootOrder::new(n).unwrap();
        let set = q_generic_recursion(order, 2, &table, &ev).unwrap();
        let closed = q_closed_form(order, 2, &table, &ev).unwrap();
        prop_assert!(common::rel_diff(set.q(2), &closed) <= 1e-11);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trace_routes_follow_the_closed_form(profile in cosine_profile(), n in 2usize..=5, lambda in 0.01f64..0.2) {
        let basis = ModeBasis::string(1.0, 40).unwrap();
        let table = build_sigma_table(&basis, &profile, 2, &TableOptions::default()).unwrap();
        prop_assume!(table.check_lambda(lambda).is_ok());
        let spec = RationalOrderSpec::one_plus_inv(n).unwrap();
        let closed = z_closed_form(&spec, &table, &basis, lambda, DiagonalMode::Truncated).unwrap();
        let trace = z_via_trace_one_plus_inv(RootOrder::new(n).unwrap(), &table, &basis, lambda).unwrap();
        prop_assert!((closed.z_total - trace.z_total).abs() <= 1e-11 * closed.z_total.abs());

        let spec = RationalOrderSpec::inv_sum(2, n).unwrap();
        let closed = z_closed_form(&spec, &table, &basis, lambda, DiagonalMode::Truncated).unwrap();
        let trace = z_via_trace_inv_sum(RootOrder::new(2).unwrap(), RootOrder::new(n).unwrap(), &table, &basis, lambda)
            .unwrap();
        prop_assert!((closed.z_total - trace.z_total).abs() <= 1e-11 * closed.z_total.abs());
    }

    #[test]
    fn added_mass_lowers_every_eigenvalue(c0 in 0.05f64..0.5, c2 in -0.05f64..0.05, lambda in 0.01f64..0.5) {
        // c0 + c2 cos(2πx) ≥ 0 since |c2| < c0
        let profile = DensityProfile::FourierCosine { coefficients: vec![c0, 0.0, c2] };
        let basis = ModeBasis::string(1.0, 30).unwrap();
        let table = build_sigma_table(&basis, &profile, 2, &TableOptions::default()).unwrap();
        prop_assume!(table.check_lambda(lambda).is_ok());
        let e = solve_spectrum(&GeneralizedProblem::assemble(&basis, &table, lambda).unwrap()).unwrap();
        for (a, b) in e.iter().zip(basis.eigenvalues()) {
            prop_assert!(*a > 0.0 && *a < *b);
        }
    }

    #[test]
    fn rectangle_modes_sorted_with_lexicographic_ties(a in 0.5f64..2.0, b in 0.5f64..2.0, m in 1usize..200) {
        let basis = ModeBasis::rectangle(a, b, m).unwrap();
        let ev = basis.eigenvalues();
        let pair = |i: usize| match basis.mode(i + 1).unwrap() {
            billzeta::ModeIndex::Plane(j, k) => (j, k),
            billzeta::ModeIndex::Line(_) => unreachable!(),
        };
        for i in 1..m {
            prop_assert!(ev[i - 1] <= ev[i]);
            if ev[i - 1] == ev[i] {
                prop_assert!(pair(i - 1) < pair(i));
            }
        }
    }
}
