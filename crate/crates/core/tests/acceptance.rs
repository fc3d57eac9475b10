//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use std::time::{Duration, Instant};

use billzeta::density::{DensityPerturbation, DensityProfile, Profile1d};
use billzeta::green::{q_closed_form, q_generic_recursion, verify_convolution};
use billzeta::kernels::{delta, eta, xi};
use billzeta::numeric::least_squares_slope;
use billzeta::oracle::{
    convergence_order_fit, relative_residuals, solve_generalized, solve_spectrum, z_direct, FitOptions,
    GeneralizedProblem, DEFAULT_DISCARD_FRACTION,
};
use billzeta::sigma::{build_sigma_table, TableOptions};
use billzeta::sum_rules::{
    presplit_kernel, presplit_kernel_literal, z_closed_form, z_via_trace_inv_sum,
    z_via_trace_one_plus_inv, DiagonalMode, RationalOrderSpec,
};
use billzeta::{ModeBasis, RootOrder, SigmaPowerTable};
use common::{display_q3, display_recursive, random_system, rel_diff, ZETA3};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

struct Outcome {
    pass: bool,
    detail: String,
}

fn order(n: usize) -> RootOrder {
    RootOrder::new(n).unwrap()
}

fn string_table(size: usize, profile: &DensityProfile, max_power: usize) -> (ModeBasis, SigmaPowerTable) {
    let basis = ModeBasis::string(1.0, size).unwrap();
    let table = build_sigma_table(&basis, profile, max_power, &TableOptions::default()).unwrap();
    (basis, table)
}

fn separable_cos2() -> DensityProfile {
    let c = Profile1d::FourierCosine {
        coefficients: vec![0.0, 0.0, 1.0],
    };
    DensityProfile::product(c.clone(), c)
}

fn kernel_identities() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
    let mut eps = || 10f64.powf(rng.random_range(-2.0..6.0));
    let mut worst = 0.0_f64;
    for i in 0..10_000 {
        let n = 1 + i % 8;
        let (en, em) = (eps(), eps());
        let lhs = delta(order(n), en, em).unwrap() * eta(order(n), en, em).unwrap();
        let rhs = 1.0 / en + 1.0 / em;
        worst = worst.max((lhs - rhs).abs() / rhs);
    }
    let mut rows = 0.0_f64;
    for i in 0..100 {
        let n = 1 + i % 4;
        let (en, er, em) = (eps(), eps(), eps());
        let (d, e, x) = common::table_rows(n, en, er, em);
        let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
        rows = rows
            .max(rel(delta(order(n), en, em).unwrap(), d))
            .max(rel(eta(order(n), en, em).unwrap(), e))
            .max(rel(xi(order(n), en, er, em).unwrap(), x));
    }
    Outcome {
        pass: worst <= 1e-13 && rows <= 1e-13,
        detail: format!(
            "max rel |Δη - (1/εn + 1/εm)| = {worst:.2e} over 1e4 samples, table rows N=1..4 max rel {rows:.2e} (tol 1e-13)"
        ),
    }
}

fn recursion_equivalence() -> Outcome {
    let mut closed = 0.0_f64;
    let mut displays = 0.0_f64;
    let mut recursive = 0.0_f64;
    for seed in 0..3 {
        let (ev, table) = random_system(8, 8, 100 + seed);
        for n in 2..=5 {
            let set = q_generic_recursion(order(n), 2, &table, &ev).unwrap();
            for k in 1..=2 {
                closed = closed.max(rel_diff(set.q(k), &q_closed_form(order(n), k, &table, &ev).unwrap()));
            }
        }
        let s: Vec<&DMatrix<f64>> = (0..=8).map(|j| table.power(j).unwrap()).collect();
        let set = q_generic_recursion(order(2), 8, &table, &ev).unwrap();
        displays = displays
            .max(rel_diff(set.q(1), &q_closed_form(order(2), 1, &table, &ev).unwrap()))
            .max(rel_diff(set.q(2), &common::display_q2(&ev, &s)))
            .max(rel_diff(set.q(3), &display_q3(&ev, &s, false)));
        let q: Vec<_> = (0..=8).map(|k| set.q(k).clone()).collect();
        for k in 4..=8 {
            recursive = recursive.max(rel_diff(set.q(k), &display_recursive(k, &ev, &s, &q)));
        }
    }
    Outcome {
        pass: closed <= 1e-11 && displays <= 1e-11 && recursive <= 1e-10,
        detail: format!(
            "general-N k<=2 {closed:.2e}, N=2 k<=3 displays {displays:.2e} (tol 1e-11); N=2 k=4..8 recursive displays {recursive:.2e} (tol 1e-10)"
        ),
    }
}

fn convolution_identity() -> Outcome {
    let sizes = [20, 40, 80];
    let (basis, table) = string_table(160, &DensityProfile::cosine_mode(2), 2);
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [2, 3] {
        let reference = q_generic_recursion(order(n), 2, &table, basis.eigenvalues()).unwrap();
        for k in 0..=2 {
            let mut r = Vec::new();
            let mut floors = Vec::new();
            for &m in &sizes {
                let set = reference.truncated(m).unwrap();
                r.push(verify_convolution(&set, k, m / 4).unwrap());
                floors.push(64.0 * f64::EPSILON * set.big_q(k).amax());
            }
            let ok = (1..r.len()).all(|i| r[i] <= r[i - 1] || r[i] <= floors[i]);
            pass &= ok;
            parts.push(format!("N={n} k={k} [{:.1e} {:.1e} {:.1e}]", r[0], r[1], r[2]));
        }
    }
    Outcome {
        pass,
        detail: format!(
            "inner-block residuals at M=20,40,80 (b=M/4), nonincreasing or at rounding floor 64·eps·max|Q|: {}",
            parts.join(", ")
        ),
    }
}

fn homogeneous_anchors() -> Outcome {
    let (basis, table) = string_table(2000, &DensityProfile::zero(), 2);
    let z = |spec: &str| {
        z_closed_form(&RationalOrderSpec::parse(spec).unwrap(), &table, &basis, 0.0, DiagonalMode::Truncated).unwrap()
    };
    let a = z("3/2");
    let b = z("1");
    let ea = (a.z_total - ZETA3 / PI.powi(3)).abs();
    let eb = (b.z_total - 1.0 / 6.0).abs();
    Outcome {
        pass: ea <= 2.0 * a.tail_estimate && eb <= 2.0 * b.tail_estimate,
        detail: format!(
            "Z(3/2) err {ea:.2e} (2·tail {:.2e}), Z(1) err {eb:.2e} (2·tail {:.2e}) at M=2000",
            2.0 * a.tail_estimate,
            2.0 * b.tail_estimate
        ),
    }
}

fn route_agreement() -> Outcome {
    let (basis, table) = string_table(200, &DensityProfile::cosine_mode(2), 2);
    let lambda = 0.1;
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for n in [2, 3, 4] {
        let spec = RationalOrderSpec::one_plus_inv(n).unwrap();
        let c = z_closed_form(&spec, &table, &basis, lambda, DiagonalMode::Truncated).unwrap();
        let t = z_via_trace_one_plus_inv(order(n), &table, &basis, lambda).unwrap();
        let d = (c.z_total - t.z_total).abs() / c.z_total.abs();
        worst = worst.max(d);
        parts.push(format!("{} {d:.1e}", spec.label()));
    }
    for (n, np) in [(2, 2), (2, 3), (2, 4)] {
        let spec = RationalOrderSpec::inv_sum(n, np).unwrap();
        let c = z_closed_form(&spec, &table, &basis, lambda, DiagonalMode::Truncated).unwrap();
        let t = z_via_trace_inv_sum(order(n), order(np), &table, &basis, lambda).unwrap();
        let d = (c.z_total - t.z_total).abs() / c.z_total.abs();
        worst = worst.max(d);
        parts.push(format!("{} {d:.1e}", spec.label()));
    }
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("closed vs trace, rel diff (tol 1e-8): {}", parts.join(", ")),
    }
}

fn main_order_fit() -> Outcome {
    let profile = DensityProfile::cosine_mode(2);
    let (basis, table) = string_table(400, &profile, 2);
    let lambdas = [0.02, 0.04, 0.08, 0.16];
    let full = convergence_order_fit(1.5, "1+1/2", &basis, &profile, &table, &lambdas, &FitOptions::default());
    let first = convergence_order_fit(
        1.5,
        "1+1/2",
        &basis,
        &profile,
        &table,
        &lambdas,
        &FitOptions {
            first_order_only: true,
            ..FitOptions::default()
        },
    );
    match (full, first) {
        (Ok(full), Ok(first)) => {
            let errors: Vec<String> = full.points.iter().map(|p| format!("{:.2e}", p.error)).collect();
            Outcome {
                pass: full.slope >= 2.7 && (1.8..=2.2).contains(&first.slope),
                detail: format!(
                    "slope {:.3} (>= 2.7), errors [{}]; first-order-only slope {:.3} (in [1.8, 2.2])",
                    full.slope,
                    errors.join(" "),
                    first.slope
                ),
            }
        }
        (a, b) => Outcome {
            pass: false,
            detail: format!("fit failed: {:?} / {:?}", a.err(), b.err()),
        },
    }
}

fn near_threshold_2d() -> Outcome {
    let profile = separable_cos2();
    let basis = ModeBasis::rectangle(1.0, 1.0, 900).unwrap();
    let table = build_sigma_table(&basis, &profile, 2, &TableOptions::default()).unwrap();
    let lambda = 0.05;
    let spec = RationalOrderSpec::one_plus_inv(8).unwrap();
    let pert = z_closed_form(&spec, &table, &basis, lambda, DiagonalMode::Truncated).unwrap();
    let problem = GeneralizedProblem::assemble(&basis, &table, lambda).unwrap();
    let values = solve_spectrum(&problem).unwrap();
    let direct = z_direct(
        &values,
        spec.s(),
        &basis,
        &DensityPerturbation::new(profile, lambda),
        DEFAULT_DISCARD_FRACTION,
    )
    .unwrap();
    let rel = (pert.z_total - direct.value).abs() / direct.value.abs();
    let tol = 1e-3_f64.max(5.0 * lambda.powi(3));
    Outcome {
        pass: rel <= tol,
        detail: format!(
            "s=1.125, λ=0.05, M=900: Z_pert {:.10} vs Z_oracle {:.10}, rel diff {rel:.2e} (tol {tol:.1e})",
            pert.z_total, direct.value
        ),
    }
}

fn kernel_regularity() -> Outcome {
    let hs: Vec<f64> = (3..=8).map(|k| 10f64.powi(-k)).collect();
    let mut pass = true;
    let mut slopes = Vec::new();
    let mut literal_gap = 0.0_f64;
    for s in [0.75, 1.5, 3.0] {
        for en in [1.0, 37.0] {
            let limit = 2.0 * (2.0 * s - 1.0) * f64::powf(en, -s);
            let errs: Vec<f64> = hs
                .iter()
                .map(|h| (presplit_kernel(en, en * (1.0 + h), s) - limit).abs() / limit)
                .collect();
            let ratios: Vec<f64> = errs.iter().zip(&hs).map(|(e, h)| e / h).collect();
            let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::MAX, f64::min);
            let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
            let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
            let slope = least_squares_slope(&x, &y);
            pass &= (0.9..=1.1).contains(&slope) && spread <= 1.5;
            slopes.push(slope);
            for h in [1e-3, 1e-5] {
                let a = presplit_kernel(en, en * (1.0 + h), s);
                let b = presplit_kernel_literal(en, en * (1.0 + h), s);
                literal_gap = literal_gap.max((a - b).abs() / a.abs());
            }
        }
    }
    pass &= literal_gap <= 1e-9;
    let (lo, hi) = slopes.iter().fold((f64::MAX, f64::MIN), |(l, h), s| (l.min(*s), h.max(*s)));
    Outcome {
        pass,
        detail: format!(
            "error vs 2(2s-1)ε^-s over h=1e-3..1e-8: log-log slopes in [{lo:.4}, {hi:.4}] (need [0.9, 1.1]); literal quotient agrees to {literal_gap:.1e} at h>=1e-5"
        ),
    }
}

fn oracle_soundness() -> Outcome {
    let mut residual = 0.0_f64;
    let mut monotone_violation = 0.0_f64;
    let mut exact = 0.0_f64;
    let line = DensityProfile::cosine_mode(2);
    let plane = separable_cos2();
    for (two_d, lambda) in [(false, 0.1), (true, 0.05)] {
        let make = |m: usize| {
            let basis = if two_d {
                ModeBasis::rectangle(1.0, 1.0, m).unwrap()
            } else {
                ModeBasis::string(1.0, m).unwrap()
            };
            let profile = if two_d { &plane } else { &line };
            let table = build_sigma_table(&basis, profile, 1, &TableOptions::default()).unwrap();
            (basis, table)
        };
        let mut previous: Option<Vec<f64>> = None;
        for m in [50, 100, 200] {
            let (basis, table) = make(m);
            let problem = GeneralizedProblem::assemble(&basis, &table, lambda).unwrap();
            let spectrum = solve_generalized(&problem).unwrap();
            residual = relative_residuals(&problem, &spectrum).into_iter().fold(residual, f64::max);
            if let Some(prev) = &previous {
                for (a, b) in spectrum.values.iter().zip(prev) {
                    monotone_violation = monotone_violation.max((a - b) / b);
                }
            }
            previous = Some(spectrum.values.clone());

            let zero = GeneralizedProblem::assemble(&basis, &table, 0.0).unwrap();
            for (e, eps) in solve_spectrum(&zero).unwrap().iter().zip(basis.eigenvalues()) {
                exact = exact.max((e - eps).abs() / eps);
            }
        }
    }
    Outcome {
        pass: residual <= 1e-10 && monotone_violation <= 1e-12 && exact <= 1e-12,
        detail: format!(
            "max residual {residual:.2e} (tol 1e-10); max E_n(M') - E_n(M) over M=50,100,200 {monotone_violation:.1e} relative (need <= 1e-12); σ=0 spectrum rel err {exact:.2e} (tol 1e-12)"
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("kernel identities", kernel_identities, Duration::from_secs(1)),
        ("recursion equivalence", recursion_equivalence, Duration::from_secs(10)),
        ("convolution identity", convolution_identity, Duration::from_secs(30)),
        ("homogeneous anchors", homogeneous_anchors, Duration::from_secs(5)),
        ("route agreement", route_agreement, Duration::from_secs(60)),
        ("O(λ³) validation", main_order_fit, Duration::from_secs(120)),
        ("2D near threshold", near_threshold_2d, Duration::from_secs(300)),
        ("kernel regularity", kernel_regularity, Duration::from_secs(1)),
        ("oracle soundness", oracle_soundness, Duration::from_secs(30)),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed <= *budget;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {} [{}] {name}: {}; {:.2} s (budget {} s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria passed");
}
