//! The four subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use billzeta::export::fmt17;
use billzeta::green::{q_generic_recursion, verify_convolution, write_matrix_csv};
use billzeta::oracle::{
    convergence_order_fit, relative_residuals, solve_generalized, z_direct, FitOptions, FitReport,
    GeneralizedProblem, Spectrum,
};
use billzeta::sum_rules::{
    trace_inv_sum_from_sets, trace_one_plus_inv_from_set, z_closed_form, DiagonalMode, RationalOrderSpec,
    SumRuleResult, SumRuleRoute,
};
use billzeta::{DensityPerturbation, GreenCoefficientSet, RootOrder, SigmaCache, SigmaPowerTable};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Format, Plan, Route};

/// Failure classes, mapped to exit codes by `main`.
#[derive(Debug)]
pub enum Failure {
    Validation(Vec<String>),
    Numerical(String),
    Acceptance(String),
    Other(anyhow::Error),
}

impl From<billzeta::Error> for Failure {
    fn from(e: billzeta::Error) -> Self {
        match e {
            e if e.is_numerical() => Failure::Numerical(e.to_string()),
            billzeta::Error::InsufficientData { .. } => Failure::Acceptance(e.to_string()),
            billzeta::Error::Io(io) => Failure::Other(io.into()),
            e => Failure::Validation(vec![e.to_string()]),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Runs `f` over `items`, in parallel unless `deterministic`; results keep input order.
fn map_jobs<T: Sync, R: Send>(
    items: &[T],
    deterministic: bool,
    f: impl Fn(&T) -> Outcome<R> + Sync + Send,
) -> Outcome<Vec<R>> {
    if deterministic {
        items.iter().map(f).collect()
    } else {
        items.par_iter().map(f).collect()
    }
}

fn table(plan: &Plan, max_power: usize) -> Outcome<SigmaPowerTable> {
    let cache = SigmaCache::new(plan.config.resolved_cache_dir());
    let (table, _) = cache.build(&plan.basis, &plan.profile, max_power, &plan.table_options)?;
    Ok(table)
}

fn write_output(path: Option<&Path>, text: &str) -> Outcome<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn json_text<T: Serialize>(value: &T) -> Outcome<String> {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    Ok(text)
}

fn csv_text(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Difference between two routes for the same `(s, λ)`.
#[derive(Debug, Clone, Serialize)]
pub struct PairwiseDifference {
    pub label: String,
    pub s: f64,
    pub lambda: f64,
    pub route_a: SumRuleRoute,
    pub route_b: SumRuleRoute,
    pub z_a: f64,
    pub z_b: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
    /// Sum of the two tail estimates: the size of the disagreement the tails allow.
    pub tail_bound: f64,
}

fn pairwise(results: &[SumRuleResult]) -> Vec<PairwiseDifference> {
    let mut out = Vec::new();
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            if a.label != b.label || a.lambda != b.lambda {
                continue;
            }
            let abs_diff = (a.z_total - b.z_total).abs();
            out.push(PairwiseDifference {
                label: a.label.clone(),
                s: a.s,
                lambda: a.lambda,
                route_a: a.route,
                route_b: b.route,
                z_a: a.z_total,
                z_b: b.z_total,
                abs_diff,
                rel_diff: abs_diff / a.z_total.abs().max(b.z_total.abs()),
                tail_bound: a.tail_estimate + b.tail_estimate,
            });
        }
    }
    out
}

fn routes_for(route: Route, spec: &RationalOrderSpec) -> Vec<SumRuleRoute> {
    let trace = match spec {
        RationalOrderSpec::OnePlusInv { .. } => SumRuleRoute::TraceOnePlusInv,
        RationalOrderSpec::InvSum { .. } => SumRuleRoute::TraceInvSum,
    };
    match route {
        Route::Closed => vec![SumRuleRoute::ClosedForm],
        Route::Trace1 | Route::Trace2 => vec![trace],
        Route::Oracle => vec![SumRuleRoute::Oracle],
        Route::All => vec![SumRuleRoute::ClosedForm, trace, SumRuleRoute::Oracle],
    }
}

fn spec_orders(spec: &RationalOrderSpec) -> Vec<usize> {
    match *spec {
        RationalOrderSpec::OnePlusInv { n } => vec![n.get()],
        RationalOrderSpec::InvSum { n, n_prime } => vec![n.get(), n_prime.get()],
    }
}

const SUMRULE_HEADER: &str = "label,s,lambda,route,diagonal_mode,z0,z1,z2,z_total,resummation_correction,completeness_remainder,tail_estimate,truncation";

fn sumrule_row(r: &SumRuleResult) -> Vec<String> {
    let mode = match r.diagonal_mode {
        DiagonalMode::Truncated => "truncated",
        DiagonalMode::Resummed => "resummed",
    };
    vec![
        r.label.clone(),
        fmt17(r.s),
        fmt17(r.lambda),
        r.route.name().to_string(),
        mode.to_string(),
        fmt17(r.z0),
        fmt17(r.z1),
        fmt17(r.z2),
        fmt17(r.z_total),
        fmt17(r.resummation_correction),
        fmt17(r.completeness_remainder),
        fmt17(r.tail_estimate),
        r.truncation.to_string(),
    ]
}

const PAIRWISE_HEADER: &str = "label,s,lambda,route_a,route_b,z_a,z_b,abs_diff,rel_diff,tail_bound";

fn pairwise_row(p: &PairwiseDifference) -> Vec<String> {
    vec![
        p.label.clone(),
        fmt17(p.s),
        fmt17(p.lambda),
        p.route_a.name().to_string(),
        p.route_b.name().to_string(),
        fmt17(p.z_a),
        fmt17(p.z_b),
        fmt17(p.abs_diff),
        fmt17(p.rel_diff),
        fmt17(p.tail_bound),
    ]
}

/// Sidecar path for the pairwise summary: `out.csv` becomes `out.pairwise.csv`.
pub fn pairwise_path(out: &Path) -> PathBuf {
    out.with_extension("pairwise.csv")
}

pub fn sumrule(plan: &Plan) -> Outcome<()> {
    let cfg = &plan.config;
    let det = cfg.deterministic;
    let table = table(plan, 2)?;
    let basis = &plan.basis;

    let mut jobs = Vec::new();
    for spec in &plan.specs {
        for &lambda in &cfg.lambdas {
            for route in routes_for(cfg.route, spec) {
                jobs.push((spec.clone(), lambda, route));
            }
        }
    }

    let mut orders: Vec<usize> = jobs
        .iter()
        .filter(|j| matches!(j.2, SumRuleRoute::TraceOnePlusInv | SumRuleRoute::TraceInvSum))
        .flat_map(|j| spec_orders(&j.0))
        .collect();
    orders.sort_unstable();
    orders.dedup();
    let sets: Vec<GreenCoefficientSet> = map_jobs(&orders, det, |&n| {
        Ok(q_generic_recursion(RootOrder::new(n)?, 2, &table, basis.eigenvalues())?)
    })?;
    let set_for = |n: usize| &sets[orders.binary_search(&n).expect("coefficient set built")];

    let mut oracle_lambdas: Vec<f64> = jobs.iter().filter(|j| j.2 == SumRuleRoute::Oracle).map(|j| j.1).collect();
    oracle_lambdas.sort_by(f64::total_cmp);
    oracle_lambdas.dedup();
    let spectra: Vec<Vec<f64>> = map_jobs(&oracle_lambdas, det, |&lambda| {
        let problem = GeneralizedProblem::assemble(basis, &table, lambda)?;
        Ok(billzeta::oracle::solve_spectrum(&problem)?)
    })?;

    let results = map_jobs(&jobs, det, |(spec, lambda, route)| {
        let lambda = *lambda;
        let r = match route {
            SumRuleRoute::ClosedForm => z_closed_form(spec, &table, basis, lambda, cfg.diagonal_mode)?,
            SumRuleRoute::TraceOnePlusInv => trace_one_plus_inv_from_set(set_for(spec_orders(spec)[0]), basis, lambda)?,
            SumRuleRoute::TraceInvSum => {
                let o = spec_orders(spec);
                trace_inv_sum_from_sets(set_for(o[0]), set_for(o[1]), basis, lambda)?
            }
            SumRuleRoute::Oracle => {
                let i = oracle_lambdas.iter().position(|l| *l == lambda).expect("spectrum solved");
                let perturbation = DensityPerturbation::new(plan.profile.clone(), lambda);
                let d = z_direct(&spectra[i], spec.s(), basis, &perturbation, cfg.truncation.discard_fraction)?;
                SumRuleResult {
                    label: spec.label(),
                    s: spec.s(),
                    lambda,
                    z0: d.value,
                    z1: 0.0,
                    z2: 0.0,
                    z_total: d.value,
                    diagonal_mode: DiagonalMode::Truncated,
                    resummation_correction: 0.0,
                    completeness_remainder: 0.0,
                    tail_estimate: d.tail_estimate,
                    truncation: d.retained,
                    route: SumRuleRoute::Oracle,
                }
            }
        };
        Ok(r)
    })?;

    let diffs = (cfg.route == Route::All).then(|| pairwise(&results));
    let out = cfg.output.path.as_deref();
    match cfg.output.format {
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                results: &'a [SumRuleResult],
                #[serde(skip_serializing_if = "Option::is_none")]
                pairwise: Option<&'a [PairwiseDifference]>,
            }
            let doc = Doc {
                results: &results,
                pairwise: diffs.as_deref(),
            };
            write_output(out, &json_text(&doc)?)?;
        }
        Format::Csv => {
            write_output(out, &csv_text(SUMRULE_HEADER, results.iter().map(sumrule_row)))?;
            if let Some(diffs) = &diffs {
                let text = csv_text(PAIRWISE_HEADER, diffs.iter().map(pairwise_row));
                match out {
                    Some(p) => write_output(Some(&pairwise_path(p)), &text)?,
                    None => eprint!("{text}"),
                }
            }
        }
    }
    Ok(())
}

/// Convolution residual of one order, as written to the summary.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualRecord {
    pub order: usize,
    pub boundary: usize,
    pub residual: f64,
}

pub fn coeffs(plan: &Plan) -> Outcome<()> {
    let cfg = &plan.config;
    let n = RootOrder::new(cfg.coefficients.root_order)?;
    let max_order = cfg.coefficients.max_order;
    let table = table(plan, max_order)?;
    let set = q_generic_recursion(n, max_order, &table, plan.basis.eigenvalues())?;
    let dir = cfg.output.path.clone().unwrap_or_else(|| PathBuf::from("coeffs"));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let orders: Vec<usize> = (0..=max_order).collect();
    let residuals = map_jobs(&orders, cfg.deterministic, |&k| {
        Ok(ResidualRecord {
            order: k,
            boundary: plan.boundary,
            residual: verify_convolution(&set, k, plan.boundary)?,
        })
    })?;
    for k in 0..=max_order {
        for (name, m) in [("q", set.q(k)), ("Q", set.big_q(k))] {
            let mut buf = Vec::new();
            write_matrix_csv(m, &mut buf)?;
            let path = dir.join(format!("{name}_order_{k}.csv"));
            fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    let (file, text) = match cfg.output.format {
        Format::Csv => (
            "residuals.csv",
            csv_text(
                "order,boundary,residual",
                residuals
                    .iter()
                    .map(|r| vec![r.order.to_string(), r.boundary.to_string(), fmt17(r.residual)]),
            ),
        ),
        Format::Json => ("residuals.json", json_text(&residuals)?),
    };
    write_output(Some(&dir.join(file)), &text)
}

/// Fails with `Acceptance` when a fitted slope is below the threshold.
pub fn verify(plan: &Plan) -> Outcome<()> {
    let cfg = &plan.config;
    let table = table(plan, 2)?;
    let options = FitOptions {
        first_order_only: cfg.verify.first_order_only,
        discard_fraction: cfg.truncation.discard_fraction,
        floor_factor: cfg.verify.floor_factor,
    };
    let reports: Vec<FitReport> = map_jobs(&plan.specs, cfg.deterministic, |spec| {
        Ok(convergence_order_fit(
            spec.s(),
            &spec.label(),
            &plan.basis,
            &plan.profile,
            &table,
            &cfg.lambdas,
            &options,
        )?)
    })?;

    let text = match cfg.output.format {
        Format::Json => json_text(&reports)?,
        Format::Csv => csv_text(
            "label,s,lambda,z_pert,z_oracle,error,floor,used,slope",
            reports.iter().flat_map(|r| {
                r.points.iter().map(move |p| {
                    vec![
                        r.label.clone(),
                        fmt17(r.s),
                        fmt17(p.lambda),
                        fmt17(p.z_pert),
                        fmt17(p.z_oracle),
                        fmt17(p.error),
                        fmt17(p.floor),
                        p.used.to_string(),
                        fmt17(r.slope),
                    ]
                })
            }),
        ),
    };
    write_output(cfg.output.path.as_deref(), &text)?;

    let threshold = cfg.verify.slope_threshold;
    let low: Vec<String> = reports
        .iter()
        .filter(|r| !(r.slope >= threshold))
        .map(|r| format!("{}: slope {:.4}", r.label, r.slope))
        .collect();
    if low.is_empty() {
        Ok(())
    } else {
        Err(Failure::Acceptance(format!(
            "fitted slope below threshold {threshold}: {}",
            low.join("; ")
        )))
    }
}

#[derive(Debug, Clone, Serialize)]
struct SpectrumRecord {
    lambda: f64,
    eigenvalues: Vec<f64>,
    relative_residuals: Vec<f64>,
}

pub fn spectrum(plan: &Plan) -> Outcome<()> {
    let cfg = &plan.config;
    let table = table(plan, 1)?;
    let records = map_jobs(&cfg.lambdas, cfg.deterministic, |&lambda| {
        let problem = GeneralizedProblem::assemble(&plan.basis, &table, lambda)?;
        let spectrum: Spectrum = solve_generalized(&problem)?;
        let residuals = relative_residuals(&problem, &spectrum);
        Ok(SpectrumRecord {
            lambda,
            eigenvalues: spectrum.values,
            relative_residuals: residuals,
        })
    })?;
    let text = match cfg.output.format {
        Format::Json => json_text(&records)?,
        Format::Csv => csv_text(
            "lambda,index,eigenvalue,relative_residual",
            records.iter().flat_map(|r| {
                r.eigenvalues.iter().zip(&r.relative_residuals).enumerate().map(|(i, (e, res))| {
                    vec![fmt17(r.lambda), (i + 1).to_string(), fmt17(*e), fmt17(*res)]
                })
            }),
        ),
    };
    write_output(cfg.output.path.as_deref(), &text)
}
