//! Second-order sum rules `Z(s) = Σ E_n^{-s}` for rational `s`.
//!
//! Three routes are provided: the closed form in the homogeneous basis, the
//! trace `tr(Q q^{[1/N]})` for `s = 1 + 1/N`, and the trace
//! `tr(q^{[1/N]} q^{[1/N']})` for `s = 1/N + 1/N'`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, ModeBasis};
use crate::error::{Error, Result};
use crate::green::{q_generic_recursion, GreenCoefficientSet};
use crate::kernels::RootOrder;
use crate::numeric::{pairwise_sum_by, trace_of_product, NeumaierSum};
use crate::sigma::SigmaPowerTable;

/// Decomposition of a rational order into Green's function orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum RationalOrderSpec {
    /// `s = 1 + 1/N`.
    OnePlusInv { n: RootOrder },
    /// `s = 1/N + 1/N'`, stored with `N <= N'`.
    InvSum { n: RootOrder, n_prime: RootOrder },
}

impl RationalOrderSpec {
    pub fn one_plus_inv(n: usize) -> Result<Self> {
        let n = checked_order(n)?;
        Ok(Self::OnePlusInv { n })
    }

    pub fn inv_sum(n: usize, n_prime: usize) -> Result<Self> {
        let (a, b) = (n.min(n_prime), n.max(n_prime));
        Ok(Self::InvSum {
            n: checked_order(a)?,
            n_prime: checked_order(b)?,
        })
    }

    pub fn s(&self) -> f64 {
        match *self {
            Self::OnePlusInv { n } => 1.0 + 1.0 / n.get() as f64,
            Self::InvSum { n, n_prime } => 1.0 / n.get() as f64 + 1.0 / n_prime.get() as f64,
        }
    }

    /// Pair form such as `1+1/4` or `1/2+1/3`.
    pub fn label(&self) -> String {
        match *self {
            Self::OnePlusInv { n } => format!("1+1/{}", n.get()),
            Self::InvSum { n, n_prime } => format!("1/{}+1/{}", n.get(), n_prime.get()),
        }
    }

    /// Parses `1+1/N`, `1/N+1/M`, a fraction `p/q`, an integer, or a decimal.
    ///
    /// Plain values are decomposed as `1 + 1/N` when above one, otherwise as
    /// `1/N + 1/N'` with the smallest `N`.
    pub fn parse(text: &str) -> Result<Self> {
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::InvalidArgument(format!("cannot read a rational order from {text:?}"));
        if let Some((lhs, rhs)) = t.split_once('+') {
            let l = parse_unit_fraction(lhs).ok_or_else(bad)?;
            let r = parse_unit_fraction(rhs).ok_or_else(bad)?;
            return match (l, r) {
                (1, n) | (n, 1) if n > 1 => Self::one_plus_inv(n),
                (a, b) if a > 1 && b > 1 => Self::inv_sum(a, b),
                _ => Err(bad()),
            };
        }
        let value = match t.split_once('/') {
            Some((p, q)) => {
                let p: u64 = p.parse().map_err(|_| bad())?;
                let q: u64 = q.parse().map_err(|_| bad())?;
                if q == 0 {
                    return Err(bad());
                }
                // Exact integer search keeps e.g. 5/6 from floating-point drift.
                return Self::from_fraction(p, q).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "{text} is neither 1+1/N nor 1/N+1/N' with N, N' in 2..=64"
                    ))
                });
            }
            None => t.parse::<f64>().map_err(|_| bad())?,
        };
        Self::from_value(value).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{text} is neither 1+1/N nor 1/N+1/N' with N, N' in 2..=64"
            ))
        })
    }

    fn from_fraction(p: u64, q: u64) -> Option<Self> {
        let max = crate::kernels::MAX_ROOT_ORDER as u64;
        // p/q = 1 + 1/N  <=>  N (p - q) = q
        if p > q && q % (p - q) == 0 {
            let n = q / (p - q);
            if (2..=max).contains(&n) {
                return Self::one_plus_inv(n as usize).ok();
            }
        }
        // p/q = 1/a + 1/b  <=>  q (a + b) = p a b
        for a in 2..=max {
            for b in a..=max {
                if q * (a + b) == p * a * b {
                    return Self::inv_sum(a as usize, b as usize).ok();
                }
            }
        }
        None
    }

    fn from_value(v: f64) -> Option<Self> {
        let max = crate::kernels::MAX_ROOT_ORDER;
        let close = |x: f64| (x - v).abs() <= 1e-12 * v.abs().max(1.0);
        if v > 1.0 {
            let n = (1.0 / (v - 1.0)).round();
            if n >= 2.0 && n <= max as f64 && close(1.0 + 1.0 / n) {
                return Self::one_plus_inv(n as usize).ok();
            }
        }
        for a in 2..=max {
            for b in a..=max {
                if close(1.0 / a as f64 + 1.0 / b as f64) {
                    return Self::inv_sum(a, b).ok();
                }
            }
        }
        None
    }

    /// Rejects orders whose sum diverges in the basis dimension.
    pub fn validate_for(&self, dimension: usize) -> Result<()> {
        check_convergent(self.s(), dimension)
    }
}

impl fmt::Display for RationalOrderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn checked_order(n: usize) -> Result<RootOrder> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "root orders in a rational decomposition must be at least 2, got {n}"
        )));
    }
    RootOrder::new(n)
}

fn parse_unit_fraction(t: &str) -> Option<usize> {
    if t == "1" {
        return Some(1);
    }
    let d = t.strip_prefix("1/")?;
    d.parse().ok().filter(|n| *n >= 2)
}

/// Smallest convergent order: `s > d/2`.
pub fn divergence_threshold(dimension: usize) -> f64 {
    dimension as f64 / 2.0
}

pub fn check_convergent(s: f64, dimension: usize) -> Result<()> {
    let threshold = divergence_threshold(dimension);
    if s.is_finite() && s > threshold {
        Ok(())
    } else {
        Err(Error::DivergentOrder { s, dimension, threshold })
    }
}

/// Treatment of the diagonal series `1 + λsσ_nn + λ²s(s-1)σ_nn²/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalMode {
    #[default]
    Truncated,
    /// Replaced by `(1 + λσ_nn)^s`; the difference is reported separately.
    Resummed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumRuleRoute {
    ClosedForm,
    TraceOnePlusInv,
    TraceInvSum,
    Oracle,
}

impl SumRuleRoute {
    pub fn name(self) -> &'static str {
        match self {
            Self::ClosedForm => "closed_form",
            Self::TraceOnePlusInv => "trace_one_plus_inv",
            Self::TraceInvSum => "trace_inv_sum",
            Self::Oracle => "oracle",
        }
    }
}

/// One evaluation of `Z(s)` at one `λ`.
///
/// `z0` includes `tail_estimate`. For the oracle route the whole value sits in
/// `z0` and the corrections are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRuleResult {
    pub label: String,
    pub s: f64,
    pub lambda: f64,
    pub z0: f64,
    pub z1: f64,
    pub z2: f64,
    pub z_total: f64,
    pub diagonal_mode: DiagonalMode,
    /// `Σ ε^{-s}[(1+λσ_nn)^s - (1 + λsσ_nn + λ²s(s-1)σ_nn²/2)]`, zero when truncated.
    pub resummation_correction: f64,
    /// Part of `z2` from the truncated completeness sum (closed form only).
    pub completeness_remainder: f64,
    pub tail_estimate: f64,
    pub truncation: usize,
    pub route: SumRuleRoute,
}

/// `K(εn, εm; s) = (εn^{1-s} - εm^{1-s}) / (εm - εn)`, with limit `(s-1) ε^{-s}`.
///
/// Evaluated as `-εlo^{-s} expm1((1-s)t) / expm1(t)` with `t = ln(εhi/εlo)`,
/// which is symmetric by construction.
pub fn kernel_second_order(en: f64, em: f64, s: f64) -> f64 {
    let (lo, hi) = if en <= em { (en, em) } else { (em, en) };
    if hi - lo < KERNEL_RTOL * lo {
        return (s - 1.0) * lo.powf(-s);
    }
    let t = (hi / lo).ln();
    -lo.powf(-s) * ((1.0 - s) * t).exp_m1() / t.exp_m1()
}

/// Relative eigenvalue gap below which kernels use their diagonal limits.
pub const KERNEL_RTOL: f64 = 1e-12;

/// Kernel before the completeness split,
/// `((εm + 3εn) εn^{-s} - (3εm + εn) εm^{-s}) / (εm - εn)`, limit `2(2s-1) ε^{-s}`.
///
/// Evaluated as `εn^{-s} + εm^{-s} + 4K`, which is free of the cancellation
/// the quotient suffers for `εm → εn`.
pub fn presplit_kernel(en: f64, em: f64, s: f64) -> f64 {
    en.powf(-s) + em.powf(-s) + 4.0 * kernel_second_order(en, em, s)
}

/// The quotient exactly as written, with the limit substituted at `εm = εn`.
/// Loses about `eps / |εm/εn - 1|` relative accuracy near the diagonal.
pub fn presplit_kernel_literal(en: f64, em: f64, s: f64) -> f64 {
    if (em - en).abs() < KERNEL_RTOL * en {
        return 2.0 * (2.0 * s - 1.0) * en.powf(-s);
    }
    ((em + 3.0 * en) * en.powf(-s) - (3.0 * em + en) * em.powf(-s)) / (em - en)
}

/// Weyl-law estimate of `Σ_{n>M} E_n^{-s}` for the homogeneous problem.
pub fn tail_estimate(basis: &ModeBasis, s: f64) -> Result<f64> {
    let kind = basis.kind();
    weyl_tail(kind, kind.measure(), kind.boundary_measure(), s, basis.mode_count())
}

/// Tail beyond `retained` modes for a problem with effective length (1D) or
/// area and perimeter (2D).
///
/// 1D: `N(E) = ℓ√E/π - 1/2`. 2D: `N(E) = AE/4π - P√E/4π + 1/4`. The
/// cutoff `E*` solves `N(E*) = retained`, and the tail is `∫_{E*}^∞ E^{-s} dN`.
pub fn weyl_tail(kind: &BasisKind, measure: f64, boundary: f64, s: f64, retained: usize) -> Result<f64> {
    check_convergent(s, kind.dimension())?;
    let m = retained as f64;
    let tail = match kind {
        BasisKind::String1d { .. } => {
            let k = std::f64::consts::PI / measure;
            k.powf(-2.0 * s) * (m + 0.5).powf(1.0 - 2.0 * s) / (2.0 * s - 1.0)
        }
        BasisKind::Rectangle2d { .. } => {
            let four_pi = 4.0 * std::f64::consts::PI;
            let (a, p) = (measure / four_pi, boundary / four_pi);
            // a x² - p x + 1/4 - M = 0 with x = √E*
            let x = (p + (p * p + 4.0 * a * (m - 0.25).max(0.0)).sqrt()) / (2.0 * a);
            let e = x * x;
            a * e.powf(1.0 - s) / (s - 1.0) - 0.5 * p * e.powf(0.5 - s) / (s - 0.5)
        }
    };
    Ok(tail.max(0.0))
}

fn check_inputs(table: &SigmaPowerTable, basis: &ModeBasis, lambda: f64, max_power: usize) -> Result<()> {
    if table.size() != basis.mode_count() {
        return Err(Error::DimensionMismatch(format!(
            "table has {} modes, basis has {}",
            table.size(),
            basis.mode_count()
        )));
    }
    if table.max_power() < max_power {
        return Err(Error::OrderTooHigh {
            requested: max_power,
            available: table.max_power(),
        });
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
    }
    table.check_lambda(lambda)
}

/// Closed form at the order described by `spec`.
pub fn z_closed_form(
    spec: &RationalOrderSpec,
    table: &SigmaPowerTable,
    basis: &ModeBasis,
    lambda: f64,
    mode: DiagonalMode,
) -> Result<SumRuleResult> {
    spec.validate_for(basis.dimension())?;
    closed_form_at(spec.s(), &spec.label(), table, basis, lambda, mode)
}

/// Closed form at an arbitrary convergent `s`.
///
/// The second order is the completeness-split double sum plus the remainder
/// `-(λ²/4) s Σ_n ε_n^{-s} [(σ²)_nn - Σ_{m≤M} σ_nm²]`, which vanishes as
/// `M → ∞` and makes the finite-`M` value agree with the trace routes.
pub fn closed_form_at(
    s: f64,
    label: &str,
    table: &SigmaPowerTable,
    basis: &ModeBasis,
    lambda: f64,
    mode: DiagonalMode,
) -> Result<SumRuleResult> {
    check_convergent(s, basis.dimension())?;
    check_inputs(table, basis, lambda, 2)?;
    let ev = basis.eigenvalues();
    let size = ev.len();
    let w: Vec<f64> = ev.iter().map(|e| e.powf(-s)).collect();
    let s1 = table.power(1)?;
    let s2 = table.power(2)?;

    let tail = tail_estimate(basis, s)?;
    let z0 = pairwise_sum_by(size, &|n| w[n]) + tail;
    let z1 = lambda * s * pairwise_sum_by(size, &|n| s1[(n, n)] * w[n]);

    let mut split_rows = vec![0.0; size];
    let mut remainder_rows = vec![0.0; size];
    for n in 0..size {
        let mut split = NeumaierSum::new();
        let mut row_sq = NeumaierSum::new();
        for m in 0..size {
            let v = s1[(n, m)];
            if v == 0.0 {
                continue;
            }
            split.add(kernel_second_order(ev[n], ev[m], s) * v * v);
            row_sq.add(v * v);
        }
        split_rows[n] = split.value();
        remainder_rows[n] = w[n] * (s2[(n, n)] - row_sq.value());
    }
    let l2 = lambda * lambda;
    let split = 0.5 * l2 * s * pairwise_sum_by(size, &|n| split_rows[n]);
    let remainder = -0.25 * l2 * s * pairwise_sum_by(size, &|n| remainder_rows[n]);
    let z2 = split + remainder;

    let correction = match mode {
        DiagonalMode::Truncated => 0.0,
        DiagonalMode::Resummed => pairwise_sum_by(size, &|n| {
            let x = lambda * s1[(n, n)];
            w[n] * ((1.0 + x).powf(s) - 1.0 - s * x - 0.5 * s * (s - 1.0) * x * x)
        }),
    };

    Ok(SumRuleResult {
        label: label.to_string(),
        s,
        lambda,
        z0,
        z1,
        z2,
        z_total: z0 + z1 + z2 + correction,
        diagonal_mode: mode,
        resummation_correction: correction,
        completeness_remainder: remainder,
        tail_estimate: tail,
        truncation: size,
        route: SumRuleRoute::ClosedForm,
    })
}

fn trace_result(
    label: String,
    s: f64,
    lambda: f64,
    traces: [f64; 3],
    tail: f64,
    size: usize,
    route: SumRuleRoute,
) -> SumRuleResult {
    let z0 = traces[0] + tail;
    let z1 = lambda * traces[1];
    let z2 = lambda * lambda * traces[2];
    SumRuleResult {
        label,
        s,
        lambda,
        z0,
        z1,
        z2,
        z_total: z0 + z1 + z2,
        diagonal_mode: DiagonalMode::Truncated,
        resummation_correction: 0.0,
        completeness_remainder: 0.0,
        tail_estimate: tail,
        truncation: size,
        route,
    }
}

/// `Z(1 + 1/N) = tr(Q q^{[1/N]})` expanded to second order in `λ`.
pub fn z_via_trace_one_plus_inv(
    n: RootOrder,
    table: &SigmaPowerTable,
    basis: &ModeBasis,
    lambda: f64,
) -> Result<SumRuleResult> {
    let spec = RationalOrderSpec::one_plus_inv(n.get())?;
    spec.validate_for(basis.dimension())?;
    check_inputs(table, basis, lambda, 2)?;
    let set = q_generic_recursion(n, 2, table, basis.eigenvalues())?;
    trace_one_plus_inv_from_set(&set, basis, lambda)
}

/// Trace route from an already built coefficient set.
pub fn trace_one_plus_inv_from_set(set: &GreenCoefficientSet, basis: &ModeBasis, lambda: f64) -> Result<SumRuleResult> {
    let spec = RationalOrderSpec::one_plus_inv(set.order().get())?;
    check_set(set, basis)?;
    let (q, bq) = (|k| set.q(k), |k| set.big_q(k));
    let traces = [
        trace_of_product(bq(0), q(0)),
        trace_of_product(bq(0), q(1)) + trace_of_product(bq(1), q(0)),
        trace_of_product(bq(1), q(1)) + trace_of_product(bq(2), q(0)) + trace_of_product(bq(0), q(2)),
    ];
    let s = spec.s();
    let tail = tail_estimate(basis, s)?;
    Ok(trace_result(spec.label(), s, lambda, traces, tail, set.size(), SumRuleRoute::TraceOnePlusInv))
}

/// `Z(1/N + 1/N') = tr(q^{[1/N]} q^{[1/N']})` expanded to second order in `λ`.
pub fn z_via_trace_inv_sum(
    n: RootOrder,
    n_prime: RootOrder,
    table: &SigmaPowerTable,
    basis: &ModeBasis,
    lambda: f64,
) -> Result<SumRuleResult> {
    let spec = RationalOrderSpec::inv_sum(n.get(), n_prime.get())?;
    spec.validate_for(basis.dimension())?;
    check_inputs(table, basis, lambda, 2)?;
    let a = q_generic_recursion(n, 2, table, basis.eigenvalues())?;
    let b = if n == n_prime {
        a.clone()
    } else {
        q_generic_recursion(n_prime, 2, table, basis.eigenvalues())?
    };
    trace_inv_sum_from_sets(&a, &b, basis, lambda)
}

/// Trace route from two already built coefficient sets.
pub fn trace_inv_sum_from_sets(
    a: &GreenCoefficientSet,
    b: &GreenCoefficientSet,
    basis: &ModeBasis,
    lambda: f64,
) -> Result<SumRuleResult> {
    let spec = RationalOrderSpec::inv_sum(a.order().get(), b.order().get())?;
    spec.validate_for(basis.dimension())?;
    check_set(a, basis)?;
    check_set(b, basis)?;
    let t = |i: usize, j: usize| trace_of_product(a.q(i), b.q(j));
    let traces = [t(0, 0), t(0, 1) + t(1, 0), t(1, 1) + t(0, 2) + t(2, 0)];
    let s = spec.s();
    let tail = tail_estimate(basis, s)?;
    Ok(trace_result(spec.label(), s, lambda, traces, tail, a.size(), SumRuleRoute::TraceInvSum))
}

fn check_set(set: &GreenCoefficientSet, basis: &ModeBasis) -> Result<()> {
    if set.max_order() < 2 {
        return Err(Error::OrderTooHigh {
            requested: 2,
            available: set.max_order(),
        });
    }
    if set.size() != basis.mode_count() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient set has {} modes, basis has {}",
            set.size(),
            basis.mode_count()
        )));
    }
    Ok(())
}
