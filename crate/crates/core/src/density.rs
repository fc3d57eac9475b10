//! Density profiles `Sigma(x) = 1 + lambda * sigma(x)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, ModeBasis};
use crate::error::{Error, Result};
use crate::quadrature::CompositeRule;

/// One-dimensional profile on `[0, len]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile1d {
    /// `sum_k c_k cos(k pi x / len)`, `k = 0, 1, ...`.
    FourierCosine { coefficients: Vec<f64> },
    /// `sum_i c_i x^i`.
    Polynomial { coefficients: Vec<f64> },
    /// Values on the uniform grid `x_i = i len / (G - 1)`, piecewise-linear in between.
    Tabulated { values: Vec<f64> },
}

impl Profile1d {
    pub fn eval(&self, x: f64, len: f64) -> f64 {
        match self {
            Profile1d::FourierCosine { coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(k, c)| c * (k as f64 * PI * x / len).cos())
                .sum(),
            Profile1d::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            Profile1d::Tabulated { values } => {
                let g = values.len();
                let t = (x / len).clamp(0.0, 1.0) * (g - 1) as f64;
                let i = (t.floor() as usize).min(g - 2);
                let f = t - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile1d::FourierCosine { coefficients } | Profile1d::Polynomial { coefficients } => {
                coefficients.iter().all(|c| *c == 0.0)
            }
            Profile1d::Tabulated { values } => values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let values = match self {
            Profile1d::FourierCosine { coefficients } | Profile1d::Polynomial { coefficients } => {
                coefficients
            }
            Profile1d::Tabulated { values } => {
                if values.len() < 2 {
                    return Err(Error::InvalidArgument(
                        "tabulated profile needs at least two grid values".into(),
                    ));
                }
                values
            }
        };
        if values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("profile contains non-finite values".into()))
        }
    }

    /// Proxy for the oscillation content of the profile, in half-waves.
    fn bandwidth(&self) -> usize {
        match self {
            Profile1d::FourierCosine { coefficients } => coefficients.len().saturating_sub(1),
            Profile1d::Polynomial { coefficients } => coefficients.len().saturating_sub(1),
            Profile1d::Tabulated { values } => values.len() - 1,
        }
    }

    fn grid_intervals(&self) -> Option<usize> {
        match self {
            Profile1d::Tabulated { values } => Some(values.len() - 1),
            _ => None,
        }
    }

    fn sup_abs(&self, len: f64) -> f64 {
        const SAMPLES: usize = 8192;
        let mut sup = (0..=SAMPLES)
            .map(|i| self.eval(len * i as f64 / SAMPLES as f64, len).abs())
            .fold(0.0, f64::max);
        if let Profile1d::Tabulated { values } = self {
            sup = values.iter().fold(sup, |m, v| m.max(v.abs()));
        }
        sup
    }
}

/// One separable term `weight * f(x) * g(y)` of a 2D profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableTerm {
    pub weight: f64,
    pub x: Profile1d,
    pub y: Profile1d,
}

/// The perturbation profile `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityProfile {
    FourierCosine { coefficients: Vec<f64> },
    Polynomial { coefficients: Vec<f64> },
    Tabulated { values: Vec<f64> },
    /// Sum of separable products, for rectangles.
    Separable { terms: Vec<SeparableTerm> },
}

impl DensityProfile {
    pub fn zero() -> Self {
        DensityProfile::FourierCosine {
            coefficients: Vec::new(),
        }
    }

    /// `cos(k pi x / L)` on a string.
    pub fn cosine_mode(k: usize) -> Self {
        let mut coefficients = vec![0.0; k + 1];
        coefficients[k] = 1.0;
        DensityProfile::FourierCosine { coefficients }
    }

    /// `f(x) g(y)` on a rectangle.
    pub fn product(x: Profile1d, y: Profile1d) -> Self {
        DensityProfile::Separable {
            terms: vec![SeparableTerm { weight: 1.0, x, y }],
        }
    }

    pub fn as_line(&self) -> Option<Profile1d> {
        match self {
            DensityProfile::FourierCosine { coefficients } => Some(Profile1d::FourierCosine {
                coefficients: coefficients.clone(),
            }),
            DensityProfile::Polynomial { coefficients } => Some(Profile1d::Polynomial {
                coefficients: coefficients.clone(),
            }),
            DensityProfile::Tabulated { values } => Some(Profile1d::Tabulated {
                values: values.clone(),
            }),
            DensityProfile::Separable { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DensityProfile::Separable { terms } => terms
                .iter()
                .all(|t| t.weight == 0.0 || t.x.is_zero() || t.y.is_zero()),
            other => other.as_line().map(|p| p.is_zero()).unwrap_or(false),
        }
    }

    /// Checks that the profile is well formed and fits the basis geometry.
    pub fn validate_for(&self, kind: &BasisKind) -> Result<()> {
        match (self, kind) {
            (DensityProfile::Separable { terms }, BasisKind::Rectangle2d { .. }) => {
                for t in terms {
                    t.x.validate()?;
                    t.y.validate()?;
                    if !t.weight.is_finite() {
                        return Err(Error::InvalidArgument("non-finite separable weight".into()));
                    }
                }
                Ok(())
            }
            (DensityProfile::Separable { .. }, BasisKind::String1d { .. }) => Err(
                Error::ProfileDimension("separable profiles need a rectangle basis".into()),
            ),
            (_, BasisKind::Rectangle2d { .. }) => Err(Error::ProfileDimension(
                "rectangle bases need a separable profile".into(),
            )),
            (line, BasisKind::String1d { .. }) => line.as_line().expect("line profile").validate(),
        }
    }

    /// `sigma` at a point (`y` ignored in 1D).
    pub fn eval(&self, kind: &BasisKind, x: f64, y: f64) -> f64 {
        match (self, kind) {
            (DensityProfile::Separable { terms }, BasisKind::Rectangle2d { a, b }) => terms
                .iter()
                .map(|t| t.weight * t.x.eval(x, *a) * t.y.eval(y, *b))
                .sum(),
            (_, BasisKind::String1d { length }) => self
                .as_line()
                .map(|p| p.eval(x, *length))
                .unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Estimate of `sup |sigma|` over the domain by dense sampling.
    pub fn sup_abs(&self, kind: &BasisKind) -> f64 {
        match (self, kind) {
            (DensityProfile::Separable { terms }, BasisKind::Rectangle2d { a, b }) => {
                if terms.len() == 1 {
                    let t = &terms[0];
                    return t.weight.abs() * t.x.sup_abs(*a) * t.y.sup_abs(*b);
                }
                const SAMPLES: usize = 512;
                let mut sup = 0.0_f64;
                for i in 0..=SAMPLES {
                    for j in 0..=SAMPLES {
                        let x = a * i as f64 / SAMPLES as f64;
                        let y = b * j as f64 / SAMPLES as f64;
                        sup = sup.max(self.eval(kind, x, y).abs());
                    }
                }
                sup
            }
            (_, BasisKind::String1d { length }) => {
                self.as_line().map(|p| p.sup_abs(*length)).unwrap_or(0.0)
            }
            _ => f64::INFINITY,
        }
    }

    /// The separable terms of this profile (a 1D profile is a single term with `y = 1`).
    pub(crate) fn terms(&self) -> Vec<SeparableTerm> {
        match self {
            DensityProfile::Separable { terms } => terms.clone(),
            other => vec![SeparableTerm {
                weight: 1.0,
                x: other.as_line().expect("line profile"),
                y: Profile1d::FourierCosine {
                    coefficients: vec![1.0],
                },
            }],
        }
    }
}

/// `Sigma = 1 + lambda * sigma`, subject to `sup |lambda sigma| < 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityPerturbation {
    pub profile: DensityProfile,
    pub lambda: f64,
}

impl DensityPerturbation {
    pub fn new(profile: DensityProfile, lambda: f64) -> Self {
        Self { profile, lambda }
    }

    /// Validates the profile against the basis and the density bound.
    pub fn validate(&self, kind: &BasisKind) -> Result<()> {
        self.profile.validate_for(kind)?;
        check_density_bound(self.lambda, self.profile.sup_abs(kind))
    }

    /// `Sigma(x, y)`.
    pub fn density(&self, kind: &BasisKind, x: f64, y: f64) -> f64 {
        1.0 + self.lambda * self.profile.eval(kind, x, y)
    }

    /// `int Sigma^power` over the domain (1D) or over the rectangle (2D).
    pub fn integrate_density_power(&self, kind: &BasisKind, power: f64) -> f64 {
        match *kind {
            BasisKind::String1d { length } => {
                let rule = CompositeRule::new(0.0, length, 256);
                rule.integrate(|x| self.density(kind, x, 0.0).powf(power))
            }
            BasisKind::Rectangle2d { a, b } => {
                let rx = CompositeRule::new(0.0, a, 32);
                let ry = CompositeRule::new(0.0, b, 32);
                rx.integrate(|x| ry.integrate(|y| self.density(kind, x, y).powf(power)))
            }
        }
    }

    /// `int_{boundary} Sigma^power ds` (2D); the endpoint sum in 1D.
    pub fn integrate_boundary_power(&self, kind: &BasisKind, power: f64) -> f64 {
        match *kind {
            BasisKind::String1d { length } => {
                self.density(kind, 0.0, 0.0).powf(power) + self.density(kind, length, 0.0).powf(power)
            }
            BasisKind::Rectangle2d { a, b } => {
                let rx = CompositeRule::new(0.0, a, 32);
                let ry = CompositeRule::new(0.0, b, 32);
                let bottom_top =
                    rx.integrate(|x| self.density(kind, x, 0.0).powf(power) + self.density(kind, x, b).powf(power));
                let sides =
                    ry.integrate(|y| self.density(kind, 0.0, y).powf(power) + self.density(kind, a, y).powf(power));
                bottom_top + sides
            }
        }
    }
}

pub(crate) fn check_density_bound(lambda: f64, sup: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
    }
    let bound = lambda.abs() * sup;
    if lambda != 0.0 && !(bound < 1.0) {
        return Err(Error::DensityBound { lambda, sup, bound });
    }
    Ok(())
}

/// Product `prod_i p_i(x)^{e_i}` of 1D profiles, the unit of matrix-element work.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    parts: Vec<(Profile1d, usize)>,
}

impl Factor {
    pub fn new(parts: Vec<(Profile1d, usize)>) -> Self {
        Self {
            parts: parts.into_iter().filter(|(_, e)| *e > 0).collect(),
        }
    }

    /// Exact cosine series of the product, when every part is a cosine series.
    pub fn cosine_series(&self) -> Option<Vec<f64>> {
        let mut acc = vec![1.0];
        for (p, e) in &self.parts {
            let Profile1d::FourierCosine { coefficients } = p else {
                return None;
            };
            for _ in 0..*e {
                acc = multiply_cosine_series(&acc, coefficients);
            }
        }
        Some(acc)
    }

    pub fn eval(&self, x: f64, len: f64) -> f64 {
        self.parts
            .iter()
            .map(|(p, e)| p.eval(x, len).powi(*e as i32))
            .product()
    }

    pub fn bandwidth(&self) -> usize {
        self.parts.iter().map(|(p, e)| p.bandwidth() * e).sum()
    }

    pub fn grid_intervals(&self) -> Option<usize> {
        self.parts
            .iter()
            .filter_map(|(p, _)| p.grid_intervals())
            .reduce(lcm)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Product of two cosine series via `cos a cos b = (cos(a-b) + cos(a+b)) / 2`.
pub(crate) fn multiply_cosine_series(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, ca) in a.iter().enumerate() {
        if *ca == 0.0 {
            continue;
        }
        for (j, cb) in b.iter().enumerate() {
            let p = 0.5 * ca * cb;
            out[i.abs_diff(j)] += p;
            out[i + j] += p;
        }
    }
    out
}

/// Geometry check shared by the callers that receive a basis and a profile.
pub(crate) fn check_profile_basis(profile: &DensityProfile, basis: &ModeBasis) -> Result<()> {
    profile.validate_for(basis.kind())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_product_rule() {
        // cos^2(2t) = 1/2 + cos(4t)/2
        let c = multiply_cosine_series(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]);
        assert_eq!(c, vec![0.5, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn evaluation_of_each_profile_kind() {
        let cos2 = Profile1d::FourierCosine {
            coefficients: vec![0.0, 0.0, 1.0],
        };
        assert!((cos2.eval(0.25, 1.0) - (0.5 * PI).cos()).abs() < 1e-15);
        let poly = Profile1d::Polynomial {
            coefficients: vec![1.0, -2.0, 3.0],
        };
        assert!((poly.eval(0.5, 1.0) - 0.75).abs() < 1e-15);
        let tab = Profile1d::Tabulated {
            values: vec![0.0, 1.0, 0.0],
        };
        assert!((tab.eval(0.25, 1.0) - 0.5).abs() < 1e-15);
        assert!((tab.eval(1.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn density_bound_is_enforced() {
        let kind = BasisKind::String1d { length: 1.0 };
        let p = DensityPerturbation::new(DensityProfile::cosine_mode(2), 0.5);
        assert!(p.validate(&kind).is_ok());
        let p = DensityPerturbation::new(DensityProfile::cosine_mode(2), 1.0);
        assert!(matches!(p.validate(&kind), Err(Error::DensityBound { .. })));
        let p = DensityPerturbation::new(DensityProfile::cosine_mode(2), -1.5);
        assert!(p.validate(&kind).is_err());
    }

    #[test]
    fn profile_and_geometry_must_match() {
        let line = BasisKind::String1d { length: 1.0 };
        let rect = BasisKind::Rectangle2d { a: 1.0, b: 1.0 };
        let sep = DensityProfile::product(
            Profile1d::FourierCosine {
                coefficients: vec![0.0, 0.0, 1.0],
            },
            Profile1d::FourierCosine {
                coefficients: vec![0.0, 0.0, 1.0],
            },
        );
        assert!(sep.validate_for(&rect).is_ok());
        assert!(sep.validate_for(&line).is_err());
        assert!(DensityProfile::cosine_mode(2).validate_for(&rect).is_err());
        assert!((sep.sup_abs(&rect) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optical_length_of_cosine_density() {
        // int sqrt(1 + l cos 2 pi x) = 1 - l^2/16 + O(l^4)
        let kind = BasisKind::String1d { length: 1.0 };
        let p = DensityPerturbation::new(DensityProfile::cosine_mode(2), 0.01);
        let l = p.integrate_density_power(&kind, 0.5);
        assert!((l - (1.0 - 1e-4 / 16.0)).abs() < 1e-9);
    }
}
