//! Brute-force heterogeneous spectrum from the Galerkin problem `K c = E S c`
//! in the homogeneous basis, and `Z(s)` by direct summation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, ModeBasis};
use crate::density::DensityPerturbation;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, symmetric_eigen};
use crate::numeric::{least_squares_slope, pairwise_sum_by};
use crate::sigma::SigmaPowerTable;
use crate::sum_rules::{check_convergent, closed_form_at, weyl_tail, DiagonalMode};

/// Default fraction of the top Galerkin eigenvalues left out of direct sums.
pub const DEFAULT_DISCARD_FRACTION: f64 = 0.25;

/// `K = diag(ε)`, `S = I + λ S_1`.
#[derive(Debug, Clone)]
pub struct GeneralizedProblem {
    stiffness: Vec<f64>,
    mass: DMatrix<f64>,
    lambda: f64,
}

impl GeneralizedProblem {
    pub fn assemble(basis: &ModeBasis, table: &SigmaPowerTable, lambda: f64) -> Result<Self> {
        if table.size() != basis.mode_count() {
            return Err(Error::DimensionMismatch(format!(
                "table has {} modes, basis has {}",
                table.size(),
                basis.mode_count()
            )));
        }
        table.check_lambda(lambda)?;
        let s1 = table.power(1)?;
        let size = basis.mode_count();
        let mass = DMatrix::from_fn(size, size, |n, m| {
            let d = if n == m { 1.0 } else { 0.0 };
            d + lambda * s1[(n, m)]
        });
        Ok(Self {
            stiffness: basis.eigenvalues().to_vec(),
            mass,
            lambda,
        })
    }

    pub fn size(&self) -> usize {
        self.stiffness.len()
    }

    pub fn stiffness(&self) -> &[f64] {
        &self.stiffness
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Cholesky factor of `S` and the reduced matrix `L^{-1} K L^{-T}`.
    fn reduce(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let l = cholesky(&self.mass)?;
        let root = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.size(),
            self.stiffness.iter().map(|e| e.sqrt()),
        ));
        let x = l
            .solve_lower_triangular(&root)
            .ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
        let mut c = &x * x.transpose();
        crate::numeric::symmetrize(&mut c);
        Ok((l, c))
    }
}

/// Eigenvalues and `S`-orthonormal eigenvectors of the generalized problem.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Ascending heterogeneous eigenvalues.
pub fn solve_spectrum(problem: &GeneralizedProblem) -> Result<Vec<f64>> {
    solve_generalized(problem).map(|s| s.values)
}

/// Eigenpairs through `S = L Lᵀ` and the symmetric problem on `L^{-1} K L^{-T}`.
pub fn solve_generalized(problem: &GeneralizedProblem) -> Result<Spectrum> {
    let (l, c) = problem.reduce()?;
    let eig = symmetric_eigen(&c)?;
    if let Some(bad) = eig.values.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::NonPositiveEigenvalue(*bad));
    }
    let vectors = l
        .transpose()
        .solve_upper_triangular(&eig.vectors)
        .ok_or(Error::NotPositiveDefinite { row: 0, pivot: 0.0 })?;
    Ok(Spectrum {
        values: eig.values,
        vectors,
    })
}

/// `‖K c - E S c‖₂ / ‖K c‖₂` for every eigenpair.
pub fn relative_residuals(problem: &GeneralizedProblem, spectrum: &Spectrum) -> Vec<f64> {
    let sc = problem.mass() * &spectrum.vectors;
    (0..spectrum.values.len())
        .map(|j| {
            let e = spectrum.values[j];
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..problem.size() {
                let kc = problem.stiffness[i] * spectrum.vectors[(i, j)];
                num += (kc - e * sc[(i, j)]).powi(2);
                den += kc * kc;
            }
            (num / den).sqrt()
        })
        .collect()
}

/// Direct sum over the retained heterogeneous eigenvalues plus a Weyl tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectSum {
    pub value: f64,
    pub partial_sum: f64,
    pub tail_estimate: f64,
    pub retained: usize,
}

/// Number of eigenvalues kept after discarding the top `discard_fraction`.
pub fn retained_count(total: usize, discard_fraction: f64) -> usize {
    (((1.0 - discard_fraction) * total as f64).floor() as usize).clamp(1, total)
}

/// Weyl tail of the heterogeneous problem after `retained` eigenvalues.
///
/// 1D uses the optical length `∫ √Σ dx`; 2D uses `∫ Σ dA` and `∮ √Σ ds`.
pub fn heterogeneous_tail(
    kind: &BasisKind,
    perturbation: &DensityPerturbation,
    s: f64,
    retained: usize,
) -> Result<f64> {
    let (measure, boundary) = match kind {
        BasisKind::String1d { .. } => (perturbation.integrate_density_power(kind, 0.5), 2.0),
        BasisKind::Rectangle2d { .. } => (
            perturbation.integrate_density_power(kind, 1.0),
            perturbation.integrate_boundary_power(kind, 0.5),
        ),
    };
    weyl_tail(kind, measure, boundary, s, retained)
}

/// `Σ_{n ≤ M_inner} E_n^{-s}` plus the heterogeneous tail beyond `M_inner`.
pub fn z_direct(
    eigenvalues: &[f64],
    s: f64,
    basis: &ModeBasis,
    perturbation: &DensityPerturbation,
    discard_fraction: f64,
) -> Result<DirectSum> {
    check_convergent(s, basis.dimension())?;
    if !(0.0..1.0).contains(&discard_fraction) {
        return Err(Error::InvalidArgument(format!(
            "discard fraction must lie in [0, 1), got {discard_fraction}"
        )));
    }
    if eigenvalues.is_empty() {
        return Err(Error::InvalidArgument("no eigenvalues to sum".into()));
    }
    let retained = retained_count(eigenvalues.len(), discard_fraction);
    let partial_sum = pairwise_sum_by(retained, &|n| eigenvalues[n].powf(-s));
    let tail_estimate = heterogeneous_tail(basis.kind(), perturbation, s, retained)?;
    Ok(DirectSum {
        value: partial_sum + tail_estimate,
        partial_sum,
        tail_estimate,
        retained,
    })
}

/// Settings of the `λ`-scaling fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Drop `Z^(2)` from the perturbative value (harness self-check, slope ≈ 2).
    pub first_order_only: bool,
    pub discard_fraction: f64,
    /// Points with `e < floor_factor * floor` are excluded.
    pub floor_factor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            first_order_only: false,
            discard_fraction: DEFAULT_DISCARD_FRACTION,
            floor_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub lambda: f64,
    pub z_pert: f64,
    pub z_oracle: f64,
    pub error: f64,
    /// Truncation floor: change of the direct sum when the retained count is halved.
    pub floor: f64,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub s: f64,
    pub label: String,
    pub truncation: usize,
    pub first_order_only: bool,
    pub points: Vec<FitPoint>,
    pub slope: f64,
}

/// Least-squares slope of `log |Z_pert - Z_oracle|` against `log λ`.
///
/// `Z_pert` is the closed form with truncated diagonal; the oracle solves the
/// Galerkin problem on the same basis.
pub fn convergence_order_fit(
    s: f64,
    label: &str,
    basis: &ModeBasis,
    perturbation_profile: &crate::density::DensityProfile,
    table: &SigmaPowerTable,
    lambdas: &[f64],
    options: &FitOptions,
) -> Result<FitReport> {
    check_convergent(s, basis.dimension())?;
    if lambdas.len() < 3 {
        return Err(Error::InsufficientData {
            usable: lambdas.len(),
            required: 3,
        });
    }
    for &l in lambdas {
        if !(l > 0.0) {
            return Err(Error::InvalidArgument(format!("fit needs positive lambdas, got {l}")));
        }
        table.check_lambda(l)?;
    }
    let points = lambdas
        .par_iter()
        .map(|&lambda| {
            let pert = closed_form_at(s, label, table, basis, lambda, DiagonalMode::Truncated)?;
            let z_pert = if options.first_order_only {
                pert.z0 + pert.z1
            } else {
                pert.z_total
            };
            let perturbation = DensityPerturbation::new(perturbation_profile.clone(), lambda);
            let problem = GeneralizedProblem::assemble(basis, table, lambda)?;
            let values = solve_spectrum(&problem)?;
            let direct = z_direct(&values, s, basis, &perturbation, options.discard_fraction)?;
            let coarse = z_direct(&values, s, basis, &perturbation, 1.0 - 0.5 * (1.0 - options.discard_fraction))?;
            let floor = (direct.value - coarse.value).abs() + 16.0 * f64::EPSILON * direct.value.abs();
            let error = (z_pert - direct.value).abs();
            Ok(FitPoint {
                lambda,
                z_pert,
                z_oracle: direct.value,
                error,
                floor,
                used: error >= options.floor_factor * floor,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.used)
        .map(|p| (p.lambda.ln(), p.error.ln()))
        .unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            usable: x.len(),
            required: 3,
        });
    }
    Ok(FitReport {
        s,
        label: label.to_string(),
        truncation: basis.mode_count(),
        first_order_only: options.first_order_only,
        points,
        slope: least_squares_slope(&x, &y),
    })
}

/// Writes `index,eigenvalue` rows (1-based).
pub fn write_spectrum_csv<W: std::io::Write>(values: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "index,eigenvalue")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, crate::export::fmt17(*v))?;
    }
    Ok(())
}
