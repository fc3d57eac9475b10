//! Eigenvalue kernels Δ, η and ξ of the fractional-order Green's function
//! expansion.
//!
//! With `a = ε^{-1/N}`, the kernels are complete homogeneous symmetric
//! polynomials in the `a`'s:
//!
//! ```text
//! η(εn, εm)     = Σ_{j=0}^{N-1} a_n^{N-1-j} a_m^j
//! Δ(εn, εm)     = (1/εn + 1/εm) / η(εn, εm)
//! ξ(εn, εr, εm) = Σ_{j=0}^{N-2} Σ_{l=0}^{N-2-j} a_n^j a_m^{N-2-j-l} a_r^l
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported root order.
pub const MAX_ROOT_ORDER: usize = 64;

/// Root order `N` of the Green's function of order `1/N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct RootOrder(usize);

impl RootOrder {
    pub fn new(n: usize) -> Result<Self> {
        if (1..=MAX_ROOT_ORDER).contains(&n) {
            Ok(Self(n))
        } else {
            Err(Error::RootOrderOutOfRange(n))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// `1/N` as a float.
    pub fn exponent(self) -> f64 {
        1.0 / self.0 as f64
    }
}

impl TryFrom<usize> for RootOrder {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<RootOrder> for usize {
    fn from(n: RootOrder) -> usize {
        n.0
    }
}

fn check_positive(values: &[f64]) -> Result<()> {
    match values.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        Some(e) => Err(Error::NonPositiveEigenvalue(*e)),
        None => Ok(()),
    }
}

/// `ε^{-p/N}`, evaluated as `exp(-(p/N) ln ε)`.
#[inline]
pub fn inverse_root_power(eps: f64, p: usize, n: usize) -> f64 {
    if p == 0 {
        1.0
    } else {
        (-(p as f64 / n as f64) * eps.ln()).exp()
    }
}

/// Powers `a^0..=a^max` with `a = ε^{-1/N}`, each computed directly.
#[derive(Debug, Clone)]
pub struct RootPowers {
    n: usize,
    powers: Vec<Vec<f64>>,
}

impl RootPowers {
    pub fn new(order: RootOrder, eigenvalues: &[f64]) -> Result<Self> {
        check_positive(eigenvalues)?;
        let n = order.get();
        let powers = eigenvalues
            .iter()
            .map(|e| (0..=n).map(|p| inverse_root_power(*e, p, n)).collect())
            .collect();
        Ok(Self { n, powers })
    }

    #[inline]
    pub fn pow(&self, mode: usize, p: usize) -> f64 {
        self.powers[mode][p]
    }

    /// `ε^{-1/N}` of `mode` (0-based).
    #[inline]
    pub fn root(&self, mode: usize) -> f64 {
        self.powers[mode][1]
    }

    /// `ε^{-1}` of `mode` (0-based).
    #[inline]
    pub fn inverse(&self, mode: usize) -> f64 {
        self.powers[mode][self.n]
    }

    /// `h_k(a_n, a_m) = Σ_{j=0}^{k} a_n^{k-j} a_m^j`.
    #[inline]
    pub fn h2(&self, n: usize, m: usize, k: usize) -> f64 {
        (0..=k).map(|j| self.pow(n, k - j) * self.pow(m, j)).sum()
    }

    #[inline]
    pub fn eta(&self, n: usize, m: usize) -> f64 {
        self.h2(n, m, self.n - 1)
    }

    #[inline]
    pub fn delta(&self, n: usize, m: usize) -> f64 {
        (self.inverse(n) + self.inverse(m)) / self.eta(n, m)
    }

    #[inline]
    pub fn xi(&self, n: usize, r: usize, m: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let top = self.n - 2;
        let mut s = 0.0;
        for j in 0..=top {
            for l in 0..=(top - j) {
                s += self.pow(n, j) * self.pow(m, top - j - l) * self.pow(r, l);
            }
        }
        s
    }
}

/// `η^{[1/N]}(εn, εm)`.
pub fn eta(order: RootOrder, en: f64, em: f64) -> Result<f64> {
    RootPowers::new(order, &[en, em]).map(|p| p.eta(0, 1))
}

/// `Δ^{[1/N]}(εn, εm)`.
pub fn delta(order: RootOrder, en: f64, em: f64) -> Result<f64> {
    RootPowers::new(order, &[en, em]).map(|p| p.delta(0, 1))
}

/// `ξ^{[1/N]}(εn, εr, εm)`.
pub fn xi(order: RootOrder, en: f64, er: f64, em: f64) -> Result<f64> {
    RootPowers::new(order, &[en, er, em]).map(|p| p.xi(0, 1, 2))
}
