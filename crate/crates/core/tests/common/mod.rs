//! Shared fixtures and independent reference formulas for the integration tests.
#![allow(dead_code)]

use billzeta::SigmaPowerTable;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

pub const ZETA3: f64 = 1.202_056_903_159_594_2;

/// Random symmetric `S_1..S_J` and random positive eigenvalues.
pub fn random_system(size: usize, max_power: usize, seed: u64) -> (Vec<f64>, SigmaPowerTable) {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut ev: Vec<f64> = (0..size).map(|_| rng.random_range(1.0..60.0)).collect();
    ev.sort_by(f64::total_cmp);
    let powers = (0..max_power)
        .map(|_| {
            let a = DMatrix::from_fn(size, size, |_, _| rng.random_range(-0.5..0.5));
            let mut s = &a + a.transpose();
            for j in 0..size {
                for i in 0..j {
                    s[(j, i)] = s[(i, j)];
                }
            }
            s
        })
        .collect();
    (ev, SigmaPowerTable::from_matrices(powers, None).unwrap())
}

/// Square-root kernels written out directly.
pub struct Half<'a> {
    pub ev: &'a [f64],
}

impl Half<'_> {
    pub fn eta(&self, n: usize, m: usize) -> f64 {
        1.0 / self.ev[n].sqrt() + 1.0 / self.ev[m].sqrt()
    }

    pub fn delta(&self, n: usize, m: usize) -> f64 {
        (1.0 / self.ev[n] + 1.0 / self.ev[m]) / self.eta(n, m)
    }

    pub fn len(&self) -> usize {
        self.ev.len()
    }

    /// `Σ_r w(r) A_nr B_rm`.
    pub fn weighted(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, w: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| (0..n).map(|r| w(r) * a[(i, r)] * b[(r, j)]).sum())
    }

    /// `Σ_r Δ_rr² A_nr B_rm`.
    pub fn pair(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.weighted(a, b, |r| self.delta(r, r).powi(2))
    }

    /// `Σ_r (Δ_nr σ_nr q_rm + Δ_rm q_nr σ_rm)`.
    pub fn sigma_q(&self, s1: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|r| self.delta(i, r) * s1[(i, r)] * q[(r, j)] + self.delta(r, j) * q[(i, r)] * s1[(r, j)])
                .sum()
        })
    }
}

/// Second-order display for `N = 2`.
pub fn display_q2(ev: &[f64], s: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let h = Half { ev };
    let n = ev.len();
    DMatrix::from_fn(n, n, |i, j| {
        let sum: f64 = (0..n)
            .map(|r| (1.0 / ev[r] - h.delta(i, r) * h.delta(r, j)) * s[1][(i, r)] * s[1][(r, j)])
            .sum();
        -0.125 * h.delta(i, j) * s[2][(i, j)] + sum / (4.0 * h.eta(i, j))
    })
}

/// Third-order display for `N = 2`, written without lower-order q's.
///
/// `printed_index = true` keeps `1/ε_r` inside the double sums as printed;
/// `false` uses the inner summation index `1/ε_s`.
pub fn display_q3(ev: &[f64], s: &[&DMatrix<f64>], printed_index: bool) -> DMatrix<f64> {
    let h = Half { ev };
    let n = ev.len();
    let (s1, s2, s3) = (s[1], s[2], s[3]);
    DMatrix::from_fn(n, n, |i, j| {
        let eta = h.eta(i, j);
        let mut v = h.delta(i, j) * s3[(i, j)] / 16.0;
        for r in 0..n {
            let w = 1.0 / ev[r] - h.delta(i, r) * h.delta(r, j);
            v -= w * (s1[(i, r)] * s2[(r, j)] + s2[(i, r)] * s1[(r, j)]) / (16.0 * eta);
        }
        for r in 0..n {
            for t in 0..n {
                let inner_a = if printed_index { 1.0 / ev[r] } else { 1.0 / ev[t] };
                let a = h.delta(i, r) / (8.0 * eta * h.eta(r, j))
                    * (inner_a - h.delta(r, t) * h.delta(t, j))
                    * s1[(i, r)]
                    * s1[(r, t)]
                    * s1[(t, j)];
                // second sum: Σ_{r,s} Δ_rm/(8 η_nm η_nr) (1/ε - Δ_ns Δ_sr) σ_ns σ_sr σ_rm
                let b = h.delta(r, j) / (8.0 * eta * h.eta(i, r))
                    * (inner_a - h.delta(i, t) * h.delta(t, r))
                    * s1[(i, t)]
                    * s1[(t, r)]
                    * s1[(r, j)];
                v -= a + b;
            }
        }
        v
    })
}

/// Orders 2..=8 for `N = 2` expressed through lower-order q's, term by term.
///
/// Two printed coefficients are corrected: at order 4 the `q2 q2` product
/// carries the factor 2 like every other pair, and at order 8 the weight-42
/// pair is `σ²σ⁶ + σ⁶σ²`.
pub fn display_recursive(k: usize, ev: &[f64], s: &[&DMatrix<f64>], q: &[DMatrix<f64>]) -> DMatrix<f64> {
    let h = Half { ev };
    let n = ev.len();
    let p = |a: usize, b: usize| h.pair(s[a], s[b]);
    let qq = |a: usize, b: usize| &q[a] * &q[b];
    let (lead, dr, pairs): (f64, DMatrix<f64>, DMatrix<f64>) = match k {
        2 => (-1.0 / 8.0, p(1, 1) / 4.0, DMatrix::zeros(n, n)),
        3 => (1.0 / 16.0, -(p(1, 2) + p(2, 1)) / 16.0, DMatrix::zeros(n, n)),
        4 => (
            -5.0 / 128.0,
            (p(2, 2) + p(3, 1) * 2.0 + p(1, 3) * 2.0) / 64.0,
            qq(2, 2) * 2.0,
        ),
        5 => (
            7.0 / 256.0,
            -(p(2, 3) * 2.0 + p(3, 2) * 2.0 + p(1, 4) * 5.0 + p(4, 1) * 5.0) / 256.0,
            qq(2, 3) * 2.0 + qq(3, 2) * 2.0,
        ),
        6 => (
            -21.0 / 1024.0,
            (p(3, 3) * 4.0 + (p(2, 4) + p(4, 2)) * 5.0 + (p(1, 5) + p(5, 1)) * 14.0) / 1024.0,
            qq(3, 3) * 2.0 + qq(2, 4) * 2.0 + qq(4, 2) * 2.0,
        ),
        7 => (
            33.0 / 2048.0,
            -((p(3, 4) + p(4, 3)) * 5.0 + (p(2, 5) + p(5, 2) + p(1, 6) * 3.0 + p(6, 1) * 3.0) * 7.0) / 2048.0,
            (qq(3, 4) + qq(4, 3) + qq(2, 5) + qq(5, 2)) * 2.0,
        ),
        8 => (
            -429.0 / 32768.0,
            (p(4, 4) * 25.0
                + (p(3, 5) + p(5, 3)) * 28.0
                + (p(2, 6) + p(6, 2)) * 42.0
                + (p(1, 7) + p(7, 1)) * 132.0)
                / 16384.0,
            (qq(4, 4) + qq(3, 5) + qq(5, 3) + qq(2, 6) + qq(6, 2)) * 2.0,
        ),
        _ => panic!("no display for order {k}"),
    };
    let sq = if k >= 3 {
        h.sigma_q(s[1], &q[k - 1])
    } else {
        // order 2 prints Σ_r Δ_nr Δ_rm σ_nr σ_rm / (4η) directly
        DMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|r| h.delta(i, r) * h.delta(r, j) * s[1][(i, r)] * s[1][(r, j)])
                .sum::<f64>()
                / 2.0
        })
    };
    DMatrix::from_fn(n, n, |i, j| {
        let eta = h.eta(i, j);
        lead * h.delta(i, j) * s[k][(i, j)] + dr[(i, j)] / eta - (pairs[(i, j)] + sq[(i, j)]) / (2.0 * eta)
    })
}

/// Largest entry-wise difference relative to the largest entry of `b`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax().max(f64::MIN_POSITIVE)
}

/// Tabulated kernel rows for `N = 1..=4`, written symbol by symbol.
pub fn table_rows(n: usize, en: f64, er: f64, em: f64) -> (f64, f64, f64) {
    let r = |e: f64, p: f64| e.powf(-p);
    let num = 1.0 / em + 1.0 / en;
    let eta = match n {
        1 => 1.0,
        2 => r(em, 0.5) + r(en, 0.5),
        3 => r(em, 1.0 / 3.0) * r(en, 1.0 / 3.0) + r(em, 2.0 / 3.0) + r(en, 2.0 / 3.0),
        4 => {
            r(em, 0.25) * r(en, 0.5) + r(em, 0.5) * r(en, 0.25) + r(em, 0.75) + r(en, 0.75)
        }
        _ => unreachable!(),
    };
    let xi = match n {
        1 => 0.0,
        2 => 1.0,
        3 => r(em, 1.0 / 3.0) + r(en, 1.0 / 3.0) + r(er, 1.0 / 3.0),
        4 => {
            r(em, 0.25) * r(en, 0.25)
                + r(em, 0.25) * r(er, 0.25)
                + r(em, 0.5)
                + r(en, 0.25) * r(er, 0.25)
                + r(en, 0.5)
                + r(er, 0.5)
        }
        _ => unreachable!(),
    };
    (num / eta, eta, xi)
}
