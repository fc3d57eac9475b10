//! Summation and dense-product primitives shared by the spectral routines.
//!
//! All reductions run in a fixed order, so results do not depend on the
//! number of worker threads.

use nalgebra::DMatrix;
use rayon::prelude::*;

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (tree) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i` in `0..len`, without materialising more
/// than one block at a time.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(len: usize, f: &F) -> f64 {
    fn rec<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= PAIRWISE_BLOCK {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + (hi - lo) / 2;
        rec(lo, mid, f) + rec(mid, hi, f)
    }
    rec(0, len, f)
}

/// Neumaier's variant of compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Dot product with compensated accumulation.
#[inline]
pub fn dot_compensated(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = NeumaierSum::new();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}

/// Dense product `a * b` with compensated accumulation of every entry.
pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows(), "matmul: inner dimensions differ");
    let rows = a.nrows();
    let at = a.transpose();
    let columns: Vec<Vec<f64>> = (0..b.ncols())
        .into_par_iter()
        .map(|j| {
            let bj = b.column(j);
            let bj = bj.as_slice();
            (0..rows)
                .map(|i| dot_compensated(at.column(i).as_slice(), bj))
                .collect()
        })
        .collect();
    DMatrix::from_fn(rows, b.ncols(), |i, j| columns[j][i])
}

/// `diag(d) * a`.
pub fn scale_rows(d: &[f64], a: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)])
}

/// `a * diag(d)`.
pub fn scale_cols(a: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * d[j])
}

/// `trace(a * b) = sum_{n,r} a[n,r] b[r,n]`, pairwise over rows.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let n = a.nrows();
    pairwise_sum_by(n, &|i| {
        let mut acc = NeumaierSum::new();
        for r in 0..a.ncols() {
            acc.add(a[(i, r)] * b[(r, i)]);
        }
        acc.value()
    })
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Largest absolute entry of the leading `size x size` block.
pub fn max_abs_block(a: &DMatrix<f64>, size: usize) -> f64 {
    let size = size.min(a.nrows()).min(a.ncols());
    let mut m = 0.0_f64;
    for j in 0..size {
        for i in 0..size {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Replace `a` by `(a + a^T) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Generalised binomial coefficient `binom(1/2, k)` by the product recurrence.
pub fn binom_half(k: usize) -> f64 {
    let mut b = 1.0;
    for i in 1..=k {
        b *= (0.5 - (i as f64 - 1.0)) / i as f64;
    }
    b
}

/// `binom(alpha, k)` for real `alpha`.
pub fn binom_real(alpha: f64, k: usize) -> f64 {
    let mut b = 1.0;
    for i in 1..=k {
        b *= (alpha - (i as f64 - 1.0)) / i as f64;
    }
    b
}

/// Least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binom_half_matches_known_values() {
        let expected = [
            1.0,
            0.5,
            -1.0 / 8.0,
            1.0 / 16.0,
            -5.0 / 128.0,
            7.0 / 256.0,
            -21.0 / 1024.0,
            33.0 / 2048.0,
            -429.0 / 32768.0,
        ];
        for (k, e) in expected.iter().enumerate() {
            assert_eq!(binom_half(k), *e, "k = {k}");
        }
    }

    #[test]
    fn pairwise_sum_is_accurate_on_harmonic_tail() {
        let v: Vec<f64> = (1..=100_000).map(|n| 1.0 / (n as f64 * n as f64)).collect();
        let exact = std::f64::consts::PI.powi(2) / 6.0 - 1.0 / 100_000.5;
        assert!((pairwise_sum(&v) - exact).abs() < 1e-12);
        assert_eq!(pairwise_sum(&v), pairwise_sum_by(v.len(), &|i| v[i]));
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let mut acc = NeumaierSum::new();
        for v in [1.0, 1e100, 1.0, -1e100] {
            acc.add(v);
        }
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn matmul_agrees_with_nalgebra() {
        let a = DMatrix::from_fn(5, 4, |i, j| (i as f64 + 1.0).sin() * (j as f64 - 0.5));
        let b = DMatrix::from_fn(4, 3, |i, j| (i * j) as f64 + 0.25);
        let c = matmul(&a, &b);
        let d = &a * &b;
        assert!((c - d).abs().max() < 1e-13);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let x: Vec<f64> = [1.0f64, 2.0, 4.0].iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = [1.0f64, 8.0, 64.0].iter().map(|v| v.ln()).collect();
        assert!((least_squares_slope(&x, &y) - 3.0).abs() < 1e-14);
    }
}
