//! Spectral coefficients of the dressed Green's function (`Q`) and of the
//! Green's function of order `1/N` (`q`), order by order in `lambda`.
//!
//! `Q^(k)` follows from the binomial series of `sqrt(Sigma)`. The `q^(k)` solve
//! the per-order `N`-fold convolution
//!
//! ```text
//! sum_{j1+..+jN=k} q^(j1) ... q^(jN) = Q^(k)
//! ```
//!
//! Since `q^(0)` is diagonal, the unknown `q^(k)` enters as `eta ⊙ q^(k)`, so
//! each order is isolated by an elementwise division by `eta`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{RootOrder, RootPowers};
use crate::numeric::{binom_half, matmul, max_abs, scale_cols, scale_rows, symmetrize, NeumaierSum};
use crate::sigma::SigmaPowerTable;

/// How a coefficient set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    GenericRecursion,
    ClosedForm,
}

/// `q^(0..=K)` and `Q^(0..=K)` for one root order.
#[derive(Debug, Clone)]
pub struct GreenCoefficientSet {
    order: RootOrder,
    q: Vec<DMatrix<f64>>,
    big_q: Vec<DMatrix<f64>>,
    source: CoefficientSource,
}

impl GreenCoefficientSet {
    pub fn order(&self) -> RootOrder {
        self.order
    }

    pub fn max_order(&self) -> usize {
        self.q.len() - 1
    }

    pub fn size(&self) -> usize {
        self.q[0].nrows()
    }

    pub fn source(&self) -> CoefficientSource {
        self.source
    }

    /// `q^(k)`.
    pub fn q(&self, k: usize) -> &DMatrix<f64> {
        &self.q[k]
    }

    /// `Q^(k)`.
    pub fn big_q(&self, k: usize) -> &DMatrix<f64> {
        &self.big_q[k]
    }

    /// Leading `size x size` blocks of every matrix.
    ///
    /// The internal sums of the retained entries still run over the full
    /// original truncation.
    pub fn truncated(&self, size: usize) -> Result<Self> {
        if size == 0 || size > self.size() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a {}-mode coefficient set to {size}",
                self.size()
            )));
        }
        let cut = |v: &Vec<DMatrix<f64>>| {
            v.iter()
                .map(|m| m.view((0, 0), (size, size)).into_owned())
                .collect()
        };
        Ok(Self {
            order: self.order,
            q: cut(&self.q),
            big_q: cut(&self.big_q),
            source: self.source,
        })
    }

    /// `sum_k lambda^k q^(k)`.
    pub fn q_summed(&self, lambda: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.size(), self.size());
        let mut w = 1.0;
        for q in &self.q {
            out += q * w;
            w *= lambda;
        }
        out
    }
}

fn check_sizes(table: &SigmaPowerTable, eigenvalues: &[f64]) -> Result<()> {
    if table.size() != eigenvalues.len() {
        return Err(Error::DimensionMismatch(format!(
            "table has {} modes but {} eigenvalues were given",
            table.size(),
            eigenvalues.len()
        )));
    }
    Ok(())
}

/// `Q^(k)[n,m] = sum_j binom(1/2,j) binom(1/2,k-j) sum_r S_j[n,r] S_{k-j}[r,m] / eps_r`.
pub fn build_q_order(k: usize, table: &SigmaPowerTable, eigenvalues: &[f64]) -> Result<DMatrix<f64>> {
    check_sizes(table, eigenvalues)?;
    if k > table.max_power() {
        return Err(Error::OrderTooHigh {
            requested: k,
            available: table.max_power(),
        });
    }
    if let Some(e) = eigenvalues.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::NonPositiveEigenvalue(*e));
    }
    let size = eigenvalues.len();
    let inv: Vec<f64> = eigenvalues.iter().map(|e| 1.0 / e).collect();
    let sk = table.power(k)?;
    let bk = binom_half(k);

    // j = 0 and j = k: S_k[n,m] (1/eps_n + 1/eps_m), halved when k = 0.
    let end_weight = if k == 0 { 0.5 } else { 1.0 };
    let mut out = DMatrix::from_fn(size, size, |n, m| end_weight * bk * sk[(n, m)] * (inv[n] + inv[m]));
    for j in 1..k {
        let jj = k - j;
        if j > jj {
            break;
        }
        let x = matmul(&scale_cols(table.power(j)?, &inv), table.power(jj)?);
        let w = binom_half(j) * binom_half(jj);
        if j == jj {
            out += &x * w;
        } else {
            out += (&x + x.transpose()) * w;
        }
    }
    symmetrize(&mut out);
    Ok(out)
}

/// Explicit `q^(k)` for `k <= 2` and any root order.
pub fn q_closed_form(
    order: RootOrder,
    k: usize,
    table: &SigmaPowerTable,
    eigenvalues: &[f64],
) -> Result<DMatrix<f64>> {
    check_sizes(table, eigenvalues)?;
    if k > 2 {
        return Err(Error::InvalidArgument(format!(
            "closed forms exist up to order 2, requested {k}; use the generic recursion"
        )));
    }
    if k > table.max_power() {
        return Err(Error::OrderTooHigh {
            requested: k,
            available: table.max_power(),
        });
    }
    let pw = RootPowers::new(order, eigenvalues)?;
    let size = eigenvalues.len();
    Ok(match k {
        0 => DMatrix::from_fn(size, size, |n, m| if n == m { pw.root(n) } else { 0.0 }),
        1 => {
            let s1 = table.power(1)?;
            DMatrix::from_fn(size, size, |n, m| 0.5 * pw.delta(n, m) * s1[(n, m)])
        }
        _ => {
            let s1 = table.power(1)?;
            let s2 = table.power(2)?;
            let nonzero: Vec<Vec<usize>> = (0..size)
                .map(|n| (0..size).filter(|r| s1[(n, *r)] != 0.0).collect())
                .collect();
            let mut out = DMatrix::zeros(size, size);
            for m in 0..size {
                for n in 0..=m {
                    let mut acc = NeumaierSum::new();
                    for &r in &nonzero[n] {
                        let b = s1[(r, m)];
                        if b == 0.0 {
                            continue;
                        }
                        let inner = pw.inverse(r) - pw.delta(n, r) * pw.delta(r, m) * pw.xi(n, r, m);
                        acc.add(s1[(n, r)] * b * inner);
                    }
                    let v = -0.125 * pw.delta(n, m) * s2[(n, m)] + acc.value() / (4.0 * pw.eta(n, m));
                    out[(n, m)] = v;
                    out[(m, n)] = v;
                }
            }
            out
        }
    })
}

/// Coefficient set from the explicit forms, orders `0..=max_order <= 2`.
pub fn closed_form_set(
    order: RootOrder,
    max_order: usize,
    table: &SigmaPowerTable,
    eigenvalues: &[f64],
) -> Result<GreenCoefficientSet> {
    let q = (0..=max_order)
        .map(|k| q_closed_form(order, k, table, eigenvalues))
        .collect::<Result<Vec<_>>>()?;
    let big_q = (0..=max_order)
        .map(|k| build_q_order(k, table, eigenvalues))
        .collect::<Result<Vec<_>>>()?;
    Ok(GreenCoefficientSet {
        order,
        q,
        big_q,
        source: CoefficientSource::ClosedForm,
    })
}

/// Order-by-order solution of the `N`-fold convolution identity.
pub fn q_generic_recursion(
    order: RootOrder,
    max_order: usize,
    table: &SigmaPowerTable,
    eigenvalues: &[f64],
) -> Result<GreenCoefficientSet> {
    check_sizes(table, eigenvalues)?;
    if max_order > table.max_power() {
        return Err(Error::OrderTooHigh {
            requested: max_order,
            available: table.max_power(),
        });
    }
    let pw = RootPowers::new(order, eigenvalues)?;
    let n_copies = order.get();
    let size = eigenvalues.len();
    let roots: Vec<f64> = (0..size).map(|i| pw.root(i)).collect();

    let big_q = (0..=max_order)
        .map(|k| build_q_order(k, table, eigenvalues))
        .collect::<Result<Vec<_>>>()?;

    // powers[m-1][k]: coefficient of lambda^k in (sum_j lambda^j q^(j))^m.
    let mut powers: Vec<Vec<DMatrix<f64>>> = (1..=n_copies)
        .map(|m| {
            vec![DMatrix::from_fn(size, size, |i, j| {
                if i == j {
                    pw.pow(i, m)
                } else {
                    0.0
                }
            })]
        })
        .collect();
    let mut q = vec![powers[0][0].clone()];

    for k in 1..=max_order {
        // Every term of the k-th power coefficient except those containing q^(k).
        let mut partial = vec![DMatrix::zeros(size, size)];
        for m in 2..=n_copies {
            let mut acc = scale_rows(&roots, &partial[m - 2]);
            for j in 1..k {
                acc += matmul(&q[j], &powers[m - 2][k - j]);
            }
            partial.push(acc);
        }
        let rest = &partial[n_copies - 1];
        let eta = |i: usize, j: usize| pw.eta(i, j);
        let mut qk = DMatrix::from_fn(size, size, |i, j| (big_q[k][(i, j)] - rest[(i, j)]) / eta(i, j));
        symmetrize(&mut qk);
        for (m, p) in partial.into_iter().enumerate() {
            // q^(k) enters the (m+1)-th power as sum_p q0^p q^(k) q0^(m-p).
            let full = p + DMatrix::from_fn(size, size, |i, j| qk[(i, j)] * pw.h2(i, j, m));
            powers[m].push(full);
        }
        q.push(qk);
    }

    Ok(GreenCoefficientSet {
        order,
        q,
        big_q,
        source: CoefficientSource::GenericRecursion,
    })
}

/// Coefficient of `lambda^k` in `(sum_j lambda^j q^(j))^copies`.
pub fn convolution_power(q: &[DMatrix<f64>], copies: usize, k: usize) -> DMatrix<f64> {
    assert!(copies >= 1 && k < q.len());
    let mut current: Vec<DMatrix<f64>> = q[..=k].to_vec();
    for _ in 1..copies {
        let next = (0..=k)
            .map(|kk| {
                let mut acc = DMatrix::zeros(q[0].nrows(), q[0].ncols());
                for j in 0..=kk {
                    acc += matmul(&q[j], &current[kk - j]);
                }
                acc
            })
            .collect();
        current = next;
    }
    current.swap_remove(k)
}

/// Max-norm residual of the `N`-fold convolution identity at order `k`,
/// over the leading `(M - boundary)` block.
pub fn verify_convolution(set: &GreenCoefficientSet, k: usize, boundary: usize) -> Result<f64> {
    if k > set.max_order() {
        return Err(Error::OrderTooHigh {
            requested: k,
            available: set.max_order(),
        });
    }
    if boundary >= set.size() {
        return Err(Error::InvalidArgument(format!(
            "boundary discard {boundary} leaves no inner block of a {}-mode set",
            set.size()
        )));
    }
    let product = convolution_power(&set.q, set.order.get(), k);
    let inner = set.size() - boundary;
    let diff = (product - &set.big_q[k]).view((0, 0), (inner, inner)).into_owned();
    Ok(max_abs(&diff))
}

/// Default inner-block discard `M / 4`.
pub fn default_boundary(size: usize) -> usize {
    size / 4
}

/// Leading-term resummation for `N = 2`: `q ≈ Δ ⊙ <n|sqrt(Sigma)|m>`, with
/// `sqrt(Sigma)` taken from the binomial series through the table's `J`.
///
/// An approximation, not a solution of the convolution identity.
pub fn q_resummed_approx(table: &SigmaPowerTable, eigenvalues: &[f64], lambda: f64) -> Result<DMatrix<f64>> {
    check_sizes(table, eigenvalues)?;
    table.check_lambda(lambda)?;
    let size = eigenvalues.len();
    let mut sqrt_sigma = DMatrix::zeros(size, size);
    let mut w = 1.0;
    for j in 0..=table.max_power() {
        sqrt_sigma += table.power(j)? * (binom_half(j) * w);
        w *= lambda;
    }
    q_resummed_from_matrix(eigenvalues, &sqrt_sigma)
}

/// `Δ^{[1/2]} ⊙ B` for a given matrix `B = <n|sqrt(Sigma)|m>`.
pub fn q_resummed_from_matrix(eigenvalues: &[f64], sqrt_sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if sqrt_sigma.nrows() != eigenvalues.len() || sqrt_sigma.ncols() != eigenvalues.len() {
        return Err(Error::DimensionMismatch("sqrt(Sigma) matrix vs eigenvalues".into()));
    }
    let pw = RootPowers::new(RootOrder::new(2)?, eigenvalues)?;
    Ok(DMatrix::from_fn(eigenvalues.len(), eigenvalues.len(), |n, m| {
        pw.delta(n, m) * sqrt_sigma[(n, m)]
    }))
}

/// Writes `row,col,value` (1-based, 17 significant digits).
pub fn write_matrix_csv<W: Write>(matrix: &DMatrix<f64>, mut out: W) -> Result<()> {
    writeln!(out, "row,col,value")?;
    for n in 0..matrix.nrows() {
        for m in 0..matrix.ncols() {
            writeln!(out, "{},{},{}", n + 1, m + 1, crate::export::fmt17(matrix[(n, m)]))?;
        }
    }
    Ok(())
}
