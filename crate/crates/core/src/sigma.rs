//! Matrix elements `<n|sigma^j|m>` in the homogeneous eigenbasis and their
//! on-disk cache.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{sine_mode, BasisKind, ModeBasis};
use crate::density::{check_profile_basis, DensityPerturbation, DensityProfile, Factor, SeparableTerm};
use crate::error::{Error, Result};
use crate::numeric::dot_compensated;
use crate::quadrature::{CompositeRule, PANEL_ORDER};

/// Quadrature nodes per half-wave of the most oscillatory integrand.
const NODES_PER_HALF_WAVE: usize = 8;
/// Agreement required between the working rule and a rule with twice the panels.
const QUADRATURE_TOLERANCE: f64 = 1e-12;

const CACHE_MAGIC: &[u8; 8] = b"BZSPTAB\0";
const CACHE_VERSION: u32 = 1;

/// How the matrix elements were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureMeta {
    /// `"cosine-selection-rule"`, `"gauss-legendre-16"`, or both joined by `+`.
    pub rule: String,
    /// Largest number of quadrature nodes used along one axis (0 if none).
    pub nodes: usize,
    pub panels: usize,
    /// Largest observed `|int psi_n^2 - 1|` over the checked modes.
    pub orthonormality_defect: f64,
}

/// Options for building a table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableOptions {
    /// Fixed quadrature node count per axis; `None` picks it from the mode range.
    pub quadrature_nodes: Option<usize>,
    /// Force quadrature even for cosine profiles.
    pub force_quadrature: bool,
}

/// Truncated matrices `S_j[n,m] = <n|sigma^j|m>` for `j = 0..=J`.
///
/// `S_0` is the identity by construction; every `S_j` is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPowerTable {
    matrices: Vec<DMatrix<f64>>,
    quadrature: QuadratureMeta,
    sigma_sup: Option<f64>,
}

impl SigmaPowerTable {
    /// Table from explicit `S_1..S_J`; `S_0` is set to the identity.
    ///
    /// `sigma_sup` is `sup |sigma|` when known; it enables density-bound checks.
    pub fn from_matrices(powers: Vec<DMatrix<f64>>, sigma_sup: Option<f64>) -> Result<Self> {
        let size = powers.first().map(|m| m.nrows()).ok_or_else(|| {
            Error::InvalidArgument("at least one power matrix (sigma^1) is required".into())
        })?;
        for (j, m) in powers.iter().enumerate() {
            if m.nrows() != size || m.ncols() != size {
                return Err(Error::DimensionMismatch(format!(
                    "sigma^{} is {}x{}, expected {size}x{size}",
                    j + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m != &m.transpose() {
                return Err(Error::InvalidArgument(format!("sigma^{} is not symmetric", j + 1)));
            }
        }
        let mut matrices = Vec::with_capacity(powers.len() + 1);
        matrices.push(DMatrix::identity(size, size));
        matrices.extend(powers);
        Ok(Self {
            matrices,
            quadrature: QuadratureMeta {
                rule: "explicit".into(),
                nodes: 0,
                panels: 0,
                orthonormality_defect: 0.0,
            },
            sigma_sup,
        })
    }

    pub fn max_power(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn size(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// `S_j`.
    pub fn power(&self, j: usize) -> Result<&DMatrix<f64>> {
        self.matrices.get(j).ok_or(Error::OrderTooHigh {
            requested: j,
            available: self.max_power(),
        })
    }

    /// `<n|sigma^j|m>` with 1-based mode indices.
    pub fn element(&self, j: usize, n: usize, m: usize) -> Result<f64> {
        let s = self.power(j)?;
        for i in [n, m] {
            if i == 0 || i > self.size() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.size(),
                });
            }
        }
        Ok(s[(n - 1, m - 1)])
    }

    pub fn quadrature(&self) -> &QuadratureMeta {
        &self.quadrature
    }

    pub fn sigma_sup(&self) -> Option<f64> {
        self.sigma_sup
    }

    /// Checks `sup |lambda sigma| < 1` when the bound is known.
    pub fn check_lambda(&self, lambda: f64) -> Result<()> {
        match self.sigma_sup {
            Some(sup) => crate::density::check_density_bound(lambda, sup),
            None if lambda.is_finite() => Ok(()),
            None => Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}"))),
        }
    }

    /// Leading `size x size` blocks of the first `max_power + 1` matrices.
    pub fn truncated(&self, size: usize, max_power: usize) -> Result<Self> {
        if size == 0 || size > self.size() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a {}-mode table to {size} modes",
                self.size()
            )));
        }
        if max_power > self.max_power() {
            return Err(Error::OrderTooHigh {
                requested: max_power,
                available: self.max_power(),
            });
        }
        Ok(Self {
            matrices: self.matrices[..=max_power]
                .iter()
                .map(|m| m.view((0, 0), (size, size)).into_owned())
                .collect(),
            quadrature: self.quadrature.clone(),
            sigma_sup: self.sigma_sup,
        })
    }
}

/// Single element `<n|sigma^j|m>` (1-based modes).
pub fn sigma_power_element(
    basis: &ModeBasis,
    profile: &DensityProfile,
    j: usize,
    n: usize,
    m: usize,
) -> Result<f64> {
    check_profile_basis(profile, basis)?;
    let modes = basis.raw_modes();
    for i in [n, m] {
        if i == 0 || i > modes.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: modes.len(),
            });
        }
    }
    let (a, b) = (modes[n - 1], modes[m - 1]);
    if j == 0 {
        return Ok(if n == m { 1.0 } else { 0.0 });
    }
    let opts = TableOptions::default();
    match *basis.kind() {
        BasisKind::String1d { length } => {
            let factor = Factor::new(vec![(profile.as_line().expect("line profile"), j)]);
            let top = a[0].max(b[0]);
            let (mat, _) = factor_matrix(&factor, top, length, &opts)?;
            Ok(mat[(a[0] - 1, b[0] - 1)])
        }
        BasisKind::Rectangle2d { a: lx, b: ly } => {
            let mut total = 0.0;
            for (coef, fx, fy) in expand_power(&profile.terms(), j) {
                let (mx, _) = factor_matrix(&fx, a[0].max(b[0]), lx, &opts)?;
                let (my, _) = factor_matrix(&fy, a[1].max(b[1]), ly, &opts)?;
                total += coef * mx[(a[0] - 1, b[0] - 1)] * my[(a[1] - 1, b[1] - 1)];
            }
            Ok(total)
        }
    }
}

/// Builds `S_0..S_J` for the retained modes of `basis`.
pub fn build_sigma_table(
    basis: &ModeBasis,
    profile: &DensityProfile,
    max_power: usize,
    opts: &TableOptions,
) -> Result<SigmaPowerTable> {
    check_profile_basis(profile, basis)?;
    if max_power == 0 {
        return Err(Error::InvalidArgument("max power J must be at least 1".into()));
    }
    let size = basis.mode_count();
    let modes = basis.raw_modes();
    let sigma_sup = Some(profile.sup_abs(basis.kind()));
    let mut matrices = vec![DMatrix::identity(size, size)];
    let mut meta = MetaAccumulator::default();

    if profile.is_zero() {
        matrices.extend((1..=max_power).map(|_| DMatrix::zeros(size, size)));
        return Ok(SigmaPowerTable {
            matrices,
            quadrature: meta.finish(),
            sigma_sup,
        });
    }

    match *basis.kind() {
        BasisKind::String1d { length } => {
            let line = profile.as_line().expect("line profile");
            for j in 1..=max_power {
                let factor = Factor::new(vec![(line.clone(), j)]);
                let (mat, info) = factor_matrix(&factor, size, length, opts)?;
                meta.add(info);
                matrices.push(mat);
            }
        }
        BasisKind::Rectangle2d { a, b } => {
            let [jmax, kmax] = basis.max_quantum_numbers();
            let terms = profile.terms();
            for j in 1..=max_power {
                let mut s = DMatrix::zeros(size, size);
                for (coef, fx, fy) in expand_power(&terms, j) {
                    if coef == 0.0 {
                        continue;
                    }
                    let (mx, ix) = factor_matrix(&fx, jmax, a, opts)?;
                    let (my, iy) = factor_matrix(&fy, kmax, b, opts)?;
                    meta.add(ix);
                    meta.add(iy);
                    for q in 0..size {
                        let mq = modes[q];
                        for p in 0..=q {
                            let mp = modes[p];
                            let v = coef * mx[(mp[0] - 1, mq[0] - 1)] * my[(mp[1] - 1, mq[1] - 1)];
                            if v != 0.0 {
                                s[(p, q)] += v;
                            }
                        }
                    }
                }
                for q in 0..size {
                    for p in 0..q {
                        s[(q, p)] = s[(p, q)];
                    }
                }
                matrices.push(s);
            }
        }
    }
    Ok(SigmaPowerTable {
        matrices,
        quadrature: meta.finish(),
        sigma_sup,
    })
}

/// Multinomial expansion of `(sum_t w_t f_t(x) g_t(y))^power` into separable factors.
fn expand_power(terms: &[SeparableTerm], power: usize) -> Vec<(f64, Factor, Factor)> {
    let mut out = Vec::new();
    let mut counts = vec![0usize; terms.len()];
    compositions(power, 0, &mut counts, &mut |c| {
        let mut coef = multinomial(power, c);
        for (t, k) in terms.iter().zip(c) {
            coef *= t.weight.powi(*k as i32);
        }
        let fx = Factor::new(terms.iter().zip(c).map(|(t, k)| (t.x.clone(), *k)).collect());
        let fy = Factor::new(terms.iter().zip(c).map(|(t, k)| (t.y.clone(), *k)).collect());
        out.push((coef, fx, fy));
    });
    out
}

fn compositions(rest: usize, slot: usize, counts: &mut [usize], visit: &mut dyn FnMut(&[usize])) {
    if slot + 1 == counts.len() {
        counts[slot] = rest;
        visit(counts);
        return;
    }
    for k in 0..=rest {
        counts[slot] = k;
        compositions(rest - k, slot + 1, counts, visit);
    }
}

fn multinomial(n: usize, parts: &[usize]) -> f64 {
    let mut result = 1.0;
    let mut remaining = n;
    for &k in parts {
        for i in 0..k {
            result *= (remaining - i) as f64 / (i + 1) as f64;
        }
        remaining -= k;
    }
    result
}

struct FactorInfo {
    rule: &'static str,
    nodes: usize,
    panels: usize,
    defect: f64,
}

#[derive(Default)]
struct MetaAccumulator {
    rules: Vec<&'static str>,
    nodes: usize,
    panels: usize,
    defect: f64,
}

impl MetaAccumulator {
    fn add(&mut self, info: FactorInfo) {
        if !self.rules.contains(&info.rule) {
            self.rules.push(info.rule);
        }
        self.nodes = self.nodes.max(info.nodes);
        self.panels = self.panels.max(info.panels);
        self.defect = self.defect.max(info.defect);
    }

    fn finish(mut self) -> QuadratureMeta {
        self.rules.sort_unstable();
        QuadratureMeta {
            rule: if self.rules.is_empty() {
                "none".into()
            } else {
                self.rules.join("+")
            },
            nodes: self.nodes,
            panels: self.panels,
            orthonormality_defect: self.defect,
        }
    }
}

/// `<n|F|m>` for `n, m = 1..=n_max` on `[0, len]`.
fn factor_matrix(
    factor: &Factor,
    n_max: usize,
    len: f64,
    opts: &TableOptions,
) -> Result<(DMatrix<f64>, FactorInfo)> {
    if !opts.force_quadrature {
        if let Some(c) = factor.cosine_series() {
            return Ok((cosine_selection_matrix(&c, n_max), FactorInfo {
                rule: "cosine-selection-rule",
                nodes: 0,
                panels: 0,
                defect: 0.0,
            }));
        }
    }
    quadrature_matrix(factor, n_max, len, opts)
}

/// `<n|sum_k c_k cos(k pi x/L)|m> = (c_{|n-m|} (1 + delta_nm) - c_{n+m}) / 2`.
fn cosine_selection_matrix(c: &[f64], n_max: usize) -> DMatrix<f64> {
    let coef = |k: usize| c.get(k).copied().unwrap_or(0.0);
    let mut m = DMatrix::zeros(n_max, n_max);
    for q in 1..=n_max {
        for p in 1..=q {
            let diff = coef(q - p) * if p == q { 2.0 } else { 1.0 };
            let v = 0.5 * (diff - coef(p + q));
            m[(p - 1, q - 1)] = v;
            m[(q - 1, p - 1)] = v;
        }
    }
    m
}

fn panel_count(factor: &Factor, n_max: usize, opts: &TableOptions) -> usize {
    let nodes = opts
        .quadrature_nodes
        .unwrap_or(NODES_PER_HALF_WAVE * (n_max + factor.bandwidth()));
    let mut panels = nodes.div_ceil(PANEL_ORDER).max(1);
    if let Some(g) = factor.grid_intervals() {
        panels = panels.div_ceil(g) * g;
    }
    panels
}

struct SampledModes {
    /// `phi_n(x_q) sqrt(w_q)`, one row per mode.
    rows: Vec<Vec<f64>>,
    f: Vec<f64>,
}

fn sample(factor: &Factor, modes: &[usize], len: f64, rule: &CompositeRule) -> SampledModes {
    let rows = modes
        .iter()
        .map(|&n| {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| sine_mode(n, len, *x) * w.sqrt())
                .collect()
        })
        .collect();
    let f = rule.nodes.iter().map(|x| factor.eval(*x, len)).collect();
    SampledModes { rows, f }
}

fn quadrature_matrix(
    factor: &Factor,
    n_max: usize,
    len: f64,
    opts: &TableOptions,
) -> Result<(DMatrix<f64>, FactorInfo)> {
    use rayon::prelude::*;

    let panels = panel_count(factor, n_max, opts);
    let rule = CompositeRule::new(0.0, len, panels);
    let all: Vec<usize> = (1..=n_max).collect();
    let sampled = sample(factor, &all, len, &rule);
    let weighted: Vec<Vec<f64>> = sampled
        .rows
        .iter()
        .map(|r| r.iter().zip(&sampled.f).map(|(a, f)| a * f).collect())
        .collect();
    let upper: Vec<Vec<f64>> = (0..n_max)
        .into_par_iter()
        .map(|q| (0..=q).map(|p| dot_compensated(&sampled.rows[p], &weighted[q])).collect())
        .collect();
    let mut m = DMatrix::zeros(n_max, n_max);
    for (q, col) in upper.iter().enumerate() {
        for (p, v) in col.iter().enumerate() {
            m[(p, q)] = *v;
            m[(q, p)] = *v;
        }
    }

    // Refinement check on the most oscillatory row plus orthonormality of the top mode.
    let fine = CompositeRule::new(0.0, len, 2 * panels);
    let top = [n_max];
    let fine_top = sample(factor, &top, len, &fine);
    let fine_all = sample(&Factor::new(vec![]), &all, len, &fine);
    let scale = sampled.f.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
    let mut deviation = 0.0_f64;
    for p in 0..n_max {
        let refined: f64 = fine_top.rows[0]
            .iter()
            .zip(&fine_all.rows[p])
            .zip(&fine_top.f)
            .map(|((a, b), f)| a * b * f)
            .sum();
        deviation = deviation.max((refined - m[(p, n_max - 1)]).abs() / scale);
    }
    let norm: f64 = sampled.rows[n_max - 1].iter().map(|v| v * v).sum();
    let defect = (norm - 1.0).abs();
    deviation = deviation.max(defect);
    if !(deviation <= QUADRATURE_TOLERANCE) {
        return Err(Error::QuadratureNonConvergence {
            panels,
            deviation,
            tolerance: QUADRATURE_TOLERANCE,
        });
    }
    Ok((m, FactorInfo {
        rule: "gauss-legendre-16",
        nodes: rule.node_count(),
        panels,
        defect,
    }))
}

/// `<n|Sigma^power|m>` on a string by Gauss-Legendre quadrature.
///
/// Used for non-polynomial functions of the density such as `sqrt(Sigma)`.
/// The rule is refined until a doubling of the panel count changes no
/// entry by more than the quadrature tolerance.
pub fn density_power_matrix(
    basis: &ModeBasis,
    perturbation: &DensityPerturbation,
    power: f64,
) -> Result<DMatrix<f64>> {
    let length = match *basis.kind() {
        BasisKind::String1d { length } => length,
        BasisKind::Rectangle2d { .. } => {
            return Err(Error::ProfileDimension(
                "quadrature of powers of the density is available on strings only".into(),
            ))
        }
    };
    perturbation.validate(basis.kind())?;
    let size = basis.mode_count();
    let kind = *basis.kind();
    let f = |x: f64| perturbation.density(&kind, x, 0.0).powf(power);
    let build = |panels: usize| {
        let rule = CompositeRule::new(0.0, length, panels);
        let fx: Vec<f64> = rule.nodes.iter().map(|x| f(*x)).collect();
        let rows: Vec<Vec<f64>> = (1..=size)
            .map(|n| {
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| sine_mode(n, length, *x) * w.sqrt())
                    .collect()
            })
            .collect();
        let mut m = DMatrix::zeros(size, size);
        for q in 0..size {
            let weighted: Vec<f64> = rows[q].iter().zip(&fx).map(|(a, b)| a * b).collect();
            for p in 0..=q {
                let v = dot_compensated(&rows[p], &weighted);
                m[(p, q)] = v;
                m[(q, p)] = v;
            }
        }
        m
    };
    let mut panels = (NODES_PER_HALF_WAVE * (size + 16)).div_ceil(PANEL_ORDER);
    let mut current = build(panels);
    for _ in 0..6 {
        let refined = build(2 * panels);
        let deviation = (&refined - &current).amax();
        if deviation <= QUADRATURE_TOLERANCE {
            return Ok(refined);
        }
        current = refined;
        panels *= 2;
    }
    Err(Error::QuadratureNonConvergence {
        panels,
        deviation: f64::NAN,
        tolerance: QUADRATURE_TOLERANCE,
    })
}

/// Content-addressed on-disk store of sigma-power tables.
#[derive(Debug, Clone)]
pub struct SigmaCache {
    dir: PathBuf,
}

/// Outcome of a cached build.
#[derive(Debug, Clone, PartialEq)]
pub enum CacheStatus {
    Hit,
    Miss,
    /// A file existed but failed validation; the table was recomputed.
    Recomputed(String),
}

#[derive(Serialize)]
struct CacheKey<'a> {
    format: u32,
    basis: &'a BasisKind,
    modes: usize,
    profile: &'a DensityProfile,
    max_power: usize,
    options: &'a TableOptions,
}

impl SigmaCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Hex SHA-256 of the canonical description of the table.
    pub fn key(
        basis: &ModeBasis,
        profile: &DensityProfile,
        max_power: usize,
        opts: &TableOptions,
    ) -> Result<String> {
        let key = CacheKey {
            format: CACHE_VERSION,
            basis: basis.kind(),
            modes: basis.mode_count(),
            profile,
            max_power,
            options: opts,
        };
        let bytes = serde_json::to_vec(&key)?;
        Ok(hex(&Sha256::digest(&bytes)))
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.bzt"))
    }

    /// Loads the table if a valid cache file exists, otherwise builds and stores it.
    pub fn build(
        &self,
        basis: &ModeBasis,
        profile: &DensityProfile,
        max_power: usize,
        opts: &TableOptions,
    ) -> Result<(SigmaPowerTable, CacheStatus)> {
        let key = Self::key(basis, profile, max_power, opts)?;
        let path = self.path_for(&key);
        let status = if path.exists() {
            match read_table(&path, &key, basis.mode_count(), max_power) {
                Ok(table) => return Ok((table, CacheStatus::Hit)),
                Err(e) => CacheStatus::Recomputed(e.to_string()),
            }
        } else {
            CacheStatus::Miss
        };
        let table = build_sigma_table(basis, profile, max_power, opts)?;
        fs::create_dir_all(&self.dir)?;
        write_table(&path, &key, &table)?;
        Ok((table, status))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
struct StoredMeta {
    quadrature: QuadratureMeta,
    sigma_sup: Option<f64>,
}

fn write_table(path: &Path, key: &str, table: &SigmaPowerTable) -> Result<()> {
    let meta = serde_json::to_vec(&StoredMeta {
        quadrature: table.quadrature.clone(),
        sigma_sup: table.sigma_sup,
    })?;
    let size = table.size();
    let mut buf = Vec::with_capacity(128 + meta.len() + 8 * size * size * table.matrices.len());
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&key_bytes(key));
    buf.extend_from_slice(&(table.max_power() as u64).to_le_bytes());
    buf.extend_from_slice(&(size as u64).to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta);
    for m in &table.matrices {
        for v in m.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let checksum = Sha256::digest(&buf);
    buf.extend_from_slice(&checksum);

    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&buf)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn key_bytes(key: &str) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (i, chunk) in key.as_bytes().chunks(2).take(32).enumerate() {
        let s = std::str::from_utf8(chunk).unwrap_or("00");
        out[i] = u8::from_str_radix(s, 16).unwrap_or(0);
    }
    out
}

fn read_table(path: &Path, key: &str, size: usize, max_power: usize) -> Result<SigmaPowerTable> {
    let bad = |reason: &str| Error::Cache {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let buf = fs::read(path)?;
    if buf.len() < 8 + 4 + 32 + 24 + 32 {
        return Err(bad("truncated header"));
    }
    let (body, checksum) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != checksum {
        return Err(bad("checksum mismatch"));
    }
    let mut pos = 0;
    let mut take = |n: usize| {
        let s = &body[pos..(pos + n).min(body.len())];
        pos += n;
        s
    };
    if take(8) != CACHE_MAGIC {
        return Err(bad("bad magic"));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap_or([0; 4]));
    let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap_or([0; 8]));
    if u32_at(take(4)) != CACHE_VERSION {
        return Err(bad("unsupported version"));
    }
    if take(32) != key_bytes(key) {
        return Err(bad("content hash mismatch"));
    }
    let stored_power = u64_at(take(8)) as usize;
    let stored_size = u64_at(take(8)) as usize;
    if stored_power != max_power || stored_size != size {
        return Err(bad("dimension mismatch"));
    }
    let meta_len = u64_at(take(8)) as usize;
    let expected = 8 + 4 + 32 + 3 * 8 + meta_len + 8 * size * size * (max_power + 1);
    if expected != body.len() {
        return Err(bad("payload length mismatch"));
    }
    let meta: StoredMeta = serde_json::from_slice(take(meta_len))?;
    let mut matrices = Vec::with_capacity(max_power + 1);
    for _ in 0..=max_power {
        let data = take(8 * size * size);
        let values: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        matrices.push(DMatrix::from_vec(size, size, values));
    }
    Ok(SigmaPowerTable {
        matrices,
        quadrature: meta.quadrature,
        sigma_sup: meta.sigma_sup,
    })
}
