//! Run configuration: JSON file, command-line overrides and validation.

use std::path::PathBuf;

use billzeta::sum_rules::{DiagonalMode, RationalOrderSpec};
use billzeta::{BasisKind, DensityPerturbation, DensityProfile, ModeBasis, Profile1d, RootOrder, TableOptions};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_CACHE_DIR: &str = ".billzeta-cache";
pub const CACHE_ENV: &str = "BILLZETA_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    #[default]
    Closed,
    Trace1,
    Trace2,
    Oracle,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Truncation {
    /// Number of retained modes `M`.
    pub modes: usize,
    pub quadrature_nodes: Option<usize>,
    /// Inner-block discard `b` for convolution residuals; `None` means `M/4`.
    pub boundary: Option<usize>,
    /// Fraction of the top oracle eigenvalues left out of direct sums.
    pub discard_fraction: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            modes: 200,
            quadrature_nodes: None,
            boundary: None,
            discard_fraction: billzeta::oracle::DEFAULT_DISCARD_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientOptions {
    /// `N` of the Green's function of order `1/N`.
    pub root_order: usize,
    pub max_order: usize,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        Self {
            root_order: 2,
            max_order: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    pub slope_threshold: f64,
    pub first_order_only: bool,
    pub floor_factor: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            slope_threshold: 2.7,
            first_order_only: false,
            floor_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputOptions {
    pub format: Format,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default = "default_basis")]
    pub basis: BasisKind,
    /// `None` selects `cos(2πx/L)`, or its separable product on a rectangle.
    #[serde(default)]
    pub profile: Option<DensityProfile>,
    #[serde(default)]
    pub truncation: Truncation,
    /// Rational orders, e.g. `"3/2"`, `"1+1/4"`, `"1/2+1/3"`.
    #[serde(default = "default_orders")]
    pub orders: Vec<String>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub diagonal_mode: DiagonalMode,
    #[serde(default)]
    pub route: Route,
    #[serde(default)]
    pub coefficients: CoefficientOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
    #[serde(default)]
    pub output: OutputOptions,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub deterministic: bool,
}

fn default_basis() -> BasisKind {
    BasisKind::String1d { length: 1.0 }
}

fn default_orders() -> Vec<String> {
    vec!["1+1/2".into()]
}

fn default_lambdas() -> Vec<f64> {
    vec![0.1]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            basis: default_basis(),
            profile: None,
            truncation: Truncation::default(),
            orders: default_orders(),
            lambdas: default_lambdas(),
            diagonal_mode: DiagonalMode::default(),
            route: Route::default(),
            coefficients: CoefficientOptions::default(),
            verify: VerifyOptions::default(),
            output: OutputOptions::default(),
            cache_dir: None,
            deterministic: false,
        }
    }
}

/// The reference profile for a geometry.
pub fn reference_profile(kind: &BasisKind) -> DensityProfile {
    match kind {
        BasisKind::String1d { .. } => DensityProfile::cosine_mode(2),
        BasisKind::Rectangle2d { .. } => {
            let c = Profile1d::FourierCosine {
                coefficients: vec![0.0, 0.0, 1.0],
            };
            DensityProfile::product(c.clone(), c)
        }
    }
}

/// Parses config text; any syntax error, unknown key or type mismatch is one violation.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<String>> {
    serde_json::from_str(text).map_err(|e| vec![format!("config: {e}")])
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub orders: Option<Vec<String>>,
    pub lambdas: Option<Vec<String>>,
    pub route: Option<Route>,
    pub resummed: bool,
    pub deterministic: bool,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub modes: Option<usize>,
    pub root_order: Option<usize>,
    pub max_order: Option<usize>,
    pub first_order_only: bool,
    pub threshold: Option<f64>,
}

impl RunConfig {
    /// Applies overrides; malformed `--lambda` entries are returned as violations.
    pub fn apply(&mut self, o: &Overrides) -> Vec<String> {
        let mut violations = Vec::new();
        if let Some(orders) = &o.orders {
            self.orders = orders.clone();
        }
        if let Some(lambdas) = &o.lambdas {
            let mut parsed = Vec::new();
            for text in lambdas {
                match text.trim().parse::<f64>() {
                    Ok(v) => parsed.push(v),
                    Err(_) => violations.push(format!("--lambda: '{text}' is not a number")),
                }
            }
            self.lambdas = parsed;
        }
        if let Some(route) = o.route {
            self.route = route;
        }
        if o.resummed {
            self.diagonal_mode = DiagonalMode::Resummed;
        }
        self.deterministic |= o.deterministic;
        if o.cache_dir.is_some() {
            self.cache_dir = o.cache_dir.clone();
        }
        if o.out.is_some() {
            self.output.path = o.out.clone();
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
        if let Some(m) = o.modes {
            self.truncation.modes = m;
        }
        if let Some(n) = o.root_order {
            self.coefficients.root_order = n;
        }
        if let Some(k) = o.max_order {
            self.coefficients.max_order = k;
        }
        self.verify.first_order_only |= o.first_order_only;
        if let Some(t) = o.threshold {
            self.verify.slope_threshold = t;
        }
        violations
    }

    /// Canonical form: default profile spelled out, orders written as pair labels.
    pub fn normalized(&self) -> RunConfig {
        let mut c = self.clone();
        if c.profile.is_none() {
            c.profile = Some(reference_profile(&c.basis));
        }
        c.orders = c
            .orders
            .iter()
            .map(|o| RationalOrderSpec::parse(o).map(|s| s.label()).unwrap_or_else(|_| o.clone()))
            .collect();
        c
    }

    /// Cache directory: flag or config, then the environment, then the default.
    pub fn resolved_cache_dir(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SumRule,
    Coeffs,
    Verify,
    Spectrum,
}

/// Everything a command needs, after validation.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: RunConfig,
    pub basis: ModeBasis,
    pub profile: DensityProfile,
    pub specs: Vec<RationalOrderSpec>,
    pub table_options: TableOptions,
    pub boundary: usize,
}

/// Validates the config for `command`, reporting every violation at once.
pub fn validate(config: &RunConfig, command: Command) -> Result<Plan, Vec<String>> {
    let mut v = Vec::new();
    if config.version != CONFIG_VERSION {
        v.push(format!("version: expected {CONFIG_VERSION}, got {}", config.version));
    }
    if let Err(e) = config.basis.validate() {
        v.push(format!("basis: {e}"));
    }
    let modes = config.truncation.modes;
    let basis = if modes < 2 {
        v.push(format!("truncation.modes: need at least 2 modes, got {modes}"));
        None
    } else {
        ModeBasis::new(config.basis, modes).map_err(|e| v.push(format!("basis: {e}"))).ok()
    };
    let profile = config.profile.clone().unwrap_or_else(|| reference_profile(&config.basis));
    let profile_ok = match profile.validate_for(&config.basis) {
        Ok(()) => true,
        Err(e) => {
            v.push(format!("profile: {e}"));
            false
        }
    };
    if let Some(n) = config.truncation.quadrature_nodes {
        if n == 0 {
            v.push("truncation.quadrature_nodes: must be positive".into());
        }
    }
    let boundary = config.truncation.boundary.unwrap_or(modes / 4);
    if boundary >= modes.max(1) {
        v.push(format!("truncation.boundary: {boundary} must be below the mode count {modes}"));
    }
    let f = config.truncation.discard_fraction;
    if !(0.0..1.0).contains(&f) {
        v.push(format!("truncation.discard_fraction: {f} must lie in [0, 1)"));
    }

    let dimension = config.basis.dimension();
    let mut specs = Vec::new();
    if matches!(command, Command::SumRule | Command::Verify) {
        if config.orders.is_empty() {
            v.push("orders: at least one order is required".into());
        }
        for text in &config.orders {
            match RationalOrderSpec::parse(text).and_then(|s| s.validate_for(dimension).map(|_| s)) {
                Ok(s) => specs.push(s),
                Err(e) => v.push(format!("orders: '{text}': {e}")),
            }
        }
    }
    if command == Command::SumRule {
        for s in &specs {
            let bad = match (config.route, s) {
                (Route::Trace1, RationalOrderSpec::InvSum { .. }) => Some("trace1 needs an order 1+1/N"),
                (Route::Trace2, RationalOrderSpec::OnePlusInv { .. }) => Some("trace2 needs an order 1/N+1/N'"),
                _ => None,
            };
            if let Some(msg) = bad {
                v.push(format!("route: {msg}, got {}", s.label()));
            }
        }
    }

    if command != Command::Coeffs {
        if config.lambdas.is_empty() {
            v.push("lambdas: at least one value is required".into());
        }
        for &l in &config.lambdas {
            if !l.is_finite() {
                v.push(format!("lambdas: {l} is not finite"));
            } else if profile_ok {
                if let Err(e) = DensityPerturbation::new(profile.clone(), l).validate(&config.basis) {
                    v.push(format!("lambdas: {l}: {e}"));
                }
            }
        }
    }
    if command == Command::Verify {
        if config.lambdas.len() < 3 {
            v.push(format!("lambdas: the fit needs at least 3 values, got {}", config.lambdas.len()));
        }
        if config.lambdas.iter().any(|l| !(*l > 0.0)) {
            v.push("lambdas: the fit needs positive values".into());
        }
        if !config.verify.slope_threshold.is_finite() {
            v.push("verify.slope_threshold: must be finite".into());
        }
        if !(config.verify.floor_factor >= 0.0) {
            v.push("verify.floor_factor: must be non-negative".into());
        }
    }
    if command == Command::Coeffs {
        if let Err(e) = RootOrder::new(config.coefficients.root_order) {
            v.push(format!("coefficients.root_order: {e}"));
        }
        if config.coefficients.max_order == 0 {
            v.push("coefficients.max_order: must be at least 1".into());
        }
    }

    match basis {
        Some(basis) if v.is_empty() => Ok(Plan {
            config: config.normalized(),
            basis,
            profile,
            specs,
            table_options: TableOptions {
                quadrature_nodes: config.truncation.quadrature_nodes,
                force_quadrature: false,
            },
            boundary,
        }),
        _ => Err(v),
    }
}
