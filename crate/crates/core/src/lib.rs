//! Rational-order spectral zeta sum rules for the heterogeneous Dirichlet
//! Helmholtz problem `-Δψ = E (1 + λσ) ψ` on strings and rectangles.

pub mod basis;
pub mod density;
pub mod error;
pub mod export;
pub mod green;
pub mod kernels;
pub mod linalg;
pub mod numeric;
pub mod oracle;
pub mod quadrature;
pub mod sigma;
pub mod sum_rules;

pub use basis::{BasisKind, ModeBasis, ModeIndex};
pub use density::{DensityPerturbation, DensityProfile, Profile1d, SeparableTerm};
pub use error::{Error, Result};
pub use green::{CoefficientSource, GreenCoefficientSet};
pub use kernels::RootOrder;
pub use sigma::{build_sigma_table, CacheStatus, SigmaCache, SigmaPowerTable, TableOptions};
