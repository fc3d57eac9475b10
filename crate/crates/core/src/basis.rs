//! Dirichlet eigenbasis of the homogeneous problem on a string or a rectangle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometry of the homogeneous problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasisKind {
    /// Interval `[0, length]`.
    String1d { length: f64 },
    /// Rectangle `[0, a] x [0, b]`.
    Rectangle2d { a: f64, b: f64 },
}

impl BasisKind {
    pub fn dimension(&self) -> usize {
        match self {
            BasisKind::String1d { .. } => 1,
            BasisKind::Rectangle2d { .. } => 2,
        }
    }

    /// Length (1D) or area (2D) of the domain.
    pub fn measure(&self) -> f64 {
        match *self {
            BasisKind::String1d { length } => length,
            BasisKind::Rectangle2d { a, b } => a * b,
        }
    }

    /// Number of boundary points (1D) or perimeter (2D).
    pub fn boundary_measure(&self) -> f64 {
        match *self {
            BasisKind::String1d { .. } => 2.0,
            BasisKind::Rectangle2d { a, b } => 2.0 * (a + b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BasisKind::String1d { length } => length.is_finite() && length > 0.0,
            BasisKind::Rectangle2d { a, b } => a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "domain lengths must be positive and finite: {self:?}"
            )))
        }
    }

    fn eigenvalue_of(&self, mode: [usize; 2]) -> f64 {
        match *self {
            BasisKind::String1d { length } => {
                let k = mode[0] as f64 * PI / length;
                k * k
            }
            BasisKind::Rectangle2d { a, b } => {
                let (j, k) = (mode[0] as f64, mode[1] as f64);
                PI * PI * (j * j / (a * a) + k * k / (b * b))
            }
        }
    }
}

/// Multi-index of a retained mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeIndex {
    Line(usize),
    Plane(usize, usize),
}

/// Truncated eigenbasis: the `M` lowest Dirichlet modes, sorted by ascending
/// eigenvalue with lexicographic tie-break on the multi-index.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    kind: BasisKind,
    modes: Vec<[usize; 2]>,
    eigenvalues: Vec<f64>,
}

impl ModeBasis {
    pub fn new(kind: BasisKind, mode_count: usize) -> Result<Self> {
        kind.validate()?;
        if mode_count == 0 {
            return Err(Error::InvalidArgument("mode count must be at least 1".into()));
        }
        let modes = match kind {
            BasisKind::String1d { .. } => (1..=mode_count).map(|n| [n, 0]).collect(),
            BasisKind::Rectangle2d { a, b } => lowest_rectangle_modes(&kind, a, b, mode_count),
        };
        let eigenvalues = modes.iter().map(|m| kind.eigenvalue_of(*m)).collect();
        Ok(Self {
            kind,
            modes,
            eigenvalues,
        })
    }

    pub fn string(length: f64, mode_count: usize) -> Result<Self> {
        Self::new(BasisKind::String1d { length }, mode_count)
    }

    pub fn rectangle(a: f64, b: f64, mode_count: usize) -> Result<Self> {
        Self::new(BasisKind::Rectangle2d { a, b }, mode_count)
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Eigenvalue of mode `n` (1-based).
    pub fn eigenvalue(&self, n: usize) -> Result<f64> {
        self.check_index(n)?;
        Ok(self.eigenvalues[n - 1])
    }

    /// All retained eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Multi-index of mode `n` (1-based).
    pub fn mode(&self, n: usize) -> Result<ModeIndex> {
        self.check_index(n)?;
        let m = self.modes[n - 1];
        Ok(match self.kind {
            BasisKind::String1d { .. } => ModeIndex::Line(m[0]),
            BasisKind::Rectangle2d { .. } => ModeIndex::Plane(m[0], m[1]),
        })
    }

    pub(crate) fn raw_modes(&self) -> &[[usize; 2]] {
        &self.modes
    }

    /// Largest quantum number along each axis among the retained modes.
    pub(crate) fn max_quantum_numbers(&self) -> [usize; 2] {
        self.modes.iter().fold([0, 0], |acc, m| [acc[0].max(m[0]), acc[1].max(m[1])])
    }

    /// Same geometry with a different truncation.
    pub fn with_mode_count(&self, mode_count: usize) -> Result<Self> {
        Self::new(self.kind, mode_count)
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.modes.len() {
            Err(Error::IndexOutOfRange {
                index: n,
                len: self.modes.len(),
            })
        } else {
            Ok(())
        }
    }
}

/// Normalised Dirichlet sine mode on `[0, length]`.
#[inline]
pub fn sine_mode(n: usize, length: f64, x: f64) -> f64 {
    (2.0 / length).sqrt() * (n as f64 * PI * x / length).sin()
}

fn lowest_rectangle_modes(kind: &BasisKind, a: f64, b: f64, count: usize) -> Vec<[usize; 2]> {
    // Weyl estimate of the cutoff, widened until enough lattice points fit.
    let mut cutoff = 4.0 * PI * count as f64 / (a * b) * 1.5 + PI * PI * (1.0 / (a * a) + 1.0 / (b * b));
    loop {
        let jmax = (cutoff.sqrt() * a / PI).floor() as usize;
        let mut found = Vec::new();
        for j in 1..=jmax.max(1) {
            let rest = cutoff / (PI * PI) - (j * j) as f64 / (a * a);
            if rest <= 0.0 {
                break;
            }
            let kmax = (rest.sqrt() * b).floor() as usize;
            for k in 1..=kmax {
                found.push([j, k]);
            }
        }
        if found.len() >= count {
            found.sort_by(|x, y| {
                kind.eigenvalue_of(*x)
                    .total_cmp(&kind.eigenvalue_of(*y))
                    .then(x.cmp(y))
            });
            found.truncate(count);
            return found;
        }
        cutoff *= 1.5;
    }
}
