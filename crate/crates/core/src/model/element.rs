use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{cr, J};

/// Feasible response set of a single metamaterial element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ElementConstraint {
    /// On/off tuning: `{0, varpi}`.
    Binary { varpi: f64 },
    /// Lorentzian resonance: the circle `(j + e^{j phi}) / 2`.
    Lorentzian,
}

impl ElementConstraint {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Binary { .. } => "binary",
            Self::Lorentzian => "lorentzian",
        }
    }

    pub fn contains(&self, v: Complex64, tol: f64) -> bool {
        match *self {
            Self::Binary { varpi } => v.norm() <= tol || (v - cr(varpi)).norm() <= tol,
            Self::Lorentzian => ((v - J * 0.5).norm() - 0.5).abs() <= tol,
        }
    }

    /// Nearest feasible point.
    ///
    /// Binary keeps only the real part and thresholds it at `varpi / 2`
    /// (the midpoint itself maps to `varpi`). The Lorentzian projection is
    /// radial from the circle centre; the centre itself maps to the
    /// zero-phase point `(1 + j) / 2`.
    pub fn project(&self, v: Complex64) -> Complex64 {
        match *self {
            Self::Binary { varpi } => {
                if v.re - varpi / 2.0 >= 0.0 {
                    cr(varpi)
                } else {
                    cr(0.0)
                }
            }
            Self::Lorentzian => {
                let off = v - J * 0.5;
                (Complex64::from_polar(1.0, off.arg()) + J) * 0.5
            }
        }
    }
}

pub fn project_element(v: Complex64, c: ElementConstraint) -> Complex64 {
    c.project(v)
}
