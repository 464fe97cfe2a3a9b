use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite wall height used outside a hard-wall box; the actual wall is the
/// Dirichlet boundary of the grid, this value only penalizes stray points.
const BOX_WALL: f64 = 1e9;

/// One-dimensional confining potential with an exact analytic derivative.
///
/// Natural units throughout: hbar = 1, mass = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// V(x) = omega^2 x^2 / 2
    Harmonic { omega: f64 },
    /// V(x) = g x^4
    Quartic { g: f64 },
    /// V(x) = a x^4 - b x^2
    DoubleWell { a: f64, b: f64 },
    /// V(x) = 0 for |x| <= half_width, hard walls outside.
    Box { half_width: f64 },
    /// V(x) = sum_k coefficients[k] x^k
    Polynomial { coefficients: Vec<f64> },
}

impl Potential {
    /// Evaluate V(x) and its exact analytic derivative V'(x).
    pub fn evaluate(&self, x: f64) -> (f64, f64) {
        match self {
            Potential::Harmonic { omega } => {
                let w2 = omega * omega;
                (0.5 * w2 * x * x, w2 * x)
            }
            Potential::Quartic { g } => (g * x.powi(4), 4.0 * g * x.powi(3)),
            Potential::DoubleWell { a, b } => {
                (a * x.powi(4) - b * x * x, 4.0 * a * x.powi(3) - 2.0 * b * x)
            }
            Potential::Box { half_width } => {
                if x.abs() <= *half_width {
                    (0.0, 0.0)
                } else {
                    (BOX_WALL, 0.0)
                }
            }
            Potential::Polynomial { coefficients } => {
                // Horner for V and V' in one pass, highest order first.
                let mut v = 0.0;
                let mut dv = 0.0;
                for &c in coefficients.iter().rev() {
                    dv = dv * x + v;
                    v = v * x + c;
                }
                (v, dv)
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.evaluate(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.evaluate(x).1
    }

    /// Whether the bound-state problem is well posed for this kind
    /// (discrete spectrum under the truncation in use).
    pub fn check_confining(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::NonConfining(msg));
        match self {
            Potential::Harmonic { omega } => {
                if *omega > 0.0 {
                    Ok(())
                } else {
                    fail(format!("harmonic omega = {omega} must be > 0"))
                }
            }
            Potential::Quartic { g } => {
                if *g > 0.0 {
                    Ok(())
                } else {
                    fail(format!("quartic g = {g} must be > 0"))
                }
            }
            Potential::DoubleWell { a, .. } => {
                if *a > 0.0 {
                    Ok(())
                } else {
                    fail(format!("double-well a = {a} must be > 0"))
                }
            }
            Potential::Box { half_width } => {
                if *half_width > 0.0 {
                    Ok(())
                } else {
                    fail(format!("box half_width = {half_width} must be > 0"))
                }
            }
            Potential::Polynomial { coefficients } => {
                let deg = coefficients.iter().rposition(|c| *c != 0.0).unwrap_or(0);
                if deg >= 2 && deg % 2 == 0 && coefficients[deg] > 0.0 {
                    Ok(())
                } else {
                    fail(
                        "polynomial must have even degree >= 2 with positive leading coefficient"
                            .into(),
                    )
                }
            }
        }
    }

    /// Even potentials expect a grid symmetric about zero.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Potential::Harmonic { .. }
            | Potential::Quartic { .. }
            | Potential::DoubleWell { .. }
            | Potential::Box { .. } => true,
            Potential::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .all(|(k, c)| k % 2 == 0 || *c == 0.0),
        }
    }

    /// Hard-wall kinds confine by the boundary itself; their eigenfunctions
    /// do not decay at the wall, so the boundary-decay check is skipped.
    pub fn has_hard_walls(&self) -> bool {
        matches!(self, Potential::Box { .. })
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        match self {
            Potential::Harmonic { omega } => {
                eat(b"harmonic");
                eat(&omega.to_le_bytes());
            }
            Potential::Quartic { g } => {
                eat(b"quartic");
                eat(&g.to_le_bytes());
            }
            Potential::DoubleWell { a, b } => {
                eat(b"double_well");
                eat(&a.to_le_bytes());
                eat(&b.to_le_bytes());
            }
            Potential::Box { half_width } => {
                eat(b"box");
                eat(&half_width.to_le_bytes());
            }
            Potential::Polynomial { coefficients } => {
                eat(b"polynomial");
                for c in coefficients {
                    eat(&c.to_le_bytes());
                }
            }
        }
        h
    }
}
