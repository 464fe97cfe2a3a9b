use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{BasisTag, SpectralBasis};
use crate::C64;

use super::coefficients::CoefficientMatrix;
use super::hermiticity_residual;

pub const OPERATOR_HERMITICITY_TOL: f64 = 1e-8;
/// Tolerance applied to states handed to `expectation`; evolved trajectories
/// are only guaranteed Hermitian to 1e-8.
pub const STATE_HERMITICITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// position
    X,
    /// momentum
    P,
    /// symmetrized product X P + P X
    XpSym,
}

/// Hermitian operator in the spectral-basis representation.
#[derive(Debug, Clone)]
pub struct ObservableOperator {
    pub dim: usize,
    pub kind: ObservableKind,
    pub entries: DMatrix<C64>,
    pub basis: BasisTag,
}

/// Matrix elements of X, P, or the symmetrized XP over the basis.
///
/// X_jk = Int g_j x g_k; P_jk uses the antisymmetrized central-difference
/// stencil, which is Hermitian by construction; XP_sym is formed from the two.
pub fn operator_matrix(kind: ObservableKind, basis: &SpectralBasis) -> ObservableOperator {
    let d = basis.dim;
    let n = basis.grid.n_points;
    let h = basis.grid.spacing();
    let w = basis.grid.weights();
    let xs = basis.grid.points();

    let entries = match kind {
        ObservableKind::X => DMatrix::from_fn(d, d, |j, k| {
            let mut s = 0.0;
            for a in 0..n {
                s += w[a] * basis.functions[(j, a)] * xs[a] * basis.functions[(k, a)];
            }
            C64::new(s, 0.0)
        }),
        ObservableKind::P => {
            // derivative by antisymmetric central differences: fourth order
            // inside, second order next to the walls, one-sided at the walls
            // (retained modes vanish there anyway)
            let g = |j: usize, a: usize| basis.functions[(j, a)];
            let deriv = |j: usize, a: usize| -> f64 {
                if a == 0 {
                    (g(j, 1) - g(j, 0)) / h
                } else if a == n - 1 {
                    (g(j, n - 1) - g(j, n - 2)) / h
                } else if a == 1 || a == n - 2 {
                    (g(j, a + 1) - g(j, a - 1)) / (2.0 * h)
                } else {
                    (-g(j, a + 2) + 8.0 * g(j, a + 1) - 8.0 * g(j, a - 1) + g(j, a - 2))
                        / (12.0 * h)
                }
            };
            let overlap = DMatrix::from_fn(d, d, |j, k| {
                let mut s = 0.0;
                for a in 0..n {
                    s += w[a] * basis.functions[(j, a)] * deriv(k, a);
                }
                s
            });
            DMatrix::from_fn(d, d, |j, k| {
                C64::new(0.0, -0.5 * (overlap[(j, k)] - overlap[(k, j)]))
            })
        }
        ObservableKind::XpSym => {
            let x = operator_matrix(ObservableKind::X, basis).entries;
            let p = operator_matrix(ObservableKind::P, basis).entries;
            &x * &p + &p * &x
        }
    };

    debug_assert!(hermiticity_residual(&entries) <= OPERATOR_HERMITICITY_TOL);
    ObservableOperator {
        dim: d,
        kind,
        entries,
        basis: basis.tag(),
    }
}

/// Trace-form expectation value Tr(op . m); the imaginary part is checked
/// against 1e-8 and discarded.
pub fn expectation(m: &CoefficientMatrix, op: &ObservableOperator) -> Result<f64> {
    if m.dim != op.dim {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs operator dim {}",
            m.dim, op.dim
        )));
    }
    let state_resid = hermiticity_residual(&m.entries);
    if state_resid > STATE_HERMITICITY_TOL {
        return Err(Error::NonHermitian(state_resid));
    }
    let op_resid = hermiticity_residual(&op.entries);
    if op_resid > OPERATOR_HERMITICITY_TOL {
        return Err(Error::NonHermitian(op_resid));
    }
    let mut tr = C64::new(0.0, 0.0);
    for j in 0..m.dim {
        for k in 0..m.dim {
            tr += op.entries[(j, k)] * m.entries[(k, j)];
        }
    }
    if tr.im.abs() > 1e-8 {
        return Err(Error::NonHermitian(tr.im.abs()));
    }
    Ok(tr.re)
}
