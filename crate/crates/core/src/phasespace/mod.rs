//! Classical phase-space distributions, their doubled-coordinate kernels,
//! coefficient matrices over a spectral basis, and trace-form expectation
//! values.
//!
//! Conventions fixed here and used everywhere: the phase-space measure is
//! dx dp / 2pi, and the momentum transform is f(x,p) = Int dy e^{-ipy} f(x,y),
//! so the doubled kernel is recovered by f(x,y) = (1/2pi) Int dp e^{+ipy} f(x,p)
//! with Q = x + y/2, q = x - y/2.

mod coefficients;
mod distribution;
mod doubled;
mod observables;

pub use coefficients::{expand, reconstruct, CoefficientMatrix, StateDiagnostics};
pub use distribution::{conjugate_momentum_grid, GaussianParams, PhaseSpaceDistribution};
pub use doubled::{from_doubled, to_doubled, DoubledKernel};
pub use observables::{expectation, operator_matrix, ObservableKind, ObservableOperator};

use nalgebra::DMatrix;

use crate::C64;

/// max_ij |m_ij - conj(m_ji)|
pub fn hermiticity_residual(m: &DMatrix<C64>) -> f64 {
    let mut r = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

/// 4-point Lagrange interpolation of uniformly sampled values at fractional
/// index `t` (in units of the spacing, measured from sample 0).
pub(crate) fn lagrange4(values: &[f64], t: f64) -> f64 {
    let n = values.len();
    let i = (t.floor() as isize).clamp(1, n as isize - 3) as usize;
    let u = t - i as f64;
    let c0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
    let c1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    let c2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    let c3 = (u + 1.0) * u * (u - 1.0) / 6.0;
    c0 * values[i - 1] + c1 * values[i] + c2 * values[i + 1] + c3 * values[i + 2]
}
