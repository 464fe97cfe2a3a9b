//! Evolution of the coefficient matrix: the conservative superoperator
//! exponential, the dissipative model with Gaussian noise in sampled and
//! averaged form, the nonlinear source law with its closed-form solution,
//! and the attractor onto rank-1 density matrices.

mod attractor_ops;
mod evolve;
mod propagator;
mod source;

pub use attractor_ops::{attractor, classify_state, AttractorResult, StateReport};
pub use evolve::{
    evolve_conservative, evolve_dissipative, von_neumann_residual, NoiseMode, NoiseModel,
    StepDiagnostics, TrajectoryRecord,
};
pub use propagator::Propagator;
pub use source::{source_ode_check, source_solution, SourceFamily, SourceLaw, SourceState};

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// Row-major vectorization of a d x d matrix.
pub(crate) fn vectorize(m: &DMatrix<C64>) -> DVector<C64> {
    let d = m.nrows();
    DVector::from_fn(d * d, |r, _| m[(r / d, r % d)])
}

pub(crate) fn unvectorize(v: &DVector<C64>, d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

pub(crate) fn frobenius_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] - b[(i, j)]).norm_sqr();
        }
    }
    s.sqrt()
}
