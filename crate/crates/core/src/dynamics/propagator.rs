use nalgebra::{DMatrix, DVector};

use crate::coupling::DeltaTensor;
use crate::C64;

/// Spectral form of exp(-i Delta t): the coupling superoperator is real
/// symmetric, so one eigendecomposition serves every output time.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub dim: usize,
    eigvals: DVector<f64>,
    basis: DMatrix<C64>,
    basis_t: DMatrix<C64>,
}

impl Propagator {
    pub fn new(tensor: &DeltaTensor) -> Self {
        let eig = tensor.matrix.clone().symmetric_eigen();
        let basis = eig.eigenvectors.map(|v| C64::new(v, 0.0));
        let basis_t = basis.transpose();
        Self {
            dim: tensor.dim,
            eigvals: eig.eigenvalues,
            basis,
            basis_t,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigvals.as_slice()
    }

    /// Rotate into eigencoordinates.
    pub fn to_eigen(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.basis_t * v
    }

    /// Rotate back from eigencoordinates.
    pub fn from_eigen(&self, u: &DVector<C64>) -> DVector<C64> {
        &self.basis * u
    }

    /// exp(-i Delta t) applied to a vectorized matrix.
    pub fn apply(&self, t: f64, v: &DVector<C64>) -> DVector<C64> {
        let mut u = self.to_eigen(v);
        for r in 0..u.len() {
            u[r] *= C64::from_polar(1.0, -self.eigvals[r] * t);
        }
        self.from_eigen(&u)
    }

    /// Phase factors e^{-i lambda_r t} in eigencoordinates.
    pub fn phases(&self, t: f64) -> Vec<C64> {
        self.eigvals
            .iter()
            .map(|&l| C64::from_polar(1.0, -l * t))
            .collect()
    }
}
