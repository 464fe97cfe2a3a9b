use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::spectral::{BasisTag, SpectralBasis};
use crate::C64;

use super::doubled::{complex_pairs, pairs_to_matrix, DoubledKernel};
use super::hermiticity_residual;

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRUNCATION_WARN_THRESHOLD: f64 = 0.01;

/// Spectral health of a coefficient matrix. Eigenvalues outside [0, 1] are
/// reported, never clamped or rejected.
#[derive(Debug, Clone, Default)]
pub struct StateDiagnostics {
    pub trace: C64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub nonstandard_eigenvalues: bool,
    pub hermiticity_residual: f64,
    /// relative reconstruction error of the kernel this matrix came from
    pub truncation_error: Option<f64>,
    pub truncation_warning: bool,
}

/// Hermitian matrix of expansion coefficients f_jk over a spectral basis.
#[derive(Debug, Clone)]
pub struct CoefficientMatrix {
    pub dim: usize,
    pub entries: DMatrix<C64>,
    pub basis: Option<BasisTag>,
    pub diagnostics: StateDiagnostics,
}

impl CoefficientMatrix {
    /// Wrap a Hermitian matrix, computing diagnostics. `basis` is optional:
    /// matrices loaded from files carry no provenance.
    pub fn from_matrix(entries: DMatrix<C64>, basis: Option<BasisTag>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let resid = hermiticity_residual(&entries);
        if resid > HERMITICITY_TOL {
            return Err(Error::NonHermitian(resid));
        }
        Ok(Self::from_matrix_unchecked(entries, basis, resid, None))
    }

    pub(crate) fn from_matrix_unchecked(
        entries: DMatrix<C64>,
        basis: Option<BasisTag>,
        hermiticity: f64,
        truncation_error: Option<f64>,
    ) -> Self {
        let dim = entries.nrows();
        let trace = entries.diagonal().sum();
        let herm = entries.map(|z| z) * C64::new(0.5, 0.0) + entries.adjoint() * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let min_eigenvalue = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let max_eigenvalue = eig
            .eigenvalues
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let diagnostics = StateDiagnostics {
            trace,
            min_eigenvalue,
            max_eigenvalue,
            nonstandard_eigenvalues: min_eigenvalue < -1e-10 || max_eigenvalue > 1.0 + 1e-10,
            hermiticity_residual: hermiticity,
            truncation_error,
            truncation_warning: truncation_error.map_or(false, |e| e > TRUNCATION_WARN_THRESHOLD),
        };
        Self {
            dim,
            entries,
            basis,
            diagnostics,
        }
    }

    pub fn trace(&self) -> C64 {
        self.entries.diagonal().sum()
    }

    /// Rescale to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr.norm() < 1e-14 {
            return Err(Error::ZeroMass);
        }
        let entries = self.entries.map(|z| z / tr.re);
        Self::from_matrix(entries, self.basis.clone())
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).diagonal().sum().re
    }

    /// JSON export: `{dim, basis_fingerprint, entries: [[re, im], ...]}` row-major.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim,
            "basis_fingerprint": self.basis.as_ref().map(|t| t.fingerprint()),
            "entries": complex_pairs(&self.entries),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            dim: usize,
            entries: Vec<[f64; 2]>,
        }
        let w: Wire = serde_json::from_value(v.clone())?;
        let entries = pairs_to_matrix(&w.entries, w.dim, w.dim)?;
        Self::from_matrix(entries, None)
    }
}

/// Project a kernel onto the basis: f_jk = Int dQ dq g_j(Q) k(Q,q) g_k(q).
pub fn expand(kernel: &DoubledKernel, basis: &SpectralBasis) -> Result<CoefficientMatrix> {
    if kernel.grid != basis.grid {
        return Err(Error::DimensionMismatch(
            "kernel and basis live on different grids".into(),
        ));
    }
    let n = basis.grid.n_points;
    let d = basis.dim;
    let w = basis.grid.weights();

    // weighted basis, complex for the GEMM
    let gw = DMatrix::from_fn(d, n, |j, a| C64::new(basis.functions[(j, a)] * w[a], 0.0));
    let entries = &gw * &kernel.values * gw.transpose();

    let resid = hermiticity_residual(&entries);
    if resid > HERMITICITY_TOL {
        return Err(Error::NonHermitian(resid));
    }

    // truncation quality: || k - reconstruct(expand(k)) || / || k ||
    let g = DMatrix::from_fn(n, d, |a, j| C64::new(basis.functions[(j, a)], 0.0));
    let rec = &g * &entries * g.transpose();
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..n {
        for jj in 0..n {
            num += (kernel.values[(i, jj)] - rec[(i, jj)]).norm_sqr();
            den += kernel.values[(i, jj)].norm_sqr();
        }
    }
    let trunc = if den > 0.0 { (num / den).sqrt() } else { 0.0 };

    Ok(CoefficientMatrix::from_matrix_unchecked(
        entries,
        Some(basis.tag()),
        resid,
        Some(trunc),
    ))
}

/// Rebuild the kernel at time `t` with rotating phases:
/// k(Q,q;t) = sum_jk f_jk e^{-i(E_j - E_k) t} g_j(Q) g_k(q).
pub fn reconstruct(m: &CoefficientMatrix, basis: &SpectralBasis, t: f64) -> Result<DoubledKernel> {
    if m.dim != basis.dim {
        return Err(Error::DimensionMismatch(format!(
            "matrix dim {} vs basis dim {}",
            m.dim, basis.dim
        )));
    }
    if let Some(tag) = &m.basis {
        if *tag != basis.tag() {
            return Err(Error::DimensionMismatch(
                "coefficient matrix was expanded over a different basis".into(),
            ));
        }
    }
    let n = basis.grid.n_points;
    let d = basis.dim;
    let phased = DMatrix::from_fn(d, d, |j, k| {
        m.entries[(j, k)] * C64::from_polar(1.0, -(basis.energies[j] - basis.energies[k]) * t)
    });
    let g = DMatrix::from_fn(n, d, |a, j| C64::new(basis.functions[(j, a)], 0.0));
    let values = &g * phased * g.transpose();
    DoubledKernel::new(basis.grid, values)
}
