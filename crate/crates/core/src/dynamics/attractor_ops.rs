use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::phasespace::CoefficientMatrix;
use crate::C64;

/// Two top eigenvalues closer than this flag the attractor as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// The asymptotic state selected by the source law for a given f(0).
#[derive(Debug, Clone)]
pub struct AttractorResult {
    pub dim: usize,
    /// rows diagonalize f(0): unitary * f0 * unitary^dagger = diag(eigenvalues)
    pub unitary: DMatrix<C64>,
    /// diagonal of the rotated f(0), in the diagonalizer's order
    pub eigenvalues: Vec<f64>,
    /// largest eigenvalue
    pub lambda: f64,
    /// its position
    pub lbar: usize,
    /// P_jk = delta(j, lbar) delta(k, lbar)
    pub projector: DMatrix<C64>,
    /// unitary^dagger P unitary: the rank-1 limit state
    pub g_infinity: DMatrix<C64>,
    /// top eigenvalue within DEGENERACY_TOL of the runner-up
    pub degenerate: bool,
    /// (lambda - second largest) / tau
    pub rate: f64,
}

/// Diagonalize f(0), pick the top eigenvalue, and return the projector limit.
/// Exactly diagonal inputs bypass the eigensolver, so diagonal matrices
/// sharing an argmax position yield bitwise-identical limits. Degenerate top
/// eigenvalues are flagged (lowest index wins) rather than rejected.
pub fn attractor(f0: &CoefficientMatrix, tau: f64) -> Result<AttractorResult> {
    if tau <= 0.0 {
        return Err(Error::InvalidInput(format!("tau = {tau} must be positive")));
    }
    let d = f0.dim;

    let exactly_diagonal =
        (0..d).all(|i| (0..d).all(|j| i == j || f0.entries[(i, j)] == C64::new(0.0, 0.0)));

    let (unitary, eigenvalues): (DMatrix<C64>, Vec<f64>) = if exactly_diagonal {
        (
            DMatrix::identity(d, d),
            (0..d).map(|i| f0.entries[(i, i)].re).collect(),
        )
    } else {
        let eig = f0.entries.clone().symmetric_eigen();
        (
            eig.eigenvectors.adjoint(),
            eig.eigenvalues.iter().copied().collect(),
        )
    };

    let mut lbar = 0;
    for i in 1..d {
        if eigenvalues[i] > eigenvalues[lbar] {
            lbar = i;
        }
    }
    let lambda = eigenvalues[lbar];
    let second = eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != lbar)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let degenerate = d > 1 && (lambda - second).abs() < DEGENERACY_TOL;

    let mut projector = DMatrix::zeros(d, d);
    projector[(lbar, lbar)] = C64::new(1.0, 0.0);

    let g_infinity = if exactly_diagonal {
        projector.clone()
    } else {
        unitary.adjoint() * &projector * &unitary
    };

    Ok(AttractorResult {
        dim: d,
        unitary,
        eigenvalues,
        lambda,
        lbar,
        projector,
        g_infinity,
        degenerate,
        rate: (lambda - second) / tau,
    })
}

/// Classification of a unit-trace state as stationary / pure / mixed.
#[derive(Debug, Clone)]
pub struct StateReport {
    pub stationary: bool,
    pub off_diagonal_norm: f64,
    pub pure: bool,
    /// Tr(m^2)
    pub purity: f64,
    pub eigenvalue_range: (f64, f64),
    /// argmax of the diagonal, reported for stationary states as the
    /// equivalence-class witness
    pub dominant_index: Option<usize>,
}

pub fn classify_state(m: &CoefficientMatrix, tol: f64) -> Result<StateReport> {
    let tr = m.trace();
    if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "classification expects unit trace, found {tr}"
        )));
    }
    let d = m.dim;
    let mut off = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                off += m.entries[(i, j)].norm_sqr();
            }
        }
    }
    let off = off.sqrt();
    let stationary = off <= tol;
    let purity = m.purity();
    let dominant_index = if stationary {
        let mut idx = 0;
        for i in 1..d {
            if m.entries[(i, i)].re > m.entries[(idx, idx)].re {
                idx = i;
            }
        }
        Some(idx)
    } else {
        None
    };
    Ok(StateReport {
        stationary,
        off_diagonal_norm: off,
        pure: (purity - 1.0).abs() <= tol,
        purity,
        eigenvalue_range: (m.diagnostics.min_eigenvalue, m.diagnostics.max_eigenvalue),
        dominant_index,
    })
}
