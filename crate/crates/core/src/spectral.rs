//! Truncated orthonormal eigenbases of the single-coordinate operator
//! H = -(1/2) d^2/dx^2 + V(x) on a uniform grid with hard-wall boundaries.
//!
//! The kinetic operator is the sine-basis (Dirichlet) spectral matrix, so
//! retained bound states are resolved to quadrature accuracy rather than
//! the O(h^2) of a difference stencil; the grid, trapezoid weights, and
//! boundary convention are shared with every downstream quadrature.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::potential::Potential;

/// Tolerances fixed by the basis contract.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-6;
pub const BOUNDARY_DECAY_TOL: f64 = 1e-6;
/// Eigenvalue gap below which a pair is flagged as numerically degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Identifies the (potential, grid, dimension) a basis was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisTag {
    pub potential: Potential,
    pub grid: SpatialGrid,
    pub dim: usize,
}

impl BasisTag {
    pub fn fingerprint(&self) -> u64 {
        self.potential.fingerprint()
            ^ self.grid.fingerprint().rotate_left(17)
            ^ (self.dim as u64).wrapping_mul(0x9e3779b97f4a7c15)
    }
}

/// Diagnostics recorded while building a basis.
#[derive(Debug, Clone, Default)]
pub struct BasisDiagnostics {
    /// max_j ||(H - E_j) g_j|| / max(|E_j|, 1)
    pub max_eigen_residual: f64,
    /// max_{j,k} |<g_j, g_k> - delta_jk| under the grid quadrature
    pub max_orthonormality_residual: f64,
    /// largest |g_j| at the first grid point inside each wall
    pub max_boundary_value: f64,
    /// index pairs (j, j+1) whose eigenvalues coincide within `DEGENERACY_GAP`
    pub degenerate_pairs: Vec<(usize, usize)>,
}

/// The `d` lowest eigenpairs of the discretized Hamiltonian, orthonormal
/// under the grid's trapezoid quadrature, energies ascending.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub grid: SpatialGrid,
    pub potential: Potential,
    pub dim: usize,
    /// energies, ascending
    pub energies: Vec<f64>,
    /// row j holds g_j sampled on the full grid (zeros at the walls)
    pub functions: DMatrix<f64>,
    pub diagnostics: BasisDiagnostics,
}

/// Evaluate V(x) and its exact analytic derivative.
pub fn evaluate_potential(pot: &Potential, x: f64) -> (f64, f64) {
    pot.evaluate(x)
}

/// Sine-basis kinetic matrix (times 1/2 for p^2/2) on the interior points
/// of an `n`-point grid spanning length `len`, Dirichlet walls at the ends.
fn kinetic_matrix(n: usize, len: f64) -> DMatrix<f64> {
    let segments = n - 1;
    // c[k] = sum_{m=1}^{segments-1} m^2 cos(m pi k / segments)
    let mut c = vec![0.0f64; 2 * segments - 1];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut acc = 0.0;
        for m in 1..segments {
            let mf = m as f64;
            acc += mf * mf * (mf * std::f64::consts::PI * k as f64 / segments as f64).cos();
        }
        *ck = acc;
    }
    let scale = std::f64::consts::PI.powi(2) / (2.0 * segments as f64 * len * len);
    let interior = n - 2;
    DMatrix::from_fn(interior, interior, |a, b| {
        let (ia, ib) = (a + 1, b + 1);
        scale * (c[ia.abs_diff(ib)] - c[ia + ib])
    })
}

/// Build the `d` lowest eigenpairs of H = -(1/2) d^2/dx^2 + V on `grid`.
pub fn build_basis(pot: &Potential, grid: &SpatialGrid, d: usize) -> Result<SpectralBasis> {
    pot.check_confining()?;
    if d == 0 {
        return Err(Error::InvalidInput(
            "basis dimension must be at least 1".into(),
        ));
    }
    if d > grid.n_points / 4 {
        return Err(Error::InvalidInput(format!(
            "basis dimension d = {d} exceeds n_points/4 = {}",
            grid.n_points / 4
        )));
    }
    if pot.is_symmetric() && !grid.is_symmetric() {
        return Err(Error::Grid(
            "grid must be symmetric about 0 for a symmetric potential".into(),
        ));
    }

    let n = grid.n_points;
    let h = grid.spacing();
    let x = grid.points();
    let interior = n - 2;

    let mut ham = kinetic_matrix(n, grid.extent());
    for i in 0..interior {
        ham[(i, i)] += pot.value(x[i + 1]);
    }

    let eig = ham.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..interior).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let energies: Vec<f64> = order[..d].iter().map(|&i| eig.eigenvalues[i]).collect();

    // Embed interior eigenvectors with wall zeros, normalize under the
    // quadrature (vectors are l2-orthonormal; interior weight is h), and fix
    // the sign so the outermost right antinode is positive.
    let inv_sqrt_h = 1.0 / h.sqrt();
    let mut functions = DMatrix::zeros(d, n);
    for (j, &col) in order[..d].iter().enumerate() {
        let v = eig.eigenvectors.column(col);
        for i in 0..interior {
            functions[(j, i + 1)] = v[i] * inv_sqrt_h;
        }
        let row = functions.row(j);
        let peak = row.iter().fold(0.0f64, |m, &y| m.max(y.abs()));
        let anchor = (0..n)
            .rev()
            .find(|&i| functions[(j, i)].abs() > 0.05 * peak)
            .unwrap_or(n / 2);
        if functions[(j, anchor)] < 0.0 {
            for i in 0..n {
                functions[(j, i)] = -functions[(j, i)];
            }
        }
    }

    let mut diagnostics = BasisDiagnostics::default();

    // Eigen-residual ||(H - E) g|| / max(|E|, 1), measured in the quadrature norm.
    for j in 0..d {
        let mut res2 = 0.0;
        for a in 0..interior {
            let mut hv = 0.0;
            for b in 0..interior {
                hv += ham[(a, b)] * functions[(j, b + 1)];
            }
            let r = hv - energies[j] * functions[(j, a + 1)];
            res2 += r * r * h;
        }
        let res = res2.sqrt() / energies[j].abs().max(1.0);
        diagnostics.max_eigen_residual = diagnostics.max_eigen_residual.max(res);
    }
    if diagnostics.max_eigen_residual > EIGEN_RESIDUAL_TOL {
        return Err(Error::Resolution(format!(
            "eigen-residual {:.3e} exceeds {EIGEN_RESIDUAL_TOL:.1e}; refine the grid",
            diagnostics.max_eigen_residual
        )));
    }

    // Orthonormality under the trapezoid rule (wall values are zero, so the
    // end weights are inert).
    for j in 0..d {
        for k in j..d {
            let mut s = 0.0;
            for i in 1..n - 1 {
                s += functions[(j, i)] * functions[(k, i)] * h;
            }
            let target = if j == k { 1.0 } else { 0.0 };
            diagnostics.max_orthonormality_residual = diagnostics
                .max_orthonormality_residual
                .max((s - target).abs());
        }
    }
    if diagnostics.max_orthonormality_residual > ORTHONORMALITY_TOL {
        return Err(Error::Resolution(format!(
            "orthonormality residual {:.3e} exceeds {ORTHONORMALITY_TOL:.1e}",
            diagnostics.max_orthonormality_residual
        )));
    }

    for j in 0..d {
        diagnostics.max_boundary_value = diagnostics
            .max_boundary_value
            .max(functions[(j, 1)].abs())
            .max(functions[(j, n - 2)].abs());
    }
    if !pot.has_hard_walls() && diagnostics.max_boundary_value > BOUNDARY_DECAY_TOL {
        return Err(Error::Truncation(format!(
            "retained mode reaches {:.3e} at the grid boundary; widen the grid",
            diagnostics.max_boundary_value
        )));
    }

    for j in 0..d.saturating_sub(1) {
        if (energies[j + 1] - energies[j]).abs() <= DEGENERACY_GAP * energies[j].abs().max(1.0) {
            diagnostics.degenerate_pairs.push((j, j + 1));
        }
    }

    Ok(SpectralBasis {
        grid: *grid,
        potential: pot.clone(),
        dim: d,
        energies,
        functions,
        diagnostics,
    })
}

impl SpectralBasis {
    pub fn tag(&self) -> BasisTag {
        BasisTag {
            potential: self.potential.clone(),
            grid: self.grid,
            dim: self.dim,
        }
    }

    pub fn function(&self, j: usize) -> Vec<f64> {
        self.functions.row(j).iter().copied().collect()
    }

    /// Serialize as `{grid: {xmin, xmax, n}, energies: [...], functions: [...]}`
    /// with functions row-major d x n_points.
    pub fn to_json(&self) -> serde_json::Value {
        let flat: Vec<f64> = (0..self.dim)
            .flat_map(|j| (0..self.grid.n_points).map(move |i| self.functions[(j, i)]))
            .collect();
        serde_json::json!({
            "grid": self.grid,
            "energies": self.energies,
            "functions": flat,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn harmonic_basis(d: usize) -> SpectralBasis {
        let grid = SpatialGrid::new(-10.0, 10.0, 257).unwrap();
        build_basis(&Potential::Harmonic { omega: 1.0 }, &grid, d).unwrap()
    }

    #[test]
    fn harmonic_spectrum() {
        // analytic oscillator levels E_j = j + 1/2
        let basis = harmonic_basis(4);
        for (j, e) in basis.energies.iter().enumerate() {
            assert_abs_diff_eq!(*e, j as f64 + 0.5, epsilon = 1e-4);
        }
    }

    #[test]
    fn hermite_ground_state_shape() {
        // independent oracle: g_0(x) = pi^(-1/4) exp(-x^2/2)
        let basis = harmonic_basis(1);
        let x = basis.grid.points();
        let norm = std::f64::consts::PI.powf(-0.25);
        for (i, &xi) in x.iter().enumerate() {
            let expected = norm * (-0.5 * xi * xi).exp();
            assert_abs_diff_eq!(basis.functions[(0, i)], expected, epsilon = 1e-8);
        }
    }

    #[test]
    fn box_spectrum() {
        // infinite well of width pi: E_n = n^2 / 2
        let grid = SpatialGrid::new(
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            129,
        )
        .unwrap();
        let basis = build_basis(
            &Potential::Box {
                half_width: std::f64::consts::FRAC_PI_2,
            },
            &grid,
            2,
        )
        .unwrap();
        assert_abs_diff_eq!(basis.energies[0], 0.5, epsilon = 1e-3);
        assert_abs_diff_eq!(basis.energies[1], 2.0, epsilon = 1e-3);
    }

    #[test]
    fn ground_state_is_nodeless() {
        let grid = SpatialGrid::new(-8.0, 8.0, 257).unwrap();
        for pot in [
            Potential::Quartic { g: 1.0 },
            Potential::DoubleWell { a: 1.0, b: 5.0 },
        ] {
            let basis = build_basis(&pot, &grid, 1).unwrap();
            let g0: Vec<f64> = basis.function(0);
            let peak = g0.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            // no sign change where the state has any weight
            assert!(g0.iter().all(|&v| v > -1e-8 * peak));
        }
    }

    #[test]
    fn spectrum_strictly_increasing() {
        let grid = SpatialGrid::new(-8.0, 8.0, 257).unwrap();
        let basis = build_basis(&Potential::Quartic { g: 1.0 }, &grid, 8).unwrap();
        for j in 0..7 {
            assert!(basis.energies[j] < basis.energies[j + 1]);
        }
        assert!(basis.diagnostics.degenerate_pairs.is_empty());
    }

    #[test]
    fn refinement_stability() {
        // halving h moves every retained level by < 1e-4 relative
        let grid = SpatialGrid::new(-8.0, 8.0, 257).unwrap();
        let pot = Potential::Quartic { g: 1.0 };
        let coarse = build_basis(&pot, &grid, 6).unwrap();
        let fine = build_basis(&pot, &grid.refined(), 6).unwrap();
        for j in 0..6 {
            let rel = (coarse.energies[j] - fine.energies[j]).abs() / fine.energies[j].abs();
            assert!(rel < 1e-4, "level {j} moved by {rel:.2e}");
        }
    }

    #[test]
    fn narrow_grid_fails_truncation() {
        let grid = SpatialGrid::new(-2.0, 2.0, 129).unwrap();
        let err = build_basis(&Potential::Harmonic { omega: 1.0 }, &grid, 8).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
    }

    #[test]
    fn oversized_truncation_rejected() {
        let grid = SpatialGrid::new(-8.0, 8.0, 64).unwrap();
        assert!(build_basis(&Potential::Harmonic { omega: 1.0 }, &grid, 32).is_err());
    }

    #[test]
    fn x01_matrix_element_sign_convention() {
        // <g_0| x |g_1> = +1/sqrt(2) for omega = 1 under the sign convention
        let basis = harmonic_basis(2);
        let x = basis.grid.points();
        let w = basis.grid.weights();
        let mut s = 0.0;
        for i in 0..x.len() {
            s += w[i] * basis.functions[(0, i)] * x[i] * basis.functions[(1, i)];
        }
        assert_abs_diff_eq!(s, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-3);
    }

    #[test]
    fn json_export_shape() {
        let basis = harmonic_basis(2);
        let v = basis.to_json();
        assert_eq!(v["energies"].as_array().unwrap().len(), 2);
        assert_eq!(
            v["functions"].as_array().unwrap().len(),
            2 * basis.grid.n_points
        );
        assert!(v["grid"]["xmin"].is_number());
    }
}
