//! The antisymmetric bra-ket coupling Delta(Q, q) and its basis
//! representation as a d^2 x d^2 superoperator, plus the energy-parity
//! spectrum check.
//!
//! The stored superoperator is the quadrature tensor projected onto
//! trace-compatible maps: the raw truncated tensor violates the trace
//! identity sum_j Delta_jjlm = 0 at O(1) because completeness fails for a
//! finite basis, so the vec(identity) component is removed symmetrically.
//! The projection leaves the antisymmetry identity, the realness/symmetry
//! of the superoperator, and the parity pairing intact; the bare residual
//! is kept in the metadata as a truncation diagnostic.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::spectral::{BasisTag, SpectralBasis};

pub const IDENTITY_TOL: f64 = 1e-6;

/// Pointwise coupling Delta(Q,q) = (Q-q) V'((Q+q)/2) - V(Q) + V(q).
///
/// Antisymmetry under Q <-> q and Delta(Q,Q) = 0 hold exactly, including in
/// floating point, because both orderings evaluate the same expression.
#[derive(Debug, Clone)]
pub struct DeltaKernel {
    pub potential: Potential,
}

/// Build the coupling kernel for a potential with an analytic derivative.
pub fn delta_kernel(pot: &Potential) -> DeltaKernel {
    DeltaKernel {
        potential: pot.clone(),
    }
}

impl DeltaKernel {
    pub fn eval(&self, q_upper: f64, q_lower: f64) -> f64 {
        let (v_upper, _) = self.potential.evaluate(q_upper);
        let (v_lower, _) = self.potential.evaluate(q_lower);
        let vp_mid = self.potential.derivative(0.5 * (q_upper + q_lower));
        // associated so that swapping arguments negates every intermediate,
        // keeping the antisymmetry exact in floating point
        (q_upper - q_lower) * vp_mid + (v_lower - v_upper)
    }
}

/// Residuals of the structural identities, recorded at construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TensorResiduals {
    /// max |D_jklm + D_kjml| of the stored tensor
    pub antisymmetry: f64,
    /// max_lm |sum_j D_jjlm| of the stored tensor
    pub trace: f64,
    /// max_lm |sum_j D_jjlm| of the bare quadrature tensor before projection;
    /// measures how much the truncated basis breaks completeness
    pub bare_trace: f64,
}

/// Export metadata guarding against reuse across mismatched discretizations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorMetadata {
    pub potential: Potential,
    pub d: usize,
    pub grid: crate::grid::SpatialGrid,
    pub grid_hash: u64,
    pub residuals: TensorResiduals,
}

/// The coupling superoperator: a real symmetric d^2 x d^2 matrix mapping
/// row-major index (l, m) to (j, k).
#[derive(Debug, Clone)]
pub struct DeltaTensor {
    pub dim: usize,
    pub matrix: DMatrix<f64>,
    pub tag: BasisTag,
    pub residuals: TensorResiduals,
}

impl DeltaTensor {
    #[inline]
    pub fn entry(&self, j: usize, k: usize, l: usize, m: usize) -> f64 {
        self.matrix[(j * self.dim + k, l * self.dim + m)]
    }

    pub fn metadata(&self) -> TensorMetadata {
        TensorMetadata {
            potential: self.tag.potential.clone(),
            d: self.dim,
            grid: self.tag.grid,
            grid_hash: self.tag.grid.fingerprint(),
            residuals: self.residuals,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let d2 = self.dim * self.dim;
        let mut entries = Vec::with_capacity(d2 * d2);
        for r in 0..d2 {
            for c in 0..d2 {
                entries.push(self.matrix[(r, c)]);
            }
        }
        serde_json::json!({
            "metadata": self.metadata(),
            "entries": entries,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            metadata: TensorMetadata,
            entries: Vec<f64>,
        }
        let w: Wire = serde_json::from_value(v.clone())?;
        Self::from_parts(w.metadata, &w.entries)
    }

    fn from_parts(meta: TensorMetadata, entries: &[f64]) -> Result<Self> {
        let d2 = meta.d * meta.d;
        if entries.len() != d2 * d2 {
            return Err(Error::DimensionMismatch(format!(
                "{} entries cannot fill a {d2}x{d2} superoperator",
                entries.len()
            )));
        }
        if meta.grid.fingerprint() != meta.grid_hash {
            return Err(Error::InvalidInput(
                "tensor metadata grid hash does not match its grid".into(),
            ));
        }
        let matrix = DMatrix::from_fn(d2, d2, |r, c| entries[r * d2 + c]);
        Ok(Self {
            dim: meta.d,
            matrix,
            tag: BasisTag {
                potential: meta.potential,
                grid: meta.grid,
                dim: meta.d,
            },
            residuals: meta.residuals,
        })
    }

    const MAGIC: &'static [u8; 6] = b"ATDT1\0";

    /// Binary export: magic, u64 metadata length, metadata JSON, f64 LE entries.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = serde_json::to_vec(&self.metadata())?;
        w.write_all(Self::MAGIC)?;
        w.write_all(&(meta.len() as u64).to_le_bytes())?;
        w.write_all(&meta)?;
        let d2 = self.dim * self.dim;
        for r in 0..d2 {
            for c in 0..d2 {
                w.write_all(&self.matrix[(r, c)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::InvalidInput("not a tensor binary file".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut meta_bytes = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut meta_bytes)?;
        let meta: TensorMetadata = serde_json::from_slice(&meta_bytes)?;
        let d2 = meta.d * meta.d;
        let mut entries = vec![0.0f64; d2 * d2];
        let mut buf = [0u8; 8];
        for e in entries.iter_mut() {
            r.read_exact(&mut buf)?;
            *e = f64::from_le_bytes(buf);
        }
        Self::from_parts(meta, &entries)
    }

    /// Guard for reusing a tensor against a basis it may not belong to.
    pub fn check_compatible(&self, basis: &SpectralBasis) -> Result<()> {
        if self.tag != basis.tag() {
            return Err(Error::DimensionMismatch(
                "tensor was built over a different (potential, grid, d)".into(),
            ));
        }
        Ok(())
    }
}

fn identity_residuals(matrix: &DMatrix<f64>, d: usize) -> (f64, f64) {
    let mut antisym = 0.0f64;
    let mut trace = 0.0f64;
    for j in 0..d {
        for k in 0..d {
            for l in 0..d {
                for m in 0..d {
                    let a = matrix[(j * d + k, l * d + m)];
                    let b = matrix[(k * d + j, m * d + l)];
                    antisym = antisym.max((a + b).abs());
                }
            }
        }
    }
    for l in 0..d {
        for m in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += matrix[(j * d + j, l * d + m)];
            }
            trace = trace.max(s.abs());
        }
    }
    (antisym, trace)
}

/// Quadrature of D_jklm = Int dQ dq g_j(Q) g_k(q) Delta(Q,q) g_l(Q) g_m(q),
/// reindexed as the (jk) x (lm) superoperator and projected trace-compatible.
/// Both structural identities are verified before returning.
pub fn build_delta_tensor(kernel: &DeltaKernel, basis: &SpectralBasis) -> Result<DeltaTensor> {
    if kernel.potential != basis.potential {
        return Err(Error::DimensionMismatch(
            "kernel and basis come from different potentials".into(),
        ));
    }
    let d = basis.dim;
    let n = basis.grid.n_points;
    let x = basis.grid.points();
    let w = basis.grid.weights();

    // pair products A[(j,l), a] = g_j(x_a) g_l(x_a)
    let mut pair = DMatrix::zeros(d * d, n);
    for j in 0..d {
        for l in 0..d {
            for a in 0..n {
                pair[(j * d + l, a)] = basis.functions[(j, a)] * basis.functions[(l, a)];
            }
        }
    }
    // weighted kernel samples
    let weighted = DMatrix::from_fn(n, n, |a, b| w[a] * w[b] * kernel.eval(x[a], x[b]));
    // C[(j,l), (k,m)] = sum_ab pair[(j,l),a] K_ab pair[(k,m),b]
    let sandwich = &pair * weighted * pair.transpose();

    // reindex to the superoperator layout (j,k) x (l,m)
    let d2 = d * d;
    let mut matrix = DMatrix::zeros(d2, d2);
    for j in 0..d {
        for k in 0..d {
            for l in 0..d {
                for m in 0..d {
                    matrix[(j * d + k, l * d + m)] = sandwich[(j * d + l, k * d + m)];
                }
            }
        }
    }

    let (antisym_bare, trace_bare) = identity_residuals(&matrix, d);
    if antisym_bare > IDENTITY_TOL {
        return Err(Error::IdentityViolation(format!(
            "antisymmetry residual {antisym_bare:.3e} exceeds {IDENTITY_TOL:.1e}; quadrature is broken"
        )));
    }

    // remove the vec(identity) row/column component: u = vec(1)/sqrt(d)
    let u = DMatrix::from_fn(d2, 1, |r, _| {
        if r / d == r % d {
            1.0 / (d as f64).sqrt()
        } else {
            0.0
        }
    });
    let mu = &matrix * &u;
    let um = u.transpose() * &matrix;
    let uu = (u.transpose() * &mu)[(0, 0)];
    matrix -= &mu * u.transpose();
    matrix -= &u * um;
    matrix += (&u * u.transpose()).scale(uu);

    let (antisymmetry, trace) = identity_residuals(&matrix, d);
    if antisymmetry > IDENTITY_TOL || trace > IDENTITY_TOL {
        return Err(Error::IdentityViolation(format!(
            "projected tensor fails identities: antisymmetry {antisymmetry:.3e}, trace {trace:.3e}"
        )));
    }

    Ok(DeltaTensor {
        dim: d,
        matrix,
        tag: basis.tag(),
        residuals: TensorResiduals {
            antisymmetry,
            trace,
            bare_trace: trace_bare,
        },
    })
}

/// Spectrum report of the static superoperator
/// L_(jk),(lm) = (E_j - E_k) delta_jl delta_km + Delta_jklm.
#[derive(Debug, Clone)]
pub struct ParityReport {
    /// eigenvalues, ascending
    pub eigenvalues: Vec<f64>,
    /// per-eigenvalue distance to the nearest negated partner
    pub pairing_residuals: Vec<f64>,
    /// max over eigenvalues of the distance to the nearest negated partner
    pub max_pairing_residual: f64,
    /// smallest |eigenvalue|; the diagonal sector always carries zero modes
    pub min_abs_eigenvalue: f64,
}

/// Eigenvalues of the static Liouville superoperator and their pairing under
/// negation (the energy-parity symmetry).
pub fn parity_spectrum(basis: &SpectralBasis, tensor: &DeltaTensor) -> Result<ParityReport> {
    tensor.check_compatible(basis)?;
    let d = basis.dim;
    let d2 = d * d;
    let mut op = tensor.matrix.clone();
    for j in 0..d {
        for k in 0..d {
            op[(j * d + k, j * d + k)] += basis.energies[j] - basis.energies[k];
        }
    }
    let mut eigenvalues: Vec<f64> = op.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);

    let mut pairing_residuals = Vec::with_capacity(d2);
    for &lam in &eigenvalues {
        let target = -lam;
        let idx = eigenvalues
            .binary_search_by(|v| v.total_cmp(&target))
            .unwrap_or_else(|i| i);
        let mut best = f64::INFINITY;
        for cand in idx.saturating_sub(1)..=(idx + 1).min(d2 - 1) {
            best = best.min((eigenvalues[cand] + lam).abs());
        }
        pairing_residuals.push(best);
    }
    let max_pairing_residual = pairing_residuals.iter().fold(0.0f64, |m, &v| m.max(v));
    let min_abs_eigenvalue = eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v.abs()));

    Ok(ParityReport {
        eigenvalues,
        pairing_residuals,
        max_pairing_residual,
        min_abs_eigenvalue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::spectral::build_basis;
    use approx::assert_abs_diff_eq;

    fn quartic_setup(d: usize, n: usize) -> (SpectralBasis, DeltaTensor) {
        let grid = SpatialGrid::new(-8.0, 8.0, n).unwrap();
        let pot = Potential::Quartic { g: 1.0 };
        let basis = build_basis(&pot, &grid, d).unwrap();
        let tensor = build_delta_tensor(&delta_kernel(&pot), &basis).unwrap();
        (basis, tensor)
    }

    #[test]
    fn harmonic_kernel_vanishes() {
        let k = delta_kernel(&Potential::Harmonic { omega: 1.3 });
        for (a, b) in [(0.0, 1.0), (2.5, -1.7), (4.0, 4.0), (-3.0, 0.4)] {
            assert_abs_diff_eq!(k.eval(a, b), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn quartic_kernel_symbolic_point() {
        // (1-0) * 4 (1/2)^3 - 1 + 0 = -1/2
        let k = delta_kernel(&Potential::Quartic { g: 1.0 });
        assert_abs_diff_eq!(k.eval(1.0, 0.0), -0.5, epsilon = 1e-15);
    }

    #[test]
    fn kernel_antisymmetry_exact() {
        let k = delta_kernel(&Potential::DoubleWell { a: 1.0, b: 5.0 });
        for (a, b) in [(0.3, 1.9), (-2.0, 0.7), (1.234, -3.456)] {
            assert_eq!(k.eval(a, b), -k.eval(b, a));
            assert_eq!(k.eval(a, a), 0.0);
        }
    }

    #[test]
    fn harmonic_tensor_is_null() {
        let grid = SpatialGrid::new(-10.0, 10.0, 257).unwrap();
        let pot = Potential::Harmonic { omega: 1.0 };
        let basis = build_basis(&pot, &grid, 4).unwrap();
        let tensor = build_delta_tensor(&delta_kernel(&pot), &basis).unwrap();
        let max = tensor.matrix.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        assert!(max <= 1e-10, "harmonic tensor entries reach {max:.2e}");
    }

    #[test]
    fn quartic_identities_hold() {
        let (_, tensor) = quartic_setup(6, 257);
        assert!(tensor.residuals.antisymmetry <= 1e-8);
        assert!(tensor.residuals.trace <= 1e-8);
        // the bare tensor genuinely breaks the trace identity at O(1)
        assert!(tensor.residuals.bare_trace > 1e-2);
    }

    #[test]
    fn hermiticity_preserved_by_generator() {
        // i Delta maps Hermitian matrices to Hermitian matrices
        use crate::C64;
        use rand::{Rng, SeedableRng};
        let (_, tensor) = quartic_setup(5, 257);
        let d = 5;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let mut m = nalgebra::DMatrix::<C64>::zeros(d, d);
            for j in 0..d {
                m[(j, j)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
                for k in 0..j {
                    let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    m[(j, k)] = z;
                    m[(k, j)] = z.conj();
                }
            }
            let mut out = nalgebra::DMatrix::<C64>::zeros(d, d);
            for j in 0..d {
                for k in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for l in 0..d {
                        for mm in 0..d {
                            acc += tensor.entry(j, k, l, mm) * m[(l, mm)];
                        }
                    }
                    out[(j, k)] = C64::i() * acc;
                }
            }
            let resid = crate::phasespace::hermiticity_residual(&out);
            assert!(resid <= 1e-8, "hermiticity broken: {resid:.2e}");
        }
    }

    #[test]
    fn tensor_grid_refinement_stable() {
        let (_, coarse) = quartic_setup(6, 257);
        let (_, fine) = quartic_setup(6, 513);
        let mut change = 0.0f64;
        for r in 0..36 {
            for c in 0..36 {
                change = change.max((coarse.matrix[(r, c)] - fine.matrix[(r, c)]).abs());
            }
        }
        assert!(
            change < 1e-5,
            "entries moved by {change:.2e} under refinement"
        );
    }

    #[test]
    fn parity_spectrum_quartic() {
        let (basis, tensor) = quartic_setup(8, 257);
        let report = parity_spectrum(&basis, &tensor).unwrap();
        assert!(report.max_pairing_residual <= 1e-6);
        assert!(report.min_abs_eigenvalue <= 1e-10, "zero mode missing");
        assert_eq!(report.eigenvalues.len(), 64);
    }

    #[test]
    fn parity_spectrum_harmonic_is_integer_lattice() {
        let grid = SpatialGrid::new(-10.0, 10.0, 257).unwrap();
        let pot = Potential::Harmonic { omega: 1.0 };
        let basis = build_basis(&pot, &grid, 4).unwrap();
        let tensor = build_delta_tensor(&delta_kernel(&pot), &basis).unwrap();
        let report = parity_spectrum(&basis, &tensor).unwrap();
        for lam in &report.eigenvalues {
            let nearest = lam.round();
            assert!(
                (lam - nearest).abs() < 1e-3,
                "eigenvalue {lam} is not an integer multiple of omega"
            );
        }
        assert!(report.max_pairing_residual <= 1e-6);
    }

    #[test]
    fn json_round_trip() {
        let (_, tensor) = quartic_setup(4, 257);
        let back = DeltaTensor::from_json(&tensor.to_json()).unwrap();
        assert_eq!(back.matrix, tensor.matrix);
        assert_eq!(back.tag, tensor.tag);
    }

    #[test]
    fn binary_round_trip() {
        let (_, tensor) = quartic_setup(4, 257);
        let mut buf = Vec::new();
        tensor.write_binary(&mut buf).unwrap();
        let back = DeltaTensor::read_binary(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.matrix, tensor.matrix);
        assert_eq!(back.tag, tensor.tag);
    }

    #[test]
    fn mismatched_reuse_rejected() {
        let (_, tensor) = quartic_setup(4, 257);
        let grid = SpatialGrid::new(-8.0, 8.0, 129).unwrap();
        let other = build_basis(&Potential::Quartic { g: 1.0 }, &grid, 4).unwrap();
        assert!(tensor.check_compatible(&other).is_err());
    }
}
