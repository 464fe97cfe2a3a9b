use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::C64;

use super::distribution::{conjugate_momentum_grid, PhaseSpaceDistribution};
use super::{hermiticity_residual, lagrange4};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Tolerance on the Hermitian-kernel invariant for constructed kernels.
pub const KERNEL_HERMITICITY_TOL: f64 = 1e-8;
/// Input kernels violating hermiticity beyond this are rejected.
pub const KERNEL_HERMITICITY_REJECT: f64 = 1e-6;
/// Largest imaginary residue tolerated when a distribution is recovered.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

/// Kernel f(Q, q) over the doubled coordinates; both axes share the spatial grid.
#[derive(Debug, Clone)]
pub struct DoubledKernel {
    pub grid: SpatialGrid,
    pub values: DMatrix<C64>,
}

impl DoubledKernel {
    pub fn new(grid: SpatialGrid, values: DMatrix<C64>) -> Result<Self> {
        if values.nrows() != grid.n_points || values.ncols() != grid.n_points {
            return Err(Error::DimensionMismatch(format!(
                "kernel is {}x{}, grid has {} points",
                values.nrows(),
                values.ncols(),
                grid.n_points
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.values)
    }

    /// JSON export: `{grid: ..., entries: [[re, im], ...]}` row-major.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "grid": self.grid,
            "entries": complex_pairs(&self.values),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            grid: SpatialGrid,
            entries: Vec<[f64; 2]>,
        }
        let w: Wire = serde_json::from_value(v.clone())?;
        let n = w.grid.n_points;
        let values = pairs_to_matrix(&w.entries, n, n)?;
        Self::new(w.grid, values)
    }
}

pub(crate) fn complex_pairs(m: &DMatrix<C64>) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

pub(crate) fn pairs_to_matrix(
    pairs: &[[f64; 2]],
    rows: usize,
    cols: usize,
) -> Result<DMatrix<C64>> {
    if pairs.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{} complex pairs cannot fill a {rows}x{cols} matrix",
            pairs.len()
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        let p = pairs[i * cols + j];
        C64::new(p[0], p[1])
    }))
}

/// Transform a normalized distribution to the doubled-coordinate kernel:
/// Fourier transform over p, then the substitution Q = x + y/2, q = x - y/2.
/// Entries with (x_i + x_j)/2 off the grid use 4-point Lagrange interpolation
/// of f(., p) in x.
pub fn to_doubled(f: &PhaseSpaceDistribution) -> Result<DoubledKernel> {
    let n = f.x_grid.n_points;
    let np = f.p_grid.n_points;
    let dp = f.p_grid.spacing();

    // aliasing guard: the p grid must resolve y spanning the full x extent
    let nyquist = std::f64::consts::PI / f.x_grid.extent();
    if dp > nyquist * (1.0 + 1e-12) {
        return Err(Error::Grid(format!(
            "p-grid spacing {dp:.3e} exceeds the Nyquist bound {nyquist:.3e} for this x extent"
        )));
    }

    let xs = f.x_grid.points();
    let ps = f.p_grid.points();
    let wp = f.p_grid.weights();

    // f at all half-grid x positions: row s corresponds to x = (x_0*2 + s*h)/2
    let mut half = DMatrix::zeros(2 * n - 1, np);
    let mut col = vec![0.0; n];
    for k in 0..np {
        for i in 0..n {
            col[i] = f.values[(i, k)];
        }
        for s in 0..2 * n - 1 {
            half[(s, k)] = if s % 2 == 0 {
                col[s / 2]
            } else {
                lagrange4(&col, s as f64 / 2.0)
            };
        }
    }
    // weight columns once
    for k in 0..np {
        for s in 0..2 * n - 1 {
            half[(s, k)] *= wp[k] / TWO_PI;
        }
    }

    // phases e^{i p_k x_i}
    let phase = DMatrix::from_fn(n, np, |i, k| C64::from_polar(1.0, ps[k] * xs[i]));

    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..np {
                acc += phase[(i, k)] * phase[(j, k)].conj() * half[(i + j, k)];
            }
            values[(i, j)] = acc;
            values[(j, i)] = acc.conj();
        }
    }

    let kernel = DoubledKernel::new(f.x_grid, values)?;
    let resid = kernel.hermiticity_residual();
    if resid > KERNEL_HERMITICITY_TOL {
        return Err(Error::Hermiticity(resid));
    }
    Ok(kernel)
}

/// Invert the coordinate substitution and Fourier transform back to (x, p).
///
/// Samples the kernel along anti-diagonals at even multiples of the spacing
/// (which land exactly on grid points) and transforms against the conjugate
/// momentum grid; the imaginary residue is checked and discarded.
pub fn from_doubled(k: &DoubledKernel) -> Result<PhaseSpaceDistribution> {
    let resid = k.hermiticity_residual();
    if resid > KERNEL_HERMITICITY_REJECT {
        return Err(Error::Hermiticity(resid));
    }

    let n = k.grid.n_points;
    let h = k.grid.spacing();
    let m = (n - 1) / 2;
    let ny = 2 * m + 1;
    let p_grid = conjugate_momentum_grid(&k.grid);
    let ps = p_grid.points();

    // y_m = 2 m h with trapezoid weights
    let mut wy = vec![2.0 * h; ny];
    wy[0] = h;
    wy[ny - 1] = h;

    let mut values = DMatrix::zeros(n, p_grid.n_points);
    let mut imag_max = 0.0f64;
    let mut diag: Vec<C64> = vec![C64::new(0.0, 0.0); ny];
    for i in 0..n {
        for (idx, mm) in (-(m as isize)..=m as isize).enumerate() {
            let ii = i as isize + mm;
            let jj = i as isize - mm;
            diag[idx] = if ii >= 0 && jj >= 0 && (ii as usize) < n && (jj as usize) < n {
                k.values[(ii as usize, jj as usize)] * wy[idx]
            } else {
                C64::new(0.0, 0.0)
            };
        }
        for (kp, &p) in ps.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (idx, mm) in (-(m as isize)..=m as isize).enumerate() {
                let y = 2.0 * h * mm as f64;
                acc += C64::from_polar(1.0, -p * y) * diag[idx];
            }
            imag_max = imag_max.max(acc.im.abs());
            values[(i, kp)] = acc.re;
        }
    }
    if imag_max > IMAG_RESIDUE_TOL {
        return Err(Error::Hermiticity(imag_max));
    }
    PhaseSpaceDistribution::new(k.grid, p_grid, values)
}
