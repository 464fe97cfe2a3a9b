//! Shared fixtures for the benchmarks.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};

use attractor_core::coupling::{build_delta_tensor, delta_kernel, DeltaTensor};
use attractor_core::phasespace::CoefficientMatrix;
use attractor_core::spectral::build_basis;
use attractor_core::{Potential, SpatialGrid, SpectralBasis};

pub fn quartic_basis(n: usize, d: usize) -> SpectralBasis {
    let grid = SpatialGrid::new(-8.0, 8.0, n).unwrap();
    build_basis(&Potential::Quartic { g: 1.0 }, &grid, d).unwrap()
}

pub fn quartic_tensor(n: usize, d: usize) -> DeltaTensor {
    let basis = quartic_basis(n, d);
    build_delta_tensor(&delta_kernel(&basis.potential), &basis).unwrap()
}

pub fn random_state(d: usize, seed: u64) -> CoefficientMatrix {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::<C64>::zeros(d, d);
    for j in 0..d {
        m[(j, j)] = C64::new(rng.gen_range(0.05..1.0), 0.0);
        for k in 0..j {
            let z = C64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
    }
    let tr: C64 = m.diagonal().sum();
    let m = m.map(|z| z / tr.re);
    CoefficientMatrix::from_matrix(m, None).unwrap()
}
