use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform spatial grid on `[x_min, x_max]` with `n_points` nodes.
///
/// All continuum integrals in this crate are trapezoid sums on such grids,
/// so quadrature weights live here and are used consistently everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    #[serde(rename = "xmin")]
    pub x_min: f64,
    #[serde(rename = "xmax")]
    pub x_max: f64,
    #[serde(rename = "n")]
    pub n_points: usize,
}

impl SpatialGrid {
    pub const MIN_POINTS: usize = 64;

    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::Grid("grid bounds must be finite".into()));
        }
        if x_min >= x_max {
            return Err(Error::Grid(format!(
                "x_min = {x_min} must be below x_max = {x_max}"
            )));
        }
        if n_points < Self::MIN_POINTS {
            return Err(Error::Grid(format!(
                "n_points = {n_points} is below the minimum of {}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn extent(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn point(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Trapezoid quadrature weights (h/2 at the ends, h inside).
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_points];
        w[0] = 0.5 * h;
        w[self.n_points - 1] = 0.5 * h;
        w
    }

    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * self.extent()
    }

    /// Grid with the spacing halved (same endpoints).
    pub fn refined(&self) -> Self {
        Self {
            x_min: self.x_min,
            x_max: self.x_max,
            n_points: 2 * self.n_points - 1,
        }
    }

    /// FNV-1a hash of the grid parameters, used in export metadata to guard
    /// against reusing tensors or bases across mismatched discretizations.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&self.x_min.to_le_bytes());
        eat(&self.x_max.to_le_bytes());
        eat(&(self.n_points as u64).to_le_bytes());
        h
    }
}
