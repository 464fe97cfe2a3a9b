use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Real distribution f(x, p) sampled on an (x, p) grid pair, normalized
/// against the measure dx dp / 2pi.
#[derive(Debug, Clone)]
pub struct PhaseSpaceDistribution {
    pub x_grid: SpatialGrid,
    pub p_grid: SpatialGrid,
    /// n_x rows, n_p columns
    pub values: DMatrix<f64>,
}

/// Parametric bivariate Gaussian family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaussianParams {
    pub x0: f64,
    pub p0: f64,
    pub sx: f64,
    pub sp: f64,
    #[serde(default)]
    pub correlation: f64,
}

/// Momentum grid conjugate to `x_grid` under the even-y sampling used by
/// `from_doubled`: n_p = 2M+1 points with spacing pi / ((2M+1) h).
pub fn conjugate_momentum_grid(x_grid: &SpatialGrid) -> SpatialGrid {
    let m = (x_grid.n_points - 1) / 2;
    let n_p = 2 * m + 1;
    let dp = std::f64::consts::PI / (n_p as f64 * x_grid.spacing());
    SpatialGrid {
        x_min: -(m as f64) * dp,
        x_max: m as f64 * dp,
        n_points: n_p,
    }
}

impl PhaseSpaceDistribution {
    pub fn new(x_grid: SpatialGrid, p_grid: SpatialGrid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != x_grid.n_points || values.ncols() != p_grid.n_points {
            return Err(Error::DimensionMismatch(format!(
                "values are {}x{}, grids demand {}x{}",
                values.nrows(),
                values.ncols(),
                x_grid.n_points,
                p_grid.n_points
            )));
        }
        Ok(Self {
            x_grid,
            p_grid,
            values,
        })
    }

    /// Normalized Gaussian ensemble centered at (x0, p0).
    pub fn gaussian(x_grid: SpatialGrid, p_grid: SpatialGrid, g: &GaussianParams) -> Result<Self> {
        if g.sx <= 0.0 || g.sp <= 0.0 {
            return Err(Error::InvalidInput(
                "gaussian widths must be positive".into(),
            ));
        }
        if g.correlation.abs() >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "|correlation| = {} must be below 1",
                g.correlation.abs()
            )));
        }
        let xs = x_grid.points();
        let ps = p_grid.points();
        let om = 1.0 - g.correlation * g.correlation;
        let values = DMatrix::from_fn(x_grid.n_points, p_grid.n_points, |i, k| {
            let u = (xs[i] - g.x0) / g.sx;
            let v = (ps[k] - g.p0) / g.sp;
            (-(u * u - 2.0 * g.correlation * u * v + v * v) / (2.0 * om)).exp()
        });
        Self {
            x_grid,
            p_grid,
            values,
        }
        .normalize()
    }

    /// Int dx dp / 2pi f(x, p) under the trapezoid rule.
    pub fn total_mass(&self) -> f64 {
        let wx = self.x_grid.weights();
        let wp = self.p_grid.weights();
        let mut s = 0.0;
        for i in 0..self.values.nrows() {
            let mut row = 0.0;
            for k in 0..self.values.ncols() {
                row += wp[k] * self.values[(i, k)];
            }
            s += wx[i] * row;
        }
        s / TWO_PI
    }

    /// Rescale so the total mass is exactly 1. Inputs already normalized to
    /// 1e-14 are returned unchanged.
    pub fn normalize(self) -> Result<Self> {
        let mass = self.total_mass();
        if mass.abs() < 1e-14 {
            return Err(Error::ZeroMass);
        }
        if (mass - 1.0).abs() < 1e-14 {
            return Ok(self);
        }
        let mut out = self;
        out.values /= mass;
        Ok(out)
    }

    /// Direct grid integral Int dx dp/2pi x f(x,p).
    pub fn mean_x(&self) -> f64 {
        self.weighted_moment(|x, _| x)
    }

    /// Direct grid integral Int dx dp/2pi p f(x,p).
    pub fn mean_p(&self) -> f64 {
        self.weighted_moment(|_, p| p)
    }

    /// Direct grid integral Int dx dp/2pi (x p) f(x,p).
    pub fn mean_xp(&self) -> f64 {
        self.weighted_moment(|x, p| x * p)
    }

    fn weighted_moment(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let xs = self.x_grid.points();
        let ps = self.p_grid.points();
        let wx = self.x_grid.weights();
        let wp = self.p_grid.weights();
        let mut s = 0.0;
        for i in 0..self.values.nrows() {
            for k in 0..self.values.ncols() {
                s += wx[i] * wp[k] * f(xs[i], ps[k]) * self.values[(i, k)];
            }
        }
        s / TWO_PI
    }

    /// Write `x,p,f` rows (17 significant digits, row-major over x then p).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,p,f")?;
        let xs = self.x_grid.points();
        let ps = self.p_grid.points();
        for i in 0..self.values.nrows() {
            for k in 0..self.values.ncols() {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e}",
                    xs[i],
                    ps[k],
                    self.values[(i, k)]
                )?;
            }
        }
        Ok(())
    }

    /// Read a distribution from `x,p,f` rows covering a full tensor grid.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut triples: Vec<(f64, f64, f64)> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let cols: Vec<&str> = t.split(',').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(Error::InvalidInput(format!(
                    "line {}: expected 3 columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            match (
                cols[0].parse::<f64>(),
                cols[1].parse::<f64>(),
                cols[2].parse::<f64>(),
            ) {
                (Ok(x), Ok(p), Ok(f)) => triples.push((x, p, f)),
                _ if lineno == 0 => continue, // header
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "line {}: unparseable numbers",
                        lineno + 1
                    )))
                }
            }
        }
        if triples.is_empty() {
            return Err(Error::InvalidInput("empty distribution file".into()));
        }

        let mut xs: Vec<f64> = triples.iter().map(|t| t.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| a.to_bits() == b.to_bits());
        let mut ps: Vec<f64> = triples.iter().map(|t| t.1).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup_by(|a, b| a.to_bits() == b.to_bits());

        if xs.len() * ps.len() != triples.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows do not tile a {} x {} grid",
                triples.len(),
                xs.len(),
                ps.len()
            )));
        }
        let uniform = |v: &[f64]| -> bool {
            if v.len() < 2 {
                return false;
            }
            let h = v[1] - v[0];
            let tol = 1e-9 * (v[v.len() - 1] - v[0]).abs().max(1.0);
            v.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= tol)
        };
        if !uniform(&xs) || !uniform(&ps) {
            return Err(Error::Grid("CSV grid is not uniform".into()));
        }

        let x_grid = SpatialGrid::new(xs[0], xs[xs.len() - 1], xs.len())?;
        let p_grid = SpatialGrid::new(ps[0], ps[ps.len() - 1], ps.len())?;
        let find = |v: &[f64], y: f64| -> usize {
            v.binary_search_by(|a| a.total_cmp(&y))
                .unwrap_or_else(|i| i.min(v.len() - 1))
        };
        let mut values = DMatrix::from_element(xs.len(), ps.len(), f64::NAN);
        for (x, p, f) in triples {
            values[(find(&xs, x), find(&ps, p))] = f;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("CSV grid has missing cells".into()));
        }
        PhaseSpaceDistribution::new(x_grid, p_grid, values)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}
