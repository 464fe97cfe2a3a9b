//! Deterministic models whose dissipative flows land on eigenvalue fixed
//! points: the scalar (phi, omega) flow driven by the characteristic
//! polynomial of a finite Hamiltonian, its N-component generalization over
//! commuting beables, superselection sectors, and the emergent Hamiltonians
//! with their energy phases.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate, FLOW_TOL};
use crate::phasespace::hermiticity_residual;
use crate::C64;

const TAU: f64 = std::f64::consts::TAU;

/// Convergence threshold on |domega/dt| for fixed-point extraction.
pub const CONVERGENCE_TOL: f64 = 1e-10;

/// A finite quantum system, reduced to the data the flow actually needs:
/// its eigenvalues. Constructing from a dense matrix checks hermiticity.
#[derive(Debug, Clone)]
pub struct FiniteQuantumSystem {
    pub dim: usize,
    /// ascending
    pub eigenvalues: Vec<f64>,
}

impl FiniteQuantumSystem {
    pub fn from_matrix(h: &DMatrix<C64>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch(
                "hamiltonian must be square".into(),
            ));
        }
        let resid = hermiticity_residual(h);
        if resid > 1e-12 {
            return Err(Error::NonHermitian(resid));
        }
        let mut eigenvalues: Vec<f64> = h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self {
            dim: eigenvalues.len(),
            eigenvalues,
        })
    }

    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidInput(
                "at least one eigenvalue required".into(),
            ));
        }
        if eigenvalues.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidInput("eigenvalues must be finite".into()));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self {
            dim: eigenvalues.len(),
            eigenvalues,
        })
    }
}

/// Point of the scalar flow: an angle and a frequency.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlowState {
    pub phi: f64,
    pub omega: f64,
}

/// f(w) = prod_i (E_i - w) and f'(w), accumulated as a running product so
/// the derivative stays exact at roots.
pub fn char_poly(eigenvalues: &[f64], omega: f64) -> (f64, f64) {
    let mut f = 1.0f64;
    let mut df = 0.0f64;
    for &e in eigenvalues {
        df = df * (e - omega) - f;
        f *= e - omega;
    }
    (f, df)
}

/// Scalar flow trajectory; phi is wrapped to [0, 2pi).
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub eigenvalues: Vec<f64>,
    pub kappa: f64,
    pub times: Vec<f64>,
    pub phi: Vec<f64>,
    pub omega: Vec<f64>,
    /// f(omega)^2 along the trajectory (monotone nonincreasing)
    pub f_squared: Vec<f64>,
}

/// Integrate dphi/dt = omega, domega/dt = -kappa f(omega) f'(omega).
pub fn thooft_flow(
    sys: &FiniteQuantumSystem,
    kappa: f64,
    init: FlowState,
    times: &[f64],
) -> Result<FlowTrajectory> {
    if kappa <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "kappa = {kappa} must be positive"
        )));
    }
    let evs = sys.eigenvalues.clone();
    let mut traj = FlowTrajectory {
        eigenvalues: evs.clone(),
        kappa,
        times: Vec::with_capacity(times.len()),
        phi: Vec::with_capacity(times.len()),
        omega: Vec::with_capacity(times.len()),
        f_squared: Vec::with_capacity(times.len()),
    };
    integrate(
        |_, y, dy| {
            let (f, df) = char_poly(&evs, y[1]);
            dy[0] = y[1];
            dy[1] = -kappa * f * df;
        },
        &[init.phi, init.omega],
        0.0,
        times,
        FLOW_TOL,
        |t, y| {
            let (f, _) = char_poly(&evs, y[1]);
            traj.times.push(t);
            traj.phi.push(y[0].rem_euclid(TAU));
            traj.omega.push(y[1]);
            traj.f_squared.push(f * f);
        },
    )?;
    Ok(traj)
}

/// Fixed point of a converged scalar flow: the matched eigenvalue and the
/// limit-cycle period 2 pi / E_i.
pub fn flow_fixed_point(traj: &FlowTrajectory) -> Result<(f64, f64)> {
    let omega = *traj
        .omega
        .last()
        .ok_or_else(|| Error::InvalidInput("empty trajectory".into()))?;
    let (f, df) = char_poly(&traj.eigenvalues, omega);
    let speed = (traj.kappa * f * df).abs();
    if speed >= CONVERGENCE_TOL {
        return Err(Error::NotConverged(speed));
    }
    let matched = traj
        .eigenvalues
        .iter()
        .copied()
        .min_by(|a, b| (a - omega).abs().total_cmp(&(b - omega).abs()))
        .unwrap();
    if matched.abs() < 1e-12 {
        return Err(Error::PeriodUndefined);
    }
    Ok((matched, TAU / matched))
}

/// Commuting beables, reduced to their joint eigenvalue table (N rows of d
/// eigenvalues each) plus the flow rate.
#[derive(Debug, Clone)]
pub struct BeablesModel {
    pub n_beables: usize,
    pub dim: usize,
    /// eigenvalue_table[n][j] = A_n^j
    pub eigenvalue_table: Vec<Vec<f64>>,
    pub kappa: f64,
}

impl BeablesModel {
    pub fn new(eigenvalue_table: Vec<Vec<f64>>, kappa: f64) -> Result<Self> {
        if kappa <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "kappa = {kappa} must be positive"
            )));
        }
        if eigenvalue_table.is_empty() {
            return Err(Error::InvalidInput("at least one beable required".into()));
        }
        let dim = eigenvalue_table[0].len();
        if dim == 0 || eigenvalue_table.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidInput(
                "every beable needs the same nonzero number of eigenvalues".into(),
            ));
        }
        Ok(Self {
            n_beables: eigenvalue_table.len(),
            dim,
            eigenvalue_table,
            kappa,
        })
    }
}

/// Vector flow trajectory over N beable components.
#[derive(Debug, Clone)]
pub struct BeablesTrajectory {
    pub times: Vec<f64>,
    /// phi[i][n]: wrapped angle of component n at output i
    pub phi: Vec<Vec<f64>>,
    /// omega[i][n]
    pub omega: Vec<Vec<f64>>,
    /// F = sum_n det^2(A_n - omega_n) (monotone nonincreasing)
    pub f_squared: Vec<f64>,
}

/// Integrate the per-component flow domega_n/dt = -kappa f_n f_n' with
/// f_n(w) = prod_j (A_n^j - w); the sum-of-squared-determinants objective is
/// separable, so each component follows the scalar law over its own
/// eigenvalue list.
pub fn beables_flow(
    model: &BeablesModel,
    init_omega: &[f64],
    times: &[f64],
) -> Result<BeablesTrajectory> {
    let n = model.n_beables;
    if init_omega.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} initial components for {} beables",
            init_omega.len(),
            n
        )));
    }
    let mut y0 = vec![0.0; 2 * n];
    y0[n..].copy_from_slice(init_omega);

    let table = model.eigenvalue_table.clone();
    let kappa = model.kappa;
    let mut traj = BeablesTrajectory {
        times: Vec::with_capacity(times.len()),
        phi: Vec::with_capacity(times.len()),
        omega: Vec::with_capacity(times.len()),
        f_squared: Vec::with_capacity(times.len()),
    };
    integrate(
        |_, y, dy| {
            for c in 0..n {
                let (f, df) = char_poly(&table[c], y[n + c]);
                dy[c] = y[n + c];
                dy[n + c] = -kappa * f * df;
            }
        },
        &y0,
        0.0,
        times,
        FLOW_TOL,
        |t, y| {
            traj.times.push(t);
            traj.phi
                .push(y[..n].iter().map(|p| p.rem_euclid(TAU)).collect());
            traj.omega.push(y[n..].to_vec());
            let total: f64 = (0..n)
                .map(|c| {
                    let (f, _) = char_poly(&table[c], y[n + c]);
                    f * f
                })
                .sum();
            traj.f_squared.push(total);
        },
    )?;
    Ok(traj)
}

/// The conserved integer vector labeling a prequantum Fourier sector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperselectionSector(pub Vec<i64>);

/// Which emergent Hamiltonian a sector selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianCase {
    /// all sector components equal: H = sum_n A_n, E* = sum_n omega_n*
    UniformSector,
    /// one component dominates: H = A_k, E* = omega_k*
    DominantComponent,
    /// generic: H = n . A, E* = n . omega*
    Generic,
}

#[derive(Debug, Clone, Copy)]
pub struct EmergentHamiltonian {
    pub case: HamiltonianCase,
    pub energy: f64,
}

/// Default dominance ratio: |n_k| >= ratio x every other |n_i|.
pub const DOMINANCE_RATIO: f64 = 1e3;

/// Classify the sector and return the emergent energy at a converged fixed
/// vector. `ratio` controls dominance detection (default 1e3).
pub fn emergent_hamiltonian(
    sector: &SuperselectionSector,
    omega_star: &[f64],
    ratio: f64,
) -> Result<EmergentHamiltonian> {
    let n = &sector.0;
    if n.len() != omega_star.len() {
        return Err(Error::DimensionMismatch(format!(
            "sector has {} components, fixed vector {}",
            n.len(),
            omega_star.len()
        )));
    }
    if n.is_empty() {
        return Err(Error::InvalidInput("empty sector".into()));
    }
    if n.iter().all(|&v| v == n[0]) {
        return Ok(EmergentHamiltonian {
            case: HamiltonianCase::UniformSector,
            energy: omega_star.iter().sum(),
        });
    }
    let (k, &nk) = n
        .iter()
        .enumerate()
        .max_by_key(|(_, v)| v.unsigned_abs())
        .unwrap();
    let runner_up = n
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, v)| v.unsigned_abs())
        .max()
        .unwrap_or(0);
    if nk != 0 && (nk.unsigned_abs() as f64) >= ratio * runner_up as f64 {
        return Ok(EmergentHamiltonian {
            case: HamiltonianCase::DominantComponent,
            energy: omega_star[k],
        });
    }
    let energy = n
        .iter()
        .zip(omega_star)
        .map(|(&ni, &wi)| ni as f64 * wi)
        .sum();
    Ok(EmergentHamiltonian {
        case: HamiltonianCase::Generic,
        energy,
    })
}

/// Phase carried by a sector at a converged fixed vector, with the
/// (energy, effective time) factorization e^{-i E* t'} of the applicable
/// case. For a dominant component the factorization is the approximation
/// keeping only that component's phase.
#[derive(Debug, Clone, Copy)]
pub struct PhaseFactorization {
    pub phase: C64,
    pub case: HamiltonianCase,
    pub energy: f64,
    pub effective_time: f64,
}

pub fn prequantum_phase(
    sector: &SuperselectionSector,
    omega_star: &[f64],
    t: f64,
    ratio: f64,
) -> Result<PhaseFactorization> {
    let em = emergent_hamiltonian(sector, omega_star, ratio)?;
    let full: f64 = sector
        .0
        .iter()
        .zip(omega_star)
        .map(|(&ni, &wi)| ni as f64 * wi)
        .sum();
    let phase = C64::from_polar(1.0, -full * t);
    let effective_time = match em.case {
        HamiltonianCase::UniformSector => sector.0[0] as f64 * t,
        HamiltonianCase::DominantComponent => {
            let k = sector
                .0
                .iter()
                .enumerate()
                .max_by_key(|(_, v)| v.unsigned_abs())
                .unwrap()
                .0;
            sector.0[k] as f64 * t
        }
        HamiltonianCase::Generic => t,
    };
    Ok(PhaseFactorization {
        phase,
        case: em.case,
        energy: em.energy,
        effective_time,
    })
}

/// One basin-map sample: where a start converged and when it arrived.
/// Starts sitting exactly on a repelling zero of f' never leave it and are
/// reported with no fixed point.
#[derive(Debug, Clone, Copy)]
pub struct BasinPoint {
    pub omega0: f64,
    pub fixed_point_index: Option<usize>,
    pub convergence_time: Option<f64>,
    pub omega_final: f64,
}

/// Sweep omega(0) over [start, stop] with the given step; each start is
/// integrated to t_max and matched against the eigenvalue list within `tol`.
pub fn basin_map(
    sys: &FiniteQuantumSystem,
    kappa: f64,
    start: f64,
    stop: f64,
    step: f64,
    t_max: f64,
    tol: f64,
) -> Result<Vec<BasinPoint>> {
    if step <= 0.0 || stop < start {
        return Err(Error::InvalidInput("bad basin sweep range".into()));
    }
    let n_steps = ((stop - start) / step).round() as usize;
    let n_out = 400;
    let times: Vec<f64> = (1..=n_out)
        .map(|i| t_max * i as f64 / n_out as f64)
        .collect();
    let mut out = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let omega0 = start + i as f64 * step;
        let traj = thooft_flow(
            sys,
            kappa,
            FlowState {
                phi: 0.0,
                omega: omega0,
            },
            &times,
        )?;
        let omega_final = *traj.omega.last().unwrap();
        let (idx, ev) = sys
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - omega_final)
                    .abs()
                    .total_cmp(&(b.1 - omega_final).abs())
            })
            .unwrap();
        if (omega_final - ev).abs() > tol {
            out.push(BasinPoint {
                omega0,
                fixed_point_index: None,
                convergence_time: None,
                omega_final,
            });
            continue;
        }
        let convergence_time = traj
            .times
            .iter()
            .zip(&traj.omega)
            .find(|(_, w)| (**w - ev).abs() <= tol)
            .map(|(t, _)| *t)
            .unwrap_or(t_max);
        out.push(BasinPoint {
            omega0,
            fixed_point_index: Some(idx),
            convergence_time: Some(convergence_time),
            omega_final,
        });
    }
    Ok(out)
}
