use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::coupling::DeltaTensor;
use crate::error::{Error, Result};
use crate::phasespace::{hermiticity_residual, CoefficientMatrix};
use crate::C64;

use super::propagator::Propagator;
use super::source::SourceFamily;
use super::{frobenius_diff, unvectorize, vectorize};

/// Target accuracy of the memory-integral quadrature.
const QUADRATURE_TOL: f64 = 1e-9;
/// Refinement is declared failed beyond this.
const QUADRATURE_FAIL: f64 = 1e-7;
const MAX_SEGMENTS: usize = 1 << 15;

/// Gaussian noise attached to the dissipative evolution. The scalar draw at
/// evaluation time t has variance 2 epsilon / t, so the ensemble mean of
/// e^{-i dH t} reproduces the damping factor e^{-epsilon t}.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub epsilon: f64,
    pub mode: NoiseMode,
}

#[derive(Debug, Clone)]
pub enum NoiseMode {
    /// evaluate the Gaussian-averaged closed form
    Averaged,
    /// average the single-draw closed form over `n_draws` draws
    Sampled {
        n_draws: usize,
        seed: u64,
        t_min: Option<f64>,
    },
}

impl NoiseModel {
    pub fn averaged(epsilon: f64) -> Result<Self> {
        Self::validate(epsilon)?;
        Ok(Self {
            epsilon,
            mode: NoiseMode::Averaged,
        })
    }

    pub fn sampled(epsilon: f64, n_draws: usize, seed: u64) -> Result<Self> {
        Self::validate(epsilon)?;
        if n_draws == 0 {
            return Err(Error::InvalidInput("n_draws must be positive".into()));
        }
        Ok(Self {
            epsilon,
            mode: NoiseMode::Sampled {
                n_draws,
                seed,
                t_min: None,
            },
        })
    }

    pub fn with_t_min(mut self, t_min: f64) -> Self {
        if let NoiseMode::Sampled { t_min: slot, .. } = &mut self.mode {
            *slot = Some(t_min);
        }
        self
    }

    fn validate(epsilon: f64) -> Result<()> {
        if epsilon <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "epsilon = {epsilon} must be positive"
            )));
        }
        Ok(())
    }

    /// Earliest admissible sampled evaluation time (the draw variance 2e/t
    /// diverges as t -> 0).
    pub fn sampled_t_min(&self) -> f64 {
        match self.mode {
            NoiseMode::Sampled { t_min: Some(t), .. } => t,
            _ => 0.1 / self.epsilon,
        }
    }
}

/// Per-step health of an evolving state.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub trace: C64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub hermiticity_residual: f64,
    /// Frobenius distance to g(t); NaN when the run has no source
    pub dist_to_source: f64,
    /// Frobenius distance to the limit state; NaN when undefined
    pub dist_to_limit: f64,
}

/// A stored evolution: times, the matrices, and per-step diagnostics.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<DMatrix<C64>>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// entrywise Monte-Carlo standard errors (sampled mode only)
    pub sampled_std_err: Option<Vec<DMatrix<f64>>>,
}

impl TrajectoryRecord {
    fn push(
        &mut self,
        t: f64,
        state: DMatrix<C64>,
        source: Option<&DMatrix<C64>>,
        limit: Option<&DMatrix<C64>>,
    ) {
        let herm =
            state.clone().map(|z| z) * C64::new(0.5, 0.0) + state.adjoint() * C64::new(0.5, 0.0);
        let eig = herm.symmetric_eigen();
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let max = eig
            .eigenvalues
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        self.diagnostics.push(StepDiagnostics {
            trace: state.diagonal().sum(),
            min_eigenvalue: min,
            max_eigenvalue: max,
            hermiticity_residual: hermiticity_residual(&state),
            dist_to_source: source.map_or(f64::NAN, |g| frobenius_diff(&state, g)),
            dist_to_limit: limit.map_or(f64::NAN, |g| frobenius_diff(&state, g)),
        });
        self.times.push(t);
        self.states.push(state);
    }

    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            diagnostics: Vec::with_capacity(n),
            sampled_std_err: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> CoefficientMatrix {
        CoefficientMatrix::from_matrix_unchecked(
            self.states[i].clone(),
            None,
            self.diagnostics[i].hermiticity_residual,
            None,
        )
    }

    pub fn final_state(&self) -> CoefficientMatrix {
        self.state(self.len() - 1)
    }

    /// CSV with the fixed column set
    /// `t,trace_re,trace_im,min_eig,max_eig,dist_to_source,dist_to_limit,vn_residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "t,trace_re,trace_im,min_eig,max_eig,dist_to_source,dist_to_limit,vn_residual"
        )?;
        let vn = von_neumann_residual(self);
        for (i, &t) in self.times.iter().enumerate() {
            let d = &self.diagnostics[i];
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                d.trace.re,
                d.trace.im,
                d.min_eigenvalue,
                d.max_eigenvalue,
                d.dist_to_source,
                d.dist_to_limit,
                vn.get(i).copied().unwrap_or(f64::NAN)
            )?;
        }
        Ok(())
    }
}

/// Finite-difference rate of change of the stored coefficients. In the
/// rotating frame a solution of the von Neumann equation has constant
/// coefficients, so this is the residual against quantum evolution.
pub fn von_neumann_residual(traj: &TrajectoryRecord) -> Vec<f64> {
    let n = traj.len();
    if n < 3 {
        return vec![f64::NAN; n];
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dt = traj.times[b] - traj.times[a];
        out.push(frobenius_diff(&traj.states[b], &traj.states[a]) / dt);
    }
    out
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidInput(
            "at least one output time is required".into(),
        ));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "output times must be nonnegative and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn validate_state(f0: &CoefficientMatrix, tensor: &DeltaTensor) -> Result<()> {
    if f0.dim != tensor.dim {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs tensor dim {}",
            f0.dim, tensor.dim
        )));
    }
    if let Some(tag) = &f0.basis {
        if *tag != tensor.tag {
            return Err(Error::DimensionMismatch(
                "state and tensor were built over different bases".into(),
            ));
        }
    }
    let tr = f0.trace();
    if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-8 {
        return Err(Error::InvalidInput(format!(
            "initial state must have unit trace, found {tr}"
        )));
    }
    Ok(())
}

/// Conservative evolution f(t) = exp(-i Delta t) f(0).
pub fn evolve_conservative(
    f0: &CoefficientMatrix,
    tensor: &DeltaTensor,
    times: &[f64],
) -> Result<TrajectoryRecord> {
    validate_state(f0, tensor)?;
    validate_times(times)?;
    let prop = Propagator::new(tensor);
    let v0 = vectorize(&f0.entries);
    let mut traj = TrajectoryRecord::with_capacity(times.len());
    for &t in times {
        let state = unvectorize(&prop.apply(t, &v0), f0.dim);
        traj.push(t, state, None, None);
    }
    Ok(traj)
}

/// One panel of Int_a^b e^{-(eps + i lambda_r)(b - s)} w_r(s) ds per
/// eigencoordinate, by doubling composite Simpson with Richardson
/// acceptance.
fn memory_panel(
    prop: &Propagator,
    source: &SourceFamily,
    epsilon: f64,
    a: f64,
    b: f64,
) -> Result<DVector<C64>> {
    let d2 = prop.eigenvalues().len();
    if (b - a).abs() < 1e-300 {
        return Ok(DVector::zeros(d2));
    }
    let eval = |nseg: usize| -> DVector<C64> {
        let h = (b - a) / nseg as f64;
        let mut acc = DVector::<C64>::zeros(d2);
        for i in 0..=nseg {
            let s = a + i as f64 * h;
            let simpson = if i == 0 || i == nseg {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let w = prop.to_eigen(&vectorize(&source.derivative_at(s)));
            let decay = (-(epsilon) * (b - s)).exp();
            for r in 0..d2 {
                let phase = C64::from_polar(decay, -prop.eigenvalues()[r] * (b - s));
                acc[r] += w[r] * phase * (simpson * h / 3.0);
            }
        }
        acc
    };

    let mut nseg = 8usize;
    let mut coarse = eval(nseg);
    loop {
        nseg *= 2;
        let fine = eval(nseg);
        let mut diff = 0.0f64;
        for r in 0..d2 {
            diff = diff.max((fine[r] - coarse[r]).norm());
        }
        if diff <= QUADRATURE_TOL {
            // Richardson step on the last doubling
            let mut out = fine.clone();
            for r in 0..d2 {
                out[r] += (fine[r] - coarse[r]) / 15.0;
            }
            return Ok(out);
        }
        if nseg >= MAX_SEGMENTS {
            if diff <= QUADRATURE_FAIL {
                return Ok(fine);
            }
            return Err(Error::Convergence(format!(
                "memory integral on [{a}, {b}] stuck at {diff:.3e}"
            )));
        }
        coarse = fine;
    }
}

/// Dissipative evolution against a source family.
///
/// Averaged mode evaluates
/// f(t) = g(t) + e^{-i(Delta - i eps) t} (f(0) - g(0))
///        - Int_0^t ds e^{-i(Delta - i eps)(t-s)} dg/ds,
/// with the memory integral accumulated incrementally in eigencoordinates.
/// Sampled mode draws dH per evaluation time (variance 2 eps / t), applies
/// the single-draw closed form with the same memory kernel, and averages;
/// times below the sampled floor are rejected.
pub fn evolve_dissipative(
    f0: &CoefficientMatrix,
    tensor: &DeltaTensor,
    noise: &NoiseModel,
    source: &SourceFamily,
    times: &[f64],
) -> Result<TrajectoryRecord> {
    validate_state(f0, tensor)?;
    validate_times(times)?;
    if source.dim() != f0.dim {
        return Err(Error::DimensionMismatch(format!(
            "source dim {} vs state dim {}",
            source.dim(),
            f0.dim
        )));
    }

    let prop = Propagator::new(tensor);
    let epsilon = noise.epsilon;
    let g0 = source.at(0.0);
    let c0 = prop.to_eigen(&vectorize(&(f0.entries.clone() - &g0)));
    let limit = source.limit();

    match &noise.mode {
        NoiseMode::Averaged => {
            let d2 = prop.eigenvalues().len();
            let mut traj = TrajectoryRecord::with_capacity(times.len());
            let mut memory = DVector::<C64>::zeros(d2);
            let mut t_prev = 0.0;
            for &t in times {
                if !source.is_constant() {
                    let dt = t - t_prev;
                    for r in 0..d2 {
                        let decay = (-epsilon * dt).exp();
                        memory[r] *= C64::from_polar(decay, -prop.eigenvalues()[r] * dt);
                    }
                    memory += memory_panel(&prop, source, epsilon, t_prev, t)?;
                }
                let mut u = c0.clone();
                let damp = (-epsilon * t).exp();
                for r in 0..d2 {
                    u[r] *= C64::from_polar(damp, -prop.eigenvalues()[r] * t);
                    u[r] -= memory[r];
                }
                let state = source.at(t) + unvectorize(&prop.from_eigen(&u), f0.dim);
                let g_t = source.at(t);
                traj.push(t, state, Some(&g_t), Some(&limit));
                t_prev = t;
            }
            Ok(traj)
        }
        NoiseMode::Sampled { n_draws, seed, .. } => {
            let floor = noise.sampled_t_min();
            if times[0] < floor {
                return Err(Error::InvalidInput(format!(
                    "sampled evaluations start at t_min = {floor}; earliest requested time is {}",
                    times[0]
                )));
            }
            let d = f0.dim;
            let d2 = d * d;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
            let mut traj = TrajectoryRecord::with_capacity(times.len());
            let mut errs = Vec::with_capacity(times.len());

            for &t in times {
                // fixed quadrature nodes shared by all draws at this time
                let (nodes, weights) = sampled_nodes(&prop, source, epsilon, t)?;
                // propagated derivative samples v_i = e^{-i Delta (t-s_i)} dg(s_i)
                let propagated: Vec<DVector<C64>> = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&s, &w)| {
                        let mut u = prop.to_eigen(&vectorize(&source.derivative_at(s)));
                        for r in 0..d2 {
                            u[r] *= C64::from_polar(w, -prop.eigenvalues()[r] * (t - s));
                        }
                        prop.from_eigen(&u)
                    })
                    .collect();
                let free = {
                    let mut u = c0.clone();
                    for r in 0..d2 {
                        u[r] *= C64::from_polar(1.0, -prop.eigenvalues()[r] * t);
                    }
                    prop.from_eigen(&u)
                };

                let sigma = (2.0 * epsilon / t).sqrt();
                let normal = Normal::new(0.0, sigma)
                    .map_err(|e| Error::InvalidInput(format!("noise width: {e}")))?;
                let mut mean = DVector::<C64>::zeros(d2);
                let mut var_re = DVector::<f64>::zeros(d2);
                let mut var_im = DVector::<f64>::zeros(d2);
                let g_t = source.at(t);
                let g_vec = vectorize(&g_t);

                let mut raw = DVector::<C64>::zeros(d2);
                for _ in 0..*n_draws {
                    let dh: f64 = normal.sample(&mut rng);
                    raw.copy_from(&g_vec);
                    let pre = C64::from_polar(1.0, -dh * t);
                    for r in 0..d2 {
                        raw[r] += pre * free[r];
                    }
                    for (i, v) in propagated.iter().enumerate() {
                        let phase = C64::from_polar(1.0, -dh * (t - nodes[i]));
                        for r in 0..d2 {
                            raw[r] -= phase * v[r];
                        }
                    }
                    // antithetic pairing: -dH yields exactly the adjoint, so
                    // the Hermitian part is an unbiased, lower-variance sample
                    // and every stored matrix stays Hermitian
                    for i in 0..d {
                        for j in 0..d {
                            let r = i * d + j;
                            let draw = 0.5 * (raw[r] + raw[j * d + i].conj());
                            mean[r] += draw;
                            var_re[r] += draw.re * draw.re;
                            var_im[r] += draw.im * draw.im;
                        }
                    }
                }
                let nf = *n_draws as f64;
                for r in 0..d2 {
                    mean[r] /= nf;
                }
                let se = DMatrix::from_fn(d, d, |i, j| {
                    let r = i * d + j;
                    let vr = (var_re[r] / nf - mean[r].re * mean[r].re).max(0.0);
                    let vi = (var_im[r] / nf - mean[r].im * mean[r].im).max(0.0);
                    ((vr + vi) / nf).sqrt()
                });
                errs.push(se);
                let state = unvectorize(&mean, d);
                traj.push(t, state, Some(&g_t), Some(&limit));
            }
            traj.sampled_std_err = Some(errs);
            Ok(traj)
        }
    }
}

/// Node set for the sampled-mode memory integral on [0, t]: composite
/// Simpson, refined until the noiseless integral is stable.
fn sampled_nodes(
    prop: &Propagator,
    source: &SourceFamily,
    epsilon: f64,
    t: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if source.is_constant() {
        return Ok((Vec::new(), Vec::new()));
    }
    let lam_max = prop
        .eigenvalues()
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let sigma = (2.0 * epsilon / t).sqrt();
    let freq = lam_max + 3.0 * sigma + 1.0;
    let mut nseg = ((t * freq * 2.0).ceil() as usize)
        .next_power_of_two()
        .max(64);

    let probe = |nseg: usize| -> DVector<C64> {
        let h = t / nseg as f64;
        let d2 = prop.eigenvalues().len();
        let mut acc = DVector::<C64>::zeros(d2);
        for i in 0..=nseg {
            let s = i as f64 * h;
            let simpson = if i == 0 || i == nseg {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let w = prop.to_eigen(&vectorize(&source.derivative_at(s)));
            for r in 0..d2 {
                let phase = C64::from_polar(1.0, -prop.eigenvalues()[r] * (t - s));
                acc[r] += w[r] * phase * (simpson * h / 3.0);
            }
        }
        acc
    };
    let mut coarse = probe(nseg);
    loop {
        let fine = probe(nseg * 2);
        let mut diff = 0.0f64;
        for r in 0..fine.len() {
            diff = diff.max((fine[r] - coarse[r]).norm());
        }
        if diff <= 1e-8 {
            break;
        }
        nseg *= 2;
        if nseg >= MAX_SEGMENTS {
            if diff > QUADRATURE_FAIL {
                return Err(Error::Convergence(format!(
                    "sampled-mode quadrature stuck at {diff:.3e}"
                )));
            }
            break;
        }
        coarse = fine;
    }

    let h = t / nseg as f64;
    let nodes: Vec<f64> = (0..=nseg).map(|i| i as f64 * h).collect();
    let weights: Vec<f64> = (0..=nseg)
        .map(|i| {
            let simpson = if i == 0 || i == nseg {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            simpson * h / 3.0
        })
        .collect();
    Ok((nodes, weights))
}
