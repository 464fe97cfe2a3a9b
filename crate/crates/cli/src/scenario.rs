//! Scenario execution: compose the core modules, collect invariant checks,
//! and emit the output files.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use attractor_core::coupling::{build_delta_tensor, delta_kernel, parity_spectrum, DeltaTensor};
use attractor_core::dynamics::{
    attractor, classify_state, evolve_conservative, evolve_dissipative, NoiseModel, SourceFamily,
    TrajectoryRecord,
};
use attractor_core::phasespace::{
    conjugate_momentum_grid, expand, to_doubled, CoefficientMatrix, PhaseSpaceDistribution,
};
use attractor_core::prequantum::{
    basin_map, beables_flow, emergent_hamiltonian, flow_fixed_point, prequantum_phase, thooft_flow,
    BeablesModel, FiniteQuantumSystem, FlowState, SuperselectionSector,
};
use attractor_core::spectral::build_basis;
use attractor_core::SpectralBasis;

use crate::config::{InitialStateSection, NoiseKind, Scenario, ScenarioConfig};
use crate::output::{fmt, OutputSet};
use crate::CliError;

/// One verified invariant: name, measured value, tolerance.
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

pub struct RunReport {
    pub scenario: &'static str,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn print(&self) {
        for c in &self.checks {
            println!(
                "  {:<28} {:>12.3e}  (tol {:>8.1e})  {}",
                c.name,
                c.value,
                c.tolerance,
                if c.passed() { "pass" } else { "FAIL" }
            );
        }
        for n in &self.notes {
            println!("  {n}");
        }
        for p in &self.outputs {
            println!("  wrote {}", p.display());
        }
        println!(
            "scenario {} finished in {:.2}s: {}",
            self.scenario,
            self.wall_seconds,
            if self.all_passed() {
                "all invariants passed"
            } else {
                "INVARIANT FAILURES"
            }
        );
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut out = OutputSet::default();
    let mut checks = Vec::new();
    let mut notes = Vec::new();

    match cfg.scenario {
        Scenario::Basis => {
            let basis = built_basis(cfg)?;
            out.add_csv(
                "energies.csv".into(),
                "j,energy",
                basis
                    .energies
                    .iter()
                    .enumerate()
                    .map(|(j, e)| vec![j.to_string(), fmt(*e)]),
            )?;
            out.add_json("basis.json".into(), &basis.to_json())?;
            checks.push(Check {
                name: "orthonormality",
                value: basis.diagnostics.max_orthonormality_residual,
                tolerance: 1e-8,
            });
            checks.push(Check {
                name: "eigen_residual",
                value: basis.diagnostics.max_eigen_residual,
                tolerance: 1e-6,
            });
            if !basis.potential.has_hard_walls() {
                checks.push(Check {
                    name: "boundary_decay",
                    value: basis.diagnostics.max_boundary_value,
                    tolerance: 1e-6,
                });
            }
        }

        Scenario::Delta => {
            let basis = built_basis(cfg)?;
            let tensor = build_delta_tensor(&delta_kernel(&basis.potential), &basis)
                .map_err(CliError::from_core)?;
            out.add_json("tensor.json".into(), &tensor.to_json())?;
            let mut bin = Vec::new();
            tensor.write_binary(&mut bin).map_err(CliError::from_core)?;
            out.add("tensor.bin".into(), bin)?;
            checks.push(Check {
                name: "antisymmetry",
                value: tensor.residuals.antisymmetry,
                tolerance: 1e-8,
            });
            checks.push(Check {
                name: "trace_identity",
                value: tensor.residuals.trace,
                tolerance: 1e-8,
            });
            notes.push(format!(
                "bare truncation trace residual: {:.3e}",
                tensor.residuals.bare_trace
            ));
        }

        Scenario::Conservative | Scenario::Dissipative | Scenario::Attractor => {
            run_evolution(cfg, &mut out, &mut checks, &mut notes)?;
        }

        Scenario::Parity => {
            let basis = built_basis(cfg)?;
            let tensor = build_delta_tensor(&delta_kernel(&basis.potential), &basis)
                .map_err(CliError::from_core)?;
            let report = parity_spectrum(&basis, &tensor).map_err(CliError::from_core)?;
            out.add_csv(
                "spectrum.csv".into(),
                "index,eigenvalue,pairing_residual",
                report
                    .eigenvalues
                    .iter()
                    .zip(&report.pairing_residuals)
                    .enumerate()
                    .map(|(i, (e, r))| vec![i.to_string(), fmt(*e), fmt(*r)]),
            )?;
            checks.push(Check {
                name: "parity_pairing",
                value: report.max_pairing_residual,
                tolerance: 1e-6,
            });
            checks.push(Check {
                name: "zero_mode",
                value: report.min_abs_eigenvalue,
                tolerance: 1e-8,
            });
        }

        Scenario::Prequantum => run_prequantum(cfg, &mut out, &mut checks, &mut notes)?,
        Scenario::Beables => run_beables(cfg, &mut out, &mut checks, &mut notes)?,
    }

    let outputs = out.commit(&cfg.output_dir())?;
    Ok(RunReport {
        scenario: cfg.scenario.name(),
        checks,
        notes,
        outputs,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn built_basis(cfg: &ScenarioConfig) -> Result<SpectralBasis, CliError> {
    let pot = cfg
        .potential
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [potential]".into()))?;
    let grid = cfg.spatial_grid()?;
    let d = cfg
        .basis
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [basis]".into()))?
        .d;
    build_basis(pot, &grid, d).map_err(CliError::from_core)
}

fn initial_state(
    cfg: &ScenarioConfig,
    basis: &SpectralBasis,
    notes: &mut Vec<String>,
) -> Result<CoefficientMatrix, CliError> {
    let section = cfg
        .initial_state
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [initial_state]".into()))?;
    let from_distribution = |f: PhaseSpaceDistribution,
                             notes: &mut Vec<String>|
     -> Result<CoefficientMatrix, CliError> {
        let f = f.normalize().map_err(CliError::from_core)?;
        let kernel = to_doubled(&f).map_err(CliError::from_core)?;
        let m = expand(&kernel, basis).map_err(CliError::from_core)?;
        if m.diagnostics.truncation_warning {
            notes.push(format!(
                "warning: basis captures the initial ensemble to only {:.2e} relative error; increase d",
                m.diagnostics.truncation_error.unwrap_or(f64::NAN)
            ));
        }
        m.normalized().map_err(CliError::from_core)
    };

    match section {
        InitialStateSection::Gaussian { .. } => {
            let params = section.gaussian_params().expect("gaussian variant");
            let pg = conjugate_momentum_grid(&basis.grid);
            let f = PhaseSpaceDistribution::gaussian(basis.grid, pg, &params)
                .map_err(CliError::from_core)?;
            from_distribution(f, notes)
        }
        InitialStateSection::DistributionFile { file } => {
            let f = PhaseSpaceDistribution::read_csv_path(file).map_err(CliError::from_core)?;
            if f.x_grid != basis.grid {
                return Err(CliError::Config(format!(
                    "distribution grid ({}, {}, {}) must match the basis grid ({}, {}, {})",
                    f.x_grid.x_min,
                    f.x_grid.x_max,
                    f.x_grid.n_points,
                    basis.grid.x_min,
                    basis.grid.x_max,
                    basis.grid.n_points
                )));
            }
            from_distribution(f, notes)
        }
        InitialStateSection::MatrixFile { matrix } => {
            let text = std::fs::read_to_string(matrix)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", matrix.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("bad matrix JSON: {e}")))?;
            let m = CoefficientMatrix::from_json(&value).map_err(CliError::from_core)?;
            if m.dim != basis.dim {
                return Err(CliError::Config(format!(
                    "matrix dim {} does not match basis d = {}",
                    m.dim, basis.dim
                )));
            }
            m.normalized().map_err(CliError::from_core)
        }
    }
}

fn evolution_times(cfg: &ScenarioConfig, t_start: f64) -> Vec<f64> {
    let dyn_ = cfg.dynamics.as_ref().expect("validated");
    let n = dyn_.n_times;
    (0..n)
        .map(|i| t_start + (dyn_.t_max - t_start) * (i as f64 + 1.0) / n as f64)
        .collect()
}

fn trajectory_outputs(
    cfg: &ScenarioConfig,
    traj: &TrajectoryRecord,
    out: &mut OutputSet,
) -> Result<(), CliError> {
    let mut csv = Vec::new();
    traj.write_csv(&mut csv).map_err(CliError::from_core)?;
    out.add("trajectory.csv".into(), csv)?;
    out.add_json("final_state.json".into(), &traj.final_state().to_json())?;

    let stride = cfg.dynamics.as_ref().map_or(0, |d| d.stride);
    if stride > 0 {
        let times: Vec<f64> = traj.times.iter().copied().step_by(stride).collect();
        let states: Vec<serde_json::Value> = (0..traj.len())
            .step_by(stride)
            .map(|i| traj.state(i).to_json())
            .collect();
        out.add_json(
            "snapshots.json".into(),
            &serde_json::json!({ "times": times, "states": states }),
        )?;
    }
    Ok(())
}

fn trace_and_hermiticity_checks(traj: &TrajectoryRecord, checks: &mut Vec<Check>, tol: f64) {
    let mut trace_dev = 0.0f64;
    let mut herm = 0.0f64;
    for d in &traj.diagnostics {
        trace_dev = trace_dev
            .max((d.trace.re - 1.0).abs())
            .max(d.trace.im.abs());
        herm = herm.max(d.hermiticity_residual);
    }
    checks.push(Check {
        name: "trace_conservation",
        value: trace_dev,
        tolerance: tol,
    });
    checks.push(Check {
        name: "hermiticity",
        value: herm,
        tolerance: 1e-8,
    });
}

fn run_evolution(
    cfg: &ScenarioConfig,
    out: &mut OutputSet,
    checks: &mut Vec<Check>,
    notes: &mut Vec<String>,
) -> Result<(), CliError> {
    let basis = built_basis(cfg)?;
    let tensor: DeltaTensor =
        build_delta_tensor(&delta_kernel(&basis.potential), &basis).map_err(CliError::from_core)?;
    let f0 = initial_state(cfg, &basis, notes)?;
    let dyn_ = cfg.dynamics.as_ref().expect("validated");

    match cfg.scenario {
        Scenario::Conservative => {
            let times = evolution_times(cfg, 0.0);
            let traj = evolve_conservative(&f0, &tensor, &times).map_err(CliError::from_core)?;
            trace_and_hermiticity_checks(&traj, checks, 1e-9);
            trajectory_outputs(cfg, &traj, out)?;
        }
        Scenario::Dissipative | Scenario::Attractor => {
            let epsilon = dyn_.epsilon.expect("validated");
            let tau = dyn_.tau.expect("validated");
            let noise_cfg = cfg.noise.as_ref().expect("validated");
            let noise = match noise_cfg.mode {
                NoiseKind::Averaged => NoiseModel::averaged(epsilon),
                NoiseKind::Sampled => NoiseModel::sampled(
                    epsilon,
                    noise_cfg.n_draws.expect("validated"),
                    noise_cfg.seed.expect("validated"),
                ),
            }
            .map_err(CliError::from_core)?;
            let noise = match noise_cfg.t_min {
                Some(t) => noise.with_t_min(t),
                None => noise,
            };
            let source = SourceFamily::law(&f0, tau).map_err(CliError::from_core)?;
            let t_start = match noise_cfg.mode {
                NoiseKind::Sampled => noise.sampled_t_min(),
                NoiseKind::Averaged => 0.0,
            };
            let times = evolution_times(cfg, t_start);
            let traj = evolve_dissipative(&f0, &tensor, &noise, &source, &times)
                .map_err(CliError::from_core)?;
            trace_and_hermiticity_checks(&traj, checks, 1e-8);
            trajectory_outputs(cfg, &traj, out)?;

            if cfg.scenario == Scenario::Attractor {
                let limit = attractor(&f0, tau).map_err(CliError::from_core)?;
                let final_dist = traj
                    .diagnostics
                    .last()
                    .map(|d| d.dist_to_limit)
                    .unwrap_or(f64::NAN);
                notes.push(format!(
                    "dist_to_limit at t_max = {:.3e}; convergence rate (lambda - lambda_2)/tau = {:.4}{}",
                    final_dist,
                    limit.rate,
                    if limit.degenerate { " (degenerate top eigenvalue)" } else { "" }
                ));
                let limit_state = CoefficientMatrix::from_matrix(limit.g_infinity.clone(), None)
                    .map_err(CliError::from_core)?;
                let report = classify_state(&limit_state, 1e-8).map_err(CliError::from_core)?;
                out.add_json(
                    "limit_state.json".into(),
                    &serde_json::json!({
                        "state": limit_state.to_json(),
                        "eigenvalues_of_f0": limit.eigenvalues,
                        "lambda": limit.lambda,
                        "lbar": limit.lbar,
                        "degenerate": limit.degenerate,
                        "rate": limit.rate,
                        "stationary": report.stationary,
                        "pure": report.pure,
                        "purity": report.purity,
                    }),
                )?;
                let idem = {
                    let gg = &limit.g_infinity * &limit.g_infinity;
                    let mut s = 0.0;
                    for i in 0..limit.dim {
                        for j in 0..limit.dim {
                            s += (gg[(i, j)] - limit.g_infinity[(i, j)]).norm_sqr();
                        }
                    }
                    s.sqrt()
                };
                checks.push(Check {
                    name: "limit_idempotency",
                    value: idem,
                    tolerance: 1e-10,
                });
            }
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn run_prequantum(
    cfg: &ScenarioConfig,
    out: &mut OutputSet,
    checks: &mut Vec<Check>,
    notes: &mut Vec<String>,
) -> Result<(), CliError> {
    let flow = cfg.flow.as_ref().expect("validated");
    let sys = FiniteQuantumSystem::from_eigenvalues(flow.eigenvalues.clone().expect("validated"))
        .map_err(CliError::from_core)?;

    if let Some(omega0) = flow.omega0 {
        let times: Vec<f64> = (1..=flow.n_times)
            .map(|i| flow.t_max * i as f64 / flow.n_times as f64)
            .collect();
        let traj = thooft_flow(
            &sys,
            flow.kappa,
            FlowState {
                phi: flow.phi0,
                omega: omega0,
            },
            &times,
        )
        .map_err(CliError::from_core)?;
        out.add_csv(
            "flow.csv".into(),
            "t,phi,omega,f_squared",
            (0..traj.times.len()).map(|i| {
                vec![
                    fmt(traj.times[i]),
                    fmt(traj.phi[i]),
                    fmt(traj.omega[i]),
                    fmt(traj.f_squared[i]),
                ]
            }),
        )?;
        let monotone = traj
            .f_squared
            .windows(2)
            .fold(0.0f64, |m, w| m.max(w[1] - w[0]));
        checks.push(Check {
            name: "monotone_descent",
            value: monotone,
            tolerance: 1e-12,
        });
        match flow_fixed_point(&traj) {
            Ok((ev, period)) => {
                notes.push(format!(
                    "fixed point E = {ev}, limit-cycle period {period:.6}"
                ));
                checks.push(Check {
                    name: "fixed_point_distance",
                    value: (traj.omega.last().unwrap() - ev).abs(),
                    tolerance: 1e-8,
                });
            }
            Err(e) => notes.push(format!("no fixed point: {e}")),
        }
    }

    if let Some(basin) = &cfg.basin {
        let map = basin_map(
            &sys,
            flow.kappa,
            basin.start,
            basin.stop,
            basin.step,
            basin.t_max,
            basin.tolerance,
        )
        .map_err(CliError::from_core)?;
        let unconverged = map.iter().filter(|p| p.fixed_point_index.is_none()).count();
        out.add_csv(
            "basin.csv".into(),
            "omega0,fixed_point_index,convergence_time",
            map.iter().map(|p| {
                vec![
                    fmt(p.omega0),
                    p.fixed_point_index.map_or("-1".into(), |i| i.to_string()),
                    p.convergence_time.map_or("nan".into(), fmt),
                ]
            }),
        )?;
        notes.push(format!(
            "basin map: {} starts, {} unconverged (separatrix)",
            map.len(),
            unconverged
        ));
    }
    Ok(())
}

fn run_beables(
    cfg: &ScenarioConfig,
    out: &mut OutputSet,
    checks: &mut Vec<Check>,
    notes: &mut Vec<String>,
) -> Result<(), CliError> {
    let flow = cfg.flow.as_ref().expect("validated");
    let table = flow.eigenvalue_table.clone().expect("validated");
    let model = BeablesModel::new(table, flow.kappa).map_err(CliError::from_core)?;
    let omega0 = flow.omega0_vec.clone().expect("validated");
    let times: Vec<f64> = (1..=flow.n_times)
        .map(|i| flow.t_max * i as f64 / flow.n_times as f64)
        .collect();
    let traj = beables_flow(&model, &omega0, &times).map_err(CliError::from_core)?;

    let n = model.n_beables;
    let header = {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("phi_{i}")));
        cols.extend((1..=n).map(|i| format!("omega_{i}")));
        cols.push("F_squared".to_string());
        cols.join(",")
    };
    out.add_csv(
        "flow.csv".into(),
        &header,
        (0..traj.times.len()).map(|i| {
            let mut row = vec![fmt(traj.times[i])];
            row.extend(traj.phi[i].iter().map(|v| fmt(*v)));
            row.extend(traj.omega[i].iter().map(|v| fmt(*v)));
            row.push(fmt(traj.f_squared[i]));
            row
        }),
    )?;

    let monotone = traj
        .f_squared
        .windows(2)
        .fold(0.0f64, |m, w| m.max(w[1] - w[0]));
    checks.push(Check {
        name: "monotone_descent",
        value: monotone,
        tolerance: 1e-12,
    });

    let last = traj.omega.last().unwrap().clone();
    let mut lattice_dist = 0.0f64;
    let mut omega_star = Vec::with_capacity(n);
    for (c, w) in last.iter().enumerate() {
        let nearest = model.eigenvalue_table[c]
            .iter()
            .copied()
            .min_by(|a, b| (a - w).abs().total_cmp(&(b - w).abs()))
            .unwrap();
        lattice_dist = lattice_dist.max((w - nearest).abs());
        omega_star.push(nearest);
    }
    checks.push(Check {
        name: "lattice_distance",
        value: lattice_dist,
        tolerance: 1e-6,
    });
    notes.push(format!("fixed vector omega* = {omega_star:?}"));

    if let Some(sector) = &cfg.sector {
        let sec = SuperselectionSector(sector.n.clone());
        let em = emergent_hamiltonian(&sec, &omega_star, sector.dominance_ratio)
            .map_err(CliError::from_core)?;
        let phase = prequantum_phase(&sec, &omega_star, sector.phase_time, sector.dominance_ratio)
            .map_err(CliError::from_core)?;
        out.add_json(
            "emergent.json".into(),
            &serde_json::json!({
                "sector": sector.n,
                "case": em.case,
                "energy": em.energy,
                "dominance_ratio": sector.dominance_ratio,
                "phase_time": sector.phase_time,
                "phase": [phase.phase.re, phase.phase.im],
                "effective_time": phase.effective_time,
            }),
        )?;
        notes.push(format!(
            "emergent hamiltonian: {:?}, E* = {}",
            em.case, em.energy
        ));
    }
    Ok(())
}

// keep DMatrix/C64 used even when some scenarios are feature-light
#[allow(dead_code)]
fn _unused(_: DMatrix<C64>) {}
