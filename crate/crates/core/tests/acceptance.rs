//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured figures. Run with `cargo test --test acceptance -- --nocapture`.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

use attractor_core::coupling::{build_delta_tensor, delta_kernel, parity_spectrum, DeltaTensor};
use attractor_core::dynamics::{
    attractor, classify_state, evolve_conservative, evolve_dissipative, source_ode_check,
    source_solution, von_neumann_residual, NoiseModel, SourceFamily, SourceLaw,
};
use attractor_core::phasespace::{
    conjugate_momentum_grid, expand, expectation, operator_matrix, to_doubled, CoefficientMatrix,
    GaussianParams, ObservableKind, PhaseSpaceDistribution,
};
use attractor_core::prequantum::{
    basin_map, beables_flow, thooft_flow, BeablesModel, FiniteQuantumSystem, FlowState,
};
use attractor_core::{build_basis, Potential, SpatialGrid, SpectralBasis, C64};

fn grid513() -> SpatialGrid {
    SpatialGrid::new(-8.0, 8.0, 513).unwrap()
}

fn basis_for(pot: &Potential, d: usize) -> SpectralBasis {
    build_basis(pot, &grid513(), d).unwrap()
}

fn tensor_for(pot: &Potential, d: usize) -> DeltaTensor {
    build_delta_tensor(&delta_kernel(pot), &basis_for(pot, d)).unwrap()
}

fn quartic_tensor_d6() -> &'static DeltaTensor {
    static CELL: OnceLock<DeltaTensor> = OnceLock::new();
    CELL.get_or_init(|| tensor_for(&Potential::Quartic { g: 1.0 }, 6))
}

fn quartic_tensor_d8() -> &'static DeltaTensor {
    static CELL: OnceLock<DeltaTensor> = OnceLock::new();
    CELL.get_or_init(|| tensor_for(&Potential::Quartic { g: 1.0 }, 8))
}

/// Unit-trace Hermitian state with prescribed spectrum under a seeded
/// random unitary rotation.
fn rotated_state(spectrum: &[f64], seed: u64) -> CoefficientMatrix {
    let d = spectrum.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let raw = DMatrix::<C64>::from_fn(d, d, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let q = raw.qr().q();
    let lam = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            C64::new(spectrum[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    CoefficientMatrix::from_matrix(&q * lam * q.adjoint(), None).unwrap()
}

fn random_hermitian(d: usize, seed: u64) -> CoefficientMatrix {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::<C64>::zeros(d, d);
    for j in 0..d {
        m[(j, j)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
        for k in 0..j {
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
    }
    CoefficientMatrix::from_matrix(m, None).unwrap()
}

fn frob_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] - b[(i, j)]).norm_sqr();
        }
    }
    s.sqrt()
}

fn fit_rate(times: &[f64], dist: &[f64], lo: f64, hi: f64) -> f64 {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(dist)
        .filter(|(t, d)| **t >= lo && **t <= hi && **d > 0.0)
        .map(|(t, d)| (*t, d.ln()))
        .collect();
    assert!(pts.len() >= 8, "too few points in the fit window");
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    -(n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn acceptance_01_delta_structural_identities() {
    let mut worst_antisym = 0.0f64;
    let mut worst_trace = 0.0f64;
    for pot in [
        Potential::Quartic { g: 1.0 },
        Potential::DoubleWell { a: 1.0, b: 5.0 },
    ] {
        for d in [4, 8, 12] {
            let tensor = tensor_for(&pot, d);
            worst_antisym = worst_antisym.max(tensor.residuals.antisymmetry);
            worst_trace = worst_trace.max(tensor.residuals.trace);
        }
    }
    assert!(
        worst_antisym <= 1e-8,
        "antisymmetry residual {worst_antisym:.3e}"
    );
    assert!(worst_trace <= 1e-8, "trace residual {worst_trace:.3e}");
    println!(
        "acceptance 01 delta structural identities: PASS (antisymmetry {worst_antisym:.2e}, trace {worst_trace:.2e})"
    );
}

#[test]
fn acceptance_02_harmonic_null_test() {
    let pot = Potential::Harmonic { omega: 1.0 };
    let tensor = tensor_for(&pot, 8);
    let max_entry = tensor.matrix.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    assert!(max_entry <= 1e-10, "harmonic tensor entry {max_entry:.3e}");

    let f0 = rotated_state(&[0.3, 0.2, 0.15, 0.1, 0.1, 0.06, 0.05, 0.04], 7);
    let times: Vec<f64> = (1..=25).map(|i| 2.0 * i as f64).collect();
    let traj = evolve_conservative(&f0, &tensor, &times).unwrap();
    let mut drift = 0.0f64;
    for s in &traj.states {
        drift = drift.max(frob_diff(s, &f0.entries));
    }
    assert!(drift <= 1e-10, "conservative drift {drift:.3e}");
    println!(
        "acceptance 02 harmonic null test: PASS (max tensor entry {max_entry:.2e}, drift {drift:.2e})"
    );
}

#[test]
fn acceptance_03_probability_conservation() {
    let tensor = quartic_tensor_d8();
    let f0 = rotated_state(&[0.3, 0.2, 0.15, 0.1, 0.1, 0.06, 0.05, 0.04], 11);
    let epsilon = 0.3;
    let mut worst = 0.0f64;

    let times: Vec<f64> = (0..=50).map(|i| i as f64).collect();
    let traj = evolve_conservative(&f0, tensor, &times).unwrap();
    for d in &traj.diagnostics {
        worst = worst.max((d.trace.re - 1.0).abs()).max(d.trace.im.abs());
    }

    let source = SourceFamily::law(&f0, 1.0).unwrap();
    let avg = NoiseModel::averaged(epsilon).unwrap();
    let traj = evolve_dissipative(&f0, tensor, &avg, &source, &times[1..]).unwrap();
    for d in &traj.diagnostics {
        worst = worst.max((d.trace.re - 1.0).abs()).max(d.trace.im.abs());
    }

    let sampled = NoiseModel::sampled(epsilon, 64, 17).unwrap();
    let t_sampled: Vec<f64> = (1..=25).map(|i| 2.0 * i as f64).collect();
    let traj = evolve_dissipative(&f0, tensor, &sampled, &source, &t_sampled).unwrap();
    for d in &traj.diagnostics {
        worst = worst.max((d.trace.re - 1.0).abs()).max(d.trace.im.abs());
    }

    assert!(worst <= 1e-8, "trace deviation {worst:.3e}");
    println!("acceptance 03 probability conservation: PASS (max |Tr - 1| = {worst:.2e})");
}

#[test]
fn acceptance_04_source_law() {
    // g(0) = identity / d
    let d = 6;
    let mut worst_init = 0.0f64;
    let mut worst_trace = 0.0f64;
    let mut worst_ode = 0.0f64;
    for seed in 0..100u64 {
        let f0 = random_hermitian(d, 1000 + seed);
        let law = SourceLaw::new(&f0, 1.0).unwrap();

        for ev in law.spectrum_at(0.0) {
            assert_eq!(
                ev,
                1.0 / d as f64,
                "g(0) eigenvalue {ev} is not exactly 1/d"
            );
        }
        let g0 = source_solution(&f0, 1.0, 0.0).unwrap().matrix;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 / d as f64 } else { 0.0 };
                worst_init = worst_init.max((g0[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }

        for &t in &[0.5, 2.0, 10.0] {
            for ev in law.spectrum_at(t) {
                assert!(
                    ev > 0.0 && ev <= 1.0,
                    "eigenvalue {ev} outside (0,1] at t={t}"
                );
            }
            let tr: C64 = law.state_at(t).diagonal().sum();
            worst_trace = worst_trace.max((tr.re - 1.0).abs()).max(tr.im.abs());
        }

        worst_ode = worst_ode.max(source_ode_check(&f0, 1.0, 1.0, 1e-4).unwrap());
    }
    assert!(
        worst_init <= 1e-14,
        "g(0) deviates from identity/d by {worst_init:.3e}"
    );
    assert!(worst_trace <= 1e-10, "trace deviation {worst_trace:.3e}");
    assert!(worst_ode <= 1e-6, "ODE residual {worst_ode:.3e}");
    println!(
        "acceptance 04 source law: PASS (g(0) dev {worst_init:.2e}, trace dev {worst_trace:.2e}, ODE residual {worst_ode:.2e})"
    );
}

#[test]
fn acceptance_05_attractor_convergence() {
    let tensor = quartic_tensor_d6();
    let epsilon = 0.3;
    let tau = 1.0;
    let t_end = 40.0 / epsilon;
    let times: Vec<f64> = (1..=200).map(|i| t_end * i as f64 / 200.0).collect();

    // slow source: gap/tau = 0.12 < epsilon, rate = gap/tau
    // fast source: gap/tau = 0.60 > epsilon, rate = epsilon
    let cases = [
        (
            vec![0.29, 0.17, 0.155, 0.14, 0.13, 0.115],
            0.12,
            50.0,
            110.0,
        ),
        (vec![0.70, 0.10, 0.060, 0.05, 0.05, 0.040], 0.30, 12.0, 28.0),
    ];
    let mut summary = Vec::new();
    for (spectrum, expected_rate, lo, hi) in cases {
        let f0 = rotated_state(&spectrum, 23);
        let limit = attractor(&f0, tau).unwrap();
        assert!(!limit.degenerate);

        let source = SourceFamily::law(&f0, tau).unwrap();
        let noise = NoiseModel::averaged(epsilon).unwrap();
        let traj = evolve_dissipative(&f0, tensor, &noise, &source, &times).unwrap();

        let final_dist = frob_diff(traj.states.last().unwrap(), &limit.g_infinity);
        assert!(
            final_dist <= 1e-4,
            "distance to limit {final_dist:.3e} at t = 40/eps"
        );

        let dist: Vec<f64> = traj
            .states
            .iter()
            .map(|s| frob_diff(s, &limit.g_infinity))
            .collect();
        let rate = fit_rate(&times, &dist, lo, hi);
        let target = f64::min(epsilon, limit.rate);
        assert!(
            (target - expected_rate).abs() < 1e-12,
            "scenario setup drifted: min(eps, gap/tau) = {target}"
        );
        assert!(
            (rate - target).abs() <= 0.15 * target,
            "fitted rate {rate:.4} vs min(eps, gap/tau) = {target:.4}"
        );
        summary.push(format!(
            "dist {final_dist:.2e}, rate {rate:.4} vs {target:.4}"
        ));
    }
    println!(
        "acceptance 05 attractor convergence: PASS ({})",
        summary.join("; ")
    );
}

#[test]
fn acceptance_06_quantum_state_certification() {
    let tensor = quartic_tensor_d6();
    let epsilon = 0.3;
    let f0 = rotated_state(&[0.70, 0.10, 0.060, 0.05, 0.05, 0.040], 23);
    let source = SourceFamily::law(&f0, 1.0).unwrap();
    let noise = NoiseModel::averaged(epsilon).unwrap();
    let t_end = 40.0 / epsilon;
    let times: Vec<f64> = (1..=100).map(|i| t_end * i as f64 / 100.0).collect();
    let traj = evolve_dissipative(&f0, tensor, &noise, &source, &times).unwrap();

    let m = traj.final_state();
    let herm = m.diagnostics.hermiticity_residual;
    let trace_dev = (m.trace().re - 1.0).abs().max(m.trace().im.abs());
    let purity_dev = (m.purity() - 1.0).abs();
    let idem = frob_diff(&(&m.entries * &m.entries), &m.entries);
    assert!(herm <= 1e-8, "hermiticity {herm:.3e}");
    assert!(trace_dev <= 1e-8, "trace {trace_dev:.3e}");
    assert!(purity_dev <= 1e-8, "purity {purity_dev:.3e}");
    assert!(idem <= 1e-8, "idempotency {idem:.3e}");

    let vn = von_neumann_residual(&traj);
    let late = vn[vn.len() - 2];
    assert!(late <= 1e-7, "late von Neumann residual {late:.3e}");

    // classification agrees
    let report = classify_state(&m, 1e-8).unwrap();
    assert!(report.pure);

    // equivalence classes: diagonal states sharing the argmax position give
    // bitwise-identical limits
    let diag = |v: &[f64]| {
        let dm = DMatrix::from_fn(v.len(), v.len(), |i, j| {
            if i == j {
                C64::new(v[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        CoefficientMatrix::from_matrix(dm, None).unwrap()
    };
    let a = attractor(&diag(&[0.1, 0.5, 0.2, 0.1, 0.06, 0.04]), 1.0).unwrap();
    let b = attractor(&diag(&[0.2, 0.3, 0.2, 0.1, 0.1, 0.1]), 1.0).unwrap();
    assert_eq!(
        a.g_infinity, b.g_infinity,
        "equivalence class not bitwise identical"
    );

    println!(
        "acceptance 06 quantum state certification: PASS (purity dev {purity_dev:.2e}, idempotency {idem:.2e}, vn floor {late:.2e})"
    );
}

#[test]
fn acceptance_07_born_rule_consistency() {
    let grid = SpatialGrid::new(-10.0, 10.0, 513).unwrap();
    let basis = build_basis(&Potential::Harmonic { omega: 1.0 }, &grid, 16).unwrap();
    let pg = conjugate_momentum_grid(&grid);
    let x_op = operator_matrix(ObservableKind::X, &basis);
    let p_op = operator_matrix(ObservableKind::P, &basis);
    let xp_op = operator_matrix(ObservableKind::XpSym, &basis);

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let ensembles = [
        GaussianParams {
            x0: 0.0,
            p0: 0.0,
            sx: s,
            sp: s,
            correlation: 0.0,
        },
        GaussianParams {
            x0: 1.5,
            p0: 0.0,
            sx: 0.75,
            sp: 0.72,
            correlation: 0.0,
        },
        GaussianParams {
            x0: 0.0,
            p0: 0.7,
            sx: 0.72,
            sp: 0.75,
            correlation: 0.0,
        },
        GaussianParams {
            x0: 0.5,
            p0: -0.4,
            sx: 0.62,
            sp: 0.80,
            correlation: 0.2,
        },
        GaussianParams {
            x0: -1.0,
            p0: 0.3,
            sx: 0.80,
            sp: 0.66,
            correlation: -0.25,
        },
    ];
    let mut worst = 0.0f64;
    for g in &ensembles {
        let f = PhaseSpaceDistribution::gaussian(grid, pg, g).unwrap();
        let m = expand(&to_doubled(&f).unwrap(), &basis).unwrap();
        assert!(
            !m.diagnostics.truncation_warning,
            "basis too small for {g:?}"
        );

        let dx = (expectation(&m, &x_op).unwrap() - f.mean_x()).abs();
        let dp = (expectation(&m, &p_op).unwrap() - f.mean_p()).abs();
        let dxp = (expectation(&m, &xp_op).unwrap() - 2.0 * f.mean_xp()).abs();
        worst = worst.max(dx).max(dp).max(dxp);
    }
    assert!(worst <= 1e-4, "worst Born-rule mismatch {worst:.3e}");
    println!("acceptance 07 born rule consistency: PASS (worst mismatch {worst:.2e})");
}

#[test]
fn acceptance_08_energy_parity() {
    let pot = Potential::Quartic { g: 1.0 };
    let basis = basis_for(&pot, 8);
    let tensor = quartic_tensor_d8();
    let report = parity_spectrum(&basis, tensor).unwrap();
    assert!(
        report.max_pairing_residual <= 1e-6,
        "pairing residual {:.3e}",
        report.max_pairing_residual
    );
    println!(
        "acceptance 08 energy parity: PASS (pairing residual {:.2e}, zero mode {:.2e})",
        report.max_pairing_residual, report.min_abs_eigenvalue
    );
}

#[test]
fn acceptance_09_noise_average_equivalence() {
    // constant source: the Gaussian average of the single-draw closed form
    // equals the averaged form exactly, so the comparison measures pure
    // Monte-Carlo error
    let tensor = quartic_tensor_d6();
    let d = 6;
    let epsilon = 0.3;
    let f0 = rotated_state(&[0.45, 0.2, 0.15, 0.1, 0.06, 0.04], 31);
    let mixed = DMatrix::from_diagonal_element(d, d, C64::new(1.0 / d as f64, 0.0));
    let source = SourceFamily::constant(mixed).unwrap();
    let times = [1.0, 5.0, 10.0];

    let avg = evolve_dissipative(
        &f0,
        tensor,
        &NoiseModel::averaged(epsilon).unwrap(),
        &source,
        &times,
    )
    .unwrap();
    let smp = evolve_dissipative(
        &f0,
        tensor,
        &NoiseModel::sampled(epsilon, 4096, 19).unwrap(),
        &source,
        &times,
    )
    .unwrap();

    let ses = smp.sampled_std_err.as_ref().unwrap();
    let mut worst_z = 0.0f64;
    for (ti, _) in times.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                let diff = (smp.states[ti][(i, j)] - avg.states[ti][(i, j)]).norm();
                let se = ses[ti][(i, j)];
                assert!(
                    diff <= 3.0 * se + 1e-12,
                    "t index {ti}, entry ({i},{j}): |diff| {diff:.3e} vs 3 SE {:.3e}",
                    3.0 * se
                );
                if se > 0.0 {
                    worst_z = worst_z.max(diff / se);
                }
            }
        }
    }
    println!("acceptance 09 noise average equivalence: PASS (worst |diff|/SE = {worst_z:.2} <= 3)");
}

#[test]
fn acceptance_10_appendix_flows() {
    // basin map over omega0 in [0, 3], step 0.01
    let sys = FiniteQuantumSystem::from_eigenvalues(vec![1.0, 2.0]).unwrap();
    let map = basin_map(&sys, 1.0, 0.0, 3.0, 0.01, 150.0, 1e-8).unwrap();
    assert_eq!(map.len(), 301);
    let mut separatrix = 0usize;
    for p in &map {
        if p.omega0 == 1.5 {
            // the exact separatrix start has no side and never moves
            assert!(p.fixed_point_index.is_none());
            separatrix += 1;
            continue;
        }
        let expect = if p.omega0 < 1.5 { 0 } else { 1 };
        assert_eq!(
            p.fixed_point_index,
            Some(expect),
            "omega0 = {} landed on the wrong side",
            p.omega0
        );
        let target = sys.eigenvalues[expect];
        assert!(
            (p.omega_final - target).abs() <= 1e-8,
            "omega0 = {}: |omega(t_max) - E| = {:.3e}",
            p.omega0,
            (p.omega_final - target).abs()
        );
    }

    // beables flow vs the per-component scalar oracle
    let model = BeablesModel::new(vec![vec![1.0, 2.0], vec![3.0, 5.0]], 1.0).unwrap();
    let times: Vec<f64> = (1..=120).map(|i| 0.5 * i as f64).collect();
    let traj = beables_flow(&model, &[1.1, 4.9], &times).unwrap();
    let last = traj.omega.last().unwrap();
    assert!((last[0] - 1.0).abs() <= 1e-6);
    assert!((last[1] - 5.0).abs() <= 1e-6);

    let sys_a = FiniteQuantumSystem::from_eigenvalues(vec![1.0, 2.0]).unwrap();
    let sys_b = FiniteQuantumSystem::from_eigenvalues(vec![3.0, 5.0]).unwrap();
    let oracle_a = thooft_flow(
        &sys_a,
        1.0,
        FlowState {
            phi: 0.0,
            omega: 1.1,
        },
        &times,
    )
    .unwrap();
    let oracle_b = thooft_flow(
        &sys_b,
        1.0,
        FlowState {
            phi: 0.0,
            omega: 4.9,
        },
        &times,
    )
    .unwrap();
    let mut worst_sep = 0.0f64;
    for i in 0..times.len() {
        worst_sep = worst_sep
            .max((traj.omega[i][0] - oracle_a.omega[i]).abs())
            .max((traj.omega[i][1] - oracle_b.omega[i]).abs());
    }
    assert!(worst_sep <= 1e-6, "separability deviation {worst_sep:.3e}");

    // monotone descent on every run
    for w in traj.f_squared.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "F^2 increased");
    }
    for run in [&oracle_a, &oracle_b] {
        for w in run.f_squared.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "f^2 increased");
        }
    }

    println!(
        "acceptance 10 appendix flows: PASS (301 basin points, {separatrix} separatrix, separability {worst_sep:.2e})"
    );
}
