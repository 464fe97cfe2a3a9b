use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phasespace::{hermiticity_residual, CoefficientMatrix};
use crate::C64;

/// The source law g(t) = exp(f(0) t / tau) / Tr exp(f(0) t / tau), held as
/// the eigendecomposition of the driving matrix so states and derivatives
/// at any time are overflow-safe (the top eigenvalue is factored out).
#[derive(Debug, Clone)]
pub struct SourceLaw {
    pub dim: usize,
    pub tau: f64,
    eigvecs: DMatrix<C64>,
    eigvals: DVector<f64>,
}

/// Snapshot of the source at one time.
#[derive(Debug, Clone)]
pub struct SourceState {
    pub dim: usize,
    pub tau: f64,
    pub time: f64,
    pub matrix: DMatrix<C64>,
}

impl SourceLaw {
    pub fn new(f0: &CoefficientMatrix, tau: f64) -> Result<Self> {
        if tau <= 0.0 {
            return Err(Error::InvalidInput(format!("tau = {tau} must be positive")));
        }
        let eig = f0.entries.clone().symmetric_eigen();
        Ok(Self {
            dim: f0.dim,
            tau,
            eigvecs: eig.eigenvectors,
            eigvals: eig.eigenvalues,
        })
    }

    fn weights(&self, t: f64) -> (Vec<f64>, f64) {
        let top = self
            .eigvals
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let w: Vec<f64> = self
            .eigvals
            .iter()
            .map(|&mu| ((mu - top) * t / self.tau).exp())
            .collect();
        let z: f64 = w.iter().sum();
        (w, z)
    }

    /// g(t), Hermitian with unit trace and eigenvalues in (0, 1].
    pub fn state_at(&self, t: f64) -> DMatrix<C64> {
        let (w, z) = self.weights(t);
        self.assemble(|i| w[i] / z)
    }

    /// The eigenvalues of g(t) in closed form: the normalized exponential
    /// weights, strictly positive and bounded by 1 for finite t.
    pub fn spectrum_at(&self, t: f64) -> Vec<f64> {
        let (w, z) = self.weights(t);
        w.into_iter().map(|wi| wi / z).collect()
    }

    /// d/dt g(t), evaluated from the closed form (traceless).
    pub fn derivative_at(&self, t: f64) -> DMatrix<C64> {
        let (w, z) = self.weights(t);
        let mean: f64 = self
            .eigvals
            .iter()
            .zip(&w)
            .map(|(&mu, &wi)| mu * wi)
            .sum::<f64>()
            / z;
        self.assemble(|i| (w[i] / z) * (self.eigvals[i] - mean) / self.tau)
    }

    /// The t -> infinity limit: the projector onto the top eigenvector
    /// (lowest index on numerically exact ties).
    pub fn limit(&self) -> DMatrix<C64> {
        let mut lbar = 0;
        for i in 1..self.dim {
            if self.eigvals[i] > self.eigvals[lbar] {
                lbar = i;
            }
        }
        let u = self.eigvecs.column(lbar);
        DMatrix::from_fn(self.dim, self.dim, |i, j| u[i] * u[j].conj())
    }

    fn assemble(&self, diag: impl Fn(usize) -> f64) -> DMatrix<C64> {
        let d = self.dim;
        let mut scaled = self.eigvecs.clone();
        for i in 0..d {
            let s = C64::new(diag(i), 0.0);
            for r in 0..d {
                scaled[(r, i)] *= s;
            }
        }
        scaled * self.eigvecs.adjoint()
    }
}

/// The source fed to the dissipative evolution: either the closed-form law
/// driven by f(0), or a constant matrix (a stationary source).
#[derive(Debug, Clone)]
pub enum SourceFamily {
    Law(SourceLaw),
    Constant(DMatrix<C64>),
}

impl SourceFamily {
    pub fn law(f0: &CoefficientMatrix, tau: f64) -> Result<Self> {
        Ok(SourceFamily::Law(SourceLaw::new(f0, tau)?))
    }

    /// A constant source; must be Hermitian with unit trace.
    pub fn constant(g: DMatrix<C64>) -> Result<Self> {
        let resid = hermiticity_residual(&g);
        if resid > 1e-10 {
            return Err(Error::NonHermitian(resid));
        }
        let tr = g.diagonal().sum();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "constant source must have unit trace, found {tr}"
            )));
        }
        Ok(SourceFamily::Constant(g))
    }

    pub fn dim(&self) -> usize {
        match self {
            SourceFamily::Law(l) => l.dim,
            SourceFamily::Constant(g) => g.nrows(),
        }
    }

    pub fn at(&self, t: f64) -> DMatrix<C64> {
        match self {
            SourceFamily::Law(l) => l.state_at(t),
            SourceFamily::Constant(g) => g.clone(),
        }
    }

    pub fn derivative_at(&self, t: f64) -> DMatrix<C64> {
        match self {
            SourceFamily::Law(l) => l.derivative_at(t),
            SourceFamily::Constant(g) => DMatrix::zeros(g.nrows(), g.ncols()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, SourceFamily::Constant(_))
    }

    pub fn limit(&self) -> DMatrix<C64> {
        match self {
            SourceFamily::Law(l) => l.limit(),
            SourceFamily::Constant(g) => g.clone(),
        }
    }
}

/// g(t) = exp(f(0) t/tau) / Tr exp(f(0) t/tau).
pub fn source_solution(f0: &CoefficientMatrix, tau: f64, t: f64) -> Result<SourceState> {
    let law = SourceLaw::new(f0, tau)?;
    Ok(SourceState {
        dim: law.dim,
        tau,
        time: t,
        matrix: law.state_at(t),
    })
}

/// Residual of the closed form against its defining equation
/// dg/dt = (f(0) - <f(0)>_g) g / tau, with the time derivative replaced by a
/// central difference of width `dt`. Returns the largest entry residual.
pub fn source_ode_check(f0: &CoefficientMatrix, tau: f64, t: f64, dt: f64) -> Result<f64> {
    if dt <= 0.0 || dt >= tau {
        return Err(Error::InvalidInput(format!(
            "dt = {dt} must lie in (0, tau = {tau})"
        )));
    }
    let law = SourceLaw::new(f0, tau)?;
    let plus = law.state_at(t + dt);
    let minus = law.state_at(t - dt);
    let g = law.state_at(t);

    let trace_g: C64 = g.diagonal().sum();
    let fg = &f0.entries * &g;
    let mean = fg.diagonal().sum() / trace_g;

    let mut resid = 0.0f64;
    for i in 0..law.dim {
        for j in 0..law.dim {
            let lhs = (plus[(i, j)] - minus[(i, j)]) / (2.0 * dt);
            let mut rhs = fg[(i, j)] - mean * g[(i, j)];
            rhs /= tau;
            resid = resid.max((lhs - rhs).norm());
        }
    }
    Ok(resid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::testutil::random_hermitian;
    use approx::assert_abs_diff_eq;

    fn coeff(entries: DMatrix<C64>) -> CoefficientMatrix {
        CoefficientMatrix::from_matrix(entries, None).unwrap()
    }

    fn diag2(a: f64, b: f64) -> CoefficientMatrix {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(a, 0.0);
        m[(1, 1)] = C64::new(b, 0.0);
        coeff(m)
    }

    #[test]
    fn initial_source_is_maximally_mixed() {
        let f0 = random_hermitian(5, 3);
        let s = source_solution(&f0, 1.0, 0.0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let target = if i == j { 0.2 } else { 0.0 };
                assert_abs_diff_eq!(s.matrix[(i, j)].re, target, epsilon = 1e-12);
                assert_abs_diff_eq!(s.matrix[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn scalar_closed_form() {
        // diag(0.7, 0.3), tau = 1, t = 1: softmax of (0.7, 0.3)
        let s = source_solution(&diag2(0.7, 0.3), 1.0, 1.0).unwrap();
        let z = (0.7f64).exp() + (0.3f64).exp();
        assert_abs_diff_eq!(s.matrix[(0, 0)].re, (0.7f64).exp() / z, epsilon = 1e-12);
        assert_abs_diff_eq!(s.matrix[(1, 1)].re, (0.3f64).exp() / z, epsilon = 1e-12);
        assert_abs_diff_eq!(s.matrix[(0, 0)].re, 0.5986876601124521, epsilon = 1e-12);
    }

    #[test]
    fn long_time_limit_projects_on_top_eigenvalue() {
        let s = source_solution(&diag2(0.7, 0.3), 1.0, 200.0).unwrap();
        assert_abs_diff_eq!(s.matrix[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.matrix[(1, 1)].re + 1.0, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_one_and_positive_spectrum_for_random_states() {
        for seed in 0..20 {
            let f0 = random_hermitian(6, seed);
            let law = SourceLaw::new(&f0, 1.0).unwrap();
            for &t in &[0.0, 0.5, 2.0, 10.0] {
                let g = law.state_at(t);
                let tr: C64 = g.diagonal().sum();
                assert_abs_diff_eq!(tr.re, 1.0, epsilon = 1e-10);
                assert_abs_diff_eq!(tr.im, 0.0, epsilon = 1e-12);
                // closed-form spectrum: strictly positive, bounded by 1
                let spec = law.spectrum_at(t);
                for &ev in &spec {
                    assert!(ev > 0.0, "eigenvalue {ev} not positive at t={t}");
                    assert!(ev <= 1.0);
                }
                // the assembled matrix carries the same spectrum to roundoff
                let mut assembled: Vec<f64> =
                    g.symmetric_eigen().eigenvalues.iter().copied().collect();
                assembled.sort_by(f64::total_cmp);
                let mut expected = spec.clone();
                expected.sort_by(f64::total_cmp);
                for (a, e) in assembled.iter().zip(&expected) {
                    assert_abs_diff_eq!(a, e, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn closed_form_satisfies_ode_diagonal() {
        let r = source_ode_check(&diag2(0.7, 0.3), 1.0, 0.8, 1e-4).unwrap();
        assert!(r < 1e-7, "residual {r:.2e}");
    }

    #[test]
    fn closed_form_satisfies_ode_random() {
        let f0 = random_hermitian(5, 11);
        let r = source_ode_check(&f0, 1.0, 1.0, 1e-4).unwrap();
        assert!(r <= 1e-6, "residual {r:.2e}");
    }

    #[test]
    fn maximally_mixed_driver_is_fixed_point() {
        let m = DMatrix::from_diagonal_element(4, 4, C64::new(0.25, 0.0));
        let f0 = coeff(m);
        let r = source_ode_check(&f0, 1.0, 2.0, 1e-4).unwrap();
        assert!(r < 1e-13, "residual {r:.2e}");
        let law = SourceLaw::new(&f0, 1.0).unwrap();
        let g = law.state_at(37.0);
        for i in 0..4 {
            assert_abs_diff_eq!(g[(i, i)].re, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn derivative_is_traceless() {
        let f0 = random_hermitian(6, 99);
        let law = SourceLaw::new(&f0, 0.7).unwrap();
        for &t in &[0.1, 1.0, 5.0] {
            let tr: C64 = law.derivative_at(t).diagonal().sum();
            assert!(tr.norm() < 1e-12);
        }
    }

    #[test]
    fn constant_family_validates() {
        let good = DMatrix::from_diagonal_element(3, 3, C64::new(1.0 / 3.0, 0.0));
        assert!(SourceFamily::constant(good).is_ok());
        let bad = DMatrix::from_diagonal_element(3, 3, C64::new(1.0, 0.0));
        assert!(SourceFamily::constant(bad).is_err());
    }
}
