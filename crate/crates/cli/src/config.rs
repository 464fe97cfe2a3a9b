//! Scenario configuration: flat TOML with one nesting level of sections.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use attractor_core::phasespace::GaussianParams;
use attractor_core::{Potential, SpatialGrid};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Basis,
    Delta,
    Conservative,
    Dissipative,
    Attractor,
    Parity,
    Prequantum,
    Beables,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Basis => "basis",
            Scenario::Delta => "delta",
            Scenario::Conservative => "conservative",
            Scenario::Dissipative => "dissipative",
            Scenario::Attractor => "attractor",
            Scenario::Parity => "parity",
            Scenario::Prequantum => "prequantum",
            Scenario::Beables => "beables",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub d: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub t_max: f64,
    pub n_times: usize,
    /// snapshot every `stride`-th output; 0 disables snapshots
    #[serde(default)]
    pub stride: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub mode: NoiseKind,
    pub n_draws: Option<usize>,
    pub seed: Option<u64>,
    pub t_min: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Averaged,
    Sampled,
}

/// Initial state: exactly one of a parametric family, a distribution CSV,
/// or an explicit coefficient-matrix JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum InitialStateSection {
    Gaussian {
        #[allow(dead_code)] // deserialization tag selecting this variant
        family: GaussianFamilyTag,
        x0: f64,
        p0: f64,
        sx: f64,
        sp: f64,
        #[serde(default)]
        correlation: f64,
    },
    DistributionFile {
        file: PathBuf,
    },
    MatrixFile {
        matrix: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianFamilyTag {
    Gaussian,
}

impl InitialStateSection {
    pub fn gaussian_params(&self) -> Option<GaussianParams> {
        match self {
            InitialStateSection::Gaussian {
                x0,
                p0,
                sx,
                sp,
                correlation,
                ..
            } => Some(GaussianParams {
                x0: *x0,
                p0: *p0,
                sx: *sx,
                sp: *sp,
                correlation: *correlation,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    /// scalar flow: eigenvalue list of the finite system
    pub eigenvalues: Option<Vec<f64>>,
    /// vector flow: one eigenvalue row per beable
    pub eigenvalue_table: Option<Vec<Vec<f64>>>,
    pub kappa: f64,
    pub omega0: Option<f64>,
    pub omega0_vec: Option<Vec<f64>>,
    #[serde(default)]
    pub phi0: f64,
    pub t_max: f64,
    pub n_times: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinSection {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub t_max: f64,
    #[serde(default = "default_basin_tol")]
    pub tolerance: f64,
}

fn default_basin_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSection {
    pub n: Vec<i64>,
    #[serde(default = "default_dominance")]
    pub dominance_ratio: f64,
    /// time at which the sector phase is reported
    #[serde(default = "default_phase_time")]
    pub phase_time: f64,
}

fn default_dominance() -> f64 {
    attractor_core::prequantum::DOMINANCE_RATIO
}

fn default_phase_time() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub potential: Option<Potential>,
    pub grid: Option<GridSection>,
    pub basis: Option<BasisSection>,
    pub dynamics: Option<DynamicsSection>,
    pub noise: Option<NoiseSection>,
    pub initial_state: Option<InitialStateSection>,
    pub flow: Option<FlowSection>,
    pub basin: Option<BasinSection>,
    pub sector: Option<SectorSection>,
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("unparseable config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // config paths are interpreted relative to the config file
        if let Some(base) = path.parent() {
            cfg.rebase_paths(base);
        }
        Ok(cfg)
    }

    fn rebase_paths(&mut self, base: &Path) {
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        match &mut self.initial_state {
            Some(InitialStateSection::DistributionFile { file }) => rebase(file),
            Some(InitialStateSection::MatrixFile { matrix }) => rebase(matrix),
            _ => {}
        }
        // output.dir stays relative to the working directory unless overridden
    }

    /// Output directory, honoring the ATTRACTOR_OUT override.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os("ATTRACTOR_OUT") {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output.dir.clone(),
        }
    }

    fn require<'a, T>(&self, field: Option<&'a T>, name: &str) -> Result<&'a T, CliError> {
        field.ok_or_else(|| {
            CliError::Config(format!(
                "scenario '{}' requires the [{name}] section",
                self.scenario.name()
            ))
        })
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid, CliError> {
        let g = self.require(self.grid.as_ref(), "grid")?;
        SpatialGrid::new(g.x_min, g.x_max, g.n_points)
            .map_err(|e| CliError::Config(format!("bad grid: {e}")))
    }

    /// Structural validation: sections present, files exist, numbers sane.
    /// No numerical work happens here.
    pub fn validate(&self) -> Result<(), CliError> {
        let needs_basis = matches!(
            self.scenario,
            Scenario::Basis
                | Scenario::Delta
                | Scenario::Conservative
                | Scenario::Dissipative
                | Scenario::Attractor
                | Scenario::Parity
        );
        if needs_basis {
            let pot = self.require(self.potential.as_ref(), "potential")?;
            pot.check_confining()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let grid = self.spatial_grid()?;
            let b = self.require(self.basis.as_ref(), "basis")?;
            if b.d == 0 || b.d > grid.n_points / 4 {
                return Err(CliError::Config(format!(
                    "basis dimension d = {} must lie in [1, n_points/4 = {}]",
                    b.d,
                    grid.n_points / 4
                )));
            }
        }

        let needs_dynamics = matches!(
            self.scenario,
            Scenario::Conservative | Scenario::Dissipative | Scenario::Attractor
        );
        if needs_dynamics {
            let dyn_ = self.require(self.dynamics.as_ref(), "dynamics")?;
            if dyn_.t_max <= 0.0 || dyn_.n_times < 2 {
                return Err(CliError::Config(
                    "dynamics needs t_max > 0 and n_times >= 2".into(),
                ));
            }
            let state = self.require(self.initial_state.as_ref(), "initial_state")?;
            match state {
                InitialStateSection::Gaussian {
                    sx,
                    sp,
                    correlation,
                    ..
                } => {
                    if *sx <= 0.0 || *sp <= 0.0 || correlation.abs() >= 1.0 {
                        return Err(CliError::Config("bad gaussian parameters".into()));
                    }
                }
                InitialStateSection::DistributionFile { file } => {
                    if !file.is_file() {
                        return Err(CliError::Config(format!(
                            "initial-state file {} does not exist",
                            file.display()
                        )));
                    }
                }
                InitialStateSection::MatrixFile { matrix } => {
                    if !matrix.is_file() {
                        return Err(CliError::Config(format!(
                            "initial-state matrix {} does not exist",
                            matrix.display()
                        )));
                    }
                }
            }
        }

        if matches!(self.scenario, Scenario::Dissipative | Scenario::Attractor) {
            let dyn_ = self.require(self.dynamics.as_ref(), "dynamics")?;
            if dyn_.epsilon.map_or(true, |e| e <= 0.0) {
                return Err(CliError::Config(
                    "dynamics.epsilon must be set and positive".into(),
                ));
            }
            if dyn_.tau.map_or(true, |t| t <= 0.0) {
                return Err(CliError::Config(
                    "dynamics.tau must be set and positive".into(),
                ));
            }
            let noise = self.require(self.noise.as_ref(), "noise")?;
            if noise.mode == NoiseKind::Sampled {
                if noise.seed.is_none() {
                    return Err(CliError::Config(
                        "noise.seed is mandatory when noise.mode = \"sampled\"".into(),
                    ));
                }
                if noise.n_draws.map_or(true, |n| n == 0) {
                    return Err(CliError::Config(
                        "noise.n_draws must be set and positive for sampled mode".into(),
                    ));
                }
            }
        }

        match self.scenario {
            Scenario::Prequantum => {
                let flow = self.require(self.flow.as_ref(), "flow")?;
                if flow.eigenvalues.as_ref().map_or(true, |e| e.is_empty()) {
                    return Err(CliError::Config("prequantum needs flow.eigenvalues".into()));
                }
                if flow.omega0.is_none() && self.basin.is_none() {
                    return Err(CliError::Config(
                        "prequantum needs flow.omega0 or a [basin] sweep".into(),
                    ));
                }
                self.check_flow_common(flow)?;
            }
            Scenario::Beables => {
                let flow = self.require(self.flow.as_ref(), "flow")?;
                let table = flow.eigenvalue_table.as_ref().ok_or_else(|| {
                    CliError::Config("beables needs flow.eigenvalue_table".into())
                })?;
                let omega0 = flow
                    .omega0_vec
                    .as_ref()
                    .ok_or_else(|| CliError::Config("beables needs flow.omega0_vec".into()))?;
                if table.len() != omega0.len() {
                    return Err(CliError::Config(format!(
                        "{} beables but {} initial components",
                        table.len(),
                        omega0.len()
                    )));
                }
                if let Some(sector) = &self.sector {
                    if sector.n.len() != table.len() {
                        return Err(CliError::Config(format!(
                            "sector has {} components for {} beables",
                            sector.n.len(),
                            table.len()
                        )));
                    }
                }
                self.check_flow_common(flow)?;
            }
            _ => {}
        }

        Ok(())
    }

    fn check_flow_common(&self, flow: &FlowSection) -> Result<(), CliError> {
        if flow.kappa <= 0.0 {
            return Err(CliError::Config("flow.kappa must be positive".into()));
        }
        if flow.t_max <= 0.0 || flow.n_times < 2 {
            return Err(CliError::Config(
                "flow needs t_max > 0 and n_times >= 2".into(),
            ));
        }
        Ok(())
    }
}
