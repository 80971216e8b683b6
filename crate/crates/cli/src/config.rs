//! Run configuration, read from TOML.
//!
//! Every table rejects unknown keys. After parsing, [`RunConfig::validate`]
//! checks that the blocks the chosen experiment needs are present and
//! consistent, before any computation starts.

use serde::{Deserialize, Serialize};

use perfhom::experiments::Regime;
use perfhom::{HoleShape, MaskQuadrature, Profile, RescaleMode};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ValidateKernel,
    Solve,
    Eigen,
    Covering,
    EpsilonSweep,
    DeltaSweep,
    NonlocalCritical,
    IteratedLimits,
    CellCoefficients,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ValidateKernel => "validate-kernel",
            Self::Solve => "solve",
            Self::Eigen => "eigen",
            Self::Covering => "covering",
            Self::EpsilonSweep => "epsilon-sweep",
            Self::DeltaSweep => "delta-sweep",
            Self::NonlocalCritical => "nonlocal-critical",
            Self::IteratedLimits => "iterated-limits",
            Self::CellCoefficients => "cell-coefficients",
        }
    }

    /// Names accepted by `--emit-fields`.
    pub fn field_names(self) -> &'static [&'static str] {
        match self {
            Self::ValidateKernel => &[],
            Self::Solve => &["mask", "source", "solution"],
            Self::Eigen => &["mask", "eigenvector"],
            Self::Covering => &["mask", "distance"],
            Self::EpsilonSweep | Self::NonlocalCritical => &["limit", "chi"],
            Self::DeltaSweep => &["mask", "reference"],
            Self::IteratedLimits => &["w", "v"],
            Self::CellCoefficients => &["correctors"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covering: Option<CoveringConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<CasesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    /// Unperforated box.
    Box {
        omega_lo: Vec<f64>,
        omega_hi: Vec<f64>,
        spacing: f64,
    },
    /// Balls of radius `c0 ε^γ` centered in the cells of a unit lattice.
    PeriodicBalls {
        omega_lo: Vec<f64>,
        omega_hi: Vec<f64>,
        c0: f64,
        #[serde(default = "one")]
        gamma: f64,
        /// Required except for sweeps, which take ε from `[sweep]`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        epsilon: Option<f64>,
        spacing: f64,
        #[serde(default)]
        quadrature: MaskQuadrature,
        #[serde(default)]
        interior_holes_only: bool,
    },
    /// `Ω` the ball of radius `outer`, `Ω^ε` the ball of radius `inner`.
    Annulus {
        #[serde(default = "default_inner")]
        inner: f64,
        #[serde(default = "default_outer")]
        outer: f64,
        spacing: f64,
    },
    /// Horizontal hole strips in `(-1, 1)²`.
    Strips {
        epsilon: f64,
        spacing: f64,
        #[serde(default)]
        quadrature: MaskQuadrature,
    },
    /// `{-1 < y < ½(1 + sin(x/ε))}` inside `(0, 1) × (-1, 1)`.
    Oscillating { epsilon: f64, spacing: f64 },
}

fn default_inner() -> f64 {
    3.0
}

fn default_outer() -> f64 {
    6.0
}

impl GeometryConfig {
    pub fn dim(&self) -> usize {
        match self {
            Self::Box { omega_lo, .. } | Self::PeriodicBalls { omega_lo, .. } => omega_lo.len(),
            _ => 2,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self {
            Self::Box { spacing, .. }
            | Self::PeriodicBalls { spacing, .. }
            | Self::Annulus { spacing, .. }
            | Self::Strips { spacing, .. }
            | Self::Oscillating { spacing, .. } => *spacing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassMode {
    #[default]
    Renormalized,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub profile: Profile,
    /// Support radius `δ ∈ (0, 1]`; `delta-sweep` takes its radii from `[sweep]`.
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "default_rescale")]
    pub rescale: RescaleMode,
    #[serde(default)]
    pub mass: MassMode,
    /// Only needed when no geometry fixes the dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

fn default_rescale() -> RescaleMode {
    RescaleMode::Mass1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvolutionMethod {
    #[default]
    Auto,
    Fft,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub boundary: Boundary,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    pub method: ConvolutionMethod,
    pub seed: u64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let eig = perfhom::linalg::EigenOptions::default();
        Self {
            boundary: Boundary::Dirichlet,
            tol: 1e-8,
            max_iter: None,
            method: ConvolutionMethod::Auto,
            seed: eig.seed,
            eigen_tol: eig.tol,
            eigen_max_iter: eig.max_iter,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `f = Δ Π sin(π (x_a - lo_a)/L_a)` over the geometry's bounding box,
    /// so the local solution with zero boundary values is the product.
    Sine,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    /// Record the first eigenvalue at each ε.
    #[serde(default = "yes")]
    pub eigen: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveringConfig {
    pub layer_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CasesConfig {
    pub boundary: Boundary,
    pub regimes: Vec<Regime>,
    #[serde(default = "default_case_dim")]
    pub dim: usize,
    #[serde(default = "default_side")]
    pub side: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "default_case_tol")]
    pub tol: f64,
    /// Radius of the disk hole in the unit reference cell (Neumann only).
    #[serde(default = "default_cell_radius")]
    pub cell_radius: f64,
    #[serde(default = "default_cell_spacing")]
    pub cell_spacing: f64,
}

fn default_case_dim() -> usize {
    2
}

fn default_side() -> f64 {
    4.0
}

fn default_nodes() -> usize {
    33
}

fn default_case_tol() -> f64 {
    1e-10
}

fn default_cell_radius() -> f64 {
    0.25
}

fn default_cell_spacing() -> f64 {
    1.0 / 64.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    #[serde(default = "unit_cell")]
    pub lengths: Vec<f64>,
    pub hole: HoleShape,
    #[serde(default = "default_cell_spacing")]
    pub spacing: f64,
    #[serde(default = "default_case_tol")]
    pub tol: f64,
}

fn unit_cell() -> Vec<f64> {
    vec![1.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub csv: bool,
    pub summary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "perfhom-out".into(),
            csv: true,
            summary: true,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The parsed configuration with every default filled in.
    pub fn normalized(&self) -> String {
        toml::to_string(self).expect("run configs serialize")
    }

    pub fn geometry(&self) -> CliResult<&GeometryConfig> {
        self.geometry
            .as_ref()
            .ok_or_else(|| missing(self.experiment, "geometry"))
    }

    pub fn kernel(&self) -> CliResult<&KernelConfig> {
        self.kernel.as_ref().ok_or_else(|| missing(self.experiment, "kernel"))
    }

    pub fn dim(&self) -> usize {
        self.geometry
            .as_ref()
            .map(GeometryConfig::dim)
            .or_else(|| self.kernel.as_ref().and_then(|k| k.dim))
            .unwrap_or(2)
    }

    pub fn validate(&self) -> CliResult<()> {
        use ExperimentKind as K;
        let exp = self.experiment;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!("`{name}` must be positive, got {v}")))
            }
        };
        positive("solver.tol", self.solver.tol)?;
        positive("solver.eigen_tol", self.solver.eigen_tol)?;
        if let Some(g) = &self.geometry {
            positive("geometry.spacing", g.spacing())?;
            if let GeometryConfig::Box { omega_lo, omega_hi, .. } | GeometryConfig::PeriodicBalls { omega_lo, omega_hi, .. } = g
            {
                if omega_lo.is_empty() || omega_lo.len() != omega_hi.len() {
                    return Err(CliError::Config("`omega_lo` and `omega_hi` need the same nonzero length".into()));
                }
            }
        }
        if let (Some(k), Some(g)) = (&self.kernel, &self.geometry) {
            if k.dim.is_some_and(|d| d != g.dim()) {
                return Err(CliError::Config("`kernel.dim` differs from the geometry dimension".into()));
            }
        }
        match exp {
            K::ValidateKernel => {
                self.kernel()?;
            }
            K::Solve | K::Eigen | K::Covering => {
                self.kernel()?;
                if let GeometryConfig::PeriodicBalls { epsilon: None, .. } = self.geometry()? {
                    return Err(CliError::Config(format!("`{}` needs `geometry.epsilon`", exp.name())));
                }
            }
            K::EpsilonSweep | K::NonlocalCritical => {
                self.kernel()?;
                if !matches!(self.geometry()?, GeometryConfig::PeriodicBalls { .. }) {
                    return Err(CliError::Config(format!("`{}` needs a periodic-balls geometry", exp.name())));
                }
                self.sweep
                    .as_ref()
                    .and_then(|s| s.epsilons.as_ref())
                    .filter(|e| !e.is_empty())
                    .ok_or_else(|| missing(exp, "sweep.epsilons"))?;
                if exp == K::NonlocalCritical && self.solver.boundary != Boundary::Dirichlet {
                    return Err(CliError::Config("`nonlocal-critical` uses the Dirichlet boundary condition".into()));
                }
            }
            K::DeltaSweep => {
                self.kernel()?;
                self.geometry()?;
                self.sweep
                    .as_ref()
                    .and_then(|s| s.deltas.as_ref())
                    .filter(|d| !d.is_empty())
                    .ok_or_else(|| missing(exp, "sweep.deltas"))?;
            }
            K::IteratedLimits => {
                let cases = self.cases.as_ref().ok_or_else(|| missing(exp, "cases"))?;
                if cases.regimes.is_empty() {
                    return Err(CliError::Config("`cases.regimes` is empty".into()));
                }
            }
            K::CellCoefficients => {
                self.cell.as_ref().ok_or_else(|| missing(exp, "cell"))?;
            }
        }
        Ok(())
    }
}

fn missing(exp: ExperimentKind, block: &str) -> CliError {
    CliError::Config(format!("experiment `{}` needs `{block}`", exp.name()))
}
