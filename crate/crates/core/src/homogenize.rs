//! Coefficient fields of the limit equations, the limit solvers and
//! ε-sweeps comparing perforated solutions against them.
//!
//! Both limit equations are solved in divided form on `Ω ∖ D`, where
//! `D = {𝒳 < 1e-12}`:
//!
//! ```text
//! Dirichlet:  f = ∫ J(x - y)(u(y) - u(x)) dy - ν u,      ν = (1 - 𝒳)/𝒳
//! Neumann:    f = ∫ J(x - y)(u(y) - u(x)) dy - (Λ/𝒳) u
//! ```
//!
//! with `u = 0` on `D` and outside `Ω`. The operator is the full-space
//! convolution operator plus a nonnegative diagonal, hence symmetric.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conv::ConvMethod;
use crate::error::{Error, Result};
use crate::geometry::{analytic_weak_limit, build_periodic_mask, DomainMask, Label, LimitFamily, PerforationSpec, WeakLimit};
use crate::grid::{inner_product, Grid, ScalarField};
use crate::kernel::SampledKernel;
use crate::linalg::EigenOptions;
use crate::nonlocal::{convolve_field, BoundaryCondition, NonlocalOperator, SolveOptions};

/// Threshold below which `𝒳` counts as zero.
pub const VANISHING_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientRole {
    Chi,
    Lambda,
    Gamma,
    Nu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    field: ScalarField,
    role: CoefficientRole,
}

impl CoefficientField {
    pub fn new(field: ScalarField, role: CoefficientRole) -> Result<Self> {
        let tol = 1e-12;
        let v = field.values();
        let bad = match role {
            CoefficientRole::Chi | CoefficientRole::Gamma => v.iter().position(|&x| x < -tol || x > 1.0 + tol),
            CoefficientRole::Nu => v.iter().position(|&x| x < 0.0),
            CoefficientRole::Lambda => None,
        };
        if let Some(node) = bad {
            return Err(Error::param(
                "coefficient",
                format!("{role:?} value {} at node {node} is out of range", v[node]),
            ));
        }
        Ok(Self { field, role })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn role(&self) -> CoefficientRole {
        self.role
    }

    pub fn min_on(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.values()
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, &v)| v)
            .fold(f64::INFINITY, f64::min)
    }
}

fn omega_indicator(omega: &DomainMask) -> Vec<f64> {
    (0..omega.grid().len())
        .map(|i| if omega.in_omega(i) { 1.0 } else { 0.0 })
        .collect()
}

/// `∫_Ω J(x - y) dy` on `Ω` nodes.
pub fn interior_mass_field(omega: &DomainMask, kernel: &SampledKernel) -> Result<ScalarField> {
    let inside = omega_indicator(omega);
    let mut conv = convolve_field(omega, kernel, &inside, ConvMethod::Auto)?;
    conv.iter_mut().zip(&inside).for_each(|(c, i)| *c *= i);
    ScalarField::from_values(omega.grid(), conv)
}

/// `Γ(x) = ∫_{ℝ^N ∖ Ω} J(x - y) dy` on `Ω` nodes.
pub fn gamma_field(omega: &DomainMask, kernel: &SampledKernel) -> Result<CoefficientField> {
    let mass = kernel.discrete_mass();
    let inner = interior_mass_field(omega, kernel)?;
    let values = (0..omega.grid().len())
        .map(|i| if omega.in_omega(i) { (mass - inner.values()[i]).max(0.0) } else { 0.0 })
        .collect();
    CoefficientField::new(ScalarField::from_values(omega.grid(), values)?, CoefficientRole::Gamma)
}

/// `Λ(x) = ∫ J(x - y)(1 - χ_Ω(y) + 𝒳(y)) dy - 𝒳(x)` on `Ω` nodes.
pub fn lambda_field(chi: &CoefficientField, omega: &DomainMask, kernel: &SampledKernel) -> Result<CoefficientField> {
    if chi.role() != CoefficientRole::Chi {
        return Err(Error::param("chi", "expected a 𝒳 coefficient field"));
    }
    let mass = kernel.discrete_mass();
    let inside = omega_indicator(omega);
    let conv_omega = convolve_field(omega, kernel, &inside, ConvMethod::Auto)?;
    let conv_chi = convolve_field(omega, kernel, chi.values(), ConvMethod::Auto)?;
    let values = (0..omega.grid().len())
        .map(|i| {
            if omega.in_omega(i) {
                mass - conv_omega[i] + conv_chi[i] - chi.values()[i]
            } else {
                0.0
            }
        })
        .collect();
    CoefficientField::new(ScalarField::from_values(omega.grid(), values)?, CoefficientRole::Lambda)
}

/// `ν = (1 - 𝒳)/𝒳` where `𝒳` does not vanish, zero elsewhere.
pub fn nu_field(chi: &CoefficientField) -> Result<CoefficientField> {
    let values = chi
        .values()
        .iter()
        .map(|&c| if c >= VANISHING_THRESHOLD { (1.0 - c) / c } else { 0.0 })
        .collect();
    CoefficientField::new(ScalarField::from_values(chi.field().grid(), values)?, CoefficientRole::Nu)
}

/// `Ω` with every hole filled in.
pub fn unperforated(mask: &DomainMask) -> DomainMask {
    let labels = mask
        .labels()
        .iter()
        .map(|&l| if l == Label::Hole { Label::OmegaEps } else { l })
        .collect();
    DomainMask::from_labels(mask.grid(), labels).expect("labels match the grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitProblem {
    pub kind: LimitKind,
    pub chi: CoefficientField,
    pub lambda: Option<CoefficientField>,
    pub omega: DomainMask,
    pub kernel: SampledKernel,
    pub warnings: Vec<String>,
}

impl LimitProblem {
    pub fn dirichlet(omega: &DomainMask, kernel: &SampledKernel, chi: CoefficientField) -> Self {
        Self {
            kind: LimitKind::Dirichlet,
            chi,
            lambda: None,
            omega: unperforated(omega),
            kernel: kernel.clone(),
            warnings: Vec::new(),
        }
    }

    /// Neumann limit; computes `Λ` and records a warning where it is negative.
    pub fn neumann(omega: &DomainMask, kernel: &SampledKernel, chi: CoefficientField) -> Result<Self> {
        let omega = unperforated(omega);
        let lambda = lambda_field(&chi, &omega, kernel)?;
        let min = lambda.min_on(|i| omega.in_omega(i));
        let mut warnings = Vec::new();
        if min < -1e-12 {
            warnings.push(format!("Λ is negative somewhere in Ω (min {min:.3e}); the limit operator may be indefinite"));
        }
        Ok(Self {
            kind: LimitKind::Neumann,
            chi,
            lambda: Some(lambda),
            omega,
            kernel: kernel.clone(),
            warnings,
        })
    }

    /// Nodes of `Ω ∖ D`.
    pub fn support(&self) -> Vec<usize> {
        (0..self.omega.grid().len())
            .filter(|&i| self.omega.in_omega(i) && self.chi.values()[i] >= VANISHING_THRESHOLD)
            .collect()
    }

    fn reaction(&self, support: &[usize]) -> Vec<f64> {
        let chi = self.chi.values();
        match (&self.kind, &self.lambda) {
            (LimitKind::Neumann, Some(l)) => support.iter().map(|&i| l.values()[i] / chi[i]).collect(),
            _ => support.iter().map(|&i| (1.0 - chi[i]) / chi[i]).collect(),
        }
    }

    fn operator(&self, method: ConvMethod) -> Result<Option<NonlocalOperator>> {
        let support = self.support();
        if support.is_empty() {
            return Ok(None);
        }
        let reaction = self.reaction(&support);
        let rho = vec![1.0; support.len()];
        NonlocalOperator::from_parts(&self.omega, &self.kernel, support, rho, reaction, method).map(Some)
    }

    /// Relative residual of the undivided equation
    /// `𝒳 f = 𝒳 ∫ J(u(y) - u(x)) dy - Λ u` on `Ω ∖ D` (with `Λ = 1 - 𝒳` in
    /// the Dirichlet case).
    pub fn undivided_residual(&self, u: &ScalarField, f: &ScalarField) -> Result<f64> {
        let mass = self.kernel.discrete_mass();
        let conv = convolve_field(&self.omega, &self.kernel, u.values(), ConvMethod::Auto)?;
        let chi = self.chi.values();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in self.support() {
            let lam = match &self.lambda {
                Some(l) => l.values()[i],
                None => 1.0 - chi[i],
            };
            let u_i = u.values()[i];
            let r = chi[i] * (conv[i] - mass * u_i) - lam * u_i - chi[i] * f.values()[i];
            num += r * r;
            den += (chi[i] * f.values()[i]).powi(2);
        }
        Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSolution {
    pub solution: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

pub fn solve_limit(p: &LimitProblem, f: &ScalarField, opts: &SolveOptions) -> Result<LimitSolution> {
    let grid = p.omega.grid();
    if f.grid() != grid {
        return Err(Error::ShapeMismatch("right-hand side and limit problem grids differ".into()));
    }
    let Some(op) = p.operator(opts.method)? else {
        return Ok(LimitSolution {
            solution: ScalarField::zeros(grid),
            iterations: 0,
            residual: 0.0,
        });
    };
    let b: Vec<f64> = op.unknowns().iter().map(|&i| -f.values()[i]).collect();
    let report = op.solve_compact(&b, opts)?;
    Ok(LimitSolution {
        solution: report.solution,
        iterations: report.iterations,
        residual: report.residual,
    })
}

/// Tensor polynomials `s^a t^b` (each exponent ≤ 2) in coordinates
/// normalized to the box `[lo, hi]`, followed by `Π sin(π s_k)` and
/// `Π sin(π s_k / 2)`, all restricted to `Ω`.
pub fn test_battery(mask: &DomainMask, lo: &[f64], hi: &[f64]) -> Vec<ScalarField> {
    use std::f64::consts::PI;
    let grid = mask.grid();
    let n = grid.dim();
    let norm = |x: &[f64]| -> Vec<f64> { (0..n).map(|a| (x[a] - lo[a]) / (hi[a] - lo[a])).collect() };
    let mut out = Vec::new();
    let combos = 3usize.pow(n as u32);
    for c in 0..combos {
        let exps: Vec<i32> = (0..n).map(|a| ((c / 3usize.pow((n - 1 - a) as u32)) % 3) as i32).collect();
        out.push(grid.sample(|x| norm(x).iter().zip(&exps).map(|(s, &e)| s.powi(e)).product()));
    }
    out.push(grid.sample(|x| norm(x).iter().map(|s| (PI * s).sin()).product()));
    out.push(grid.sample(|x| norm(x).iter().map(|s| (0.5 * PI * s).sin()).product()));
    out.into_iter()
        .map(|mut v| {
            v.iter_mut().enumerate().for_each(|(i, x)| {
                if !mask.in_omega(i) {
                    *x = 0.0
                }
            });
            ScalarField::from_values(grid, v).expect("battery values are finite")
        })
        .collect()
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub parameter: String,
    pub value: f64,
    pub diagnostics: BTreeMap<String, f64>,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn new(parameter: &str, value: f64) -> Self {
        Self {
            parameter: parameter.into(),
            value,
            diagnostics: BTreeMap::new(),
            error: None,
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub fn set(&mut self, key: impl Into<String>, value: f64) {
        self.diagnostics.insert(key.into(), value);
    }
}

pub(crate) fn check_monotone(values: &[f64]) -> Result<()> {
    let inc = values.windows(2).all(|w| w[1] > w[0]);
    let dec = values.windows(2).all(|w| w[1] < w[0]);
    if inc || dec {
        Ok(())
    } else {
        Err(Error::param("sweep", "parameter sequence must be strictly monotone"))
    }
}

#[derive(Debug, Clone)]
pub struct SweepSetup<'a> {
    pub grid: &'a Grid,
    pub kernel: &'a SampledKernel,
    pub bc: BoundaryCondition,
    pub f: &'a ScalarField,
    pub solve: SolveOptions,
    /// When set, each row also carries the first eigenvalue.
    pub eigen: Option<EigenOptions>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub limit: ScalarField,
    pub weak_limit: WeakLimit,
    pub tests: Vec<ScalarField>,
}

/// Limit solution for a periodic family, from its analytic weak limit.
pub fn periodic_limit_solution(
    spec: &PerforationSpec,
    setup: &SweepSetup<'_>,
) -> Result<(ScalarField, WeakLimit)> {
    let mask = build_periodic_mask(spec, setup.grid)?;
    let limit = analytic_weak_limit(LimitFamily::Periodic(spec), &mask)?;
    let problem = match setup.bc {
        BoundaryCondition::DirichletHoles => LimitProblem::dirichlet(&mask, setup.kernel, limit.field.clone()),
        BoundaryCondition::NeumannHoles => LimitProblem::neumann(&mask, setup.kernel, limit.field.clone())?,
    };
    let f = crate::grid::restrict(setup.f, |i| mask.in_omega(i));
    let sol = solve_limit(&problem, &f, &setup.solve)?;
    Ok((sol.solution, limit))
}

/// Solve the perforated problem for each ε and compare the zero extension
/// `ũ^ε = ρ u^ε` against the limit solution.
pub fn epsilon_sweep(specs: &[PerforationSpec], setup: &SweepSetup<'_>) -> Result<SweepOutcome> {
    let first = specs.first().ok_or_else(|| Error::param("specs", "empty sweep"))?;
    check_monotone(&specs.iter().map(|s| s.epsilon).collect::<Vec<_>>())?;
    let (limit, weak_limit) = periodic_limit_solution(first, setup)?;
    let omega_mask = build_periodic_mask(first, setup.grid)?;
    let tests = test_battery(&omega_mask, &first.omega_lo, &first.omega_hi);
    let f = crate::grid::restrict(setup.f, |i| omega_mask.in_omega(i));
    let mut records = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut rec = SweepRecord::new("epsilon", spec.epsilon);
        rec.set("h", setup.grid.spacing());
        match sweep_point(spec, setup, &f, &limit, &tests, &mut rec) {
            Ok(()) => {}
            Err(e) => rec.error = Some(e.to_string()),
        }
        records.push(rec);
    }
    Ok(SweepOutcome {
        records,
        limit,
        weak_limit,
        tests,
    })
}

fn sweep_point(
    spec: &PerforationSpec,
    setup: &SweepSetup<'_>,
    f: &ScalarField,
    limit: &ScalarField,
    tests: &[ScalarField],
    rec: &mut SweepRecord,
) -> Result<()> {
    let mask = build_periodic_mask(spec, setup.grid)?;
    rec.set("material_fraction", mask.material_volume() / mask.omega_volume());
    let op = NonlocalOperator::with_method(&mask, setup.kernel, setup.bc, setup.solve.method)?;
    let report = op.solve(f, &setup.solve)?;
    let extended = report.solution.mul(&mask.chi_eps())?;
    let norm = inner_product(&extended, &report.solution)?.max(0.0).sqrt();
    rec.set("l2_norm_u", norm);
    let diff = extended.sub(limit)?;
    for (k, phi) in tests.iter().enumerate() {
        rec.set(format!("pairing_err_phi{}", k + 1), inner_product(&diff, phi)?.abs());
    }
    rec.set("solver_iters", report.iterations as f64);
    rec.set("residual", report.residual);
    if let Some(eopts) = &setup.eigen {
        let spectral = op.first_eigenvalue(eopts)?;
        rec.set("lambda1", spectral.eigenvalue);
        rec.set("eigen_iters", spectral.iterations as f64);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HoleShape;
    use crate::grid::Alignment;
    use crate::kernel::{rescale, sample, DiscreteMass, KernelSpec, Profile, RescaleMode};

    fn setup(h: f64, radius: f64) -> (Grid, SampledKernel) {
        let g = Grid::covering(&[0.0, 0.0], &[1.0, 1.0], radius, h, Alignment::CellCentered).unwrap();
        let spec = rescale(&KernelSpec::new(2, Profile::Indicator).unwrap(), radius, RescaleMode::Mass1).unwrap();
        (g, sample(&spec, h, DiscreteMass::Renormalized).unwrap())
    }

    fn plain(g: &Grid) -> DomainMask {
        let mut spec = PerforationSpec::periodic_balls(&[0.0, 0.0], &[1.0, 1.0], 0.25, 0.25, 1.0);
        spec.hole = HoleShape::None;
        build_periodic_mask(&spec, g).unwrap()
    }

    #[test]
    fn gamma_field_properties() {
        let (g, k) = setup(1.0 / 32.0, 0.25);
        let omega = plain(&g);
        let gamma = gamma_field(&omega, &k).unwrap();
        let inner = interior_mass_field(&omega, &k).unwrap();
        for i in 0..g.len() {
            if omega.in_omega(i) {
                assert!((gamma.values()[i] + inner.values()[i] - 1.0).abs() < 1e-12);
            }
        }
        assert!(gamma.values()[g.index(&[24, 24])] < 1e-13);
        // first row inside a flat face: about half the mass is outside
        let face = gamma.values()[g.index(&[8, 24])];
        assert!((face - 0.5).abs() < 0.1, "{face}");
    }

    #[test]
    fn lambda_field_identities() {
        let (g, k) = setup(1.0 / 32.0, 0.25);
        let omega = plain(&g);
        let chi_full = CoefficientField::new(omega.chi_omega(), CoefficientRole::Chi).unwrap();
        let lam = lambda_field(&chi_full, &omega, &k).unwrap();
        assert!(lam.field().max_abs() < 1e-12);
        let c = 0.7;
        let chi = CoefficientField::new(omega.chi_omega().scaled(c).unwrap(), CoefficientRole::Chi).unwrap();
        let lam = lambda_field(&chi, &omega, &k).unwrap();
        let gamma = gamma_field(&omega, &k).unwrap();
        for i in 0..g.len() {
            assert!((lam.values()[i] - (1.0 - c) * gamma.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_limit_with_full_chi_matches_plain_solve() {
        let (g, k) = setup(1.0 / 16.0, 0.5);
        let omega = plain(&g);
        let f = crate::grid::restrict(&ScalarField::from_fn(&g, |x| 1.0 + x[0]).unwrap(), |i| omega.in_omega(i));
        let chi = CoefficientField::new(omega.chi_omega(), CoefficientRole::Chi).unwrap();
        let p = LimitProblem::dirichlet(&omega, &k, chi);
        let opts = SolveOptions {
            tol: 1e-12,
            ..SolveOptions::default()
        };
        let u = solve_limit(&p, &f, &opts).unwrap().solution;
        let op = NonlocalOperator::new(&omega, &k, BoundaryCondition::DirichletHoles).unwrap();
        let v = op.solve(&f, &opts).unwrap().solution;
        assert!(u.sub(&v).unwrap().max_abs() <= 1e-8 * v.max_abs());
    }

    #[test]
    fn constant_chi_satisfies_nu_form() {
        let (g, k) = setup(1.0 / 16.0, 0.5);
        let omega = plain(&g);
        let c = 1.0 - std::f64::consts::PI / 16.0;
        let f = crate::grid::restrict(&ScalarField::constant(&g, 1.0).unwrap(), |i| omega.in_omega(i));
        let chi = CoefficientField::new(omega.chi_omega().scaled(c).unwrap(), CoefficientRole::Chi).unwrap();
        let p = LimitProblem::dirichlet(&omega, &k, chi.clone());
        let opts = SolveOptions {
            tol: 1e-12,
            ..SolveOptions::default()
        };
        let u = solve_limit(&p, &f, &opts).unwrap().solution;
        assert!(p.undivided_residual(&u, &f).unwrap() < 1e-10);
        // explicit ν form
        let nu = (1.0 - c) / c;
        assert!((nu - 0.24432).abs() < 1e-5);
        let support = p.support();
        let op = NonlocalOperator::from_parts(&p.omega, &k, support.clone(), vec![1.0; support.len()], vec![nu; support.len()], ConvMethod::Auto).unwrap();
        let b: Vec<f64> = support.iter().map(|&i| -f.values()[i]).collect();
        let v = op.solve_compact(&b, &opts).unwrap().solution;
        assert!(u.sub(&v).unwrap().max_abs() <= 1e-10 * v.max_abs());
        assert!(nu_field(&chi).unwrap().values().iter().all(|&x| x == 0.0 || (x - nu).abs() < 1e-15));
    }

    #[test]
    fn vanishing_chi_gives_zero() {
        let (g, k) = setup(1.0 / 16.0, 0.5);
        let omega = plain(&g);
        let f = crate::grid::restrict(&ScalarField::constant(&g, 1.0).unwrap(), |i| omega.in_omega(i));
        let chi = CoefficientField::new(ScalarField::zeros(&g), CoefficientRole::Chi).unwrap();
        for p in [
            LimitProblem::dirichlet(&omega, &k, chi.clone()),
            LimitProblem::neumann(&omega, &k, chi.clone()).unwrap(),
        ] {
            let u = solve_limit(&p, &f, &SolveOptions::default()).unwrap();
            assert_eq!(u.solution.max_abs(), 0.0);
            assert_eq!(u.iterations, 0);
        }
        let zero_f = ScalarField::zeros(&g);
        let chi = CoefficientField::new(omega.chi_omega(), CoefficientRole::Chi).unwrap();
        let p = LimitProblem::dirichlet(&omega, &k, chi);
        assert_eq!(solve_limit(&p, &zero_f, &SolveOptions::default()).unwrap().solution.max_abs(), 0.0);
    }

    #[test]
    fn coefficient_ranges_are_checked() {
        let g = Grid::new(vec![0.0], 1.0, vec![3]).unwrap();
        let bad = ScalarField::from_values(&g, vec![0.0, 1.5, 0.2]).unwrap();
        assert!(CoefficientField::new(bad.clone(), CoefficientRole::Chi).is_err());
        assert!(CoefficientField::new(bad, CoefficientRole::Lambda).is_ok());
    }

    #[test]
    fn battery_has_eleven_fields_in_two_dimensions() {
        let (g, _) = setup(1.0 / 8.0, 0.25);
        let omega = plain(&g);
        let tests = test_battery(&omega, &[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(tests.len(), 11);
        // the constant comes first and is the indicator of Ω
        assert_eq!(tests[0], omega.chi_omega());
    }
}
