//! Experiment dispatch.

use std::f64::consts::PI;

use perfhom::conv::ConvMethod;
use perfhom::experiments::{
    case_study_domain, delta_localization_sweep, iterated_limit_dirichlet, iterated_limit_neumann,
    nonlocal_critical_sweep, CaseSetup,
};
use perfhom::geometry::{build_annulus_mask, build_oscillating_mask, build_periodic_mask};
use perfhom::homogenize::{epsilon_sweep, SweepOutcome, SweepSetup};
use perfhom::kernel::{rescale, sample, validate_kernel};
use perfhom::linalg::EigenOptions;
use perfhom::localref::{homogenized_coefficients, solve_local, CellGeometry, HoleBc, LocalProblem};
use perfhom::nonlocal::{covering_lower_bound, distance_to_exterior, SolveOptions};
use perfhom::{
    restrict, Alignment, BoundaryCondition, DiscreteMass, DomainMask, Grid, HoleShape, KernelSpec, NonlocalOperator,
    PerforationSpec, SampledKernel, ScalarField, SweepRecord,
};

use crate::config::{
    Boundary, ConvolutionMethod, ExperimentKind, GeometryConfig, KernelConfig, MassMode, RunConfig, SourceConfig,
};
use crate::error::{CliError, CliResult};
use crate::output::{unit_of, Report, Table, Value};

/// Result of a run: the report is written even when `failure` is set.
pub struct Outcome {
    pub report: Report,
    pub failure: Option<CliError>,
}

pub fn run(cfg: &RunConfig, emit: &[String]) -> CliResult<Outcome> {
    let allowed = cfg.experiment.field_names();
    if let Some(bad) = emit.iter().find(|n| !allowed.contains(&n.as_str())) {
        return Err(CliError::Config(format!(
            "`{}` does not produce field `{bad}`; available: {}",
            cfg.experiment.name(),
            if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") }
        )));
    }
    let mut ctx = Ctx {
        cfg,
        emit,
        report: Report::default(),
        failure: None,
    };
    match cfg.experiment {
        ExperimentKind::ValidateKernel => ctx.validate_kernel()?,
        ExperimentKind::Solve => ctx.solve()?,
        ExperimentKind::Eigen => ctx.eigen()?,
        ExperimentKind::Covering => ctx.covering()?,
        ExperimentKind::EpsilonSweep | ExperimentKind::NonlocalCritical => ctx.epsilon_sweep()?,
        ExperimentKind::DeltaSweep => ctx.delta_sweep()?,
        ExperimentKind::IteratedLimits => ctx.iterated_limits()?,
        ExperimentKind::CellCoefficients => ctx.cell_coefficients()?,
    }
    if ctx.failure.is_none() && !ctx.report.errors.is_empty() {
        ctx.failure = Some(CliError::Solver(ctx.report.errors.join("; ")));
    }
    Ok(Outcome {
        report: ctx.report,
        failure: ctx.failure,
    })
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    emit: &'a [String],
    report: Report,
    failure: Option<CliError>,
}

fn kernel_spec(k: &KernelConfig, dim: usize, radius: f64) -> CliResult<KernelSpec> {
    Ok(rescale(&KernelSpec::new(dim, k.profile)?, radius, k.rescale)?)
}

fn discrete_mass(m: MassMode) -> DiscreteMass {
    match m {
        MassMode::Renormalized => DiscreteMass::Renormalized,
        MassMode::Raw => DiscreteMass::Raw,
    }
}

fn bc(b: Boundary) -> BoundaryCondition {
    match b {
        Boundary::Dirichlet => BoundaryCondition::DirichletHoles,
        Boundary::Neumann => BoundaryCondition::NeumannHoles,
    }
}

fn hole_bc(b: Boundary) -> HoleBc {
    match b {
        Boundary::Dirichlet => HoleBc::Dirichlet,
        Boundary::Neumann => HoleBc::Neumann,
    }
}

/// Bounding box of `Ω`.
fn omega_box(g: &GeometryConfig) -> (Vec<f64>, Vec<f64>) {
    match g {
        GeometryConfig::Box { omega_lo, omega_hi, .. } | GeometryConfig::PeriodicBalls { omega_lo, omega_hi, .. } => {
            (omega_lo.clone(), omega_hi.clone())
        }
        GeometryConfig::Annulus { outer, .. } => (vec![-outer; 2], vec![*outer; 2]),
        GeometryConfig::Strips { .. } => (vec![-1.0; 2], vec![1.0; 2]),
        GeometryConfig::Oscillating { .. } => (vec![0.0, -1.0], vec![1.0, 1.0]),
    }
}

fn periodic_spec(g: &GeometryConfig, epsilon: f64) -> Option<PerforationSpec> {
    match g {
        GeometryConfig::Box { omega_lo, omega_hi, .. } => {
            let mut s = PerforationSpec::periodic_balls(omega_lo, omega_hi, 0.25, 1.0, 1.0);
            s.hole = HoleShape::None;
            Some(s)
        }
        GeometryConfig::PeriodicBalls {
            omega_lo,
            omega_hi,
            c0,
            gamma,
            quadrature,
            interior_holes_only,
            ..
        } => {
            let mut s = PerforationSpec::periodic_balls(omega_lo, omega_hi, *c0, epsilon, *gamma).with_quadrature(*quadrature);
            s.interior_holes_only = *interior_holes_only;
            Some(s)
        }
        GeometryConfig::Strips { epsilon, quadrature, .. } => {
            Some(PerforationSpec::horizontal_strips(*epsilon).with_quadrature(*quadrature))
        }
        _ => None,
    }
}

fn build_mask(g: &GeometryConfig, margin: f64) -> CliResult<DomainMask> {
    let (lo, hi) = omega_box(g);
    let grid = Grid::covering(&lo, &hi, margin, g.spacing(), Alignment::CellCentered)?;
    let mask = match g {
        GeometryConfig::Annulus { inner, outer, .. } => build_annulus_mask(&grid, *inner, *outer)?,
        GeometryConfig::Oscillating { epsilon, .. } => build_oscillating_mask(*epsilon, &grid)?,
        GeometryConfig::PeriodicBalls { epsilon, .. } => {
            let eps = epsilon.ok_or_else(|| CliError::Config("`geometry.epsilon` is required".into()))?;
            build_periodic_mask(&periodic_spec(g, eps).expect("periodic geometry"), &grid)?
        }
        _ => build_periodic_mask(&periodic_spec(g, 1.0).expect("periodic geometry"), &grid)?,
    };
    Ok(mask)
}

/// Source sampled on `grid`. `sine` is the Laplacian of
/// `Π sin(π (x_a - lo_a) / L_a)` over the box `[lo, hi]`.
fn source_field(src: &SourceConfig, grid: &Grid, lo: &[f64], hi: &[f64]) -> CliResult<ScalarField> {
    Ok(match src {
        SourceConfig::Constant { value } => ScalarField::constant(grid, *value)?,
        SourceConfig::Sine => {
            let lens: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
            let k2: f64 = lens.iter().map(|l| (PI / l).powi(2)).sum();
            ScalarField::from_fn(grid, |x| {
                -k2 * x
                    .iter()
                    .zip(lo)
                    .zip(&lens)
                    .map(|((x, a), l)| (PI * (x - a) / l).sin())
                    .product::<f64>()
            })?
        }
    })
}

fn conv_method(m: ConvolutionMethod) -> ConvMethod {
    match m {
        ConvolutionMethod::Auto => ConvMethod::Auto,
        ConvolutionMethod::Fft => ConvMethod::Fft,
        ConvolutionMethod::Direct => ConvMethod::Direct,
    }
}

/// Counts stored as `f64` diagnostics become integers in the tables.
fn diagnostic_value(column: &str, v: f64) -> Value {
    if unit_of(column) == "count" && v >= 0.0 && v.fract() == 0.0 {
        Value::Int(v as u64)
    } else {
        Value::Num(v)
    }
}

/// Order: parameter, `h`, `lambda1`, `l2_norm_u`, pairing errors by index,
/// then solver statistics and the remaining diagnostics by name.
fn sweep_columns(records: &[SweepRecord]) -> Vec<String> {
    let mut keys: Vec<&String> = Vec::new();
    for r in records.iter().filter(|r| r.error.is_none()) {
        for k in r.diagnostics.keys() {
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    let rank = |k: &str| -> (u8, usize, String) {
        let pairing = k.strip_prefix("pairing_err_phi").and_then(|n| n.parse::<usize>().ok());
        match (k, pairing) {
            ("h", _) => (0, 0, String::new()),
            ("lambda1", _) => (1, 0, String::new()),
            ("l2_norm_u", _) | ("error_l2", _) => (2, 0, String::new()),
            (_, Some(n)) => (3, n, String::new()),
            ("solver_iters", _) => (4, 0, String::new()),
            ("residual", _) => (5, 0, String::new()),
            _ => (6, 0, k.to_string()),
        }
    };
    keys.sort_by_key(|k| rank(k));
    keys.into_iter().cloned().collect()
}

fn sweep_table(name: &str, records: &[SweepRecord], report: &mut Report) -> Table {
    let param = records.first().map(|r| r.parameter.clone()).unwrap_or_default();
    let cols = sweep_columns(records);
    let mut t = Table::with_columns(name, std::iter::once(param).chain(cols.iter().cloned()).collect());
    for r in records {
        if let Some(e) = &r.error {
            report.errors.push(format!("{} = {}: {e}", r.parameter, r.value));
            continue;
        }
        let mut row = vec![Value::Num(r.value)];
        for c in &cols {
            match r.get(c) {
                Some(v) => row.push(diagnostic_value(c, v)),
                None => row.push(Value::Text(String::new())),
            }
        }
        t.push(row);
    }
    t
}

impl Ctx<'_> {
    fn wants(&self, name: &str) -> bool {
        self.emit.iter().any(|n| n == name)
    }

    fn emit_field(&mut self, name: &str, field: &ScalarField) {
        self.report.fields.push((name.to_string(), field.to_text()));
    }

    fn emit_mask(&mut self, mask: &DomainMask) {
        if self.wants("mask") {
            self.report.fields.push(("mask".into(), mask.to_text()));
        }
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tol: self.cfg.solver.tol,
            max_iter: self.cfg.solver.max_iter,
            method: conv_method(self.cfg.solver.method),
        }
    }

    fn eigen_options(&self) -> EigenOptions {
        EigenOptions {
            tol: self.cfg.solver.eigen_tol,
            max_iter: self.cfg.solver.eigen_max_iter,
            seed: self.cfg.solver.seed,
        }
    }

    /// Rescaled kernel, validated, then sampled at the geometry spacing.
    fn kernel(&mut self) -> CliResult<SampledKernel> {
        let k = self.cfg.kernel()?;
        let spec = kernel_spec(k, self.cfg.dim(), k.radius)?;
        let report = validate_kernel(&spec);
        report.ensure_valid()?;
        if !report.continuous {
            self.report
                .findings
                .push(format!("profile `{}` is discontinuous at the edge of its support", k.profile.name()));
        }
        Ok(sample(&spec, self.cfg.geometry()?.spacing(), discrete_mass(k.mass))?)
    }

    fn note_mask(&mut self, mask: &DomainMask) {
        for w in mask.warnings() {
            self.report.findings.push(format!("geometry: {w}"));
        }
    }

    fn validate_kernel(&mut self) -> CliResult<()> {
        let k = self.cfg.kernel()?;
        let spec = kernel_spec(k, self.cfg.dim(), k.radius)?;
        let rep = validate_kernel(&spec);
        let mut t = Table::new("kernel_checks", &["check", "passed", "detail"]);
        for c in &rep.checks {
            t.push(vec![c.name.into(), c.passed.into(), c.detail.clone().into()]);
        }
        let mut s = Table::new(
            "kernel",
            &["profile", "dim", "radius", "mass_estimate", "second_moment", "continuous"],
        );
        s.push(vec![
            k.profile.name().into(),
            spec.dim().into(),
            spec.support_radius().into(),
            rep.mass_estimate.into(),
            spec.second_moment().into(),
            rep.continuous.into(),
        ]);
        self.report.tables.push(t);
        self.report.tables.push(s);
        if !rep.continuous {
            self.report
                .findings
                .push(format!("profile `{}` is discontinuous at the edge of its support", k.profile.name()));
        }
        if let Err(e) = rep.ensure_valid() {
            self.failure = Some(e.into());
        }
        Ok(())
    }

    fn solve(&mut self) -> CliResult<()> {
        let kernel = self.kernel()?;
        let g = self.cfg.geometry()?;
        let mask = build_mask(g, kernel.support_radius())?;
        self.note_mask(&mask);
        let (lo, hi) = omega_box(g);
        let f = source_field(&self.cfg.source, mask.grid(), &lo, &hi)?;
        let f = restrict(&f, |i| mask.in_omega(i));
        let op = NonlocalOperator::with_method(&mask, &kernel, bc(self.cfg.solver.boundary), conv_method(self.cfg.solver.method))?;
        let rep = op.solve(&f, &self.solve_options())?;
        let mut t = Table::new(
            "solve",
            &["h", "unknowns", "solver_iters", "residual", "l2_norm_u", "max_abs_u"],
        );
        t.push(vec![
            mask.grid().spacing().into(),
            op.unknown_count().into(),
            rep.iterations.into(),
            rep.residual.into(),
            perfhom::l2_norm(&rep.solution).into(),
            rep.solution.max_abs().into(),
        ]);
        self.report.tables.push(t);
        self.emit_mask(&mask);
        if self.wants("source") {
            self.emit_field("source", &f);
        }
        if self.wants("solution") {
            self.emit_field("solution", &rep.solution);
        }
        Ok(())
    }

    fn layer_width(&self, kernel: &SampledKernel) -> f64 {
        self.cfg
            .covering
            .as_ref()
            .map_or(kernel.support_radius() / 2.0, |c| c.layer_width)
    }

    fn eigen(&mut self) -> CliResult<()> {
        let kernel = self.kernel()?;
        let g = self.cfg.geometry()?;
        let mask = build_mask(g, kernel.support_radius())?;
        self.note_mask(&mask);
        let op = NonlocalOperator::with_method(&mask, &kernel, bc(self.cfg.solver.boundary), conv_method(self.cfg.solver.method))?;
        let eig = op.first_eigenvalue(&self.eigen_options())?;
        let width = self.layer_width(&kernel);
        let cert = covering_lower_bound(&mask, &kernel, width)?;
        let mut t = Table::new(
            "eigen",
            &["h", "unknowns", "lambda1", "residual", "iterations", "seed", "layer_width", "lambda_lower"],
        );
        t.push(vec![
            mask.grid().spacing().into(),
            op.unknown_count().into(),
            eig.eigenvalue.into(),
            eig.residual.into(),
            eig.iterations.into(),
            Value::Int(eig.seed),
            width.into(),
            cert.lambda_lower.map_or(Value::Text(String::new()), Value::Num),
        ]);
        self.report.tables.push(t);
        if let Some(why) = &cert.failure {
            self.report.findings.push(format!("covering certificate not established: {why}"));
        }
        if eig.eigenvalue <= self.cfg.solver.eigen_tol {
            self.report.findings.push(format!(
                "first eigenvalue {:.3e} is zero to solver tolerance",
                eig.eigenvalue
            ));
        }
        self.emit_mask(&mask);
        if self.wants("eigenvector") {
            self.emit_field("eigenvector", &eig.eigenvector);
        }
        Ok(())
    }

    fn covering(&mut self) -> CliResult<()> {
        let kernel = self.kernel()?;
        let g = self.cfg.geometry()?;
        let mask = build_mask(g, kernel.support_radius())?;
        self.note_mask(&mask);
        let width = self.layer_width(&kernel);
        let cert = covering_lower_bound(&mask, &kernel, width)?;
        let mut layers = Table::new("covering_layers", &["index", "outer_distance", "nodes", "alpha", "chain"]);
        for (k, l) in cert.layers.iter().enumerate() {
            layers.push(vec![
                l.index.into(),
                l.outer_distance.into(),
                l.nodes.into(),
                l.alpha.into(),
                cert.chain.get(k).map_or(Value::Text(String::new()), |&c| Value::Num(c)),
            ]);
        }
        let mut t = Table::new(
            "covering",
            &["layer_width", "layers", "dropped_empty_layers", "lambda_lower", "status"],
        );
        t.push(vec![
            width.into(),
            cert.layers.len().into(),
            cert.dropped_empty_layers.into(),
            cert.lambda_lower.map_or(Value::Text(String::new()), Value::Num),
            cert.failure.clone().unwrap_or_else(|| "established".into()).into(),
        ]);
        self.report.tables.push(t);
        self.report.tables.push(layers);
        self.emit_mask(&mask);
        if self.wants("distance") {
            let d = ScalarField::from_values(mask.grid(), distance_to_exterior(&mask))?;
            self.emit_field("distance", &d);
        }
        if let Some(why) = cert.failure {
            self.failure = Some(CliError::Validation(format!("no covering certificate: {why}")));
        }
        Ok(())
    }

    fn epsilon_sweep(&mut self) -> CliResult<()> {
        let kernel = self.kernel()?;
        let g = self.cfg.geometry()?;
        let epsilons = self.cfg.sweep.as_ref().and_then(|s| s.epsilons.clone()).unwrap_or_default();
        let eigen = self.cfg.sweep.as_ref().is_none_or(|s| s.eigen);
        let (lo, hi) = omega_box(g);
        let grid = Grid::covering(&lo, &hi, kernel.support_radius(), g.spacing(), Alignment::CellCentered)?;
        let f = source_field(&self.cfg.source, &grid, &lo, &hi)?;
        let setup = SweepSetup {
            grid: &grid,
            kernel: &kernel,
            bc: bc(self.cfg.solver.boundary),
            f: &f,
            solve: self.solve_options(),
            eigen: eigen.then(|| self.eigen_options()),
        };
        let base = periodic_spec(g, epsilons[0]).expect("validated periodic geometry");
        let out: SweepOutcome = if self.cfg.experiment == ExperimentKind::NonlocalCritical {
            nonlocal_critical_sweep(&base, &epsilons, &setup)?
        } else {
            let specs: Vec<PerforationSpec> = epsilons
                .iter()
                .map(|&e| PerforationSpec {
                    epsilon: e,
                    ..base.clone()
                })
                .collect();
            epsilon_sweep(&specs, &setup)?
        };
        let name = self.cfg.experiment.name().replace('-', "_");
        let t = sweep_table(&name, &out.records, &mut self.report);
        self.report.tables.push(t);
        self.report.findings.push(format!(
            "weak limit regime {:?}{}",
            out.weak_limit.regime,
            out.weak_limit.constant.map(|c| format!(", constant {c}")).unwrap_or_default()
        ));
        if self.wants("limit") {
            self.emit_field("limit", &out.limit);
        }
        if self.wants("chi") {
            self.emit_field("chi", out.weak_limit.field.field());
        }
        Ok(())
    }

    fn delta_sweep(&mut self) -> CliResult<()> {
        let k = self.cfg.kernel()?;
        let g = self.cfg.geometry()?;
        let deltas = self.cfg.sweep.as_ref().and_then(|s| s.deltas.clone()).unwrap_or_default();
        for &d in &deltas {
            validate_kernel(&kernel_spec(k, self.cfg.dim(), d)?).ensure_valid()?;
        }
        let margin = deltas.iter().cloned().fold(0.0, f64::max);
        let mask = build_mask(g, margin)?;
        self.note_mask(&mask);
        let (lo, hi) = omega_box(g);
        let f = source_field(&self.cfg.source, mask.grid(), &lo, &hi)?;
        let reference = LocalProblem::poisson(&mask, hole_bc(self.cfg.solver.boundary));
        let records = delta_localization_sweep(&reference, k.profile, &f, &deltas, &self.solve_options())?;
        let t = sweep_table("delta_sweep", &records, &mut self.report);
        self.report.tables.push(t);
        self.emit_mask(&mask);
        if self.wants("reference") {
            let v = solve_local(&reference, &f, self.cfg.solver.tol * 1e-2)?.solution;
            self.emit_field("reference", &v);
        }
        Ok(())
    }

    fn iterated_limits(&mut self) -> CliResult<()> {
        let c = self.cfg.cases.as_ref().expect("validated cases block");
        let omega = case_study_domain(c.dim, c.side, c.nodes)?;
        let lo = vec![0.0; c.dim];
        let hi = vec![c.side; c.dim];
        let f = source_field(&self.cfg.source, omega.grid(), &lo, &hi)?;
        let setup = CaseSetup {
            omega: &omega,
            f: &f,
            c0: c.c0,
            tol: c.tol,
        };
        let cell = CellGeometry::unit_disk(c.cell_radius);
        let mut t = Table::new("iterated_limits", &["case", "regime", "distance", "verdict", "expected", "matches"]);
        for &regime in &c.regimes {
            let verdict = match c.boundary {
                Boundary::Dirichlet => iterated_limit_dirichlet(regime, &setup),
                Boundary::Neumann => iterated_limit_neumann(regime, &setup, &cell, c.cell_spacing),
            };
            let v = match verdict {
                Ok(v) => v,
                Err(e @ perfhom::Error::VerdictGap { .. }) => {
                    self.report.errors.push(format!("{}: {e}", regime.name()));
                    self.failure.get_or_insert(e.into());
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let word = |eq: bool| if eq { "equal" } else { "unequal" };
            t.push(vec![
                v.case.clone().into(),
                regime.name().into(),
                v.distance.into(),
                word(v.equal).into(),
                word(v.expected_equal).into(),
                v.matches_expectation().into(),
            ]);
            if !v.matches_expectation() {
                self.report.findings.push(format!(
                    "{}: computed {} but the case table predicts {}",
                    v.case,
                    word(v.equal),
                    word(v.expected_equal)
                ));
            }
            if self.wants("w") {
                self.emit_field(&format!("w_{}", v.case), &v.w);
            }
            if self.wants("v") {
                self.emit_field(&format!("v_{}", v.case), &v.v);
            }
        }
        self.report.tables.push(t);
        Ok(())
    }

    fn cell_coefficients(&mut self) -> CliResult<()> {
        let c = self.cfg.cell.as_ref().expect("validated cell block");
        let cell = CellGeometry {
            cell_lengths: c.lengths.clone(),
            hole: c.hole.clone(),
        };
        let sol = homogenized_coefficients(&cell, c.spacing, c.tol)?;
        let mut q = Table::new("cell_coefficients", &["i", "j", "q"]);
        for (i, row) in sol.q.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                q.push(vec![(i + 1).into(), (j + 1).into(), v.into()]);
            }
        }
        let mut s = Table::new("cell", &["spacing", "material_fraction", "iterations"]);
        s.push(vec![
            c.spacing.into(),
            sol.material_fraction.into(),
            sol.iterations.iter().copied().max().unwrap_or(0).into(),
        ]);
        self.report.tables.push(q);
        self.report.tables.push(s);
        if self.wants("correctors") {
            for (i, x) in sol.correctors.iter().enumerate() {
                self.emit_field(&format!("corrector_{}", i + 1), x);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_columns_follow_the_documented_order() {
        let mut r = SweepRecord::new("epsilon", 0.25);
        for k in ["residual", "pairing_err_phi10", "h", "solver_iters", "pairing_err_phi2", "lambda1", "nu", "l2_norm_u"] {
            r.set(k, 1.0);
        }
        assert_eq!(
            sweep_columns(&[r]),
            ["h", "lambda1", "l2_norm_u", "pairing_err_phi2", "pairing_err_phi10", "solver_iters", "residual", "nu"]
        );
    }

    #[test]
    fn failed_rows_are_dropped_and_reported() {
        let mut ok = SweepRecord::new("delta", 0.5);
        ok.set("solver_iters", 12.0);
        let mut bad = SweepRecord::new("delta", 0.25);
        bad.error = Some("did not converge".into());
        let mut report = Report::default();
        let t = sweep_table("d", &[ok, bad], &mut report);
        assert_eq!(t.rows, vec![vec![Value::Num(0.5), Value::Int(12)]]);
        assert_eq!(report.errors.len(), 1);
    }

    #[test]
    fn sine_source_is_the_laplacian_of_the_product() {
        let g = Grid::covering(&[0.0, 0.0], &[2.0, 1.0], 0.0, 0.125, Alignment::CellCentered).unwrap();
        let f = source_field(&SourceConfig::Sine, &g, &[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let i = g.index(&[4, 4]);
        let x = g.node_coords(i);
        let u = (PI * x[0] / 2.0).sin() * (PI * x[1]).sin();
        assert!((f.values()[i] + (PI * PI / 4.0 + PI * PI) * u).abs() < 1e-12);
    }

    #[test]
    fn unknown_field_names_are_rejected_before_compute() {
        let cfg = RunConfig::parse("experiment = \"cell-coefficients\"\n[cell]\nhole = { shape = \"none\" }\n").unwrap();
        let err = run(&cfg, &["solution".into()]).err().unwrap();
        assert_eq!(err.exit_code(), 2);
    }
}
