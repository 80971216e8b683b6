//! Discrete nonlocal Dirichlet and Neumann operators on perforated domains.
//!
//! For material weights `ρ` (see [`crate::geometry`]) the operator is
//!
//! ```text
//! (L u)(x) = h^N Σ_y J(x - y) ρ(y) u(y) - m(x) u(x)
//! ```
//!
//! on the unknown nodes (label `OmegaEps`). With Dirichlet holes `m` is the
//! discrete kernel mass; with Neumann holes the holes are removed from the
//! integration set and `m(x) = mass - h^N Σ_y J(x - y) (χ_Ω - ρ)(y)`. Both
//! terms share the sampled kernel, so constants are annihilated exactly away
//! from boundaries. `-L` is symmetric positive semidefinite in the pairing
//! `Σ ρ u v h^N`, which is also the pairing of the zero extensions `ρ u`.

use serde::{Deserialize, Serialize};

use crate::conv::{ConvMethod, Convolver};
use crate::error::{Error, Result};
use crate::geometry::{DomainMask, Label};
use crate::grid::{Grid, ScalarField};
use crate::kernel::SampledKernel;
use crate::linalg::{conjugate_gradient, smallest_eigenpair, CgOptions, EigenOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryCondition {
    /// Integrate over ℝ^N; `u = 0` outside `Ω^ε`.
    DirichletHoles,
    /// Integrate over ℝ^N minus the holes; `u = 0` outside `Ω`.
    NeumannHoles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    /// `None` selects `20 √n + 200`.
    pub max_iter: Option<usize>,
    pub method: ConvMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: None,
            method: ConvMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub eigenvalue: f64,
    pub eigenvector: ScalarField,
    pub residual: f64,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug)]
pub struct NonlocalOperator {
    grid: Grid,
    kernel: SampledKernel,
    bc: Option<BoundaryCondition>,
    conv: Convolver,
    unknowns: Vec<usize>,
    /// Per unknown: material weight.
    rho: Vec<f64>,
    /// Per unknown: `m(x) + c(x)` (mass term plus reaction).
    diag: Vec<f64>,
    center: f64,
    in_omega: Vec<bool>,
}

/// Kernel mass `h^N Σ w`.
fn discrete_mass(kernel: &SampledKernel) -> f64 {
    kernel.discrete_mass()
}

/// Check that the kernel stencil around every `Ω` node stays on the grid.
pub(crate) fn check_margin(mask: &DomainMask, kernel: &SampledKernel) -> Result<(Vec<usize>, Vec<usize>)> {
    let grid = mask.grid();
    if kernel.dim() != grid.dim() {
        return Err(Error::ShapeMismatch(format!(
            "{}-D kernel on a {}-D grid",
            kernel.dim(),
            grid.dim()
        )));
    }
    if (kernel.spacing() - grid.spacing()).abs() > 1e-12 * grid.spacing() {
        return Err(Error::ShapeMismatch("kernel and grid spacings differ".into()));
    }
    let (lo, hi) = mask
        .omega_window()
        .ok_or_else(|| Error::Assembly("Ω contains no grid node".into()))?;
    let m = kernel.half_width();
    for a in 0..grid.dim() {
        if lo[a] < m || hi[a] + m > grid.extents()[a] {
            return Err(Error::Assembly(format!(
                "kernel support ({} nodes) exceeds the grid margin around Ω along axis {a}",
                m
            )));
        }
    }
    Ok((lo, hi))
}

/// `h^N Σ_y J(x - y) v(y)` for `v` supported in `Ω`.
pub(crate) fn convolve_field(mask: &DomainMask, kernel: &SampledKernel, values: &[f64], method: ConvMethod) -> Result<Vec<f64>> {
    let (lo, hi) = check_margin(mask, kernel)?;
    let conv = Convolver::new(mask.grid(), &lo, &hi, kernel, method)?;
    let mut out = vec![0.0; values.len()];
    conv.apply(values, &mut out);
    Ok(out)
}

impl NonlocalOperator {
    pub fn new(mask: &DomainMask, kernel: &SampledKernel, bc: BoundaryCondition) -> Result<Self> {
        Self::with_method(mask, kernel, bc, ConvMethod::Auto)
    }

    pub fn with_method(mask: &DomainMask, kernel: &SampledKernel, bc: BoundaryCondition, method: ConvMethod) -> Result<Self> {
        let (lo, hi) = check_margin(mask, kernel)?;
        let grid = mask.grid();
        let conv = Convolver::new(grid, &lo, &hi, kernel, method)?;
        let mass = discrete_mass(kernel);
        let unknowns: Vec<usize> = (0..grid.len()).filter(|&i| mask.label(i) == Label::OmegaEps).collect();
        if unknowns.is_empty() {
            return Err(Error::Assembly("no unknown nodes: Ω^ε is empty on this grid".into()));
        }
        let rho: Vec<f64> = unknowns.iter().map(|&i| mask.material()[i]).collect();
        let diag = match bc {
            BoundaryCondition::DirichletHoles => vec![mass; unknowns.len()],
            BoundaryCondition::NeumannHoles => {
                let holes: Vec<f64> = (0..grid.len())
                    .map(|i| if mask.in_omega(i) { 1.0 - mask.material()[i] } else { 0.0 })
                    .collect();
                let mut hole_mass = vec![0.0; grid.len()];
                conv.apply(&holes, &mut hole_mass);
                unknowns.iter().map(|&i| mass - hole_mass[i]).collect()
            }
        };
        Ok(Self {
            grid: grid.clone(),
            kernel: kernel.clone(),
            bc: Some(bc),
            conv,
            unknowns,
            rho,
            diag,
            center: kernel.center_weight() * grid.cell_volume(),
            in_omega: (0..grid.len()).map(|i| mask.in_omega(i)).collect(),
        })
    }

    /// Full-space operator `u ↦ conv(ρ u) - (mass + c) u` on explicit
    /// unknowns; used for the limit equations.
    pub(crate) fn from_parts(
        mask: &DomainMask,
        kernel: &SampledKernel,
        unknowns: Vec<usize>,
        rho: Vec<f64>,
        reaction: Vec<f64>,
        method: ConvMethod,
    ) -> Result<Self> {
        let (lo, hi) = check_margin(mask, kernel)?;
        let grid = mask.grid();
        let conv = Convolver::new(grid, &lo, &hi, kernel, method)?;
        let mass = discrete_mass(kernel);
        let diag = reaction.iter().map(|c| mass + c).collect();
        Ok(Self {
            grid: grid.clone(),
            kernel: kernel.clone(),
            bc: None,
            conv,
            unknowns,
            rho,
            diag,
            center: kernel.center_weight() * grid.cell_volume(),
            in_omega: (0..grid.len()).map(|i| mask.in_omega(i)).collect(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kernel(&self) -> &SampledKernel {
        &self.kernel
    }

    pub fn boundary_condition(&self) -> Option<BoundaryCondition> {
        self.bc
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn unknown_count(&self) -> usize {
        self.unknowns.len()
    }

    /// Pairing weights `ρ` on the unknowns.
    pub fn weights(&self) -> &[f64] {
        &self.rho
    }

    /// `m(x)` (plus reaction) on the unknowns.
    pub fn mass_term(&self) -> &[f64] {
        &self.diag
    }

    pub fn uses_fft(&self) -> bool {
        self.conv.uses_fft()
    }

    pub fn gather(&self, field: &[f64]) -> Vec<f64> {
        self.unknowns.iter().map(|&i| field[i]).collect()
    }

    pub fn scatter(&self, compact: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.grid.len()];
        for (&i, &v) in self.unknowns.iter().zip(compact) {
            full[i] = v;
        }
        full
    }

    /// `y = (-L) x` on compact unknown vectors.
    pub fn apply_negative(&self, x: &[f64], y: &mut [f64]) {
        let mut full = vec![0.0; self.grid.len()];
        for ((&i, &v), &r) in self.unknowns.iter().zip(x).zip(&self.rho) {
            full[i] = r * v;
        }
        let mut conv = vec![0.0; self.grid.len()];
        self.conv.apply(&full, &mut conv);
        for (k, &i) in self.unknowns.iter().enumerate() {
            y[k] = self.diag[k] * x[k] - conv[i];
        }
    }

    /// Diagonal of `-L`, for Jacobi scaling.
    pub fn jacobi_diagonal(&self) -> Vec<f64> {
        self.diag.iter().zip(&self.rho).map(|(d, r)| d - self.center * r).collect()
    }

    /// `L u`, with `u` first restricted to the unknowns; zero elsewhere.
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        if u.grid() != &self.grid {
            return Err(Error::ShapeMismatch("field and operator grids differ".into()));
        }
        let x = self.gather(u.values());
        let mut y = vec![0.0; x.len()];
        self.apply_negative(&x, &mut y);
        y.iter_mut().for_each(|v| *v = -*v);
        ScalarField::from_values(&self.grid, self.scatter(&y))
    }

    /// Solve `L u = f` on the unknowns with `u = 0` elsewhere.
    pub fn solve(&self, f: &ScalarField, opts: &SolveOptions) -> Result<SolveReport> {
        if f.grid() != &self.grid {
            return Err(Error::ShapeMismatch("right-hand side and operator grids differ".into()));
        }
        if let Some(node) = (0..self.grid.len()).find(|&i| !self.in_omega[i] && f.values()[i] != 0.0) {
            return Err(Error::param(
                "f",
                format!("right-hand side must vanish outside Ω; node {node} carries {}", f.values()[node]),
            ));
        }
        let b: Vec<f64> = self.unknowns.iter().map(|&i| -f.values()[i]).collect();
        self.solve_compact(&b, opts)
    }

    /// Solve `(-L) u = b` for a compact right-hand side.
    pub(crate) fn solve_compact(&self, b: &[f64], opts: &SolveOptions) -> Result<SolveReport> {
        let cg = CgOptions {
            tol: opts.tol,
            max_iter: opts
                .max_iter
                .unwrap_or_else(|| CgOptions::with_default_budget(opts.tol, self.unknowns.len()).max_iter),
        };
        let diag = self.jacobi_diagonal();
        let out = conjugate_gradient(
            |x, y| self.apply_negative(x, y),
            b,
            Some(&self.rho),
            Some(&diag),
            None,
            &cg,
        )?;
        Ok(SolveReport {
            solution: ScalarField::from_values(&self.grid, self.scatter(&out.x))?,
            iterations: out.iterations,
            residual: out.residual,
        })
    }

    /// Smallest eigenvalue of `-L` on the admissible space.
    pub fn first_eigenvalue(&self, opts: &EigenOptions) -> Result<SpectralResult> {
        let diag = self.jacobi_diagonal();
        let out = smallest_eigenpair(
            |x, y| self.apply_negative(x, y),
            Some(&self.rho),
            Some(&diag),
            self.unknowns.len(),
            opts,
        )?;
        if !out.converged {
            return Err(Error::NonConvergence {
                iterations: out.iterations,
                residual: out.residual,
            });
        }
        Ok(SpectralResult {
            eigenvalue: out.value.max(0.0),
            eigenvector: ScalarField::from_values(&self.grid, self.scatter(&out.vector))?,
            residual: out.residual,
            iterations: out.iterations,
            seed: opts.seed,
        })
    }
}

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(p) => p,
        None => {
            out.iter_mut().for_each(|o| *o = f64::INFINITY);
            return;
        }
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        // z[0] = -inf, so the pop loop stops before k underflows
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance (physical units) from each node center to the
/// nearest `Exterior` node center.
pub fn distance_to_exterior(mask: &DomainMask) -> Vec<f64> {
    let grid = mask.grid();
    let ext = grid.extents();
    let strides = grid.strides();
    let mut d: Vec<f64> = mask
        .labels()
        .iter()
        .map(|&l| if l == Label::Exterior { 0.0 } else { f64::INFINITY })
        .collect();
    for a in 0..grid.dim() {
        let len = ext[a];
        let stride = strides[a];
        let mut line = vec![0.0; len];
        let mut res = vec![0.0; len];
        let block = len * stride;
        for start in (0..d.len()).step_by(block) {
            for inner in 0..stride {
                let base = start + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = d[base + j * stride];
                }
                edt_1d(&line, &mut res);
                for (j, v) in res.iter().enumerate() {
                    d[base + j * stride] = *v;
                }
            }
        }
    }
    let h = grid.spacing();
    d.iter().map(|v| v.sqrt() * h).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringLayer {
    /// Position in the chain, starting at 1.
    pub index: usize,
    /// Upper edge of the distance shell.
    pub outer_distance: f64,
    pub nodes: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringCertificate {
    pub layer_width: f64,
    pub layers: Vec<CoveringLayer>,
    /// `C_j`, present up to the first layer with `α_j = 0`.
    pub chain: Vec<f64>,
    pub lambda_lower: Option<f64>,
    pub dropped_empty_layers: usize,
    pub failure: Option<String>,
}

impl CoveringCertificate {
    pub fn established(&self) -> bool {
        self.lambda_lower.is_some()
    }

    /// Chain the per-layer constants: `C₁ = 1/α₁`, `C_j = (1 + C_{j-1})/α_j`,
    /// `λ = 1 / Σ C_j`.
    pub fn from_alphas(layer_width: f64, layers: Vec<CoveringLayer>, dropped: usize) -> Self {
        let mut chain = Vec::with_capacity(layers.len());
        let mut failure = None;
        for layer in &layers {
            if !(layer.alpha > 0.0) {
                failure = Some(format!(
                    "layer {} ({} nodes, outer distance {:.4}) does not see the previous layer: α = 0",
                    layer.index, layer.nodes, layer.outer_distance
                ));
                break;
            }
            let prev = chain.last().copied();
            chain.push(match prev {
                None => 1.0 / layer.alpha,
                Some(c) => (1.0 + c) / layer.alpha,
            });
        }
        if layers.is_empty() {
            failure = Some("no layers: Ω^ε is empty".into());
        }
        let lambda_lower = failure.is_none().then(|| 1.0 / chain.iter().sum::<f64>());
        Self {
            layer_width,
            layers,
            chain,
            lambda_lower,
            dropped_empty_layers: dropped,
            failure,
        }
    }
}

/// Constructive lower bound on the Neumann first eigenvalue from distance
/// shells `B_j = {x ∈ Ω^ε : (j-1) w < d(x) ≤ j w}` to the exterior, with
/// `B₀` the exterior of `Ω`. Empty shells are skipped.
pub fn covering_lower_bound(mask: &DomainMask, kernel: &SampledKernel, layer_width: f64) -> Result<CoveringCertificate> {
    if !(layer_width > 0.0) {
        return Err(Error::param("layer_width", "must be positive"));
    }
    let (lo, hi) = check_margin(mask, kernel)?;
    let grid = mask.grid();
    let conv = Convolver::new(grid, &lo, &hi, kernel, ConvMethod::Auto)?;
    let dist = distance_to_exterior(mask);
    let n = grid.len();
    let mut shell = vec![usize::MAX; n];
    let mut count = 0usize;
    for i in 0..n {
        if mask.label(i) == Label::OmegaEps {
            let j = ((dist[i] / layer_width) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            shell[i] = j;
            count = count.max(j);
        }
    }
    let mut nodes_per = vec![0usize; count + 1];
    for &s in shell.iter().filter(|&&s| s != usize::MAX) {
        nodes_per[s] += 1;
    }
    let nonempty: Vec<usize> = (1..=count).filter(|&j| nodes_per[j] > 0).collect();
    let dropped = count - nonempty.len();

    let mass = kernel.discrete_mass();
    let mut layers = Vec::with_capacity(nonempty.len());
    let mut seen = vec![0.0; n];
    for (pos, &j) in nonempty.iter().enumerate() {
        let prev: Vec<f64> = match pos {
            0 => (0..n).map(|i| if mask.in_omega(i) { 1.0 } else { 0.0 }).collect(),
            _ => {
                let pj = nonempty[pos - 1];
                (0..n)
                    .map(|i| if shell[i] == pj { mask.material()[i] } else { 0.0 })
                    .collect()
            }
        };
        conv.apply(&prev, &mut seen);
        let alpha = 0.25
            * (0..n)
                .filter(|&i| shell[i] == j)
                .map(|i| if pos == 0 { mass - seen[i] } else { seen[i] })
                .fold(f64::INFINITY, f64::min);
        // roundoff in the FFT leaves ~1e-16 where the true value is zero
        let alpha = if alpha <= 1e-13 * mass { 0.0 } else { alpha };
        layers.push(CoveringLayer {
            index: pos + 1,
            outer_distance: j as f64 * layer_width,
            nodes: nodes_per[j],
            alpha,
        });
    }
    Ok(CoveringCertificate::from_alphas(layer_width, layers, dropped))
}
