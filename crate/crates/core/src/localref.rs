//! Finite-difference references for the local problems.
//!
//! [`solve_local`] discretizes `Σ q_ij ∂_i ∂_j v - c v = f` on the `OmegaEps`
//! nodes of a mask with second-order centered differences. Exterior nodes
//! and Dirichlet holes carry the value 0. A Neumann hole face is handled by
//! reflecting the unknown into a ghost node, which removes the face from the
//! stencil and keeps the matrix symmetric.
//!
//! [`homogenized_coefficients`] solves the periodic cell problems on `Q ∖ B`
//! and assembles the effective tensor `q`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{DomainMask, HoleShape, Label};
use crate::grid::{Grid, ScalarField};
use crate::kernel::unit_sphere_area;
use crate::linalg::{conjugate_gradient, CgOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HoleBc {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalProblem {
    pub mask: DomainMask,
    pub bc_holes: HoleBc,
    /// Zero-order coefficient `c ≥ 0` per node.
    pub reaction: Option<ScalarField>,
    /// Diffusion tensor, `N × N`, symmetric positive definite.
    pub q: Vec<Vec<f64>>,
}

impl LocalProblem {
    /// `Δ v = f` with the given hole condition.
    pub fn poisson(mask: &DomainMask, bc_holes: HoleBc) -> Self {
        let n = mask.grid().dim();
        let q = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        Self {
            mask: mask.clone(),
            bc_holes,
            reaction: None,
            q,
        }
    }

    pub fn with_reaction(mut self, c: f64) -> Result<Self> {
        self.reaction = Some(ScalarField::constant(self.mask.grid(), c)?);
        Ok(self)
    }

    pub fn with_tensor(mut self, q: Vec<Vec<f64>>) -> Self {
        self.q = q;
        self
    }
}

/// Sparse symmetric matrix of the discrete operator `-Σ q_ij D_ij + c` on
/// the unknown nodes.
#[derive(Debug, Clone)]
pub struct LocalOperator {
    grid: Grid,
    unknowns: Vec<usize>,
    diag: Vec<f64>,
    offdiag: Vec<Vec<(usize, f64)>>,
}

fn check_tensor(q: &[Vec<f64>], n: usize) -> Result<()> {
    if q.len() != n || q.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch(format!("diffusion tensor must be {n}×{n}")));
    }
    let m = DMatrix::from_fn(n, n, |i, j| q[i][j]);
    if (0..n).any(|i| (0..n).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-14 * m.amax().max(1.0))) {
        return Err(Error::NotPositiveDefinite("diffusion tensor is not symmetric".into()));
    }
    let min = SymmetricEigen::new(m).eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite(format!(
            "diffusion tensor has smallest eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Node `idx` shifted by `steps` (per axis), or `None` off the grid.
fn shifted(grid: &Grid, multi: &[usize], steps: &[(usize, isize)]) -> Option<usize> {
    let mut flat = 0isize;
    let ext = grid.extents();
    let mut m: Vec<isize> = multi.iter().map(|&v| v as isize).collect();
    for &(a, s) in steps {
        m[a] += s;
    }
    for (a, &v) in m.iter().enumerate() {
        if v < 0 || v >= ext[a] as isize {
            return None;
        }
        flat += v * grid.strides()[a] as isize;
    }
    Some(flat as usize)
}

impl LocalOperator {
    pub fn new(p: &LocalProblem) -> Result<Self> {
        let grid = p.mask.grid().clone();
        let n = grid.dim();
        check_tensor(&p.q, n)?;
        if let Some(c) = &p.reaction {
            if c.grid() != &grid {
                return Err(Error::ShapeMismatch("reaction field grid differs from the mask grid".into()));
            }
            if c.values().iter().any(|&v| v < 0.0) {
                return Err(Error::param("reaction", "zero-order coefficient must be nonnegative"));
            }
        }
        let h2 = grid.spacing() * grid.spacing();
        let unknowns: Vec<usize> = (0..grid.len()).filter(|&i| p.mask.label(i) == Label::OmegaEps).collect();
        let mut index = vec![usize::MAX; grid.len()];
        for (k, &i) in unknowns.iter().enumerate() {
            index[i] = k;
        }
        let label_at = |node: Option<usize>| node.map_or(Label::Exterior, |j| p.mask.label(j));
        let mut diag = vec![0.0; unknowns.len()];
        let mut offdiag = vec![Vec::new(); unknowns.len()];
        let mut multi = vec![0usize; n];
        for (k, &i) in unknowns.iter().enumerate() {
            grid.unravel(i, &mut multi);
            if let Some(c) = &p.reaction {
                diag[k] += c.values()[i];
            }
            for a in 0..n {
                let w = p.q[a][a] / h2;
                for s in [-1isize, 1] {
                    let y = shifted(&grid, &multi, &[(a, s)]);
                    match label_at(y) {
                        Label::OmegaEps => {
                            diag[k] += w;
                            offdiag[k].push((index[y.expect("on grid")], -w));
                        }
                        Label::Hole if p.bc_holes == HoleBc::Neumann => {}
                        _ => diag[k] += w,
                    }
                }
                for b in a + 1..n {
                    let qab = p.q[a][b];
                    if qab == 0.0 {
                        continue;
                    }
                    for sa in [-1isize, 1] {
                        for sb in [-1isize, 1] {
                            let y = shifted(&grid, &multi, &[(a, sa), (b, sb)]);
                            let coeff = -qab * (sa * sb) as f64 / (2.0 * h2);
                            match label_at(y) {
                                Label::OmegaEps => offdiag[k].push((index[y.expect("on grid")], coeff)),
                                Label::Hole if p.bc_holes == HoleBc::Neumann => {
                                    return Err(Error::param(
                                        "q",
                                        "cross-derivative terms next to Neumann holes are not supported",
                                    ))
                                }
                                _ => {}
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            grid,
            unknowns,
            diag,
            offdiag,
        })
    }

    pub fn unknowns(&self) -> &[usize] {
        &self.unknowns
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (k, row) in self.offdiag.iter().enumerate() {
            y[k] = self.diag[k] * x[k] + row.iter().map(|&(j, c)| c * x[j]).sum::<f64>();
        }
    }

    pub fn scatter(&self, compact: &[f64]) -> Result<ScalarField> {
        let mut full = vec![0.0; self.grid.len()];
        for (&i, &v) in self.unknowns.iter().zip(compact) {
            full[i] = v;
        }
        ScalarField::from_values(&self.grid, full)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution {
    pub solution: ScalarField,
    pub iterations: usize,
    pub residual: f64,
}

pub fn solve_local(p: &LocalProblem, f: &ScalarField, tol: f64) -> Result<LocalSolution> {
    if f.grid() != p.mask.grid() {
        return Err(Error::ShapeMismatch("right-hand side and mask grids differ".into()));
    }
    let op = LocalOperator::new(p)?;
    let b: Vec<f64> = op.unknowns.iter().map(|&i| -f.values()[i]).collect();
    let opts = CgOptions::with_default_budget(tol, op.unknowns.len() * 4);
    let out = conjugate_gradient(|x, y| op.apply(x, y), &b, None, Some(&op.diag), None, &opts)?;
    Ok(LocalSolution {
        solution: op.scatter(&out.x)?,
        iterations: out.iterations,
        residual: out.residual,
    })
}

/// Reference cell `Q = (0, l_1) × … × (0, l_N)` with a hole `B`. A ball hole
/// is centered in `Q` with radius `radius_factor`; a box hole is given in
/// cell coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGeometry {
    pub cell_lengths: Vec<f64>,
    pub hole: HoleShape,
}

impl CellGeometry {
    pub fn unit_disk(radius: f64) -> Self {
        Self {
            cell_lengths: vec![1.0, 1.0],
            hole: HoleShape::Ball { radius_factor: radius },
        }
    }

    fn in_hole(&self, x: &[f64]) -> bool {
        match &self.hole {
            HoleShape::None => false,
            HoleShape::Ball { radius_factor } => {
                let r2: f64 = x
                    .iter()
                    .zip(&self.cell_lengths)
                    .map(|(v, l)| (v - 0.5 * l).powi(2))
                    .sum();
                r2 <= radius_factor * radius_factor
            }
            HoleShape::Box { lo, hi } => x.iter().enumerate().all(|(a, &v)| v >= lo[a] && v <= hi[a]),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.cell_lengths.len();
        if n == 0 || self.cell_lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Geometry("cell lengths must be positive".into()));
        }
        match &self.hole {
            HoleShape::None => Ok(()),
            HoleShape::Ball { radius_factor } => {
                let half = 0.5 * self.cell_lengths.iter().cloned().fold(f64::INFINITY, f64::min);
                if !(*radius_factor > 0.0) || *radius_factor >= half {
                    return Err(Error::Geometry(format!(
                        "ball hole of radius {radius_factor} must lie strictly inside the cell"
                    )));
                }
                Ok(())
            }
            HoleShape::Box { lo, hi } => {
                if lo.len() != n
                    || hi.len() != n
                    || (0..n).any(|a| !(lo[a] > 0.0 && hi[a] < self.cell_lengths[a] && lo[a] < hi[a]))
                {
                    return Err(Error::Geometry("box hole must lie strictly inside the cell".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    pub grid: Grid,
    pub material: Vec<bool>,
    /// `X^i`, zero on hole nodes.
    pub correctors: Vec<ScalarField>,
    pub q: Vec<Vec<f64>>,
    /// Discrete `|Q ∖ B| / |Q|`.
    pub material_fraction: f64,
    pub iterations: Vec<usize>,
}

/// Periodic cell problems `ΔX^i = 0` in `Q ∖ B`, `∂_η X^i = η_i` on `∂B`
/// with `η` the outward normal of `Q ∖ B`, zero mean, and
/// `q_ij = (1/|Q|)[|Q ∖ B| δ_ij - ∫_{Q∖B} ∂X^i/∂y_j]`.
///
/// On the lattice the hole boundary is the set of faces between material
/// and hole nodes; each such face carries the flux `η_i` of its own normal.
pub fn homogenized_coefficients(cell: &CellGeometry, h: f64, tol: f64) -> Result<CellSolution> {
    cell.validate()?;
    let n = cell.cell_lengths.len();
    let extents: Vec<usize> = cell
        .cell_lengths
        .iter()
        .map(|&l| {
            let c = (l / h).round();
            if (l / h - c).abs() > 1e-9 * c.max(1.0) || c < 4.0 {
                Err(Error::InvalidGrid(format!("cell length {l} is not a multiple (≥ 4) of h = {h}")))
            } else {
                Ok(c as usize)
            }
        })
        .collect::<Result<_>>()?;
    let grid = Grid::new(vec![0.0; n], h, extents.clone())?;
    let total = grid.len();
    let mut material = vec![false; total];
    grid.for_each_node(|i, x| material[i] = !cell.in_hole(x));
    let unknowns: Vec<usize> = (0..total).filter(|&i| material[i]).collect();
    if unknowns.is_empty() {
        return Err(Error::Geometry("the cell has no material nodes".into()));
    }
    let mut index = vec![usize::MAX; total];
    for (k, &i) in unknowns.iter().enumerate() {
        index[i] = k;
    }
    let periodic = |i: usize, a: usize, s: isize, multi: &mut [usize]| -> usize {
        grid.unravel(i, multi);
        multi[a] = ((multi[a] as isize + s).rem_euclid(extents[a] as isize)) as usize;
        grid.index(multi)
    };
    let h2 = h * h;
    let mut multi = vec![0usize; n];
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); unknowns.len()];
    // per unknown and axis: net outward hole-face sign (+1 hole ahead, -1 behind)
    let mut hole_faces = vec![vec![0.0; n]; unknowns.len()];
    for (k, &i) in unknowns.iter().enumerate() {
        for a in 0..n {
            for s in [-1isize, 1] {
                let j = periodic(i, a, s, &mut multi);
                if material[j] {
                    nbrs[k].push(index[j]);
                } else {
                    hole_faces[k][a] += s as f64;
                }
            }
        }
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for (k, row) in nbrs.iter().enumerate() {
            y[k] = (row.len() as f64 * x[k] - row.iter().map(|&j| x[j]).sum::<f64>()) / h2;
        }
    };
    let count = unknowns.len() as f64;
    let project = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / count;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    let opts = CgOptions::with_default_budget(tol, unknowns.len() * 4);
    let mut correctors = Vec::with_capacity(n);
    let mut iterations = Vec::with_capacity(n);
    for i_axis in 0..n {
        let b: Vec<f64> = hole_faces.iter().map(|f| f[i_axis] / h).collect();
        let out = conjugate_gradient(apply, &b, None, None, Some(&project), &opts)?;
        iterations.push(out.iterations);
        correctors.push(out.x);
    }
    let fraction = count / total as f64;
    let q_volume = total as f64 * grid.cell_volume();
    let face_area = grid.cell_volume() / h;
    let mut q = vec![vec![0.0; n]; n];
    for (i_axis, x) in correctors.iter().enumerate() {
        for j_axis in 0..n {
            let mut flux = 0.0;
            for (k, &node) in unknowns.iter().enumerate() {
                let next = periodic(node, j_axis, 1, &mut multi);
                if material[next] {
                    flux += x[index[next]] - x[k];
                }
            }
            let delta = if i_axis == j_axis { fraction } else { 0.0 };
            q[i_axis][j_axis] = delta - flux * face_area / q_volume;
        }
    }
    let correctors = correctors
        .into_iter()
        .map(|x| {
            let mut full = vec![0.0; total];
            for (&i, v) in unknowns.iter().zip(x) {
                full[i] = v;
            }
            ScalarField::from_values(&grid, full)
        })
        .collect::<Result<_>>()?;
    Ok(CellSolution {
        grid,
        material,
        correctors,
        q,
        material_fraction: fraction,
        iterations,
    })
}

/// `μ = S_N (N - 2) / 2^N · C₀^{N-2}`, defined for `N ≥ 3`.
pub fn mu_constant(dim: usize, c0: f64) -> Result<f64> {
    if dim < 3 {
        return Err(Error::param("dim", format!("μ needs N ≥ 3, got {dim}")));
    }
    if !(c0 > 0.0) {
        return Err(Error::param("c0", "must be positive"));
    }
    Ok(unit_sphere_area(dim) * (dim as f64 - 2.0) / 2f64.powi(dim as i32) * c0.powi(dim as i32 - 2))
}
