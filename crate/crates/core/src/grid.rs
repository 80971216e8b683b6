//! Uniform lattices, scalar fields on them, and the discrete L² geometry.
//!
//! Node `k` of a grid sits at the cell center `origin + (k + 1/2) h`. Every
//! integral over ℝ^N becomes an `h^N`-weighted midpoint sum over the nodes.
//! Flat node indices are row-major: the last axis varies fastest.
//!
//! Reductions (inner products, norms) are summed in fixed chunks of
//! [`REDUCE_CHUNK`] nodes; chunk partials are then added in index order, so
//! results do not depend on the number of worker threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Chunk length of the deterministic two-level reduction.
pub const REDUCE_CHUNK: usize = 4096;

/// How a box domain sits on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    /// Box faces coincide with cell faces; no node lies on the boundary.
    CellCentered,
    /// Box faces pass through node centers; boundary nodes lie outside the
    /// open box and carry the Dirichlet value exactly.
    Vertex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    origin: Vec<f64>,
    spacing: f64,
    extents: Vec<usize>,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(origin: Vec<f64>, spacing: f64, extents: Vec<usize>) -> Result<Self> {
        if origin.is_empty() || origin.len() != extents.len() {
            return Err(Error::InvalidGrid(format!(
                "origin has {} coordinates but extents has {} axes",
                origin.len(),
                extents.len()
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        if let Some(e) = extents.iter().find(|&&e| e < 2) {
            return Err(Error::InvalidGrid(format!("every extent must be at least 2, got {e}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        let mut strides = vec![1; extents.len()];
        for a in (0..extents.len() - 1).rev() {
            strides[a] = strides[a + 1] * extents[a + 1];
        }
        Ok(Self {
            origin,
            spacing,
            extents,
            strides,
        })
    }

    /// Grid covering the box `[lo, hi]` dilated by `margin` on every side.
    ///
    /// The box side lengths must be integer multiples of `spacing`.
    pub fn covering(lo: &[f64], hi: &[f64], margin: f64, spacing: f64, align: Alignment) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidGrid("box corners must have the same positive dimension".into()));
        }
        if !(spacing > 0.0) || !(margin >= 0.0) {
            return Err(Error::InvalidGrid("spacing must be positive and margin non-negative".into()));
        }
        let pad = (margin / spacing - 1e-9).ceil().max(0.0) as usize;
        let mut origin = Vec::with_capacity(lo.len());
        let mut extents = Vec::with_capacity(lo.len());
        for (&l, &u) in lo.iter().zip(hi) {
            let cells = (u - l) / spacing;
            let n = cells.round();
            if !(n >= 1.0) || (cells - n).abs() > 1e-6 * n.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "box side {} is not an integer multiple of the spacing {spacing}",
                    u - l
                )));
            }
            let n = n as usize;
            match align {
                Alignment::CellCentered => {
                    origin.push(l - pad as f64 * spacing);
                    extents.push(n + 2 * pad);
                }
                Alignment::Vertex => {
                    origin.push(l - pad as f64 * spacing - 0.5 * spacing);
                    extents.push(n + 1 + 2 * pad);
                }
            }
        }
        Self::new(origin, spacing, extents)
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.extents.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight `h^N` of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for (a, s) in self.strides.iter().enumerate() {
            out[a] = flat / s;
            flat %= s;
        }
    }

    /// Center coordinate of node index `k` along `axis`.
    pub fn coordinate(&self, axis: usize, k: usize) -> f64 {
        self.origin[axis] + (k as f64 + 0.5) * self.spacing
    }

    pub fn node_coords(&self, flat: usize) -> Vec<f64> {
        let mut multi = vec![0; self.dim()];
        self.unravel(flat, &mut multi);
        multi
            .iter()
            .enumerate()
            .map(|(a, &k)| self.coordinate(a, k))
            .collect()
    }

    /// Visit every node in flat order with its center coordinates.
    pub fn for_each_node(&self, mut f: impl FnMut(usize, &[f64])) {
        let dim = self.dim();
        let mut multi = vec![0usize; dim];
        let mut x: Vec<f64> = (0..dim).map(|a| self.coordinate(a, 0)).collect();
        for flat in 0..self.len() {
            f(flat, &x);
            // odometer increment, last axis fastest
            for a in (0..dim).rev() {
                multi[a] += 1;
                if multi[a] < self.extents[a] {
                    x[a] = self.coordinate(a, multi[a]);
                    break;
                }
                multi[a] = 0;
                x[a] = self.coordinate(a, 0);
            }
        }
    }

    /// Values of `f` at every node center.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.for_each_node(|i, x| out[i] = f(x));
        out
    }
}

/// Sum of `a[i] * b[i]` with the chunked deterministic reduction.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partials: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partials.iter().sum()
}

/// Sum of `w[i] * a[i] * b[i]` with the chunked deterministic reduction.
pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    debug_assert!(a.len() == b.len() && w.len() == a.len());
    let partials: Vec<f64> = w
        .par_chunks(REDUCE_CHUNK)
        .zip(a.par_chunks(REDUCE_CHUNK))
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|((w, x), y)| {
            w.iter()
                .zip(x)
                .zip(y)
                .map(|((w, p), q)| w * p * q)
                .sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::NonFinite { node }),
        None => Ok(()),
    }
}

impl Grid {
    /// `dim`, `extents`, `spacing` and `origin` lines shared by the text dumps.
    pub fn text_header(&self) -> String {
        let join = |v: Vec<String>| v.join(" ");
        format!(
            "dim {}\nextents {}\nspacing {}\norigin {}\n",
            self.dim(),
            join(self.extents().iter().map(|e| e.to_string()).collect()),
            self.spacing(),
            join(self.origin().iter().map(|o| o.to_string()).collect()),
        )
    }

    /// Reads the four header lines written by [`Grid::text_header`].
    pub fn parse_text_header<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Grid> {
        let bad = |msg: &str| Error::InvalidGrid(format!("text dump: {msg}"));
        let mut header = |key: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(&format!("expected `{key}` line")));
            }
            Ok(parts.map(str::to_owned).collect())
        };
        let dim: usize = header("dim")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad dim"))?;
        let extents: Vec<usize> = header("extents")?
            .iter()
            .map(|s| s.parse().map_err(|_| bad("bad extent")))
            .collect::<Result<_>>()?;
        let spacing: f64 = header("spacing")?
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad spacing"))?;
        let origin: Vec<f64> = header("origin")?
            .iter()
            .map(|s| s.parse().map_err(|_| bad("bad origin")))
            .collect::<Result<_>>()?;
        if extents.len() != dim {
            return Err(bad("extents do not match dim"));
        }
        Grid::new(origin, spacing, extents)
    }
}

/// One real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, value: f64) -> Result<Self> {
        Self::from_values(grid, vec![value; grid.len()])
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Field sampled at node centers.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_values(grid, grid.sample(f))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Mutable access; callers must keep every entry finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub(crate) fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::ShapeMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Plain-text dump in the mask format: the grid header, then one line of
    /// space-separated values per run of the last axis.
    pub fn to_text(&self) -> String {
        let mut out = self.grid.text_header();
        let line = *self.grid.extents().last().expect("grid has at least one axis");
        for row in self.values.chunks(line) {
            let row: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let grid = Grid::parse_text_header(&mut lines)?;
        let values = lines
            .flat_map(str::split_whitespace)
            .map(|t| t.parse().map_err(|_| Error::InvalidGrid(format!("field dump: bad value `{t}`"))))
            .collect::<Result<Vec<f64>>>()?;
        Self::from_values(&grid, values)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_values(&self.grid, self.values.iter().map(|v| v * s).collect())
    }

    /// `self - other`.
    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.same_grid(other)?;
        Self::from_values(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        )
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.same_grid(other)?;
        Self::from_values(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        )
    }
}

/// Discrete L² pairing `h^N Σ a b`.
pub fn inner_product(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.same_grid(b)?;
    Ok(a.grid.cell_volume() * dot(&a.values, &b.values))
}

pub fn l2_norm(a: &ScalarField) -> f64 {
    (a.grid.cell_volume() * dot(&a.values, &a.values)).sqrt()
}

/// Keep `a` where `keep(node)` holds and zero it elsewhere.
pub fn restrict(a: &ScalarField, keep: impl Fn(usize) -> bool) -> ScalarField {
    let values = a
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| if keep(i) { v } else { 0.0 })
        .collect();
    ScalarField {
        grid: a.grid.clone(),
        values,
    }
}
