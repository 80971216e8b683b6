//! Perforated domains on a grid: node labels, material fractions and the
//! analytic weak-star limits of the characteristic functions.
//!
//! A mask stores a label per node and a material weight `ρ ∈ [0, 1]`. With
//! [`MaskQuadrature::NodeCenter`] the weight is the characteristic function
//! of `Ω^ε` at the node center. With [`MaskQuadrature::CellFraction`] it is
//! the volume fraction of the node's cell not covered by holes, so that
//! `h^N Σ ρ φ` integrates `χ_ε φ` without a staircase bias. `Ω` membership
//! is always decided at the node center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::homogenize::{CoefficientField, CoefficientRole};
use crate::kernel::{gauss_legendre, unit_ball_volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Exterior,
    OmegaEps,
    Hole,
}

impl Label {
    fn to_char(self) -> char {
        match self {
            Label::Exterior => '.',
            Label::OmegaEps => 'o',
            Label::Hole => '#',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            '.' => Some(Label::Exterior),
            'o' => Some(Label::OmegaEps),
            '#' => Some(Label::Hole),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskQuadrature {
    #[default]
    NodeCenter,
    CellFraction,
}

/// Sub-samples per axis when a cell fraction has no closed form.
const SUPERSAMPLE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    grid: Grid,
    labels: Vec<Label>,
    material: Vec<f64>,
    quadrature: MaskQuadrature,
    warnings: Vec<String>,
}

impl DomainMask {
    /// Mask from labels alone; material weights are the binary indicator.
    pub fn from_labels(grid: &Grid, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for a grid of {} nodes",
                labels.len(),
                grid.len()
            )));
        }
        let material = labels
            .iter()
            .map(|&l| if l == Label::OmegaEps { 1.0 } else { 0.0 })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            labels,
            material,
            quadrature: MaskQuadrature::NodeCenter,
            warnings: Vec::new(),
        })
    }

    fn from_material(grid: &Grid, in_omega: Vec<bool>, material: Vec<f64>, quadrature: MaskQuadrature) -> Self {
        let labels = in_omega
            .iter()
            .zip(&material)
            .map(|(&inside, &m)| match (inside, m > 0.0) {
                (false, _) => Label::Exterior,
                (true, true) => Label::OmegaEps,
                (true, false) => Label::Hole,
            })
            .collect();
        let material = in_omega
            .iter()
            .zip(material)
            .map(|(&inside, m)| if inside { m } else { 0.0 })
            .collect();
        Self {
            grid: grid.clone(),
            labels,
            material,
            quadrature,
            warnings: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Label {
        self.labels[node]
    }

    /// Material weights `ρ`, zero outside `Ω^ε`.
    pub fn material(&self) -> &[f64] {
        &self.material
    }

    pub fn quadrature(&self) -> MaskQuadrature {
        self.quadrature
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn in_omega(&self, node: usize) -> bool {
        self.labels[node] != Label::Exterior
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// `χ_ε` as a field (the material weights).
    pub fn chi_eps(&self) -> ScalarField {
        ScalarField::from_values(&self.grid, self.material.clone()).expect("material weights are finite")
    }

    /// `χ_Ω` as a field.
    pub fn chi_omega(&self) -> ScalarField {
        let v = self.labels.iter().map(|&l| if l == Label::Exterior { 0.0 } else { 1.0 }).collect();
        ScalarField::from_values(&self.grid, v).expect("indicator is finite")
    }

    /// Measure of `Ω^ε`, `h^N Σ ρ`.
    pub fn material_volume(&self) -> f64 {
        self.material.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Measure of `Ω` as seen by the grid.
    pub fn omega_volume(&self) -> f64 {
        (self.labels.len() - self.count(Label::Exterior)) as f64 * self.grid.cell_volume()
    }

    /// Index box `[lo, hi)` enclosing every `Ω` node, or `None` if `Ω` is empty.
    pub fn omega_window(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        let n = self.grid.dim();
        let mut lo = vec![usize::MAX; n];
        let mut hi = vec![0usize; n];
        let mut multi = vec![0usize; n];
        let mut any = false;
        for (i, &l) in self.labels.iter().enumerate() {
            if l == Label::Exterior {
                continue;
            }
            any = true;
            self.grid.unravel(i, &mut multi);
            for a in 0..n {
                lo[a] = lo[a].min(multi[a]);
                hi[a] = hi[a].max(multi[a] + 1);
            }
        }
        any.then_some((lo, hi))
    }

    /// Plain-text dump: a small header, then one line of label characters
    /// per combination of leading indices (the last axis runs along a line).
    pub fn to_text(&self) -> String {
        let mut out = self.grid.text_header();
        let line = *self.grid.extents().last().expect("grid has at least one axis");
        for row in self.labels.chunks(line) {
            out.extend(row.iter().map(|l| l.to_char()));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Geometry(format!("mask dump: {msg}"));
        let mut lines = text.lines();
        let grid = Grid::parse_text_header(&mut lines)?;
        let mut labels = Vec::with_capacity(grid.len());
        for line in lines.filter(|l| !l.trim().is_empty()) {
            for c in line.trim_end().chars() {
                labels.push(Label::from_char(c).ok_or_else(|| bad(&format!("unknown label `{c}`")))?);
            }
        }
        Self::from_labels(&grid, labels)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "shape")]
pub enum HoleShape {
    None,
    /// Ball of radius `C₀ ε^γ` centered in each cell.
    Ball { radius_factor: f64 },
    /// Sub-box `[lo, hi]` of the reference cell `Q`, scaled by `ε^γ` about
    /// the cell center.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerforationSpec {
    pub cell_lengths: Vec<f64>,
    pub hole: HoleShape,
    pub epsilon: f64,
    pub gamma: f64,
    pub omega_lo: Vec<f64>,
    pub omega_hi: Vec<f64>,
    /// Remove only holes strictly contained in `Ω`.
    pub interior_holes_only: bool,
    pub quadrature: MaskQuadrature,
}

impl PerforationSpec {
    /// Balls of radius `c0 ε^γ` in unit cells over the box `[lo, hi]`.
    pub fn periodic_balls(lo: &[f64], hi: &[f64], c0: f64, epsilon: f64, gamma: f64) -> Self {
        Self {
            cell_lengths: vec![1.0; lo.len()],
            hole: HoleShape::Ball { radius_factor: c0 },
            epsilon,
            gamma,
            omega_lo: lo.to_vec(),
            omega_hi: hi.to_vec(),
            interior_holes_only: false,
            quadrature: MaskQuadrature::NodeCenter,
        }
    }

    /// Horizontal strips `[0,1] × [1/3, 2/3]` of the unit cell in `(-1, 1)²`.
    pub fn horizontal_strips(epsilon: f64) -> Self {
        Self {
            cell_lengths: vec![1.0, 1.0],
            hole: HoleShape::Box {
                lo: vec![0.0, 1.0 / 3.0],
                hi: vec![1.0, 2.0 / 3.0],
            },
            epsilon,
            gamma: 1.0,
            omega_lo: vec![-1.0, -1.0],
            omega_hi: vec![1.0, 1.0],
            interior_holes_only: false,
            quadrature: MaskQuadrature::NodeCenter,
        }
    }

    pub fn with_quadrature(mut self, q: MaskQuadrature) -> Self {
        self.quadrature = q;
        self
    }

    pub fn dim(&self) -> usize {
        self.cell_lengths.len()
    }

    /// Hole radius (balls) or largest scaled half-width (boxes).
    pub fn hole_scale(&self) -> f64 {
        let s = self.epsilon.powf(self.gamma);
        match &self.hole {
            HoleShape::None => 0.0,
            HoleShape::Ball { radius_factor } => radius_factor * s,
            HoleShape::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l) * s).fold(0.0, f64::max),
        }
    }

    /// `|A| / |Q|` of the γ = 1 reference hole.
    pub fn hole_fraction(&self) -> f64 {
        let q: f64 = self.cell_lengths.iter().product();
        match &self.hole {
            HoleShape::None => 0.0,
            HoleShape::Ball { radius_factor } => unit_ball_volume(self.dim()) * radius_factor.powi(self.dim() as i32) / q,
            HoleShape::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product::<f64>() / q,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || self.omega_lo.len() != n || self.omega_hi.len() != n {
            return Err(Error::Geometry("cell lengths and Ω corners must share one dimension".into()));
        }
        if self.cell_lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::param("cell_lengths", "every cell length must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::param("epsilon", format!("must lie in (0, 1], got {}", self.epsilon)));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::param("gamma", format!("must be positive, got {}", self.gamma)));
        }
        if self.omega_lo.iter().zip(&self.omega_hi).any(|(l, h)| !(h > l)) {
            return Err(Error::Geometry("Ω must be a nonempty box".into()));
        }
        let half_cell = 0.5 * self.epsilon * self.cell_lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        match &self.hole {
            HoleShape::None => {}
            HoleShape::Ball { radius_factor } => {
                if !(*radius_factor > 0.0) {
                    return Err(Error::param("radius_factor", "must be positive"));
                }
                let r = self.hole_scale();
                if r >= half_cell {
                    return Err(Error::Geometry(format!(
                        "hole radius {r} reaches half the cell size {half_cell}; holes would merge"
                    )));
                }
            }
            HoleShape::Box { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return Err(Error::Geometry("box hole corners have the wrong dimension".into()));
                }
                let s = self.epsilon.powf(self.gamma - 1.0);
                for a in 0..n {
                    let l = self.cell_lengths[a];
                    if !(lo[a] >= 0.0 && hi[a] <= l && lo[a] < hi[a]) {
                        return Err(Error::Geometry("box hole must be a nonempty sub-box of the cell".into()));
                    }
                    let c = 0.5 * l;
                    if c + s * (lo[a] - c) < -1e-12 || c + s * (hi[a] - c) > l + 1e-12 {
                        return Err(Error::Geometry("scaled box hole leaves its cell".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn in_omega(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.omega_lo.iter().zip(&self.omega_hi))
            .all(|(&v, (&l, &h))| v > l && v < h)
    }

    /// Hole image of the lattice cell `k`.
    fn image(&self, k: &[i64]) -> HoleImage {
        let s = self.epsilon.powf(self.gamma);
        let center: Vec<f64> = k
            .iter()
            .zip(&self.cell_lengths)
            .map(|(&ki, &l)| self.epsilon * (ki as f64 + 0.5) * l)
            .collect();
        match &self.hole {
            HoleShape::None => unreachable!("no image without a hole"),
            HoleShape::Ball { radius_factor } => HoleImage::Ball {
                center,
                radius: radius_factor * s,
            },
            HoleShape::Box { lo, hi } => {
                let map = |v: f64, a: usize| center[a] + s * (v - 0.5 * self.cell_lengths[a]);
                HoleImage::Box {
                    lo: (0..lo.len()).map(|a| map(lo[a], a)).collect(),
                    hi: (0..hi.len()).map(|a| map(hi[a], a)).collect(),
                }
            }
        }
    }

    fn admits(&self, img: &HoleImage) -> bool {
        if !self.interior_holes_only {
            return true;
        }
        let (lo, hi) = img.bounds();
        (0..self.dim()).all(|a| lo[a] > self.omega_lo[a] && hi[a] < self.omega_hi[a])
    }

    /// Lattice cells whose hole can meet the box `[lo, hi]`.
    fn cells_meeting(&self, lo: &[f64], hi: &[f64]) -> Vec<Vec<i64>> {
        let n = self.dim();
        let ranges: Vec<(i64, i64)> = (0..n)
            .map(|a| {
                let w = self.epsilon * self.cell_lengths[a];
                ((lo[a] / w).floor() as i64, (hi[a] / w).floor() as i64)
            })
            .collect();
        let mut out = Vec::new();
        let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(k.clone());
            let mut a = n;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                if k[a] < ranges[a].1 {
                    k[a] += 1;
                    for b in a + 1..n {
                        k[b] = ranges[b].0;
                    }
                    break;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum HoleImage {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl HoleImage {
    fn contains(&self, x: &[f64]) -> bool {
        match self {
            HoleImage::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= radius * radius
            }
            HoleImage::Box { lo, hi } => x.iter().enumerate().all(|(a, &v)| v >= lo[a] && v <= hi[a]),
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            HoleImage::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            HoleImage::Box { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    /// Measure of the intersection with the box `[lo, hi]`.
    fn overlap(&self, lo: &[f64], hi: &[f64]) -> f64 {
        match self {
            HoleImage::Box { lo: a, hi: b } => (0..lo.len())
                .map(|i| (hi[i].min(b[i]) - lo[i].max(a[i])).max(0.0))
                .product(),
            HoleImage::Ball { center, radius } => {
                let rl: Vec<f64> = lo.iter().zip(center).map(|(l, c)| l - c).collect();
                let rh: Vec<f64> = hi.iter().zip(center).map(|(h, c)| h - c).collect();
                ball_box_volume(*radius, &rl, &rh)
            }
        }
    }
}

/// `∫ sqrt(r² - x²) dx`.
fn half_chord_antiderivative(r: f64, x: f64) -> f64 {
    let x = x.clamp(-r, r);
    0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).asin())
}

/// Area of the disk of radius `r` centered at the origin intersected with
/// `[x0, x1] × [y0, y1]`, in closed form.
fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b || y0 >= y1 {
        return 0.0;
    }
    let mut cuts = vec![a, b];
    for y in [y0, y1] {
        if y.abs() < r {
            let c = (r * r - y * y).sqrt();
            cuts.extend([-c, c]);
        }
    }
    cuts.retain(|&c| c >= a && c <= b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let s = |x: f64| (r * r - x * x).max(0.0).sqrt();
    let g = |x: f64| half_chord_antiderivative(r, x);
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let m = 0.5 * (p + q);
        let top_is_arc = s(m) < y1;
        let bottom_is_arc = -s(m) > y0;
        let top = if top_is_arc { s(m) } else { y1 };
        let bottom = if bottom_is_arc { -s(m) } else { y0 };
        if top <= bottom {
            continue;
        }
        let top_int = if top_is_arc { g(q) - g(p) } else { y1 * (q - p) };
        let bottom_int = if bottom_is_arc { -(g(q) - g(p)) } else { y0 * (q - p) };
        area += top_int - bottom_int;
    }
    area.max(0.0)
}

/// Volume of the ball of radius `r` at the origin intersected with `[lo, hi]`.
fn ball_box_volume(r: f64, lo: &[f64], hi: &[f64]) -> f64 {
    let n = lo.len();
    // quick exits: box fully outside or fully inside
    let near: f64 = (0..n).map(|a| (lo[a].max(0.0) + (-hi[a]).max(0.0)).powi(2)).sum();
    if near >= r * r {
        return 0.0;
    }
    let far: f64 = (0..n).map(|a| lo[a].abs().max(hi[a].abs()).powi(2)).sum();
    if far <= r * r {
        return (0..n).map(|a| hi[a] - lo[a]).product();
    }
    match n {
        1 => (hi[0].min(r) - lo[0].max(-r)).max(0.0),
        2 => disk_rect_area(r, lo[0], hi[0], lo[1], hi[1]),
        _ => {
            let a = lo[0].max(-r);
            let b = hi[0].min(r);
            if a >= b {
                return 0.0;
            }
            gauss_legendre(a, b, 16, |x| {
                let rr = (r * r - x * x).max(0.0).sqrt();
                ball_box_volume(rr, &lo[1..], &hi[1..])
            })
        }
    }
}

fn cell_box(grid: &Grid, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = 0.5 * grid.spacing();
    (x.iter().map(|v| v - h).collect(), x.iter().map(|v| v + h).collect())
}

pub fn build_periodic_mask(spec: &PerforationSpec, grid: &Grid) -> Result<DomainMask> {
    spec.validate()?;
    let n = spec.dim();
    if grid.dim() != n {
        return Err(Error::ShapeMismatch(format!("{n}-D perforation on a {}-D grid", grid.dim())));
    }
    let h = grid.spacing();
    let ext = grid.extents();
    for a in 0..n {
        let lo = grid.origin()[a];
        let hi = lo + ext[a] as f64 * h;
        if spec.omega_lo[a] < lo - 1e-12 || spec.omega_hi[a] > hi + 1e-12 {
            return Err(Error::Geometry("grid does not cover Ω".into()));
        }
    }
    let mut in_omega = vec![false; grid.len()];
    let mut material = vec![0.0; grid.len()];
    let cell_volume = grid.cell_volume();
    grid.for_each_node(|i, x| {
        if !spec.in_omega(x) {
            return;
        }
        in_omega[i] = true;
        if spec.hole == HoleShape::None {
            material[i] = 1.0;
            return;
        }
        let (lo, hi) = cell_box(grid, x);
        let cells = spec.cells_meeting(&lo, &hi);
        material[i] = match spec.quadrature {
            MaskQuadrature::NodeCenter => {
                let covered = cells.iter().any(|k| {
                    let img = spec.image(k);
                    spec.admits(&img) && img.contains(x)
                });
                if covered {
                    0.0
                } else {
                    1.0
                }
            }
            MaskQuadrature::CellFraction => {
                let covered: f64 = cells
                    .iter()
                    .map(|k| spec.image(k))
                    .filter(|img| spec.admits(img))
                    .map(|img| img.overlap(&lo, &hi))
                    .sum();
                let m = 1.0 - covered / cell_volume;
                if m < 1e-12 {
                    0.0
                } else {
                    m.min(1.0)
                }
            }
        };
    });
    let mut mask = DomainMask::from_material(grid, in_omega, material, spec.quadrature);
    if spec.hole != HoleShape::None && 2.0 * spec.hole_scale() < 2.0 * h {
        mask.warnings.push(format!(
            "hole diameter {:.3e} is below two grid spacings ({:.3e}); holes are under-resolved",
            2.0 * spec.hole_scale(),
            2.0 * h
        ));
    }
    Ok(mask)
}

/// Mask from predicates: `in_omega` at node centers, `in_material` either at
/// node centers or averaged over `SUPERSAMPLE^N` points of each cell.
pub fn build_predicate_mask(
    grid: &Grid,
    in_omega: impl Fn(&[f64]) -> bool,
    in_material: impl Fn(&[f64]) -> bool,
    quadrature: MaskQuadrature,
) -> DomainMask {
    let n = grid.dim();
    let h = grid.spacing();
    let mut inside = vec![false; grid.len()];
    let mut material = vec![0.0; grid.len()];
    let subs = SUPERSAMPLE.pow(n as u32);
    let mut p = vec![0.0; n];
    grid.for_each_node(|i, x| {
        if !in_omega(x) {
            return;
        }
        inside[i] = true;
        material[i] = match quadrature {
            MaskQuadrature::NodeCenter => f64::from(u8::from(in_material(x))),
            MaskQuadrature::CellFraction => {
                let mut hits = 0usize;
                for s in 0..subs {
                    let mut rem = s;
                    for a in 0..n {
                        let j = rem % SUPERSAMPLE;
                        rem /= SUPERSAMPLE;
                        p[a] = x[a] - 0.5 * h + (j as f64 + 0.5) * h / SUPERSAMPLE as f64;
                    }
                    hits += usize::from(in_material(&p));
                }
                hits as f64 / subs as f64
            }
        };
    });
    DomainMask::from_material(grid, inside, material, quadrature)
}

/// `Ω^ε = {(x, y) : 0 < x < 1, -1 < y < ½(1 + sin(x/ε))}` inside
/// `Ω = (0, 1) × (-1, 1)`.
pub fn build_oscillating_mask(epsilon: f64, grid: &Grid) -> Result<DomainMask> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if grid.dim() != 2 {
        return Err(Error::ShapeMismatch("the oscillating domain is two-dimensional".into()));
    }
    Ok(build_predicate_mask(
        grid,
        |x| x[0] > 0.0 && x[0] < 1.0 && x[1] > -1.0 && x[1] < 1.0,
        |x| x[1] < 0.5 * (1.0 + (x[0] / epsilon).sin()),
        MaskQuadrature::NodeCenter,
    ))
}

/// Annulus geometry: `Ω` the open ball of radius `outer`, `Ω^ε` the open
/// ball of radius `inner`, the annulus between them a hole.
pub fn build_annulus_mask(grid: &Grid, inner: f64, outer: f64) -> Result<DomainMask> {
    if !(inner > 0.0 && outer > inner) {
        return Err(Error::Geometry("annulus radii must satisfy 0 < inner < outer".into()));
    }
    let r2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    Ok(build_predicate_mask(
        grid,
        |x| r2(x) < outer * outer,
        |x| r2(x) < inner * inner,
        MaskQuadrature::NodeCenter,
    ))
}

/// Closed-form weak limit of the oscillating indicators at height `y`.
pub fn oscillating_chi(y: f64) -> f64 {
    use std::f64::consts::PI;
    if y <= 0.0 {
        1.0
    } else if y >= 1.0 {
        0.0
    } else {
        (PI - 2.0 * (2.0 * y - 1.0).asin()) / (2.0 * PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitRegime {
    Full,
    Fraction,
    Vanishing,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakLimit {
    pub field: CoefficientField,
    pub regime: LimitRegime,
    /// The constant value on `Ω` when the limit is spatially constant.
    pub constant: Option<f64>,
}

/// Geometry families with a known weak-star limit.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitFamily<'a> {
    Periodic(&'a PerforationSpec),
    Oscillating,
}

pub fn analytic_weak_limit(family: LimitFamily<'_>, mask: &DomainMask) -> Result<WeakLimit> {
    let grid = mask.grid();
    let (regime, constant) = match family {
        LimitFamily::Periodic(spec) => {
            spec.validate()?;
            if spec.hole == HoleShape::None || spec.gamma > 1.0 {
                (LimitRegime::Full, Some(1.0))
            } else if spec.gamma < 1.0 {
                (LimitRegime::Vanishing, Some(0.0))
            } else {
                (LimitRegime::Fraction, Some(1.0 - spec.hole_fraction()))
            }
        }
        LimitFamily::Oscillating => {
            if grid.dim() != 2 {
                return Err(Error::UnsupportedGeometry("oscillating limit needs a 2-D grid".into()));
            }
            (LimitRegime::Custom, None)
        }
    };
    let mut values = vec![0.0; grid.len()];
    grid.for_each_node(|i, x| {
        if mask.in_omega(i) {
            values[i] = constant.unwrap_or_else(|| oscillating_chi(x[1]));
        }
    });
    let field = CoefficientField::new(ScalarField::from_values(grid, values)?, CoefficientRole::Chi)?;
    Ok(WeakLimit {
        field,
        regime,
        constant,
    })
}

/// `|⟨χ_ε − 𝒳, φ_k⟩|` for each test field.
pub fn weak_pairing_error(mask: &DomainMask, limit: &WeakLimit, tests: &[ScalarField]) -> Result<Vec<f64>> {
    let diff = mask.chi_eps().sub(limit.field.field())?;
    tests
        .iter()
        .map(|phi| crate::grid::inner_product(&diff, phi).map(f64::abs))
        .collect()
}
