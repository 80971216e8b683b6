//! Linear convolution of grid fields with a sampled kernel.
//!
//! Inputs are supported in an index window of the grid and outputs are
//! needed on the same window. The FFT path zero-pads the window by the
//! stencil half-width on each side, which makes the circular convolution
//! equal to the linear one on the window. The direct path sums the stencil.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::SampledKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMethod {
    Fft,
    Direct,
    /// Direct for small stencils, FFT otherwise.
    Auto,
}

/// Stencils with at most this many nonzero entries use the direct path
/// under [`ConvMethod::Auto`].
const DIRECT_MAX_ENTRIES: usize = 48;

/// Smallest integer `>= n` whose prime factors are 2, 3 and 5.
fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

struct FftPlan {
    sizes: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    kernel_hat: Vec<Complex<f64>>,
}

pub struct Convolver {
    grid: Grid,
    lo: Vec<usize>,
    hi: Vec<usize>,
    entries: Vec<(Vec<isize>, f64)>,
    scale: f64,
    plan: Option<FftPlan>,
}

impl std::fmt::Debug for Convolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Convolver")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("entries", &self.entries.len())
            .field("fft", &self.plan.as_ref().map(|p| p.sizes.clone()))
            .finish()
    }
}

impl Convolver {
    /// Convolver for inputs supported in the index window `[lo, hi)`.
    pub fn new(grid: &Grid, lo: &[usize], hi: &[usize], kernel: &SampledKernel, method: ConvMethod) -> Result<Self> {
        let n = grid.dim();
        if kernel.dim() != n || lo.len() != n || hi.len() != n {
            return Err(Error::ShapeMismatch("kernel, window and grid dimensions differ".into()));
        }
        if (kernel.spacing() - grid.spacing()).abs() > 1e-12 * grid.spacing() {
            return Err(Error::ShapeMismatch(format!(
                "kernel sampled at spacing {} on a grid of spacing {}",
                kernel.spacing(),
                grid.spacing()
            )));
        }
        if (0..n).any(|a| lo[a] >= hi[a] || hi[a] > grid.extents()[a]) {
            return Err(Error::ShapeMismatch("convolution window outside the grid".into()));
        }
        let entries = kernel.entries();
        let use_fft = match method {
            ConvMethod::Fft => true,
            ConvMethod::Direct => false,
            ConvMethod::Auto => entries.len() > DIRECT_MAX_ENTRIES,
        };
        let scale = grid.cell_volume();
        let plan = use_fft.then(|| Self::plan(lo, hi, kernel.half_width(), &entries, scale));
        Ok(Self {
            grid: grid.clone(),
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            entries,
            scale,
            plan,
        })
    }

    fn plan(lo: &[usize], hi: &[usize], m: usize, entries: &[(Vec<isize>, f64)], scale: f64) -> FftPlan {
        let n = lo.len();
        let sizes: Vec<usize> = (0..n).map(|a| fast_len(hi[a] - lo[a] + 2 * m)).collect();
        let mut planner = FftPlanner::new();
        let forward = sizes.iter().map(|&s| planner.plan_fft_forward(s)).collect();
        let inverse = sizes.iter().map(|&s| planner.plan_fft_inverse(s)).collect();
        let total: usize = sizes.iter().product();
        let mut kernel_hat = vec![Complex::new(0.0, 0.0); total];
        for (off, w) in entries {
            let mut flat = 0usize;
            for a in 0..n {
                let s = sizes[a] as isize;
                flat = flat * sizes[a] + off[a].rem_euclid(s) as usize;
            }
            kernel_hat[flat].re = w * scale;
        }
        let mut plan = FftPlan {
            sizes,
            forward,
            inverse,
            kernel_hat: Vec::new(),
        };
        transform(&mut kernel_hat, &plan.sizes, &plan.forward);
        let norm = 1.0 / total as f64;
        kernel_hat.iter_mut().for_each(|c| *c *= norm);
        plan.kernel_hat = kernel_hat;
        plan
    }

    pub fn uses_fft(&self) -> bool {
        self.plan.is_some()
    }

    pub fn window(&self) -> (&[usize], &[usize]) {
        (&self.lo, &self.hi)
    }

    /// `out(x) = h^N Σ_y J(x - y) input(y)` for `x` in the window; `out` is
    /// zero elsewhere. `input` must vanish outside the window.
    pub fn apply(&self, input: &[f64], out: &mut [f64]) {
        debug_assert_eq!(input.len(), self.grid.len());
        debug_assert_eq!(out.len(), self.grid.len());
        out.iter_mut().for_each(|v| *v = 0.0);
        match &self.plan {
            Some(plan) => self.apply_fft(plan, input, out),
            None => self.apply_direct(input, out),
        }
    }

    fn window_nodes(&self, mut f: impl FnMut(&[usize], usize)) {
        let n = self.lo.len();
        let mut k = self.lo.clone();
        loop {
            f(&k, self.grid.index(&k));
            let mut a = n;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                k[a] += 1;
                if k[a] < self.hi[a] {
                    break;
                }
                k[a] = self.lo[a];
            }
        }
    }

    fn apply_direct(&self, input: &[f64], out: &mut [f64]) {
        let ext = self.grid.extents();
        let n = ext.len();
        let mut y = vec![0usize; n];
        self.window_nodes(|x, flat| {
            let mut acc = 0.0;
            'stencil: for (off, w) in &self.entries {
                for a in 0..n {
                    let v = x[a] as isize - off[a];
                    if v < self.lo[a] as isize || v >= self.hi[a] as isize {
                        continue 'stencil;
                    }
                    y[a] = v as usize;
                }
                acc += w * input[self.grid.index(&y)];
            }
            out[flat] = acc * self.scale;
        });
    }

    fn apply_fft(&self, plan: &FftPlan, input: &[f64], out: &mut [f64]) {
        let n = self.lo.len();
        let total: usize = plan.sizes.iter().product();
        let mut buf = vec![Complex::new(0.0, 0.0); total];
        let pos = |x: &[usize]| -> usize {
            let mut flat = 0;
            for a in 0..n {
                flat = flat * plan.sizes[a] + (x[a] - self.lo[a]);
            }
            flat
        };
        self.window_nodes(|x, flat| buf[pos(x)].re = input[flat]);
        transform(&mut buf, &plan.sizes, &plan.forward);
        buf.iter_mut().zip(&plan.kernel_hat).for_each(|(b, k)| *b *= k);
        transform(&mut buf, &plan.sizes, &plan.inverse);
        self.window_nodes(|x, flat| out[flat] = buf[pos(x)].re);
    }
}

/// In-place N-dimensional transform, axis by axis.
fn transform(buf: &mut [Complex<f64>], sizes: &[usize], ffts: &[Arc<dyn Fft<f64>>]) {
    let n = sizes.len();
    let total = buf.len();
    let max_scratch = ffts.iter().map(|f| f.get_inplace_scratch_len()).max().unwrap_or(0);
    let mut scratch = vec![Complex::new(0.0, 0.0); max_scratch];
    for a in 0..n {
        let len = sizes[a];
        let stride: usize = sizes[a + 1..].iter().product();
        if stride == 1 {
            ffts[a].process_with_scratch(buf, &mut scratch);
            continue;
        }
        let mut line = vec![Complex::new(0.0, 0.0); len];
        let block = len * stride;
        for start in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = start + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = buf[base + j * stride];
                }
                ffts[a].process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    buf[base + j * stride] = *v;
                }
            }
        }
    }
}
