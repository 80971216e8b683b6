//! Fixtures shared by the benchmarks.

use perfhom::geometry::build_periodic_mask;
use perfhom::kernel::{rescale, sample, DiscreteMass, KernelSpec, Profile, RescaleMode};
use perfhom::{Alignment, DomainMask, Grid, PerforationSpec, SampledKernel};

/// Periodic balls (`C₀ = 1/4`, `ε = 1/4`) in the unit square at spacing
/// `h`, with a bump kernel of the given radius.
pub fn perforated_square(h: f64, radius: f64) -> (DomainMask, SampledKernel) {
    let grid = Grid::covering(&[0.0, 0.0], &[1.0, 1.0], radius, h, Alignment::CellCentered).expect("grid");
    let spec = PerforationSpec::periodic_balls(&[0.0, 0.0], &[1.0, 1.0], 0.25, 0.25, 1.0);
    let mask = build_periodic_mask(&spec, &grid).expect("mask");
    let kernel = rescale(&KernelSpec::new(2, Profile::Bump).expect("kernel"), radius, RescaleMode::Mass1)
        .and_then(|k| sample(&k, h, DiscreteMass::Renormalized))
        .expect("sampled kernel");
    (mask, kernel)
}
