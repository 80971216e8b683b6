//! Radially symmetric, compactly supported convolution kernels.
//!
//! A kernel is `J(z) = a · c_N · s^{-N} · φ(|z| / s)` where `φ` is one of the
//! built-in radial profiles on the unit ball, `c_N` normalizes `φ` to unit
//! mass in dimension `N`, `s` is the support radius and `a` the total mass.
//! Rescaling by `δ` shrinks `s` and, in second-moment mode, multiplies `a`
//! by `C / δ²` so that the operator approximates the Laplacian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radial profile on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Constant on the closed unit ball. Discontinuous at the support edge.
    Indicator,
    /// `1 - |z|`.
    Tent,
    /// Wendland-type C² bump `(1 - |z|)^4 (4|z| + 1)`.
    Bump,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Indicator, Profile::Tent, Profile::Bump];

    fn radial(self, r: f64) -> f64 {
        if r > 1.0 + 1e-12 {
            return 0.0;
        }
        let r = r.min(1.0);
        match self {
            Profile::Indicator => 1.0,
            Profile::Tent => 1.0 - r,
            Profile::Bump => (1.0 - r).powi(4) * (4.0 * r + 1.0),
        }
    }

    /// `∫_0^1 r^k φ(r) dr`.
    fn radial_moment(self, k: u32) -> f64 {
        let k = k as f64;
        // B(a, 5) = 4! / (a (a+1) (a+2) (a+3) (a+4))
        let beta5 = |a: f64| 24.0 / (a * (a + 1.0) * (a + 2.0) * (a + 3.0) * (a + 4.0));
        match self {
            Profile::Indicator => 1.0 / (k + 1.0),
            Profile::Tent => 1.0 / ((k + 1.0) * (k + 2.0)),
            Profile::Bump => 4.0 * beta5(k + 2.0) + beta5(k + 1.0),
        }
    }

    pub fn is_continuous(self) -> bool {
        !matches!(self, Profile::Indicator)
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Indicator => "indicator",
            Profile::Tent => "tent",
            Profile::Bump => "bump",
        }
    }
}

/// Surface area of the unit sphere in ℝ^N.
pub fn unit_sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        n => 2.0 * PI * unit_sphere_area(n - 2) / (n - 2) as f64,
    }
}

/// Volume of the unit ball in ℝ^N.
pub fn unit_ball_volume(dim: usize) -> f64 {
    unit_sphere_area(dim) / dim as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RescaleMode {
    /// `δ^{-N} J(z/δ)`: unit mass is preserved.
    Mass1,
    /// `C δ^{-N-2} J(z/δ)`: second moment `∫ J_δ z₁² = 2` for every δ.
    SecondMoment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    dim: usize,
    profile: Profile,
    amplitude: f64,
    support: f64,
    delta: f64,
    mode: Option<RescaleMode>,
}

impl KernelSpec {
    /// Unit-mass kernel supported in the unit ball.
    pub fn new(dim: usize, profile: Profile) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "kernel dimension must be at least 1"));
        }
        Ok(Self {
            dim,
            profile,
            amplitude: 1.0,
            support: 1.0,
            delta: 1.0,
            mode: None,
        })
    }

    /// Multiply the kernel by `factor`. Only useful for building invalid
    /// kernels in validation tests.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.amplitude *= factor;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn support_radius(&self) -> f64 {
        self.support
    }

    /// Accumulated rescale factor (1 when never rescaled).
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mode(&self) -> Option<RescaleMode> {
        self.mode
    }

    /// `∫ J` from the closed form.
    pub fn analytic_mass(&self) -> f64 {
        self.amplitude
    }

    fn normalization(&self) -> f64 {
        1.0 / (unit_sphere_area(self.dim) * self.profile.radial_moment(self.dim as u32 - 1))
    }

    /// Kernel value at radius `r`.
    pub fn eval_radius(&self, r: f64) -> f64 {
        let s = self.support;
        self.amplitude * self.normalization() * s.powi(-(self.dim as i32)) * self.profile.radial(r / s)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.eval_radius(z.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// `∫ J(z) z₁² dz` from the closed form.
    pub fn second_moment(&self) -> f64 {
        let n = self.dim as u32;
        let base = self.profile.radial_moment(n + 1) / (self.dim as f64 * self.profile.radial_moment(n - 1));
        self.amplitude * self.support * self.support * base
    }
}

/// `C = (½ ∫ J(z) z₁² dz)^{-1}`.
pub fn second_moment_constant(k: &KernelSpec) -> f64 {
    2.0 / k.second_moment()
}

pub fn rescale(k: &KernelSpec, delta: f64, mode: RescaleMode) -> Result<KernelSpec> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1], got {delta}")));
    }
    let mut out = k.clone();
    out.support *= delta;
    out.delta *= delta;
    if mode == RescaleMode::SecondMoment {
        out.amplitude *= second_moment_constant(k) / (delta * delta);
    }
    out.mode = Some(match (k.mode, mode) {
        (Some(RescaleMode::SecondMoment), _) | (_, RescaleMode::SecondMoment) => RescaleMode::SecondMoment,
        _ => RescaleMode::Mass1,
    });
    Ok(out)
}

// 8-point Gauss–Legendre rule on [-1, 1].
const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_26),
];

/// Composite Gauss–Legendre quadrature of `f` on `[a, b]`.
pub(crate) fn gauss_legendre(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * w;
        total += GL8.iter().map(|&(x, wt)| wt * f(mid + 0.5 * w * x)).sum::<f64>() * 0.5 * w;
    }
    total
}

/// Radial quadrature of `∫ J(z) |z|^p dz`, evaluating `J` along the first axis.
fn radial_quadrature(k: &KernelSpec, power: i32) -> f64 {
    let n = k.dim;
    let integral = gauss_legendre(0.0, k.support_radius(), 256, |r| {
        let mut z = vec![0.0; n];
        z[0] = r;
        r.powi(n as i32 - 1 + power) * k.eval(&z)
    });
    unit_sphere_area(n) * integral
}

/// `∫ J z₁²` by quadrature, independent of the closed-form moments.
pub fn second_moment_by_quadrature(k: &KernelSpec) -> f64 {
    radial_quadrature(k, 2) / k.dim as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelReport {
    pub checks: Vec<PropertyCheck>,
    /// Informational: the continuity part of the kernel hypothesis.
    pub continuous: bool,
    pub mass_estimate: f64,
}

impl KernelReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::KernelValidation { failed })
        }
    }
}

/// Check nonnegativity, symmetry, unit mass and `J(0) > 0` numerically.
pub fn validate_kernel(k: &KernelSpec) -> KernelReport {
    use rand::{Rng, SeedableRng};
    let n = k.dim;
    let r = k.support_radius();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x4b45_524e);
    let samples: Vec<Vec<f64>> = (0..512)
        .map(|_| (0..n).map(|_| rng.random_range(-1.2 * r..1.2 * r)).collect())
        .collect();

    let min_value = samples.iter().map(|z| k.eval(z)).fold(f64::INFINITY, f64::min);
    let mut asym = 0.0f64;
    for z in &samples {
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        let mut rot = z.clone();
        rot.rotate_left(1);
        let v = k.eval(z);
        asym = asym.max((v - k.eval(&neg)).abs()).max((v - k.eval(&rot)).abs());
    }
    let mass = radial_quadrature(k, 0);
    let mass_err = (mass - 1.0).abs();
    let at_origin = k.eval(&vec![0.0; n]);

    let checks = vec![
        PropertyCheck {
            name: "nonnegative",
            passed: min_value >= 0.0,
            detail: format!("min sampled value {min_value:.3e}"),
        },
        PropertyCheck {
            name: "symmetric",
            passed: asym <= 1e-14 * at_origin.abs().max(1.0),
            detail: format!("max asymmetry {asym:.3e}"),
        },
        PropertyCheck {
            name: "unit-mass",
            passed: mass_err < 1e-8,
            detail: format!("quadrature mass {mass:.12}"),
        },
        PropertyCheck {
            name: "positive-at-origin",
            passed: at_origin > 0.0,
            detail: format!("J(0) = {at_origin:.6e}"),
        },
    ];
    KernelReport {
        checks,
        continuous: k.profile.is_continuous(),
        mass_estimate: mass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscreteMass {
    /// Plain midpoint samples.
    Raw,
    /// Samples scaled so `Σ w h^N` equals the analytic mass exactly.
    Renormalized,
}

/// Kernel samples on the offsets `j h`, `j ∈ ℤ^N`, inside the support.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledKernel {
    dim: usize,
    spacing: f64,
    half_width: usize,
    weights: Vec<f64>,
    mode: DiscreteMass,
    support: f64,
}

/// Sample `k` on a lattice of spacing `h`. Offsets outside the closed
/// support get weight zero; the value depends only on the integer `|j|²`, so
/// the stencil is exactly symmetric under any signed axis permutation.
pub fn sample(k: &KernelSpec, h: f64, mode: DiscreteMass) -> Result<SampledKernel> {
    let radius = k.support_radius();
    if !(h > 0.0) || h >= radius {
        return Err(Error::KernelUnresolved { spacing: h, radius });
    }
    let dim = k.dim;
    let m = ((radius / h) * (1.0 + 1e-12)).floor() as usize;
    let side = 2 * m + 1;
    let len = side.pow(dim as u32);
    let max_r2 = (radius / h) * (radius / h) * (1.0 + 1e-12);

    // one evaluation per distinct |j|²
    let mut by_r2 = vec![f64::NAN; dim * m * m + 1];
    let mut weights = vec![0.0; len];
    let mut multi = vec![0usize; dim];
    for (flat, w) in weights.iter_mut().enumerate() {
        let mut rem = flat;
        for a in (0..dim).rev() {
            multi[a] = rem % side;
            rem /= side;
        }
        let r2: usize = multi.iter().map(|&i| (i as isize - m as isize).pow(2) as usize).sum();
        if (r2 as f64) > max_r2 {
            continue;
        }
        if by_r2[r2].is_nan() {
            let r = (r2 as f64).sqrt() * h;
            by_r2[r2] = k.eval_radius(r.min(radius));
        }
        *w = by_r2[r2];
    }
    if mode == DiscreteMass::Renormalized {
        let discrete: f64 = weights.iter().sum::<f64>() * h.powi(dim as i32);
        let scale = k.analytic_mass() / discrete;
        weights.iter_mut().for_each(|w| *w *= scale);
    }
    Ok(SampledKernel {
        dim,
        spacing: h,
        half_width: m,
        weights,
        mode,
        support: radius,
    })
}

impl SampledKernel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Largest offset index `m`; the stencil is `(2m+1)^N`.
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn support_radius(&self) -> f64 {
        self.support
    }

    pub fn mode(&self) -> DiscreteMass {
        self.mode
    }

    /// Dense stencil, row-major over offsets `-m..=m` per axis.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, offset: &[isize]) -> f64 {
        let m = self.half_width as isize;
        let side = 2 * m + 1;
        let mut flat = 0isize;
        for &o in offset {
            if o.abs() > m {
                return 0.0;
            }
            flat = flat * side + (o + m);
        }
        self.weights[flat as usize]
    }

    pub fn center_weight(&self) -> f64 {
        self.weights[self.weights.len() / 2]
    }

    /// `Σ w h^N`.
    pub fn discrete_mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.spacing.powi(self.dim as i32)
    }

    /// Nonzero stencil entries as `(offset, weight)`.
    pub fn entries(&self) -> Vec<(Vec<isize>, f64)> {
        let m = self.half_width as isize;
        let side = (2 * m + 1) as usize;
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(flat, &w)| {
                let mut rem = flat;
                let mut off = vec![0isize; self.dim];
                for a in (0..self.dim).rev() {
                    off[a] = (rem % side) as isize - m;
                    rem /= side;
                }
                (off, w)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
    }

    #[test]
    fn builtin_profiles_validate_in_every_dimension() {
        for dim in 1..=3 {
            for p in Profile::ALL {
                let k = KernelSpec::new(dim, p).unwrap();
                let report = validate_kernel(&k);
                assert!(report.passed(), "{p:?} in {dim}-D: {:?}", report.checks);
                assert_eq!(report.continuous, p != Profile::Indicator);
                for delta in [0.5, 0.1] {
                    let r = rescale(&k, delta, RescaleMode::Mass1).unwrap();
                    assert!(validate_kernel(&r).passed());
                }
            }
        }
    }

    #[test]
    fn disk_indicator_value() {
        let k = KernelSpec::new(2, Profile::Indicator).unwrap();
        assert!((k.eval(&[0.3, 0.2]) - 1.0 / PI).abs() < 1e-15);
        assert_eq!(k.eval(&[0.9, 0.9]), 0.0);
    }

    #[test]
    fn doubled_mass_fails_unit_mass() {
        let k = KernelSpec::new(2, Profile::Tent).unwrap().scaled(2.0);
        let report = validate_kernel(&k);
        assert!(!report.passed());
        let err = report.ensure_valid().unwrap_err();
        match err {
            Error::KernelValidation { failed } => {
                assert_eq!(failed.len(), 1);
                assert!(failed[0].starts_with("unit-mass"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_dimensional_tent_is_valid() {
        let k = KernelSpec::new(1, Profile::Tent).unwrap();
        assert!((k.eval(&[0.25]) - 0.75).abs() < 1e-15);
        assert!(validate_kernel(&k).passed());
    }

    #[test]
    fn second_moment_constants() {
        let disk = KernelSpec::new(2, Profile::Indicator).unwrap();
        assert!((second_moment_constant(&disk) - 8.0).abs() < 1e-12);
        let seg = KernelSpec::new(1, Profile::Indicator).unwrap();
        assert!((second_moment_constant(&seg) - 6.0).abs() < 1e-12);
        for dim in 1..=3 {
            for p in Profile::ALL {
                let k = KernelSpec::new(dim, p).unwrap();
                let closed = second_moment_constant(&k);
                let quad = 2.0 / second_moment_by_quadrature(&k);
                assert!(closed > 0.0);
                assert!(((closed - quad) / closed).abs() < 1e-8, "{p:?} {dim}: {closed} vs {quad}");
            }
        }
    }

    #[test]
    fn rescaling() {
        let k = KernelSpec::new(2, Profile::Bump).unwrap();
        assert_eq!(rescale(&k, 1.0, RescaleMode::Mass1).unwrap().eval(&[0.2, 0.1]), k.eval(&[0.2, 0.1]));
        assert!(rescale(&k, 0.0, RescaleMode::Mass1).is_err());
        assert!(rescale(&k, -0.5, RescaleMode::Mass1).is_err());
        for delta in [1.0, 0.5, 0.2, 0.05] {
            let m1 = rescale(&k, delta, RescaleMode::Mass1).unwrap();
            assert!((m1.support_radius() - delta).abs() < 1e-15);
            assert!((validate_kernel(&m1).mass_estimate - 1.0).abs() < 1e-10);
            let sm = rescale(&k, delta, RescaleMode::SecondMoment).unwrap();
            assert!((second_moment_by_quadrature(&sm) - 2.0).abs() < 1e-9);
            let ratio = sm.eval(&[0.3 * delta, 0.0]) / m1.eval(&[0.3 * delta, 0.0]);
            assert!((ratio - second_moment_constant(&k) / (delta * delta)).abs() < 1e-9 * ratio);
        }
        // composition in mass-1 mode
        let a = rescale(&rescale(&k, 0.5, RescaleMode::Mass1).unwrap(), 0.4, RescaleMode::Mass1).unwrap();
        let b = rescale(&k, 0.2, RescaleMode::Mass1).unwrap();
        for r in [0.0, 0.05, 0.1, 0.19] {
            assert!((a.eval_radius(r) - b.eval_radius(r)).abs() < 1e-12 * b.eval_radius(0.0));
        }
    }

    #[test]
    fn one_dimensional_indicator_stencil() {
        let k = KernelSpec::new(1, Profile::Indicator).unwrap();
        let s = sample(&k, 0.5, DiscreteMass::Renormalized).unwrap();
        assert_eq!(s.half_width(), 2);
        // offsets -1, -0.5, 0, 0.5, 1 all lie in the closed support
        assert_eq!(s.entries().len(), 5);
        assert!((s.discrete_mass() - 1.0).abs() < 1e-15);
        assert!((s.weight(&[1]) - 0.4).abs() < 1e-15);
        let raw = sample(&k, 0.5, DiscreteMass::Raw).unwrap();
        assert!((raw.weight(&[0]) - 0.5).abs() < 1e-15);
        assert!(matches!(sample(&k, 1.0, DiscreteMass::Raw), Err(Error::KernelUnresolved { .. })));
    }

    #[test]
    fn stencils_are_symmetric_and_inside_support() {
        for p in Profile::ALL {
            for h in [0.3, 0.13, 0.07] {
                let k = KernelSpec::new(2, p).unwrap();
                let s = sample(&k, h, DiscreteMass::Renormalized).unwrap();
                assert!((s.discrete_mass() - 1.0).abs() < 1e-12);
                for (off, w) in s.entries() {
                    let neg: Vec<isize> = off.iter().map(|o| -o).collect();
                    let swapped = vec![off[1], off[0]];
                    assert_eq!(s.weight(&neg), w);
                    assert_eq!(s.weight(&swapped), w);
                    let r = h * ((off[0] * off[0] + off[1] * off[1]) as f64).sqrt();
                    assert!(r <= s.support_radius() + h / 2.0);
                    assert!(w > 0.0 || p != Profile::Indicator);
                }
            }
        }
    }
}
