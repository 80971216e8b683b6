use nalgebra::DMatrix;
use proptest::prelude::*;

use perfhom::experiments::case_study_domain;
use perfhom::geometry::build_periodic_mask;
use perfhom::homogenize::{gamma_field, interior_mass_field, lambda_field, solve_limit, LimitProblem};
use perfhom::kernel::{rescale, sample, DiscreteMass, KernelSpec, Profile, RescaleMode};
use perfhom::linalg::EigenOptions;
use perfhom::localref::{homogenized_coefficients, CellGeometry};
use perfhom::nonlocal::{covering_lower_bound, CoveringCertificate, CoveringLayer, SolveOptions};
use perfhom::{
    inner_product, l2_norm, Alignment, BoundaryCondition, CoefficientField, CoefficientRole, DomainMask, Grid,
    HoleShape, Label, NonlocalOperator, PerforationSpec, SampledKernel, ScalarField,
};

fn profile() -> impl Strategy<Value = Profile> {
    prop_oneof![Just(Profile::Indicator), Just(Profile::Tent), Just(Profile::Bump)]
}

fn bc() -> impl Strategy<Value = BoundaryCondition> {
    prop_oneof![Just(BoundaryCondition::DirichletHoles), Just(BoundaryCondition::NeumannHoles)]
}

fn kernel(dim: usize, p: Profile, radius: f64, h: f64) -> SampledKernel {
    let spec = rescale(&KernelSpec::new(dim, p).unwrap(), radius, RescaleMode::Mass1).unwrap();
    sample(&spec, h, DiscreteMass::Renormalized).unwrap()
}

/// 1-D mask with `pad` exterior nodes per side and random interior labels;
/// at least one unknown.
fn line_mask(interior: &[bool], pad: usize) -> DomainMask {
    let n = interior.len() + 2 * pad;
    let g = Grid::new(vec![0.0], 0.25, vec![n]).unwrap();
    let mut labels = vec![Label::Exterior; n];
    for (k, &hole) in interior.iter().enumerate() {
        labels[pad + k] = if hole { Label::Hole } else { Label::OmegaEps };
    }
    if !labels.contains(&Label::OmegaEps) {
        labels[pad] = Label::OmegaEps;
    }
    DomainMask::from_labels(&g, labels).unwrap()
}

fn field_on(op: &NonlocalOperator, values: &[f64]) -> ScalarField {
    let compact: Vec<f64> = values.iter().cycle().take(op.unknown_count()).cloned().collect();
    ScalarField::from_values(op.grid(), op.scatter(&compact)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn renormalized_mass_is_one(dim in 1usize..=3, p in profile(), ratio in 2.5f64..9.0) {
        let spec = KernelSpec::new(dim, p).unwrap();
        let k = sample(&spec, 1.0 / ratio, DiscreteMass::Renormalized).unwrap();
        prop_assert!((k.discrete_mass() - 1.0).abs() <= 1e-12);
        prop_assert!(k.weights().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn operator_is_symmetric_and_negative(
        interior in prop::collection::vec(prop::bool::weighted(0.3), 6..16),
        u in prop::collection::vec(-1.0f64..1.0, 16),
        v in prop::collection::vec(-1.0f64..1.0, 16),
        p in profile(),
        bc in bc(),
    ) {
        let mask = line_mask(&interior, 4);
        let op = NonlocalOperator::new(&mask, &kernel(1, p, 1.0, 0.25), bc).unwrap();
        let (u, v) = (field_on(&op, &u), field_on(&op, &v));
        let (lu, lv) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
        let a = inner_product(&lu, &v).unwrap();
        let b = inner_product(&u, &lv).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-12));
        prop_assert!(inner_product(&lu, &u).unwrap() <= 1e-14);
    }

    #[test]
    fn energy_matches_double_sum(
        interior in prop::collection::vec(prop::bool::weighted(0.3), 6..14),
        u in prop::collection::vec(-1.0f64..1.0, 14),
        p in profile(),
        bc in bc(),
    ) {
        let mask = line_mask(&interior, 4);
        let k = kernel(1, p, 1.0, 0.25);
        let op = NonlocalOperator::new(&mask, &k, bc).unwrap();
        let u = field_on(&op, &u);
        let energy = -inner_product(&op.apply(&u).unwrap(), &u).unwrap();
        let h = 0.25;
        let n = mask.grid().len();
        let integrates = |z: usize| bc == BoundaryCondition::DirichletHoles || mask.label(z) != Label::Hole;
        let mut sum = 0.0;
        for x in (0..n).filter(|&x| integrates(x)) {
            for y in (0..n).filter(|&y| integrates(y)) {
                let d = u.values()[y] - u.values()[x];
                sum += k.weight(&[x as isize - y as isize]) * d * d;
            }
        }
        let expected = 0.5 * h * h * sum;
        prop_assert!((energy - expected).abs() <= 1e-10 * expected.max(1e-12));
    }

    #[test]
    fn solve_is_linear_and_bounded(
        interior in prop::collection::vec(prop::bool::weighted(0.2), 8..16),
        f in prop::collection::vec(-1.0f64..1.0, 16),
        alpha in -3.0f64..3.0,
    ) {
        let mask = line_mask(&interior, 4);
        let op = NonlocalOperator::new(&mask, &kernel(1, Profile::Bump, 1.0, 0.25), BoundaryCondition::DirichletHoles).unwrap();
        let f = field_on(&op, &f);
        let opts = SolveOptions { tol: 1e-12, ..SolveOptions::default() };
        let u = op.solve(&f, &opts).unwrap().solution;
        let ua = op.solve(&f.scaled(alpha).unwrap(), &opts).unwrap().solution;
        prop_assert!(l2_norm(&ua.sub(&u.scaled(alpha).unwrap()).unwrap()) <= 1e-9 * l2_norm(&ua).max(1e-12));
        let lambda = op.first_eigenvalue(&EigenOptions::default()).unwrap().eigenvalue;
        prop_assert!(lambda > 0.0 && lambda < 1.0);
        prop_assert!(l2_norm(&u) <= l2_norm(&f) / lambda * (1.0 + 1e-6));
    }

    #[test]
    fn covering_bound_is_below_the_eigenvalue(
        c0 in 0.1f64..0.35,
        radius in prop::sample::select(vec![0.25, 0.375, 0.5]),
        bc in bc(),
    ) {
        let h = 1.0 / 16.0;
        let g = Grid::covering(&[0.0, 0.0], &[1.0, 1.0], radius, h, Alignment::CellCentered).unwrap();
        let spec = PerforationSpec::periodic_balls(&[0.0, 0.0], &[1.0, 1.0], c0, 0.5, 1.0);
        let mask = build_periodic_mask(&spec, &g).unwrap();
        let k = kernel(2, Profile::Bump, radius, h);
        let op = NonlocalOperator::new(&mask, &k, bc).unwrap();
        let lambda = op.first_eigenvalue(&EigenOptions::default()).unwrap().eigenvalue;
        let cert = covering_lower_bound(&mask, &k, radius / 2.0).unwrap();
        if let Some(lower) = cert.lambda_lower {
            prop_assert!(lower > 0.0 && lower <= lambda + 1e-6);
        }
    }

    #[test]
    fn chain_constants_follow_the_recursion(alphas in prop::collection::vec(0.01f64..0.25, 1..6)) {
        let layers = alphas
            .iter()
            .enumerate()
            .map(|(j, &alpha)| CoveringLayer { index: j + 1, outer_distance: (j + 1) as f64, nodes: 1, alpha })
            .collect();
        let cert = CoveringCertificate::from_alphas(1.0, layers, 0);
        let mut c = 0.0;
        let mut total = 0.0;
        for (j, &a) in alphas.iter().enumerate() {
            c = if j == 0 { 1.0 / a } else { (1.0 + c) / a };
            prop_assert!((cert.chain[j] - c).abs() <= 1e-12 * c);
            total += c;
        }
        prop_assert!((cert.lambda_lower.unwrap() - 1.0 / total).abs() <= 1e-12 / total);
    }

    #[test]
    fn gamma_and_lambda_identities(c in 0.05f64..1.0, radius in prop::sample::select(vec![0.125, 0.25])) {
        let h = 1.0 / 16.0;
        let g = Grid::covering(&[0.0, 0.0], &[1.0, 1.0], radius, h, Alignment::CellCentered).unwrap();
        let mut spec = PerforationSpec::periodic_balls(&[0.0, 0.0], &[1.0, 1.0], 0.25, 0.25, 1.0);
        spec.hole = HoleShape::None;
        let omega = build_periodic_mask(&spec, &g).unwrap();
        let k = kernel(2, Profile::Tent, radius, h);
        let gamma = gamma_field(&omega, &k).unwrap();
        let inner = interior_mass_field(&omega, &k).unwrap();
        let chi = CoefficientField::new(omega.chi_omega().scaled(c).unwrap(), CoefficientRole::Chi).unwrap();
        let lambda = lambda_field(&chi, &omega, &k).unwrap();
        for i in (0..g.len()).filter(|&i| omega.in_omega(i)) {
            let gm = gamma.values()[i];
            prop_assert!((0.0..=1.0).contains(&gm));
            prop_assert!((gm + inner.values()[i] - 1.0).abs() <= 1e-12);
            prop_assert!((lambda.values()[i] - (1.0 - c) * gm).abs() <= 1e-12);
        }
    }

    #[test]
    fn limit_solution_vanishes_where_chi_does(cut in 0.2f64..0.8, c in 0.1f64..1.0) {
        let h = 1.0 / 16.0;
        let g = Grid::covering(&[0.0, 0.0], &[1.0, 1.0], 0.25, h, Alignment::CellCentered).unwrap();
        let mut spec = PerforationSpec::periodic_balls(&[0.0, 0.0], &[1.0, 1.0], 0.25, 0.25, 1.0);
        spec.hole = HoleShape::None;
        let omega = build_periodic_mask(&spec, &g).unwrap();
        let k = kernel(2, Profile::Bump, 0.25, h);
        let values = ScalarField::from_fn(&g, |x| if x[0] < cut { c } else { 0.0 }).unwrap();
        let values = perfhom::restrict(&values, |i| omega.in_omega(i));
        let chi = CoefficientField::new(values, CoefficientRole::Chi).unwrap();
        let p = LimitProblem::dirichlet(&omega, &k, chi.clone());
        let f = perfhom::restrict(&ScalarField::constant(&g, 1.0).unwrap(), |i| omega.in_omega(i));
        let u = solve_limit(&p, &f, &SolveOptions::default()).unwrap().solution;
        for i in 0..g.len() {
            if chi.values()[i] < 1e-12 {
                prop_assert_eq!(u.values()[i], 0.0);
            }
        }
    }

    #[test]
    fn cell_tensor_is_symmetric_and_bounded(
        lo in (0.1f64..0.4, 0.1f64..0.4),
        size in (0.1f64..0.5, 0.1f64..0.5),
    ) {
        let hi = ((lo.0 + size.0).min(0.9), (lo.1 + size.1).min(0.9));
        let cell = CellGeometry {
            cell_lengths: vec![1.0, 1.0],
            hole: HoleShape::Box { lo: vec![lo.0, lo.1], hi: vec![hi.0, hi.1] },
        };
        let sol = homogenized_coefficients(&cell, 1.0 / 32.0, 1e-11).unwrap();
        let q = DMatrix::from_fn(2, 2, |i, j| sol.q[i][j]);
        prop_assert!((q[(0, 1)] - q[(1, 0)]).abs() <= 1e-9);
        for i in 0..2 {
            prop_assert!(q[(i, i)] > 0.0 && q[(i, i)] <= sol.material_fraction + 1e-12);
        }
        for x in &sol.correctors {
            let n = sol.material.iter().filter(|&&m| m).count() as f64;
            prop_assert!((x.values().iter().sum::<f64>() / n).abs() <= 1e-12);
        }
    }

    #[test]
    fn mask_text_round_trips(dim in 1usize..=3, nodes in 4usize..9) {
        let omega = case_study_domain(dim, 1.0, nodes).unwrap();
        let back = DomainMask::from_text(&omega.to_text()).unwrap();
        prop_assert_eq!(back.labels(), omega.labels());
        prop_assert_eq!(back.grid(), omega.grid());
    }
}
