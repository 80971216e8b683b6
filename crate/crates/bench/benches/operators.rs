use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use perfhom::conv::ConvMethod;
use perfhom::linalg::EigenOptions;
use perfhom::localref::{homogenized_coefficients, CellGeometry};
use perfhom::nonlocal::SolveOptions;
use perfhom::{restrict, BoundaryCondition, NonlocalOperator, ScalarField};
use perfhom_bench::perforated_square;

fn apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply");
    for (label, method) in [("fft", ConvMethod::Fft), ("direct", ConvMethod::Direct)] {
        for h in [1.0 / 32.0, 1.0 / 64.0] {
            let (mask, kernel) = perforated_square(h, 0.25);
            let op = NonlocalOperator::with_method(&mask, &kernel, BoundaryCondition::DirichletHoles, method).unwrap();
            let x = vec![1.0; op.unknown_count()];
            let mut y = vec![0.0; op.unknown_count()];
            group.bench_with_input(BenchmarkId::new(label, 1.0 / h), &h, |b, _| {
                b.iter(|| op.apply_negative(&x, &mut y))
            });
        }
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let (mask, kernel) = perforated_square(1.0 / 64.0, 0.25);
    let op = NonlocalOperator::new(&mask, &kernel, BoundaryCondition::NeumannHoles).unwrap();
    let f = restrict(&ScalarField::constant(mask.grid(), 1.0).unwrap(), |i| mask.in_omega(i));
    let opts = SolveOptions::default();
    c.bench_function("solve/neumann/64", |b| b.iter(|| op.solve(&f, &opts).unwrap()));
    let eig = EigenOptions::default();
    c.bench_function("first_eigenvalue/neumann/64", |b| b.iter(|| op.first_eigenvalue(&eig).unwrap()));
}

fn cell(c: &mut Criterion) {
    let disk = CellGeometry::unit_disk(0.25);
    c.bench_function("cell_coefficients/disk/64", |b| {
        b.iter(|| homogenized_coefficients(&disk, 1.0 / 64.0, 1e-10).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = apply, solve, cell
}
criterion_main!(benches);
