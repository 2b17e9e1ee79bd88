use affine_lab_bench::{case2_power_ode, family};
use affine_lab_core::affine::{point_residuals, structure_at, structure_residuals, AffineOptions};
use affine_lab_core::curves::sphere_curve_integrate;
use affine_lab_core::ode::OdeOptions;
use affine_lab_core::symmetry::{canonical_fields, FrameOptions};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn structure(c: &mut Criterion) {
    let opts = AffineOptions::default();
    let mut g = c.benchmark_group("structure_at");
    for n in [3, 4, 5] {
        let fam = family("case1_semiprojective", n);
        let p = fam.spec.sample_points(1, 0).remove(0);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| structure_at(&fam, black_box(p), &opts).unwrap())
        });
    }
    g.finish();
}

fn residuals(c: &mut Criterion) {
    let opts = AffineOptions::default();
    let fam = family("case2_power", 3);
    let p = fam.spec.sample_points(1, 0).remove(0);
    let s = structure_at(&fam, &p, &opts).unwrap();
    c.bench_function("point_residuals", |b| b.iter(|| point_residuals(black_box(&s)).unwrap()));
    let pts = fam.spec.sample_points(20, 0);
    c.bench_function("structure_residuals_20", |b| {
        b.iter(|| structure_residuals(&fam, black_box(&pts), &opts).unwrap())
    });
}

fn frame(c: &mut Criterion) {
    let fam = family("case1_semiprojective", 3);
    let p = fam.spec.sample_points(1, 0).remove(0);
    let s = structure_at(&fam, &p, &AffineOptions::default()).unwrap();
    let opts = FrameOptions::default();
    c.bench_function("canonical_fields", |b| b.iter(|| canonical_fields(black_box(&s), &opts).unwrap()));
}

fn sphere_ode(c: &mut Criterion) {
    let spec = case2_power_ode(3, 65);
    let opts = OdeOptions::default();
    c.bench_function("sphere_curve_integrate", |b| {
        b.iter(|| sphere_curve_integrate(black_box(&spec), &opts).unwrap())
    });
}

criterion_group!(benches, structure, residuals, frame, sphere_ode);
criterion_main!(benches);
