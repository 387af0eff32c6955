use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use solsurf_bench::{lambda, sine_gordon, square, KINK};
use solsurf_core::geometry::curvature;
use solsurf_core::spectral::IntegrationOptions;
use solsurf_core::{
    immersion_symtafel, integrate_wavefunction, to_mesh, zcc_residual_expr, zcc_symmetry_residual,
    ScalarExpr,
};

fn symbolic(c: &mut Criterion) {
    let m = sine_gordon();
    let r = m.characteristic("flow3").unwrap().r.clone();
    let family = m.family("kink").unwrap();
    let spec = square(2.0, 41);
    c.bench_function("zcc residual expression", |b| {
        b.iter(|| zcc_residual_expr(black_box(&m)).unwrap())
    });
    c.bench_function("zcc symmetry residual flow3 41x41", |b| {
        b.iter(|| zcc_symmetry_residual(&m, black_box(&r), family, &KINK, &spec).unwrap())
    });
}

fn numeric(c: &mut Criterion) {
    let m = sine_gordon();
    let family = m.family("kink").unwrap();
    let spec = square(2.0, 201);
    let opts = IntegrationOptions::default();
    let mut g = c.benchmark_group("grid 201x201");
    g.sample_size(10);
    g.bench_function("wavefunction", |b| {
        b.iter(|| integrate_wavefunction(&m, family, black_box(&KINK), lambda(), &spec).unwrap())
    });
    let f = immersion_symtafel(
        &m,
        family,
        &KINK,
        lambda(),
        &spec,
        &ScalarExpr::one(),
        None,
        &opts,
    )
    .unwrap();
    g.bench_function("sym-tafel immersion", |b| {
        b.iter(|| {
            immersion_symtafel(
                &m,
                family,
                black_box(&KINK),
                lambda(),
                &spec,
                &ScalarExpr::one(),
                None,
                &opts,
            )
            .unwrap()
        })
    });
    let mesh = to_mesh(&f);
    g.bench_function("curvature", |b| {
        b.iter(|| curvature(black_box(&mesh)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, symbolic, numeric);
criterion_main!(benches);
