use criterion::{black_box, criterion_group, criterion_main, Criterion};
use refldiff_core::euclidean::{ou_density_reflected, OuLaw};
use refldiff_core::hyperbolic::{hyp_density_reflected, u2, u3, u5};
use refldiff_core::specfun::{bessel_i_scaled, bessel_k_scaled, upper_incomplete_gamma};

fn specfun(c: &mut Criterion) {
    c.bench_function("bessel_i_scaled(1.5, 3)", |b| b.iter(|| bessel_i_scaled(black_box(1.5), black_box(3.0))));
    c.bench_function("bessel_k_scaled(0.5, 30)", |b| b.iter(|| bessel_k_scaled(black_box(0.5), black_box(30.0))));
    c.bench_function("upper_incomplete_gamma(2.5, 4)", |b| {
        b.iter(|| upper_incomplete_gamma(black_box(2.5), black_box(4.0)))
    });
}

fn kernels(c: &mut Criterion) {
    let law = OuLaw::new(3, 1.0, 1.0).unwrap();
    c.bench_function("ou_density_reflected d=3", |b| {
        b.iter(|| ou_density_reflected(&law, black_box(0.6), black_box(1.0)))
    });
    c.bench_function("u2 (quadrature)", |b| b.iter(|| u2(black_box(1.0), black_box(1.0))));
    c.bench_function("u3 (closed form)", |b| b.iter(|| u3(black_box(1.0), black_box(1.0))));
    c.bench_function("u5 (closed form)", |b| b.iter(|| u5(black_box(1.0), black_box(1.0))));
    c.bench_function("hyp_density_reflected d=2", |b| {
        b.iter(|| hyp_density_reflected(2, black_box(1.5), black_box(1.0), 2.0))
    });
}

criterion_group!(benches, specfun, kernels);
criterion_main!(benches);
