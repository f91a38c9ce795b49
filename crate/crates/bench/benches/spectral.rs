use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use specsbm::sbm::{sample_sbm, SbmParams};
use specsbm::{compute_moments, fit_parametric, spectrum, FitOptions, GraphSeed, LawFamily};
use specsbm_bench::two_block_corpus;

fn spectra(c: &mut Criterion) {
    let mut group = c.benchmark_group("spectrum");
    group.sample_size(10);
    for n in [200, 1000, 3000] {
        let g = &two_block_corpus(n, 1, 1)[0];
        group.bench_with_input(BenchmarkId::new("top2", n), g, |b, g| b.iter(|| spectrum(black_box(g), 2).unwrap()));
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample_sbm");
    for n in [1000, 5000] {
        let omega = 10.0 / (n as f64).sqrt();
        let params = SbmParams::new(omega, vec![0.5, 0.5], vec![0.85, 0.575], 0.03).unwrap();
        let mut k = 0;
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| {
                k += 1;
                sample_sbm(&params, n, GraphSeed::new(5, k)).unwrap()
            })
        });
    }
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let corpus = two_block_corpus(1000, 50, 2);
    let moments = compute_moments(&corpus, 2).unwrap();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("moments_n1000_x50", |b| b.iter(|| compute_moments(black_box(&corpus), 2).unwrap()));
    group.bench_function("dirac_parametric", |b| {
        b.iter(|| fit_parametric(black_box(&moments), LawFamily::Dirac, None, FitOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, spectra, sampling, fitting);
criterion_main!(benches);
