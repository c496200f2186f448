//! Rayon-parallel kernels vs their sequential reference paths.
//! Run with `cargo bench -p patchlens`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use patchlens::data_io::Image;
use patchlens::dynamics::{monte_carlo_bernoulli, monte_carlo_bernoulli_seq, LossScale};
use patchlens::patch::{
    build_avg_patch_matrix, build_avg_patch_matrix_seq, fit_pca, PcaPopulation,
};
use patchlens::profile::{energy_profile, energy_profile_seq, EnergyVariant, FilterBank};
use patchlens::Mat;

fn random_images(n: usize, seed: u64) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Image::new(3, 32, 32, (0..3072).map(|_| rng.gen_range(0.0..1.0)).collect()))
        .collect()
}

fn bench_avg_patch(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_avg_patch_matrix");
    for n in [64usize, 256] {
        let images = random_images(n, 1);
        group.bench_with_input(BenchmarkId::new("parallel", n), &images, |b, imgs| {
            b.iter(|| build_avg_patch_matrix(imgs, 3).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &images, |b, imgs| {
            b.iter(|| build_avg_patch_matrix_seq(imgs, 3).unwrap())
        });
    }
    group.finish();
}

fn bench_energy_profile(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = 147; // 3 channels, 7x7 kernels
    let rows = Mat::from_fn(1024, d, |_, _| rng.gen_range(-1.0..1.0));
    let basis = fit_pca(&rows, true, PcaPopulation::AllPatches).unwrap();
    let bank = FilterBank {
        f: Mat::from_fn(512, d, |_, _| rng.gen_range(-1.0..1.0)),
        c: 3,
        k: 7,
        sigma_init: None,
    };
    let mut group = c.benchmark_group("energy_profile");
    group.bench_function("parallel", |b| {
        b.iter(|| energy_profile(&bank, &basis, EnergyVariant::Rms).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| energy_profile_seq(&bank, &basis, EnergyVariant::Rms).unwrap())
    });
    group.finish();
}

fn bench_monte_carlo(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = Mat::from_fn(100, 27, |_, _| rng.gen_range(-0.5..0.5));
    let mut group = c.benchmark_group("monte_carlo_bernoulli");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| monte_carlo_bernoulli(&k, 0.05, 50, LossScale::OneOverN, 64, 7).unwrap())
    });
    group.bench_function("sequential", |b| {
        b.iter(|| monte_carlo_bernoulli_seq(&k, 0.05, 50, LossScale::OneOverN, 64, 7).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_avg_patch, bench_energy_profile, bench_monte_carlo);
criterion_main!(benches);
