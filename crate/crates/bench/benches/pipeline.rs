use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use sqz_bench::{pair_source, ring, sideband_grid, spectrum_samples, traces};
use sqz_core::estimation::{fit_spectrum, SpectrumModel};
use sqz_core::photon_stats::{count_statistics, sample_counts, StatsOptions};
use sqz_core::ring_model::squeezing_spectrum;
use sqz_core::tes::{analyze_traces, principal_component, project_scores};
use sqz_core::FitConfig;

fn spectrum(c: &mut Criterion) {
    let (params, drive) = ring();
    let grid = sideband_grid(500);
    c.bench_function("squeezing_spectrum/500", |b| {
        b.iter(|| squeezing_spectrum(black_box(&params), &drive, &grid).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let spec = pair_source();
    let mut group = c.benchmark_group("counts");
    for pulses in [100_000usize, 800_000] {
        group.throughput(Throughput::Elements(pulses as u64));
        group.bench_with_input(BenchmarkId::new("sample", pulses), &pulses, |b, &n| {
            b.iter(|| sample_counts(&spec, n, black_box(1)).unwrap())
        });
    }
    let counts = sample_counts(&spec, 800_000, 1).unwrap();
    group.bench_function("statistics/800000", |b| {
        b.iter(|| count_statistics(black_box(&counts), &StatsOptions::default()).unwrap())
    });
    group.finish();
}

fn tes(c: &mut Criterion) {
    let set = traces(100_000, 3);
    let mut group = c.benchmark_group("tes");
    group.sample_size(10);
    group.throughput(Throughput::Elements(set.num_pulses() as u64));
    group.bench_function("pca+projection/100000", |b| {
        b.iter(|| {
            let pc = principal_component(black_box(&set)).unwrap();
            project_scores(&set, &pc).unwrap()
        })
    });
    group.bench_function("full_analysis/100000", |b| {
        b.iter(|| analyze_traces(black_box(&set), 16, &FitConfig::default()).unwrap())
    });
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let samples = spectrum_samples(50, 7);
    let config = FitConfig::default();
    let mut group = c.benchmark_group("fit_spectrum");
    for model in [SpectrumModel::LockedShifted, SpectrumModel::FreeDetuning] {
        group.bench_function(model.name(), |b| {
            b.iter(|| fit_spectrum(black_box(&samples), model, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, spectrum, sampling, tes, fitting);
criterion_main!(benches);
