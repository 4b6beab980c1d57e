use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fwf_core::baselines::{KlmsModel, KrlsModel};
use fwf_core::correntropy::KernelConfig;
use fwf_core::fwf::FwfModel;
use fwf_core::preimage::{fixed_point, FixedPointConfig, LocalModelConfig, LocalModelIndex};
use fwf_core::signal::{embed, MackeyGlass, SupervisedDataset};

const LAGS: usize = 7;
const SIZES: [usize; 3] = [500, 1000, 2000];

fn dataset(n: usize) -> SupervisedDataset {
    let series = MackeyGlass {
        n: n + LAGS,
        ..MackeyGlass::default()
    }
    .generate()
    .unwrap();
    embed(&series, LAGS, 1).unwrap()
}

fn kernel() -> KernelConfig {
    KernelConfig::new(1.5).unwrap()
}

fn fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit");
    for n in SIZES {
        let data = dataset(n);
        g.bench_with_input(BenchmarkId::new("fwf", n), &data, |b, d| {
            b.iter(|| FwfModel::fit(black_box(d), kernel(), 30.0).unwrap())
        });
        let model = FwfModel::fit(&data, kernel(), 30.0).unwrap();
        g.bench_with_input(BenchmarkId::new("fwf_index", n), &model, |b, m| {
            b.iter(|| LocalModelIndex::build(black_box(m)).unwrap())
        });
    }
    g.finish();
}

// Per-window prediction cost as the training set grows: flat for the
// pre-images, linear in the dictionary for the kernel adaptive filters.
fn predict(c: &mut Criterion) {
    let mut g = c.benchmark_group("predict");
    for n in SIZES {
        let data = dataset(n);
        let window = &data.inputs[n / 2];
        let model = FwfModel::fit(&data, kernel(), 30.0).unwrap();
        let index = LocalModelIndex::build(&model).unwrap();
        let lm = LocalModelConfig::with_k(1);
        let fp = FixedPointConfig::default();
        let klms = KlmsModel::train(&data, 0.1, 1.0).unwrap();
        let krls = KrlsModel::train(&data, 1e-3, 1.0, None).unwrap();

        g.bench_with_input(BenchmarkId::new("fwf_lm", n), window, |b, w| {
            b.iter(|| index.predict(&model, black_box(w), &lm).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("fwf_fp", n), window, |b, w| {
            b.iter(|| fixed_point(&model, black_box(w), &fp).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("klms", n), window, |b, w| {
            b.iter(|| klms.predict(black_box(w)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("krls", n), window, |b, w| {
            b.iter(|| krls.predict(black_box(w)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, fit, predict);
criterion_main!(benches);
