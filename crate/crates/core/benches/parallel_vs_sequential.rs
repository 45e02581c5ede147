use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dicke_core::app::config::{DiagnosticSet, Grid, RunConfig};
use dicke_core::app::{run_sweep, SweepOptions};
use dicke_core::diagnostics::goe_bulk_ratios;
use dicke_core::exec::Execution;
use dicke_core::model::{ModelParams, Parity, Spin};
use dicke_core::otoc::{otoc_f, shifted_number, thermal_ensemble};
use dicke_core::spectra::sector_spectrum;

fn modes() -> Vec<(&'static str, Execution)> {
    let mut modes = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    modes.push(("parallel", Execution::Parallel));
    modes
}

fn sweep(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        j: Spin::from_twice(4).unwrap(),
        window: (20, 120),
        grid: "0.1:0.9:4".parse::<Grid>().unwrap(),
        diagnostics: DiagnosticSet { r: true, otoc: false, order: true },
        out: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let mut group = c.benchmark_group("sweep_4x4_j2");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_sweep(&cfg, &SweepOptions { exec, ..SweepOptions::default() }).unwrap())
        });
    }
    group.finish();
}

fn otoc_times(c: &mut Criterion) {
    let params = ModelParams::resonant(0.5, 0.5, 2.0).unwrap().with_n_max(60);
    let spec = sector_spectrum(&params, Some(Parity::Positive), true).unwrap();
    let ensemble = thermal_ensemble(&spec, 0.5).unwrap();
    let v = shifted_number(&spec.basis, 100.0);
    let times: Vec<f64> = (0..16).map(|i| 5.0 * i as f64).collect();
    let mut group = c.benchmark_group("otoc_16_times");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| otoc_f(&spec, &ensemble, &v, &v, &times, exec).unwrap())
        });
    }
    group.finish();
}

fn goe_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("goe_32x200");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| goe_bulk_ratios(200, 32, 1, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, otoc_times, goe_batch);
criterion_main!(benches);
