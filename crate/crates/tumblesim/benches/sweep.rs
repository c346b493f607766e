//! Compares sequential and thread-pool execution of a reduced
//! manufacturing-error sweep.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use tumblesim::config::{ExecMode, RunConfig};
use tumblesim::scenarios::{error_sweep, SweepSpec};

fn reduced_grid() -> Vec<SweepSpec> {
    let mut specs = Vec::new();
    for d in [0.0, 5.0, 10.0] {
        specs.push(SweepSpec { theta1_deg: 0.0, theta2_deg: 0.0, draft_deg: d });
        for i in 0..4 {
            specs.push(SweepSpec {
                theta1_deg: 10.0,
                theta2_deg: 90.0 * i as f64,
                draft_deg: d,
            });
        }
    }
    specs
}

fn bench_sweep(c: &mut Criterion) {
    let mut cfg = RunConfig::from_preset("pdms-half").expect("preset");
    // Shorter cells than the real sweep to keep bench time reasonable.
    cfg.stepping.steps_per_cycle = 200;
    let specs = reduced_grid();

    let mut group = c.benchmark_group("error_sweep");
    group.sample_size(10);
    for mode in [ExecMode::Sequential, ExecMode::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{mode:?}")),
            &mode,
            |b, mode| {
                b.iter(|| error_sweep(&cfg, &specs, *mode).expect("sweep"));
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
