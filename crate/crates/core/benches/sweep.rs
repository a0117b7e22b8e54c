use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mechrecon::gaussian::{make_two_mode_squeezed_thermal, GaussianState};
use mechrecon::network::{williamson_diagonalize, NetworkSpec, NormalModeBasis};
use mechrecon::protocol::{fidelity_sweep, standard_pair_configs, standard_single_mode_configs, DesignPolicy, Protocol};
use mechrecon::Execution;

fn bench_sweeps(c: &mut Criterion) {
    let single = NormalModeBasis::single_mode(1.0);
    let single_protocol =
        Protocol::design(&single, &standard_single_mode_configs(1.0), &[5.0], 2, &DesignPolicy::default(), Execution::Sequential)
            .unwrap();
    let pair = williamson_diagonalize(&NetworkSpec::symmetric_pair(2.0, 0.7, 0.7).unwrap()).unwrap();
    let pair_protocol = Protocol::design(
        &pair,
        &standard_pair_configs(pair.nu_min()),
        &[5.0, 5.0],
        2,
        &DesignPolicy::default(),
        Execution::Sequential,
    )
    .unwrap();
    let cases = [
        ("single_mode", &single_protocol, GaussianState::thermal(1, 1.0)),
        ("two_mode", &pair_protocol, make_two_mode_squeezed_thermal(1.5, 0.2).unwrap()),
    ];

    let mut group = c.benchmark_group("fidelity_sweep");
    group.sample_size(10);
    for (name, protocol, truth) in &cases {
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(*name, format!("{exec:?}")), &exec, |b, &exec| {
                b.iter(|| fidelity_sweep(protocol, truth, &[0.0, 0.4], &[1000], 64, 7, exec))
            });
        }
    }
    group.finish();

    let mut group = c.benchmark_group("design");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| {
                Protocol::design(&pair, &standard_pair_configs(pair.nu_min()), &[1.0, 1.0], 2, &DesignPolicy::default(), exec)
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweeps);
criterion_main!(benches);
