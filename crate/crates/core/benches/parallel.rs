use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use enaqt::analysis::{linear_grid, sweep_wavelength};
use enaqt::decoherence::{ensemble_average, Spectrum};
use enaqt::lattice::design_network;
use enaqt::propagate::AmplitudeState;
use enaqt::Execution;

fn strategies() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::default())]
}

fn wavelength_sweep(c: &mut Criterion) {
    let net = design_network();
    let grid = linear_grid(745.0, 835.0, 1.0).unwrap();
    let mut group = c.benchmark_group("sweep_wavelength");
    group.sample_size(10);
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| sweep_wavelength(&net, &grid, 15.0, exec).unwrap())
        });
    }
    group.finish();
}

fn ensemble(c: &mut Criterion) {
    let net = design_network();
    let spectrum = Spectrum::tophat(792.5, 95.0).unwrap();
    let psi0 = AmplitudeState::basis(net.dimension(), net.input_site);
    let mut group = c.benchmark_group("ensemble_average_41");
    group.sample_size(10);
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| ensemble_average(&net, &spectrum, &psi0, 15.0, 41, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, wavelength_sweep, ensemble);
criterion_main!(benches);
