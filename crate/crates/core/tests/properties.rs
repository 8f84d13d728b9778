//! Property tests for the model invariants.

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

use enaqt::analysis::{dark_state_diagnostics, enaqt_metric, linear_grid, sweep_wavelength};
use enaqt::calibration::{detuning_from_max_transfer, effective_trap_rate, pair_transfer, TrapRatio};
use enaqt::decoherence::{
    coherence_decay_pair, decoherence_strength, ensemble_average, tophat_decoherence_strength, Spectrum,
};
use enaqt::lattice::{
    build_hamiltonian, design_network, enaqt4_network, Coupling, DetuningLaw, DispersionModel, HamiltonianMatrix,
    NetworkSpec, SinkSpec, SiteDetuning,
};
use enaqt::propagate::{
    evolve_lindblad, evolve_trapped, evolve_unitary, AmplitudeState, DensityState, DephasingScope, LindbladModel,
};
use enaqt::{Execution, C64};

const LAMBDA0: f64 = 792.5;

fn config(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(0x00e1_a9e7), failure_persistence: None, ..Config::default() }
}

fn symmetric(n: usize, upper: &[f64]) -> HamiltonianMatrix {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = upper[k];
            m[(j, i)] = upper[k];
            k += 1;
        }
    }
    HamiltonianMatrix::from_matrix(m, LAMBDA0).unwrap()
}

fn chain4(c: [f64; 3], detunings: [f64; 4]) -> NetworkSpec {
    NetworkSpec {
        n_sites: 4,
        site_detunings: detunings.iter().enumerate().map(|(site, &detuning)| SiteDetuning { site, detuning }).collect(),
        couplings: (0..3).map(|k| Coupling { a: k, b: k + 1, strength: c[k] }).collect(),
        dispersion: DispersionModel::new(LAMBDA0),
        sink: None,
        input_site: 0,
        target_site: 2,
    }
}

fn uncoupled_pair(delta_beta: f64) -> NetworkSpec {
    NetworkSpec {
        n_sites: 2,
        site_detunings: vec![SiteDetuning { site: 0, detuning: delta_beta }],
        couplings: vec![],
        dispersion: DispersionModel::new(LAMBDA0).with_coupling_slope(0.0),
        sink: None,
        input_site: 0,
        target_site: 1,
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn hamiltonian_exact_at_center(c in prop::array::uniform3(0.1f64..3.0), d in -3.0f64..3.0, slope in -0.05f64..0.05) {
        let mut net = chain4(c, [0.0, 0.0, 0.0, d]);
        net.dispersion = net.dispersion.with_coupling_slope(slope);
        let h = build_hamiltonian(&net, LAMBDA0).unwrap();
        for (k, &ck) in c.iter().enumerate() {
            prop_assert_eq!(h.matrix[(k, k + 1)], ck);
            prop_assert_eq!(h.matrix[(k + 1, k)], ck);
        }
        prop_assert_eq!(h.matrix[(3, 3)], d);
    }

    #[test]
    fn coupling_slope_by_finite_difference(c0 in 0.1f64..3.0, sigma in -0.05f64..0.05) {
        let m = DispersionModel::new(LAMBDA0).with_coupling_slope(sigma);
        let h = 1e-4;
        let fd = (m.coupling_at(c0, LAMBDA0 + h) - m.coupling_at(c0, LAMBDA0 - h)) / (2.0 * h);
        prop_assert!((fd - c0 * sigma).abs() <= 1e-6 * (c0 * sigma).abs().max(1e-12));
    }

    #[test]
    fn unitary_conserves_norm(upper in prop::collection::vec(-2.0f64..2.0, 78), z in 0.0f64..100.0, site in 0usize..12) {
        let h = symmetric(12, &upper);
        let t = evolve_unitary(&h, &AmplitudeState::basis(12, site), &[z]).unwrap();
        let norm: f64 = t.populations[0].iter().sum();
        prop_assert!((norm - 1.0).abs() < 1e-10, "norm {}", norm);
    }

    #[test]
    fn trapped_norm_is_non_increasing(
        c in prop::array::uniform3(0.2f64..2.0),
        d in prop::array::uniform4(-2.0f64..2.0),
        kappa in 0.0f64..10.0,
    ) {
        let h = build_hamiltonian(&chain4(c, d), LAMBDA0).unwrap();
        let grid = linear_grid(0.0, 30.0, 0.5).unwrap();
        let t = evolve_trapped(&h, kappa, 2, &AmplitudeState::basis(4, 0), &grid).unwrap();
        let norms: Vec<f64> = (0..grid.len()).map(|k| t.system_total(k)).collect();
        prop_assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn pair_transfer_matches_propagator(c in 0.05f64..3.0, db in -4.0f64..4.0, z in 0.0f64..60.0) {
        let net = NetworkSpec {
            n_sites: 2,
            site_detunings: vec![SiteDetuning { site: 1, detuning: db }],
            couplings: vec![Coupling { a: 0, b: 1, strength: c }],
            dispersion: DispersionModel::flat(LAMBDA0),
            sink: None,
            input_site: 0,
            target_site: 1,
        };
        let h = build_hamiltonian(&net, LAMBDA0).unwrap();
        let t = evolve_unitary(&h, &AmplitudeState::basis(2, 0), &[z]).unwrap();
        prop_assert!((t.populations[0][1] - pair_transfer(c, db, z)).abs() < 1e-10);
    }

    #[test]
    fn detuning_recovered_from_peak_transfer(ratio in 0.0f64..4.0, c in 0.2f64..3.0) {
        let db = ratio * c;
        let omega = (c * c + 0.25 * db * db).sqrt();
        let peak = pair_transfer(c, db, std::f64::consts::FRAC_PI_2 / omega);
        let recovered = detuning_from_max_transfer(peak).unwrap();
        prop_assert!((recovered - ratio).abs() < 1e-6, "{} vs {}", recovered, ratio);
    }

    #[test]
    fn trap_rate_strictly_increasing(a in 0.001f64..0.999, b in 0.001f64..0.999, c_sink in 0.1f64..5.0) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let k_lo = effective_trap_rate(TrapRatio::new(lo).unwrap(), c_sink);
        let k_hi = effective_trap_rate(TrapRatio::new(hi).unwrap(), c_sink);
        prop_assert!(k_hi > k_lo);
    }

    #[test]
    fn enaqt_metric_is_scale_invariant(
        etas in prop::collection::vec(0.05f64..1.0, 91),
        scale in 0.01f64..100.0,
        bandwidth in 0.0f64..89.0,
    ) {
        let curve: Vec<(f64, f64)> = etas.iter().enumerate().map(|(k, &e)| (745.0 + k as f64, e)).collect();
        let scaled: Vec<(f64, f64)> = curve.iter().map(|&(l, e)| (l, scale * e)).collect();
        let a = enaqt_metric(&curve, 790.0, bandwidth).unwrap();
        let b = enaqt_metric(&scaled, 790.0, bandwidth).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn dark_state_is_stationary(c in 0.2f64..3.0, kappa in 0.1f64..10.0) {
        let net = enaqt4_network(c, c, None, DispersionModel::new(LAMBDA0)).unwrap();
        let h = build_hamiltonian(&net, LAMBDA0).unwrap();
        let psi = AmplitudeState::from_real(&[-1.0, -1.0, 0.0, 1.0]);
        let grid = linear_grid(0.0, 50.0, 1.0).unwrap();
        let t = evolve_trapped(&h, kappa, 2, &psi, &grid).unwrap();
        prop_assert!(t.sink_population.iter().all(|&p| p < 1e-9));
    }
}

proptest! {
    #![proptest_config(config(20))]

    #[test]
    fn gamma_quadrature_matches_closed_form(db in 0.05f64..3.0, fwhm in 0.5f64..150.0, lambda0 in 500.0f64..1600.0) {
        let s = Spectrum::tophat(lambda0, fwhm).unwrap();
        let q = decoherence_strength(&s, db, lambda0).unwrap();
        let closed = tophat_decoherence_strength(db, fwhm, lambda0);
        prop_assert!(((q - closed) / closed).abs() < 1e-6, "{} vs {}", q, closed);
    }

    /// Half the cases use complete graphs with generic constants, half the
    /// design topology with Δβ = C, which has an exact dark state.
    #[test]
    fn dark_bound_is_the_long_time_limit(
        upper in prop::collection::vec(0.3f64..1.5, 10),
        c in 0.3f64..2.0,
        kappa in 1.0f64..10.0,
        design in any::<bool>(),
    ) {
        let h = if design {
            build_hamiltonian(&enaqt4_network(c, c, None, DispersionModel::new(LAMBDA0)).unwrap(), LAMBDA0).unwrap()
        } else {
            symmetric(4, &upper)
        };
        let psi = AmplitudeState::basis(4, 0);
        let report = dark_state_diagnostics(&h, 2, &psi).unwrap();
        let t = evolve_trapped(&h, kappa, 2, &psi, &[1e5]).unwrap();
        prop_assert!(
            (report.efficiency_bound - t.sink_population[0]).abs() < 1e-3,
            "bound {} vs {}", report.efficiency_bound, t.sink_population[0]
        );
    }

    #[test]
    fn pair_coherence_follows_g1(db in 0.2f64..2.0, z in 0.0f64..40.0, fwhm in 1.0f64..95.0) {
        let s = Spectrum::tophat(LAMBDA0, fwhm).unwrap();
        let psi0 = AmplitudeState::from_real(&[1.0, 1.0]);
        let res = ensemble_average(&uncoupled_pair(db), &s, &psi0, z, 41, Execution::Sequential).unwrap();
        let expect = coherence_decay_pair(db, LAMBDA0, &s, z, C64::new(0.5, 0.0));
        prop_assert!((res.averaged_density.0[(0, 1)] - expect).norm() < 1e-6);
    }

    #[test]
    fn lindblad_state_stays_physical(
        c in prop::array::uniform3(0.2f64..2.0),
        d in prop::array::uniform4(-2.0f64..2.0),
        kappa in 0.5f64..8.0,
        gamma in 0.0f64..0.5,
        uniform in any::<bool>(),
    ) {
        let h = build_hamiltonian(&chain4(c, d), LAMBDA0).unwrap();
        let scope = if uniform { DephasingScope::Uniform } else { DephasingScope::Site(3) };
        let model = LindbladModel::new(kappa, 2, gamma, scope);
        let grid = linear_grid(0.0, 20.0, 2.0).unwrap();
        let run = evolve_lindblad(&h, &model, &DensityState::pure(&AmplitudeState::basis(4, 0)), &grid).unwrap();
        let mut previous = f64::INFINITY;
        for rho in &run.states {
            prop_assert!(rho.hermiticity_error() < 1e-10);
            prop_assert!(rho.min_eigenvalue().unwrap() >= -1e-7);
            prop_assert!(rho.trace() <= previous + 1e-12);
            previous = rho.trace();
        }
    }

    #[test]
    fn ensemble_state_is_a_mixture(z in 0.0f64..15.0, fwhm in 0.0f64..95.0, gaussian in any::<bool>()) {
        let net = design_network().with_sink(SinkSpec::new(30, 1.5, 1.75).unwrap());
        let s = if gaussian { Spectrum::gaussian(LAMBDA0, fwhm.max(1.0)).unwrap() } else { Spectrum::tophat(LAMBDA0, fwhm).unwrap() };
        let psi0 = AmplitudeState::basis(net.dimension(), 0);
        let res = ensemble_average(&net, &s, &psi0, z, 21, Execution::Sequential).unwrap();
        let rho = &res.averaged_density;
        prop_assert!(rho.hermiticity_error() < 1e-12);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-10);
        prop_assert!(rho.min_eigenvalue().unwrap() >= -1e-10);
    }

    #[test]
    fn sweep_symmetric_under_slope_flip(sigma in 0.002f64..0.03, z in 1.0f64..15.0) {
        let flip = |s: f64| {
            design_network()
                .with_sink(SinkSpec::new(60, 1.5, 1.75).unwrap())
                .with_dispersion(DispersionModel::new(LAMBDA0).with_detuning_law(DetuningLaw::Constant).with_coupling_slope(s))
        };
        let grid: Vec<f64> = (-8..=8).map(|k| LAMBDA0 + 5.0 * k as f64).collect();
        let up = sweep_wavelength(&flip(sigma), &grid, z, Execution::Sequential).unwrap().column("efficiency").unwrap();
        let down = sweep_wavelength(&flip(-sigma), &grid, z, Execution::Sequential).unwrap().column("efficiency").unwrap();
        for (a, b) in up.iter().zip(down.iter().rev()) {
            prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
        }
    }
}

proptest! {
    #![proptest_config(config(6))]

    #[test]
    fn purity_non_increasing_in_bandwidth(z in 2.0f64..15.0) {
        let net = design_network();
        let psi0 = AmplitudeState::basis(net.dimension(), 0);
        let purities: Vec<f64> = (0..=9)
            .map(|k| {
                let s = Spectrum::tophat(LAMBDA0, 10.0 * k as f64).unwrap();
                ensemble_average(&net, &s, &psi0, z, 41, Execution::default()).unwrap().averaged_density.purity()
            })
            .collect();
        prop_assert!(purities.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", purities);
    }
}
