use std::f64::consts::PI;

use gkp_floquet::floquet::{self, IntegratorConfig, Scheme};
use gkp_floquet::fock::FockSpace;
use gkp_floquet::linalg::{self, C64};
use gkp_floquet::metrics::LogicalTarget;
use gkp_floquet::model::{ModelOperators, ModelParams, PERIOD};
use gkp_floquet::prep::{prepare, PrepConfig, RampSchedule, DETUNING};
use gkp_floquet::workbench::Workbench;

fn ops(dim: usize, params: ModelParams) -> ModelOperators {
    ModelOperators::new(&FockSpace::new(dim).unwrap(), params).unwrap()
}

#[test]
fn resonant_kicks_realize_the_gkp_hamiltonian() {
    let ops = ops(160, ModelParams::default());
    let u = floquet::kicked_propagator(&ops, PI / 2.0).unwrap();
    let target = linalg::expm_i_symmetric(&ops.gkp_hamiltonian(), PERIOD).unwrap();
    let diff = linalg::leading_block(&(&u - &target), 80);
    assert!(linalg::spectral_norm(diff.view()).unwrap() < 1e-6);
}

#[test]
fn integrators_agree_and_converge() {
    let ops = ops(100, ModelParams { n_harmonics: 2, ..Default::default() });
    let fine = floquet::harmonic_propagator(
        &ops,
        IntegratorConfig { steps_per_period: 1024, scheme: Scheme::CommutatorFree4 },
    )
    .unwrap();
    let err = |cfg: IntegratorConfig| {
        let u = floquet::harmonic_propagator(&ops, cfg).unwrap();
        linalg::spectral_norm(linalg::leading_block(&(&u - &fine), 50).view()).unwrap()
    };
    let cf4 = err(IntegratorConfig { steps_per_period: 256, scheme: Scheme::CommutatorFree4 });
    let cf4_coarse = err(IntegratorConfig { steps_per_period: 128, scheme: Scheme::CommutatorFree4 });
    let mid_coarse = err(IntegratorConfig { steps_per_period: 256, scheme: Scheme::MidpointExponential });
    let mid_fine = err(IntegratorConfig { steps_per_period: 512, scheme: Scheme::MidpointExponential });
    assert!(cf4 < 1e-8, "{cf4:.2e}");
    // Fourth order: halving the step divides the error by sixteen.
    assert!((12.0..20.0).contains(&(cf4_coarse / cf4)), "{cf4_coarse:.2e} {cf4:.2e}");
    // Second order: halving the step quarters the error.
    let ratio = mid_coarse / mid_fine;
    assert!((3.0..5.0).contains(&ratio), "{ratio}");
}

#[test]
fn split_propagation_matches_the_floquet_propagator() {
    let params = ModelParams { n_harmonics: 2, ..Default::default() };
    let bench = Workbench::new(params, 100).unwrap();
    let u = floquet::harmonic_propagator(
        bench.ops(),
        IntegratorConfig { steps_per_period: 512, scheme: Scheme::CommutatorFree4 },
    )
    .unwrap();
    let psi = bench.space().coherent(C64::new(0.8, 0.3));
    let exact = linalg::matvec(&u, &psi);
    let resonant = RampSchedule { omega_initial: 1.0, ..RampSchedule::new(1.0) };
    let err = |steps: usize| {
        let cfg = PrepConfig { steps_per_period: steps, sample_every: 1 };
        let out = prepare(&bench, &psi, &resonant, &cfg, LogicalTarget::HPlus).unwrap().final_state;
        (&out - &exact).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    };
    let (coarse, fine) = (err(256), err(512));
    assert!(coarse < 1e-4, "{coarse:.2e}");
    assert!((3.0..5.0).contains(&(coarse / fine)), "{coarse:.2e} {fine:.2e}");
}

#[test]
fn effective_hamiltonian_deviation_is_second_order() {
    let dev = |j: f64| {
        let ops = ops(120, ModelParams { j_over_omega0: j, n_harmonics: 2, ..Default::default() });
        let u = floquet::harmonic_propagator(&ops, IntegratorConfig::for_harmonics(2)).unwrap();
        let sol = floquet::floquet_states(u).unwrap();
        floquet::effective_hamiltonian_deviation(&sol, &ops.truncated_gkp_hamiltonian(), 30).unwrap()
    };
    let (a, b) = (dev(1e-3), dev(2e-3));
    assert!(a < 1e-4, "{a:.2e}");
    assert!((3.0..5.0).contains(&(b / a)), "{a:.2e} {b:.2e}");
}

#[test]
fn detuned_floquet_states_are_close_to_fock_states() {
    let ops = ops(120, ModelParams::default());
    for omega in [1.0 / (1.0 + DETUNING), 1.0 / (1.0 - DETUNING)] {
        let u = floquet::detuned_propagator(&ops, IntegratorConfig::default(), omega).unwrap();
        let sol = floquet::floquet_states(u).unwrap();
        for n in [0, 2, 4] {
            let best = sol.states.columns().into_iter().map(|c| c[n].norm_sqr()).fold(0.0, f64::max);
            assert!(best > 0.99, "ω = {omega}, n = {n}: {best}");
        }
    }
}

#[test]
fn floquet_states_carry_rotation_eigenvalues() {
    let bench = Workbench::new(ModelParams { n_harmonics: 2, ..Default::default() }, 120).unwrap();
    let report = floquet::analyze(&bench, IntegratorConfig::for_harmonics(2)).unwrap();
    let low: Vec<_> = report.metrics.iter().filter(|m| m.mean_photon_number < 10.0).collect();
    assert!(!low.is_empty());
    for m in low {
        let r = m.rotation;
        assert!((r.abs() - 1.0).abs() < 1e-3 || r.abs() < 1e-3, "state {}: ⟨R⟩ = {r}", m.index);
    }
    assert!(report.pair.plus.rotation > 0.999 && report.pair.minus.rotation < -0.999);
}
