use gkp_floquet::fock;
use gkp_floquet::linalg::{self, C64};
use gkp_floquet::metrics::LogicalTarget;
use gkp_floquet::model::ModelParams;
use gkp_floquet::prep::{prepare, prepare_superposition, PrepConfig, RampSchedule};
use gkp_floquet::workbench::Workbench;
use gkp_floquet::Error;

#[test]
fn uncoupled_preparation_only_rotates_the_phase() {
    let bench = Workbench::new(ModelParams { j_over_omega0: 0.0, ..Default::default() }, 60).unwrap();
    for n in [0, 2, 7] {
        let psi = bench.space().fock(n).unwrap();
        let run = prepare(&bench, &psi, &RampSchedule::new(5.0), &PrepConfig::default(), LogicalTarget::HPlus).unwrap();
        let overlap = linalg::inner(&psi, &run.final_state).norm();
        assert!((overlap - 1.0).abs() < 1e-10, "{overlap}");
    }
}

#[test]
fn evolution_is_linear_in_the_initial_state() {
    let bench = Workbench::new(ModelParams::default(), 160).unwrap();
    let schedule = RampSchedule::new(40.0);
    let cfg = PrepConfig::default();
    let (a, b) = (C64::new(0.7f64.sqrt(), 0.0), C64::new(0.0, 0.3f64.sqrt()));
    let zero = prepare(&bench, &bench.space().fock(0).unwrap(), &schedule, &cfg, LogicalTarget::HPlus).unwrap();
    let two = prepare(&bench, &bench.space().fock(2).unwrap(), &schedule, &cfg, LogicalTarget::HMinus).unwrap();
    let sup = prepare_superposition(&bench, a, b, &schedule, &cfg, (&zero.final_state, &two.final_state)).unwrap();
    let combined = zero.final_state.mapv(|v| v * a) + two.final_state.mapv(|v| v * b);
    assert!((&sup.run.final_state - &combined).iter().all(|v| v.norm() < 1e-10));
    // Against the runs themselves, the weights and phase are exact.
    assert!((sup.weights[0] - 0.7).abs() < 1e-10 && (sup.weights[1] - 0.3).abs() < 1e-10);
    assert!(sup.phase.abs() < 1e-9);
}

#[test]
fn timeline_covers_the_ramp() {
    let bench = Workbench::new(ModelParams::default(), 120).unwrap();
    let schedule = RampSchedule::new(35.0);
    let cfg = PrepConfig { sample_every: 10, ..Default::default() };
    let run = prepare(&bench, &bench.space().fock(0).unwrap(), &schedule, &cfg, LogicalTarget::HPlus).unwrap();
    let t: Vec<f64> = run.timeline.iter().map(|r| r.t_periods).collect();
    assert_eq!(t.first(), Some(&0.0));
    assert!((t.last().unwrap() - 35.0).abs() < 1e-9);
    assert!(t.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 10.0 + 1e-9));
    assert!(run.timeline.iter().all(|r| (r.norm - 1.0).abs() < 1e-10));
    assert!((run.timeline[0].omega - schedule.omega_initial).abs() < 1e-15);
    assert_eq!(run.timeline.last().unwrap().omega, 1.0);
}

#[test]
fn rotation_sectors_stay_nearly_empty() {
    // From |0⟩, population outside n ≡ 0 (mod 4) only grows from the
    // non-rotation-symmetric micromotion of the drive.
    let bench = Workbench::new(ModelParams::default(), 200).unwrap();
    let run = prepare(
        &bench,
        &bench.space().fock(0).unwrap(),
        &RampSchedule::new(300.0),
        &PrepConfig::default(),
        LogicalTarget::HPlus,
    )
    .unwrap();
    let off: f64 = run.final_state.iter().enumerate().filter(|(n, _)| n % 4 != 0).map(|(_, c)| c.norm_sqr()).sum();
    assert!(off < 1e-5, "{off:.2e}");
    let odd: f64 = run.final_state.iter().enumerate().filter(|(n, _)| n % 2 == 1).map(|(_, c)| c.norm_sqr()).sum();
    assert_eq!(odd, 0.0);
}

#[test]
fn truncation_is_detected() {
    let bench = Workbench::new(ModelParams { j_over_omega0: 0.3, ..Default::default() }, 16).unwrap();
    let err = prepare(
        &bench,
        &bench.space().fock(0).unwrap(),
        &RampSchedule::new(30.0),
        &PrepConfig::default(),
        LogicalTarget::HPlus,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Truncation { .. }), "{err}");
}

#[test]
fn bad_inputs_are_rejected() {
    let bench = Workbench::new(ModelParams::default(), 40).unwrap();
    let mut psi = bench.space().fock(0).unwrap();
    psi[1] = C64::new(1.0, 0.0);
    let r = prepare(&bench, &psi, &RampSchedule::new(5.0), &PrepConfig::default(), LogicalTarget::HPlus);
    assert!(r.unwrap_err().is_config_error());
    fock::normalize(&mut psi);
    let few = PrepConfig { steps_per_period: 100, ..Default::default() };
    assert!(prepare(&bench, &psi, &RampSchedule::new(5.0), &few, LogicalTarget::HPlus).unwrap_err().is_config_error());
    let sparse = PrepConfig { sample_every: 11, ..Default::default() };
    assert!(prepare(&bench, &psi, &RampSchedule::new(5.0), &sparse, LogicalTarget::HPlus)
        .unwrap_err()
        .is_config_error());
    let bad = RampSchedule { slope: -1.0, ..RampSchedule::new(5.0) };
    assert!(prepare(&bench, &psi, &bad, &PrepConfig::default(), LogicalTarget::HPlus).unwrap_err().is_config_error());
}
