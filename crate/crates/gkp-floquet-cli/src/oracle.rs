//! Brute-force oracles recorded as fixtures.
//!
//! Each check compares the production code against an independent route
//! (closed form, a different algorithm, or a statistical law).

use std::f64::consts::PI;

use gkp_floquet::fock::FockSpace;
use gkp_floquet::linalg::{self, C64};
use gkp_floquet::metrics::{decode_wavefunction, squeezing_delta, DecoderGrid, Generator, LogicalTarget, Stabilizers};
use gkp_floquet::model::{ModelOperators, ModelParams, PERIOD};
use gkp_floquet::noise::{ensemble_prepare, NoiseConfig};
use gkp_floquet::prep::{PrepConfig, RampSchedule};
use gkp_floquet::workbench::Workbench;
use serde::Serialize;

use crate::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct OracleRecord {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn below(name: &'static str, value: f64, threshold: f64) -> OracleRecord {
    OracleRecord { name, value, threshold, pass: value < threshold }
}

fn kicked_identity(dim: usize) -> Result<OracleRecord, Failure> {
    let ops = ModelOperators::new(&FockSpace::new(dim)?, ModelParams::default())?;
    let u = gkp_floquet::floquet::kicked_propagator(&ops, PI / 2.0)?;
    let target = linalg::expm_i_symmetric(&ops.gkp_hamiltonian(), PERIOD)?;
    let err = linalg::spectral_norm(linalg::leading_block(&(&u - &target), dim / 2).view())?;
    Ok(below("kicked_identity_norm", err, 1e-6))
}

fn fourier_symmetry(dim: usize) -> Result<OracleRecord, Failure> {
    let space = FockSpace::new(dim)?;
    let r = space.rotation(PI / 2.0);
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let ops = ModelOperators::new(&space, ModelParams { n_harmonics: n, ..Default::default() })?;
        let h = linalg::complexify(&ops.truncated_gkp_hamiltonian());
        worst = worst.max(linalg::spectral_norm((h.dot(&r) - r.dot(&h)).view())?);
    }
    Ok(below("fourier_commutator_norm", worst, 1e-12))
}

fn displacement_routes(dim: usize) -> Result<OracleRecord, Failure> {
    let space = FockSpace::new(dim)?;
    let alpha = C64::new(0.6, -0.35);
    let closed = space.displacement(alpha)?;
    let generated = space.displacement_by_generator(alpha)?;
    let k = dim / 2;
    let err = gkp_floquet::fock::max_abs_diff_leading(&closed, &generated, k);
    Ok(below("displacement_laguerre_vs_generator", err, 1e-10))
}

fn squeezed_vacuum(dim: usize) -> Result<OracleRecord, Failure> {
    // D(√2π) probes the momentum spread: ⟨D(√2π)⟩ = exp(−2π Var p).
    let space = FockSpace::new(dim)?;
    let stab = Stabilizers::new(&space)?;
    let mut worst: f64 = 0.0;
    for r in [0.2, 0.5, 0.8] {
        let psi = space.squeezed_vacuum(-r);
        let ex = stab.expectation(&psi, Generator::XType);
        let ep = stab.expectation(&psi, Generator::PType);
        let expected = [(-PI * (-2.0 * r).exp()).exp(), (-PI * (2.0 * r).exp()).exp()];
        let got = [ex.re, ep.re];
        let dev = expected.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    Ok(below("squeezed_vacuum_stabilizers", worst, 1e-10))
}

fn vacuum_squeezing(dim: usize) -> Result<OracleRecord, Failure> {
    let space = FockSpace::new(dim)?;
    let stab = Stabilizers::new(&space)?;
    let delta = squeezing_delta(stab.expectation(&space.fock(0)?, Generator::XType))?;
    Ok(below("vacuum_delta_minus_one", (delta - 1.0).abs(), 1e-12))
}

fn comb_decoder() -> Result<OracleRecord, Failure> {
    let sigma = 0.05;
    let comb = |x: f64| {
        let acc: f64 = (-6i32..=6)
            .map(|s| {
                let c = 2.0 * s as f64 * PI.sqrt();
                (-(c * c) / 50.0).exp() * (-(x - c).powi(2) / (2.0 * sigma * sigma)).exp()
            })
            .sum();
        C64::new(acc, 0.0)
    };
    let p0 = decode_wavefunction(comb, DecoderGrid { u_nodes: 64, s_max: 8 })?.rho[0][0].re;
    Ok(below("comb_logical_zero_deficit", 1.0 - p0, 1e-3))
}

fn photon_decay(seed: u64) -> Result<OracleRecord, Failure> {
    let q = 100.0;
    let bench = Workbench::new(ModelParams { j_over_omega0: 0.0, ..Default::default() }, 40)?;
    let noise = NoiseConfig { quality_factor: Some(q), n_trajectories: 500, master_seed: seed, ..Default::default() };
    let cfg = PrepConfig { sample_every: 2, ..Default::default() };
    let run = ensemble_prepare(
        &bench,
        &bench.space().fock(3)?,
        &RampSchedule::new(20.0),
        &cfg,
        &noise,
        LogicalTarget::HPlus,
    )?;
    let worst = run
        .timeline
        .iter()
        .map(|r| {
            let dev = (r.mean_photon_number - 3.0 * (-r.t_periods * PERIOD / q).exp()).abs();
            if dev < 1e-9 {
                0.0
            } else {
                dev / r.mean_photon_number_se
            }
        })
        .fold(0.0, f64::max);
    Ok(OracleRecord { name: "fock3_decay_max_z", value: worst, threshold: 3.0, pass: worst <= 3.0 })
}

pub fn run_all(seed: u64) -> Result<Vec<OracleRecord>, Failure> {
    let dim = 250;
    Ok(vec![
        kicked_identity(dim)?,
        fourier_symmetry(dim)?,
        displacement_routes(120)?,
        squeezed_vacuum(dim)?,
        vacuum_squeezing(dim)?,
        comb_decoder()?,
        photon_decay(seed)?,
    ])
}
