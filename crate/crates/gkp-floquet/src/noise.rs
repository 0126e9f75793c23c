//! Photon loss by quantum jumps and classical flux noise on the drive.
//!
//! Trajectories unravel `ρ̇ = −i[H, ρ] + κ D[a]ρ` with norm-threshold jumps.
//! Without flux noise every trajectory follows the same no-jump evolution
//! until its first jump, so that evolution is computed once and trajectories
//! branch off it at their first jump step.
//!
//! Randomness is counter-based: trajectory `k` draws from the ChaCha stream
//! `k` of the master seed, so results do not depend on scheduling.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, DensityMatrix, StateVector};
use crate::linalg;
use crate::metrics::{LogicalState, LogicalTarget, SqueezingReport};
use crate::model::{ModelOperators, PERIOD};
use crate::prep::{self, DrivePlan, PrepConfig, RampSchedule};
use crate::split::{SplitEngine, SplitState};
use crate::workbench::{Observation, Workbench};

/// Bootstrap resamples used for standard errors.
pub const BOOTSTRAP_SAMPLES: usize = 200;

const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// Flux noise on the SQUID loop, in flux quanta per √Hz.
///
/// The defaults are representative values, not measured ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluxNoise {
    /// 1/f amplitude at 1 Hz.
    pub amplitude_1f: f64,
    pub white_floor: f64,
    /// Defaults to `1/(10 t_f)`.
    pub f_low_hz: Option<f64>,
    /// Defaults to `8Nω₀/2π`.
    pub f_high_hz: Option<f64>,
    /// Physical oscillator frequency used to convert time to seconds.
    pub omega0_over_2pi_ghz: f64,
    /// `δJ = coupling · (E_J/ħ) · δφ_e/φ₀`.
    pub coupling: f64,
}

impl Default for FluxNoise {
    fn default() -> Self {
        Self {
            amplitude_1f: 5e-6,
            white_floor: 1e-8,
            f_low_hz: None,
            f_high_hz: None,
            omega0_over_2pi_ghz: 5.0,
            coupling: 0.5,
        }
    }
}

impl FluxNoise {
    /// Resolve cutoffs for a run of `t_f` periods with `n_harmonics`.
    pub fn spectrum(&self, t_f: f64, n_harmonics: usize) -> FluxSpectrum {
        let f0 = self.omega0_over_2pi_ghz * 1e9;
        FluxSpectrum {
            amplitude_1f: self.amplitude_1f,
            white_floor: self.white_floor,
            f_low: self.f_low_hz.unwrap_or(f0 / (10.0 * t_f)),
            f_high: self.f_high_hz.unwrap_or(8.0 * n_harmonics as f64 * f0),
        }
    }

    /// Seconds per unit of dimensionless time.
    pub fn time_unit(&self) -> f64 {
        1.0 / (2.0 * std::f64::consts::PI * self.omega0_over_2pi_ghz * 1e9)
    }
}

/// One-sided PSD `S(f) = A²/f + W²` between two cutoffs, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSpectrum {
    pub amplitude_1f: f64,
    pub white_floor: f64,
    pub f_low: f64,
    pub f_high: f64,
}

impl FluxSpectrum {
    pub fn density(&self, f: f64) -> f64 {
        if f < self.f_low || f > self.f_high || f <= 0.0 {
            0.0
        } else {
            self.amplitude_1f.powi(2) / f + self.white_floor.powi(2)
        }
    }
}

/// Flux samples `δφ_e/φ₀` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxNoiseTrace {
    pub samples: Vec<f64>,
    /// Sample spacing in seconds.
    pub dt: f64,
    pub seed: u64,
}

/// Synthesize a trace by shaping complex Gaussian Fourier amplitudes.
///
/// The transform is padded to at least `1/(f_low·dt)` points so the lowest
/// frequency is resolved, then truncated to the requested duration.
pub fn flux_noise_trace(spectrum: &FluxSpectrum, duration: f64, dt: f64, seed: u64) -> Result<FluxNoiseTrace> {
    if !(dt > 0.0 && duration >= 0.0 && dt.is_finite() && duration.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad trace grid: duration {duration}, dt {dt}")));
    }
    if !(spectrum.f_low > 0.0 && spectrum.f_low < spectrum.f_high) {
        return Err(Error::InvalidArgument(format!(
            "flux-noise cutoffs out of order: {} ≥ {}",
            spectrum.f_low, spectrum.f_high
        )));
    }
    if spectrum.f_high > 0.5 / dt * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "high cutoff {:.3e} Hz exceeds the Nyquist frequency {:.3e} Hz",
            spectrum.f_high,
            0.5 / dt
        )));
    }
    if spectrum.amplitude_1f < 0.0 || spectrum.white_floor < 0.0 {
        return Err(Error::InvalidArgument("noise amplitudes must be non-negative".into()));
    }
    let n = (duration / dt).ceil() as usize;
    if n == 0 || (spectrum.amplitude_1f == 0.0 && spectrum.white_floor == 0.0) {
        return Ok(FluxNoiseTrace { samples: vec![0.0; n], dt, seed });
    }
    let len = n.max((1.0 / (spectrum.f_low * dt)).ceil() as usize);
    let df = 1.0 / (len as f64 * dt);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (k, y) in buf.iter_mut().enumerate().take(len / 2 + 1).skip(1) {
        let s = spectrum.density(k as f64 * df);
        let (g1, g2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        if s > 0.0 {
            *y = Complex::new(g1, -g2) * (s * df).sqrt();
        }
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    Ok(FluxNoiseTrace { samples: buf[..n].iter().map(|c| c.re).collect(), dt, seed })
}

/// One-sided periodogram `P_k = 2dt/n |X_k|²` at `f_k = k/(n dt)`, `k ≥ 1`.
pub fn periodogram(samples: &[f64], dt: f64) -> Vec<(f64, f64)> {
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    (1..n / 2).map(|k| (k as f64 / (n as f64 * dt), 2.0 * dt / n as f64 * buf[k].norm_sqr())).collect()
}

/// Stochastic kick integrals: `∫δJ dt` added per propagation step.
pub fn apply_flux_noise(
    plan: &DrivePlan,
    trace: &FluxNoiseTrace,
    ej_over_omega0: f64,
    coupling: f64,
) -> Result<Vec<f64>> {
    if trace.samples.len() < plan.n_steps() {
        return Err(Error::InvalidArgument(format!(
            "flux trace has {} samples for {} steps",
            trace.samples.len(),
            plan.n_steps()
        )));
    }
    let h = plan.step();
    Ok(plan.kick_angles().iter().zip(&trace.samples).map(|(a, d)| a + coupling * ej_over_omega0 * d * h).collect())
}

/// `H(f) − δJ cos(2√πηx̂)`: the drive Hamiltonian with a flux offset.
pub fn noisy_hamiltonian(ops: &ModelOperators, f: f64, delta_j: f64) -> Array2<f64> {
    let mut h = ops.hamiltonian_for_drive(f);
    h.scaled_add(-delta_j, ops.cos_x());
    h
}

/// Open-system settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// `Q = ω₀/κ`; absent means no loss.
    pub quality_factor: Option<f64>,
    pub flux_noise: Option<FluxNoise>,
    pub n_trajectories: usize,
    pub master_seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { quality_factor: None, flux_noise: None, n_trajectories: 200, master_seed: 0 }
    }
}

impl NoiseConfig {
    pub fn kappa(&self) -> f64 {
        self.quality_factor.map_or(0.0, |q| 1.0 / q)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(q) = self.quality_factor {
            if !(q > 0.0) {
                return Err(Error::InvalidArgument(format!("quality factor must be positive, got {q}")));
            }
        }
        if self.n_trajectories == 0 {
            return Err(Error::InvalidArgument("n_trajectories must be at least 1".into()));
        }
        Ok(())
    }

    /// The generator of trajectory `index`.
    pub fn trajectory_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(index);
        rng
    }
}

/// Result of a single trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub index: u64,
    /// Jump times in periods.
    pub jump_times: Vec<f64>,
    /// Observations at the timeline sample steps.
    pub observations: Vec<Observation>,
    pub final_state: StateVector,
}

/// Per-trajectory diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub index: u64,
    pub jump_times: Vec<f64>,
    pub final_db_x: f64,
    pub final_db_p: f64,
    pub final_fidelity: f64,
}

/// Shared propagation setup for one ensemble.
struct Runner<'a> {
    bench: &'a Workbench,
    engine: SplitEngine,
    plan: DrivePlan,
    samples: Vec<usize>,
    noise: NoiseConfig,
    schedule: RampSchedule,
}

impl<'a> Runner<'a> {
    fn new(bench: &'a Workbench, schedule: &RampSchedule, cfg: &PrepConfig, noise: &NoiseConfig) -> Result<Self> {
        noise.validate()?;
        let plan = bench.plan(schedule, cfg)?;
        let engine = bench.engine(&plan, noise.kappa())?;
        let samples = prep::sample_steps(&plan, cfg.sample_every);
        Ok(Self { bench, engine, plan, samples, noise: *noise, schedule: *schedule })
    }

    fn observe(&self, z: &SplitState) -> Result<Observation> {
        let obs = self.bench.observe(&self.engine.leave(z));
        prep::check_leakage(obs.top)?;
        Ok(obs)
    }

    fn angles_for(&self, rng: &mut ChaCha8Rng) -> Result<Option<Vec<f64>>> {
        let Some(flux) = self.noise.flux_noise else { return Ok(None) };
        let seed: u64 = rng.random();
        let spectrum = flux.spectrum(self.schedule.t_f, self.bench.params().n_harmonics);
        let unit = flux.time_unit();
        let trace = flux_noise_trace(
            &spectrum,
            self.plan.n_steps() as f64 * self.plan.step() * unit,
            self.plan.step() * unit,
            seed,
        )?;
        apply_flux_noise(&self.plan, &trace, self.bench.params().ej_over_omega0, flux.coupling).map(Some)
    }

    /// Evolve from step `start` to the end, jumping when the norm falls
    /// below `threshold`. Observations are pushed for samples ≥ `start`.
    fn evolve(
        &self,
        start: usize,
        mut z: SplitState,
        angles: &[f64],
        rng: &mut ChaCha8Rng,
        observations: &mut Vec<Observation>,
        jump_times: &mut Vec<f64>,
    ) -> Result<StateVector> {
        let lossy = self.engine.kappa() > 0.0;
        let mut threshold: f64 = if lossy { rng.random() } else { 0.0 };
        let mut backup = z.clone();
        let mut scratch = Vec::new();
        let mut next = self.samples.partition_point(|&s| s < start);
        let n = self.plan.n_steps();
        for k in start..=n {
            if self.samples.get(next) == Some(&k) {
                next += 1;
                observations.push(self.observe(&z)?);
            }
            if k == n {
                break;
            }
            if lossy {
                backup.assign(&z);
            }
            self.engine.advance(&mut z, angles[k], &mut scratch);
            if lossy && z.norm_sqr() < threshold {
                let (jumped, frac) = self.engine.jump_step(&backup, angles[k], threshold)?;
                z = jumped;
                jump_times.push((k as f64 + frac) * self.plan.step() / PERIOD);
                threshold = rng.random();
            }
        }
        let mut psi = self.engine.leave(&z);
        fock::normalize(&mut psi);
        Ok(psi)
    }

    fn trajectory(&self, initial: &StateVector, index: u64) -> Result<Trajectory> {
        let mut rng = self.noise.trajectory_rng(index);
        let angles = self.angles_for(&mut rng)?;
        let angles = angles.as_deref().unwrap_or(self.plan.kick_angles());
        let mut observations = Vec::with_capacity(self.samples.len());
        let mut jump_times = Vec::new();
        let final_state =
            self.evolve(0, self.engine.enter(initial), angles, &mut rng, &mut observations, &mut jump_times)?;
        Ok(Trajectory { index, jump_times, observations, final_state })
    }
}

/// The no-jump evolution shared by all trajectories without flux noise.
struct Prefix {
    /// Squared norm after each step; `norms[k]` belongs to step boundary `k`.
    norms: Vec<f64>,
    /// States at period boundaries.
    checkpoints: Vec<SplitState>,
    observations: Vec<Observation>,
    final_state: StateVector,
}

impl Prefix {
    fn compute(runner: &Runner, initial: &StateVector) -> Result<Self> {
        let plan = &runner.plan;
        let spp = plan.steps_per_period();
        let mut z = runner.engine.enter(initial);
        let mut norms = Vec::with_capacity(plan.n_steps() + 1);
        let mut checkpoints = Vec::new();
        let mut observations = Vec::with_capacity(runner.samples.len());
        let mut next = 0;
        let mut scratch = Vec::new();
        for k in 0..=plan.n_steps() {
            norms.push(z.norm_sqr());
            if k % spp == 0 {
                checkpoints.push(z.clone());
            }
            if runner.samples.get(next) == Some(&k) {
                next += 1;
                observations.push(runner.observe(&z)?);
            }
            if k < plan.n_steps() {
                runner.engine.advance(&mut z, plan.kick_angles()[k], &mut scratch);
            }
        }
        let mut final_state = runner.engine.leave(&z);
        fock::normalize(&mut final_state);
        Ok(Self { norms, checkpoints, observations, final_state })
    }

    /// Trajectory output, flagged `true` when it never jumped.
    fn branch(&self, runner: &Runner, index: u64) -> Result<(Trajectory, bool)> {
        let mut rng = runner.noise.trajectory_rng(index);
        let threshold: f64 = rng.random();
        // Norms decrease monotonically; find the first step ending below threshold.
        let below = self.norms.partition_point(|&v| v >= threshold);
        if below == self.norms.len() || runner.engine.kappa() == 0.0 {
            return Ok((
                Trajectory {
                    index,
                    jump_times: Vec::new(),
                    observations: self.observations.clone(),
                    final_state: self.final_state.clone(),
                },
                true,
            ));
        }
        let k = below - 1;
        let spp = runner.plan.steps_per_period();
        let angles = runner.plan.kick_angles();
        let mut z = self.checkpoints[k / spp].clone();
        let mut scratch = Vec::new();
        for &a in &angles[(k / spp) * spp..k] {
            runner.engine.advance(&mut z, a, &mut scratch);
        }
        let (jumped, frac) = runner.engine.jump_step(&z, angles[k], threshold)?;
        let mut jump_times = vec![(k as f64 + frac) * runner.plan.step() / PERIOD];
        let shared = runner.samples.partition_point(|&s| s <= k);
        let mut observations = self.observations[..shared].to_vec();
        let final_state = runner.evolve(k + 1, jumped, angles, &mut rng, &mut observations, &mut jump_times)?;
        Ok((Trajectory { index, jump_times, observations, final_state }, false))
    }
}

/// Evolve a single trajectory of the ensemble described by `noise`.
pub fn trajectory_evolve(
    bench: &Workbench,
    initial: &StateVector,
    schedule: &RampSchedule,
    cfg: &PrepConfig,
    noise: &NoiseConfig,
    index: u64,
) -> Result<Trajectory> {
    check_initial(bench, initial)?;
    Runner::new(bench, schedule, cfg, noise)?.trajectory(initial, index)
}

fn check_initial(bench: &Workbench, initial: &StateVector) -> Result<()> {
    if initial.len() != bench.space().dim() || (linalg::norm_sqr(initial) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "initial state must be a normalized vector of length {}",
            bench.space().dim()
        )));
    }
    Ok(())
}

/// Ensemble metrics at one timeline sample, with bootstrap standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub t_periods: f64,
    pub omega: f64,
    pub db_x: f64,
    pub db_x_se: f64,
    pub db_p: f64,
    pub db_p_se: f64,
    pub fidelity: f64,
    pub fidelity_se: f64,
    pub mean_photon_number: f64,
    pub mean_photon_number_se: f64,
    /// Tr ρ; every trajectory is renormalized, so this is 1 by construction.
    pub trace: f64,
}

/// Ensemble-averaged preparation.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub schedule: RampSchedule,
    pub noise: NoiseConfig,
    pub target: LogicalTarget,
    pub timeline: Vec<EnsembleRecord>,
    pub density: DensityMatrix,
    pub squeezing: SqueezingReport,
    pub logical: LogicalState,
    pub trajectories: Vec<TrajectorySummary>,
}

impl EnsembleRun {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.logical.fidelity(self.target)
    }

    /// Standard errors of the final (db_x, db_p, fidelity).
    pub fn final_errors(&self) -> (f64, f64, f64) {
        let r = self.timeline.last().expect("timeline includes t_f");
        (r.db_x_se, r.db_p_se, r.fidelity_se)
    }
}

struct SampleMetrics {
    db_x: f64,
    db_p: f64,
    fidelity: f64,
    photons: f64,
}

fn metrics_of(mean: &Observation, target: LogicalTarget) -> SampleMetrics {
    let (db_x, db_p) = mean.squeezing().map(|s| (s.db_x, s.db_p)).unwrap_or((f64::NAN, f64::NAN));
    let fidelity = mean.logical_state().map(|l| l.fidelity(target)).unwrap_or(f64::NAN);
    SampleMetrics { db_x, db_p, fidelity, photons: mean.photons }
}

fn mean_observation<'a>(rows: impl Iterator<Item = &'a Observation>, m: usize) -> Observation {
    let mut acc = Observation::ZERO;
    for o in rows {
        acc.add_scaled(o, 1.0 / m as f64);
    }
    acc
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Run `noise.n_trajectories` trajectories and average them.
pub fn ensemble_prepare(
    bench: &Workbench,
    initial: &StateVector,
    schedule: &RampSchedule,
    cfg: &PrepConfig,
    noise: &NoiseConfig,
    target: LogicalTarget,
) -> Result<EnsembleRun> {
    check_initial(bench, initial)?;
    let runner = Runner::new(bench, schedule, cfg, noise)?;
    let m = noise.n_trajectories;
    let indices: Vec<u64> = (0..m as u64).collect();
    let (trajectories, shared): (Vec<Trajectory>, Vec<bool>) = if noise.flux_noise.is_none() {
        let prefix = Prefix::compute(&runner, initial)?;
        let out: Vec<(Trajectory, bool)> =
            indices.par_iter().map(|&i| prefix.branch(&runner, i)).collect::<Result<_>>()?;
        out.into_iter().unzip()
    } else {
        let out: Vec<Trajectory> = indices.par_iter().map(|&i| runner.trajectory(initial, i)).collect::<Result<_>>()?;
        let n = out.len();
        (out, vec![false; n])
    };

    // ρ = mean |ψ⟩⟨ψ|, with the never-jumped trajectories folded into one term.
    let dim = bench.space().dim();
    let mut density = DensityMatrix::zeros((dim, dim));
    let n_shared = shared.iter().filter(|s| **s).count();
    let add = |rho: &mut DensityMatrix, psi: &StateVector, w: f64| {
        for i in 0..dim {
            let a = psi[i] * w;
            for j in 0..dim {
                rho[[i, j]] += a * psi[j].conj();
            }
        }
    };
    if let Some(first) = shared.iter().position(|s| *s) {
        add(&mut density, &trajectories[first].final_state, n_shared as f64 / m as f64);
    }
    for (t, s) in trajectories.iter().zip(&shared) {
        if !s {
            add(&mut density, &t.final_state, 1.0 / m as f64);
        }
    }
    let defects = fock::density_defects(&density)?;
    if !defects.within(1e-8) {
        return Err(Error::Numerical(format!("ensemble density matrix is not a state: {defects:?}")));
    }

    let n_samples = runner.samples.len();
    let means: Vec<Observation> =
        (0..n_samples).map(|s| mean_observation(trajectories.iter().map(|t| &t.observations[s]), m)).collect();
    let point: Vec<SampleMetrics> = means.iter().map(|o| metrics_of(o, target)).collect();

    // Bootstrap over trajectories; one shared resampling per replicate.
    let mut boot: Vec<[Vec<f64>; 4]> = (0..n_samples).map(|_| Default::default()).collect();
    if m > 1 {
        let mut rng = noise.trajectory_rng(BOOTSTRAP_STREAM);
        for _ in 0..BOOTSTRAP_SAMPLES {
            let pick: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
            for (s, slot) in boot.iter_mut().enumerate() {
                let mean = mean_observation(pick.iter().map(|&k| &trajectories[k].observations[s]), m);
                let q = metrics_of(&mean, target);
                for (v, x) in slot.iter_mut().zip([q.db_x, q.db_p, q.fidelity, q.photons]) {
                    v.push(x);
                }
            }
        }
    }
    let se = |v: &Vec<f64>| if v.len() > 1 { std_dev(v) } else { 0.0 };
    let timeline = runner
        .samples
        .iter()
        .zip(point.iter().zip(&boot))
        .map(|(&k, (p, b))| {
            let t = k as f64 * runner.plan.step();
            EnsembleRecord {
                t_periods: t / PERIOD,
                omega: schedule.frequency(t),
                db_x: p.db_x,
                db_x_se: se(&b[0]),
                db_p: p.db_p,
                db_p_se: se(&b[1]),
                fidelity: p.fidelity,
                fidelity_se: se(&b[2]),
                mean_photon_number: p.photons,
                mean_photon_number_se: se(&b[3]),
                trace: 1.0,
            }
        })
        .collect();

    let squeezing = bench.stabilizers().squeezing_density(&density)?;
    let logical = bench.decoder().decode_density(&density)?;
    let summaries = trajectories
        .iter()
        .map(|t| {
            let last = t.observations.last().expect("final sample");
            let q = metrics_of(last, target);
            TrajectorySummary {
                index: t.index,
                jump_times: t.jump_times.clone(),
                final_db_x: q.db_x,
                final_db_p: q.db_p,
                final_fidelity: q.fidelity,
            }
        })
        .collect();
    Ok(EnsembleRun {
        schedule: *schedule,
        noise: *noise,
        target,
        timeline,
        density,
        squeezing,
        logical,
        trajectories: summaries,
    })
}
