//! Adiabatic preparation of the Floquet GKP states.
//!
//! The drive frequency starts detuned and is tuned into resonance along a
//! reversed logistic ramp. The oscillator itself stays at ω₀ (lab frame);
//! only the drive phases are chirped. The drive phase is accumulated from
//! the instantaneous frequency and anchored so that it coincides with the
//! resonant drive `ω₀t` at `t_f`, where the Floquet states are defined.

use std::f64::consts::PI;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::StateVector;
use crate::linalg::{self, C64};
use crate::metrics::{LogicalState, LogicalTarget, SqueezingReport};
use crate::model::PERIOD;
use crate::split::SplitEngine;
use crate::workbench::{Observation, Workbench};

/// Relative detuning of the initial drive frequency.
pub const DETUNING: f64 = PI * 1e-2;

/// Population limit in the top Fock levels during propagation.
pub const LEAKAGE_LIMIT: f64 = 1e-4;

/// Ramp shape from a grid search: largest noiseless squeezing at `t_f = 2000T`
/// among ramps that still gain at least 1 dB between `t_f = 1000T` and `2000T`.
pub const DEFAULT_SLOPE: f64 = 22.0;
pub const DEFAULT_CENTER: f64 = 0.55;

/// Sigmoid tuning of the drive frequency into resonance.
///
/// Times are in units of ω₀⁻¹ and `t_f` in drive periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RampSchedule {
    pub t_f: f64,
    pub omega_initial: f64,
    pub slope: f64,
    pub center: f64,
}

impl Default for RampSchedule {
    fn default() -> Self {
        Self::new(2000.0)
    }
}

impl RampSchedule {
    /// Default ramp: starts below resonance at ω₀/(1 + π·10⁻²).
    pub fn new(t_f: f64) -> Self {
        Self { t_f, omega_initial: 1.0 / (1.0 + DETUNING), slope: DEFAULT_SLOPE, center: DEFAULT_CENTER }
    }

    /// Ramp starting above resonance at ω₀/(1 − π·10⁻²).
    pub fn from_above(t_f: f64) -> Self {
        Self { omega_initial: 1.0 / (1.0 - DETUNING), ..Self::new(t_f) }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t_f.is_finite()
            && self.t_f > 0.0
            && self.omega_initial.is_finite()
            && self.omega_initial > 0.0
            && self.slope.is_finite()
            && self.slope > 0.0
            && (0.0..=1.0).contains(&self.center);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid ramp schedule {self:?}")))
        }
    }

    /// Duration in units of ω₀⁻¹.
    pub fn duration(&self) -> f64 {
        self.t_f * PERIOD
    }

    /// Normalized reversed sigmoid: 1 at `t = 0`, 0 at `t = t_f`.
    pub fn profile(&self, t: f64) -> f64 {
        let dur = self.duration();
        if t <= 0.0 {
            return 1.0;
        }
        if t >= dur {
            return 0.0;
        }
        let g = |x: f64| 1.0 / (1.0 + (self.slope * (x - self.center)).exp());
        let (g0, g1) = (g(0.0), g(1.0));
        (g(t / dur) - g1) / (g0 - g1)
    }

    /// ω(t)/ω₀.
    pub fn frequency(&self, t: f64) -> f64 {
        1.0 + (self.omega_initial - 1.0) * self.profile(t)
    }

    /// `4n∫₀ᵗω dt′` by the midpoint rule on the propagator step grid.
    pub fn drive_phase(&self, t: f64, harmonic: usize, steps_per_period: usize) -> f64 {
        let h = self.step(steps_per_period);
        let full = (t / h).floor() as usize;
        let mut acc: f64 = (0..full).map(|j| self.frequency((j as f64 + 0.5) * h) * h).sum();
        let rest = t - full as f64 * h;
        if rest > 0.0 {
            acc += self.frequency(full as f64 * h + rest / 2.0) * rest;
        }
        4.0 * harmonic as f64 * acc
    }

    fn n_steps(&self, steps_per_period: usize) -> usize {
        ((self.t_f * steps_per_period as f64).round() as usize).max(1)
    }

    fn step(&self, steps_per_period: usize) -> f64 {
        self.duration() / self.n_steps(steps_per_period) as f64
    }
}

/// Settings of the time-domain propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepConfig {
    /// Fixed steps per resonant period.
    pub steps_per_period: usize,
    /// Timeline sampling interval in periods.
    pub sample_every: usize,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self { steps_per_period: 256, sample_every: 10 }
    }
}

impl PrepConfig {
    pub fn validate(&self, n_harmonics: usize) -> Result<()> {
        if self.steps_per_period < 64 * n_harmonics {
            return Err(Error::InvalidArgument(format!(
                "steps_per_period {} below 64·N = {}",
                self.steps_per_period,
                64 * n_harmonics
            )));
        }
        if !(1..=10).contains(&self.sample_every) {
            return Err(Error::InvalidArgument(format!(
                "sample_every must be between 1 and 10 periods, got {}",
                self.sample_every
            )));
        }
        Ok(())
    }
}

/// Step-resolved drive: anchored phases at step boundaries and kick integrals.
#[derive(Debug, Clone)]
pub struct DrivePlan {
    step: f64,
    steps_per_period: usize,
    phases: Vec<f64>,
    kick_angles: Vec<f64>,
}

impl DrivePlan {
    pub fn new(schedule: &RampSchedule, n_harmonics: usize, j: f64, steps_per_period: usize) -> Result<Self> {
        schedule.validate()?;
        let n = schedule.n_steps(steps_per_period);
        let h = schedule.step(steps_per_period);
        let omega: Vec<f64> = (0..n).map(|k| schedule.frequency((k as f64 + 0.5) * h)).collect();
        let total: f64 = omega.iter().map(|w| w * h).sum();
        let mut phases = Vec::with_capacity(n + 1);
        phases.push(schedule.duration() - total);
        for w in &omega {
            let last = *phases.last().expect("non-empty");
            phases.push(last + w * h);
        }
        // ∫(2 + 4Σcos 4kΦ)dt with Φ linear across the step.
        let kick_angles = (0..n)
            .map(|k| {
                let (a, b, w) = (phases[k], phases[k + 1], omega[k]);
                let osc: f64 = (1..=n_harmonics)
                    .map(|m| {
                        let m = m as f64;
                        ((4.0 * m * b).sin() - (4.0 * m * a).sin()) / (m * w)
                    })
                    .sum();
                j * (2.0 * h + osc)
            })
            .collect();
        Ok(Self { step: h, steps_per_period, phases, kick_angles })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.kick_angles.len()
    }

    pub fn steps_per_period(&self) -> usize {
        self.steps_per_period
    }

    /// Anchored phase ω-integral at the boundary of step `k`.
    pub fn phase(&self, k: usize) -> f64 {
        self.phases[k]
    }

    pub fn kick_angles(&self) -> &[f64] {
        &self.kick_angles
    }
}

impl Workbench {
    pub fn engine(&self, plan: &DrivePlan, kappa: f64) -> Result<SplitEngine> {
        SplitEngine::new(self.ops(), plan.step(), kappa)
    }

    pub fn plan(&self, schedule: &RampSchedule, cfg: &PrepConfig) -> Result<DrivePlan> {
        cfg.validate(self.params().n_harmonics)?;
        DrivePlan::new(schedule, self.params().n_harmonics, self.params().j_over_omega0, cfg.steps_per_period)
    }
}

/// One row of a preparation timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineRecord {
    pub t_periods: f64,
    pub omega: f64,
    /// NaN where the stabilizer expectation vanishes.
    pub db_x: f64,
    pub db_p: f64,
    pub fidelity: f64,
    pub mean_photon_number: f64,
    pub norm: f64,
}

impl TimelineRecord {
    pub fn from_observation(t_periods: f64, omega: f64, obs: &Observation, target: LogicalTarget, norm: f64) -> Self {
        let (db_x, db_p) = obs.squeezing().map(|s| (s.db_x, s.db_p)).unwrap_or((f64::NAN, f64::NAN));
        let fidelity = obs.logical_state().map(|l| l.fidelity(target)).unwrap_or(f64::NAN);
        Self { t_periods, omega, db_x, db_p, fidelity, mean_photon_number: obs.photons, norm }
    }
}

/// Outcome of a noiseless preparation.
#[derive(Debug, Clone)]
pub struct PreparationRun {
    pub schedule: RampSchedule,
    pub target: LogicalTarget,
    pub timeline: Vec<TimelineRecord>,
    pub final_state: StateVector,
    pub squeezing: SqueezingReport,
    pub logical: LogicalState,
}

impl PreparationRun {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.logical.fidelity(self.target)
    }
}

pub(crate) fn check_leakage(top: f64) -> Result<()> {
    if top > LEAKAGE_LIMIT {
        Err(Error::Truncation { population: top, limit: LEAKAGE_LIMIT })
    } else {
        Ok(())
    }
}

/// Sample indices: every `sample_every` periods, plus the final step.
pub(crate) fn sample_steps(plan: &DrivePlan, sample_every: usize) -> Vec<usize> {
    let stride = plan.steps_per_period() * sample_every;
    let n = plan.n_steps();
    let mut s: Vec<usize> = (0..n).step_by(stride).collect();
    s.push(n);
    s
}

/// Propagate `initial` through the ramp without loss or noise.
pub fn prepare(
    bench: &Workbench,
    initial: &StateVector,
    schedule: &RampSchedule,
    cfg: &PrepConfig,
    target: LogicalTarget,
) -> Result<PreparationRun> {
    let norm = linalg::norm_sqr(initial).sqrt();
    if initial.len() != bench.space().dim() || (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "initial state must be a normalized vector of length {}",
            bench.space().dim()
        )));
    }
    let plan = bench.plan(schedule, cfg)?;
    let engine = bench.engine(&plan, 0.0)?;
    let samples = sample_steps(&plan, cfg.sample_every);
    let mut z = engine.enter(initial);
    let mut scratch = Vec::new();
    let mut timeline = Vec::with_capacity(samples.len());
    let mut next = 0;
    for k in 0..=plan.n_steps() {
        if samples.get(next) == Some(&k) {
            next += 1;
            let psi = engine.leave(&z);
            let obs = bench.observe(&psi);
            check_leakage(obs.top)?;
            let t = k as f64 * plan.step();
            timeline.push(TimelineRecord::from_observation(
                t / PERIOD,
                schedule.frequency(t),
                &obs,
                target,
                linalg::norm_sqr(&psi).sqrt(),
            ));
        }
        if k < plan.n_steps() {
            engine.advance(&mut z, plan.kick_angles()[k], &mut scratch);
        }
    }
    let final_state = engine.leave(&z);
    let drift = (linalg::norm_sqr(&final_state).sqrt() - 1.0).abs();
    if drift > 1e-8 {
        return Err(Error::Numerical(format!("norm drifted by {drift:.2e} in unitary propagation")));
    }
    let squeezing = bench.stabilizers().squeezing(&final_state)?;
    let logical = bench.decoder().decode(&final_state)?;
    Ok(PreparationRun { schedule: *schedule, target, timeline, final_state, squeezing, logical })
}

/// Preparation from `α|0⟩ + β|2⟩`, compared against a Floquet pair.
#[derive(Debug, Clone)]
pub struct SuperpositionRun {
    pub run: PreparationRun,
    /// Relative phase φ in `α|ψ₊⟩ + e^{iφ}β|ψ₋⟩`.
    pub phase: f64,
    /// `|⟨ψ₊|final⟩|²` and `|⟨ψ₋|final⟩|²`.
    pub weights: [f64; 2],
    pub bloch: [f64; 3],
}

pub fn prepare_superposition(
    bench: &Workbench,
    alpha: C64,
    beta: C64,
    schedule: &RampSchedule,
    cfg: &PrepConfig,
    pair: (&StateVector, &StateVector),
) -> Result<SuperpositionRun> {
    if ((alpha.norm_sqr() + beta.norm_sqr()) - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument("superposition amplitudes must satisfy |α|² + |β|² = 1".into()));
    }
    let mut initial: StateVector = Array1::zeros(bench.space().dim());
    initial[0] = alpha;
    initial[2] = beta;
    let run = prepare(bench, &initial, schedule, cfg, LogicalTarget::HPlus)?;
    let cp = linalg::inner(pair.0, &run.final_state);
    let cm = linalg::inner(pair.1, &run.final_state);
    let phase = if alpha.norm() > 0.0 && beta.norm() > 0.0 { ((cm / beta) / (cp / alpha)).arg() } else { 0.0 };
    let bloch = run.logical.bloch();
    Ok(SuperpositionRun { run, phase, weights: [cp.norm_sqr(), cm.norm_sqr()], bloch })
}
