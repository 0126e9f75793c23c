//! One-period propagators, Floquet diagonalization and GKP-state selection.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, complexify, C64};
use crate::metrics::{Decoder, LogicalTarget, SqueezingReport, Stabilizers};
use crate::model::{harmonic_drive, ModelOperators, PERIOD};
use crate::workbench::Workbench;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    MidpointExponential,
    CommutatorFree4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub steps_per_period: usize,
    pub scheme: Scheme,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { steps_per_period: 512, scheme: Scheme::CommutatorFree4 }
    }
}

impl IntegratorConfig {
    /// 128 steps per harmonic.
    pub fn for_harmonics(n: usize) -> Self {
        Self { steps_per_period: 128 * n, scheme: Scheme::CommutatorFree4 }
    }

    pub fn validate(&self, n_harmonics: usize) -> Result<()> {
        if self.steps_per_period < 64 * n_harmonics {
            return Err(Error::InvalidArgument(format!(
                "steps_per_period {} below 64·N = {}; the fastest harmonic is unresolved",
                self.steps_per_period,
                64 * n_harmonics
            )));
        }
        Ok(())
    }
}

/// Index sets of the even and odd Fock levels.
pub fn parity_blocks(dim: usize) -> [Vec<usize>; 2] {
    [(0..dim).step_by(2).collect(), (1..dim).step_by(2).collect()]
}

fn sub_matrix(a: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((idx.len(), idx.len()), |(i, j)| a[[idx[i], idx[j]]])
}

/// Blocks the propagator decomposes into: parity sectors when the model
/// conserves parity, otherwise the whole space.
fn blocks_for(ops: &ModelOperators) -> Vec<Vec<usize>> {
    if ops.sin_x().is_some() {
        vec![(0..ops.dim()).collect()]
    } else {
        parity_blocks(ops.dim()).to_vec()
    }
}

fn embed(blocks: &[Vec<usize>], parts: &[Array2<C64>], dim: usize) -> Array2<C64> {
    let mut u = Array2::<C64>::zeros((dim, dim));
    for (idx, part) in blocks.iter().zip(parts) {
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                u[[i, j]] = part[[a, b]];
            }
        }
    }
    u
}

/// Kicked-oscillator period map `(e^{−iθn̂} e^{iJ(T/2)cos(2√πηx̂)})⁴`.
///
/// `quarter_angle` is ω₀T/4; π/2 is the resonant case. The kick sign follows
/// Ĥ(t) = ω₀n̂ − J f(t) cos(2√πx̂), so the stroboscopic map is e^{−iTĤ_GKP}.
pub fn kicked_propagator(ops: &ModelOperators, quarter_angle: f64) -> Result<Array2<C64>> {
    let j = ops.params().j_over_omega0;
    let kick = linalg::expm_i_symmetric(ops.cos_x(), -j * PERIOD / 2.0)?;
    let d = ops.dim();
    let free = Array1::from_shape_fn(d, |n| C64::from_polar(1.0, -quarter_angle * n as f64));
    let mut step = kick;
    for (n, mut row) in step.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v * free[n]);
    }
    let two = step.dot(&step);
    Ok(two.dot(&two))
}

/// e^{−iTĤ} for a static real symmetric Ĥ.
pub fn static_propagator(h: &Array2<f64>) -> Result<Array2<C64>> {
    linalg::expm_i_symmetric(h, PERIOD)
}

/// Time-ordered one-period propagator of the harmonic drive at resonance.
pub fn harmonic_propagator(ops: &ModelOperators, cfg: IntegratorConfig) -> Result<Array2<C64>> {
    detuned_propagator(ops, cfg, 1.0)
}

/// Propagator over one drive period `2π/ω` for a drive at frequency `ω`,
/// with the oscillator kept at ω₀.
pub fn detuned_propagator(ops: &ModelOperators, cfg: IntegratorConfig, omega: f64) -> Result<Array2<C64>> {
    cfg.validate(ops.params().n_harmonics)?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("drive frequency must be positive, got {omega}")));
    }
    let n_h = ops.params().n_harmonics;
    let j = ops.params().j_over_omega0;
    let blocks = blocks_for(ops);
    let h = PERIOD / omega / cfg.steps_per_period as f64;
    let drive = |t: f64| harmonic_drive(n_h, omega * t);
    let mut parts = Vec::with_capacity(blocks.len());
    for idx in &blocks {
        let number = Array2::from_diag(&Array1::from_iter(idx.iter().map(|&i| ops.number()[i])));
        let cx = sub_matrix(ops.cos_x(), idx);
        let sx = ops.sin_x().map(|s| sub_matrix(s, idx));
        // Exponent for weights (b1, b2) at nodes (f1, f2); the static part
        // carries b1 + b2.
        let generator = |terms: &[(f64, f64)]| {
            let wsum: f64 = terms.iter().map(|t| t.0).sum();
            let fsum: f64 = terms.iter().map(|t| t.0 * t.1).sum();
            let mut m = &number * wsum;
            m.scaled_add(-j * fsum, &cx);
            if let Some(sx) = &sx {
                let asum: f64 = terms.iter().map(|t| t.0 * ops.asymmetry_coefficient(t.1)).sum();
                m.scaled_add(asum, sx);
            }
            m
        };
        let mut u = Array2::<C64>::eye(idx.len());
        for k in 0..cfg.steps_per_period {
            let t0 = k as f64 * h;
            let stages: Vec<Array2<f64>> = match cfg.scheme {
                Scheme::MidpointExponential => vec![generator(&[(1.0, drive(t0 + h / 2.0))])],
                Scheme::CommutatorFree4 => {
                    let r3 = 3f64.sqrt();
                    let (a1, a2) = ((3.0 - 2.0 * r3) / 12.0, (3.0 + 2.0 * r3) / 12.0);
                    let f1 = drive(t0 + (0.5 - r3 / 6.0) * h);
                    let f2 = drive(t0 + (0.5 + r3 / 6.0) * h);
                    // Applied right to left: the first factor weights the earlier node.
                    vec![generator(&[(a2, f1), (a1, f2)]), generator(&[(a1, f1), (a2, f2)])]
                }
            };
            for m in stages {
                u = linalg::expm_i_symmetric(&m, h)?.dot(&u);
            }
        }
        parts.push(u);
    }
    let u = embed(&blocks, &parts, ops.dim());
    let defect = linalg::unitarity_defect(&u);
    if defect > 1e-8 {
        return Err(Error::Numerical(format!("propagator unitarity defect {defect:.2e}")));
    }
    Ok(u)
}

/// Harmonic propagator refined by step doubling until successive results
/// differ by less than `tol` in spectral norm.
///
/// Fails after reaching four times the initial step count.
pub fn converged_harmonic_propagator(
    ops: &ModelOperators,
    cfg: IntegratorConfig,
    tol: f64,
) -> Result<(Array2<C64>, IntegratorConfig)> {
    let mut cur_cfg = cfg;
    let mut cur = harmonic_propagator(ops, cur_cfg)?;
    let mut last_change = f64::INFINITY;
    while cur_cfg.steps_per_period < 4 * cfg.steps_per_period {
        let next_cfg = IntegratorConfig { steps_per_period: 2 * cur_cfg.steps_per_period, ..cur_cfg };
        let next = harmonic_propagator(ops, next_cfg)?;
        last_change = linalg::spectral_norm((&next - &cur).view())?;
        cur = next;
        cur_cfg = next_cfg;
        if last_change < tol {
            return Ok((cur, cur_cfg));
        }
    }
    Err(Error::Integrator(format!(
        "propagator still changes by {last_change:.2e} at {} steps per period (tolerance {tol:.1e})",
        cur_cfg.steps_per_period
    )))
}

/// Metrics of one Floquet state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub index: usize,
    pub quasienergy: f64,
    /// None when the stabilizer expectation vanishes.
    pub squeezing: Option<SqueezingReport>,
    pub fidelity_plus: f64,
    pub fidelity_minus: f64,
    /// ⟨R(π/2)⟩, real part.
    pub rotation: f64,
    pub mean_photon_number: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkpPair {
    pub plus: StateMetrics,
    pub minus: StateMetrics,
}

#[derive(Debug, Clone)]
pub struct FloquetSolution {
    pub u_period: Array2<C64>,
    /// Quasienergies in (−π/T, π/T], units of ω₀.
    pub quasienergies: Array1<f64>,
    /// Floquet states as columns.
    pub states: Array2<C64>,
    pub eig_residual: f64,
    pub gkp_pair: Option<GkpPair>,
}

impl FloquetSolution {
    pub fn state(&self, i: usize) -> Array1<C64> {
        self.states.column(i).to_owned()
    }
}

/// Fold a quasienergy into (−π/T, π/T].
pub fn fold_quasienergy(e: f64) -> f64 {
    let w = 2.0 * PI / PERIOD;
    let mut f = e.rem_euclid(w);
    if f > w / 2.0 {
        f -= w;
    }
    f
}

fn is_parity_block_diagonal(u: &Array2<C64>) -> bool {
    u.indexed_iter().all(|((i, j), v)| (i + j) % 2 == 0 || v.norm() < 1e-13)
}

/// Full eigendecomposition of a one-period propagator.
///
/// Parity-conserving propagators are diagonalized per sector so that every
/// Floquet state has definite parity.
pub fn floquet_states(u_period: Array2<C64>) -> Result<FloquetSolution> {
    let d = u_period.nrows();
    let blocks = if is_parity_block_diagonal(&u_period) { parity_blocks(d).to_vec() } else { vec![(0..d).collect()] };
    let mut vals = Array1::<C64>::zeros(d);
    let mut states = Array2::<C64>::zeros((d, d));
    let mut residual: f64 = 0.0;
    let mut col = 0;
    for idx in &blocks {
        let sub = Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| u_period[[idx[a], idx[b]]]);
        let (w, v, r) = linalg::unitary_eig(&sub, 1e-9)?;
        residual = residual.max(r);
        for k in 0..idx.len() {
            vals[col] = w[k];
            for (a, &i) in idx.iter().enumerate() {
                states[[i, col]] = v[[a, k]];
            }
            col += 1;
        }
    }
    if residual > 1e-8 {
        return Err(Error::Numerical(format!("Floquet eigensolver residual {residual:.2e}")));
    }
    let quasienergies = vals.mapv(|z| fold_quasienergy(-z.arg() / PERIOD));
    Ok(FloquetSolution { u_period, quasienergies, states, eig_residual: residual, gkp_pair: None })
}

/// Squeezing, decoded fidelities and rotation character of every state.
pub fn state_metrics(sol: &FloquetSolution, stabilizers: &Stabilizers, decoder: &Decoder) -> Result<Vec<StateMetrics>> {
    let d = sol.states.nrows();
    let rot = Array1::from_shape_fn(d, |n| C64::from_polar(1.0, PI / 2.0 * n as f64));
    (0..sol.states.ncols())
        .map(|i| {
            let v = sol.state(i);
            let logical = decoder.decode(&v)?;
            let rotation: C64 = v.iter().zip(&rot).map(|(c, r)| c.norm_sqr() * r).sum();
            Ok(StateMetrics {
                index: i,
                quasienergy: sol.quasienergies[i],
                squeezing: stabilizers.squeezing(&v).ok(),
                fidelity_plus: logical.fidelity(LogicalTarget::HPlus),
                fidelity_minus: logical.fidelity(LogicalTarget::HMinus),
                rotation: rotation.re,
                mean_photon_number: crate::fock::mean_photon_number(&v),
            })
        })
        .collect()
}

/// Pick |ψ±⟩ as the states of maximal decoded fidelity to |H±⟩, ties broken
/// by squeezing.
pub fn select_gkp_pair(metrics: &[StateMetrics]) -> Result<GkpPair> {
    let sq = |m: &StateMetrics| m.squeezing.map(|s| s.db_x).unwrap_or(f64::NEG_INFINITY);
    let best = |fid: fn(&StateMetrics) -> f64| {
        metrics
            .iter()
            .copied()
            .max_by(|a, b| fid(a).total_cmp(&fid(b)).then(sq(a).total_cmp(&sq(b))))
            .ok_or_else(|| Error::InvalidArgument("no Floquet states to select from".into()))
    };
    Ok(GkpPair { plus: best(|m| m.fidelity_plus)?, minus: best(|m| m.fidelity_minus)? })
}

pub fn select_gkp_states(sol: &mut FloquetSolution, stabilizers: &Stabilizers, decoder: &Decoder) -> Result<GkpPair> {
    let metrics = state_metrics(sol, stabilizers, decoder)?;
    let pair = select_gkp_pair(&metrics)?;
    sol.gkp_pair = Some(pair);
    Ok(pair)
}

/// Ĥ_F = (i/T) log Û_T from the principal branch, restricted to the lowest
/// `keep` Fock levels.
pub fn effective_hamiltonian(sol: &FloquetSolution, keep: usize) -> Array2<C64> {
    let v = &sol.states;
    let mut scaled = v.clone();
    for (mut c, &e) in scaled.columns_mut().into_iter().zip(&sol.quasienergies) {
        c.mapv_inplace(|x| x * e);
    }
    let h = scaled.dot(&linalg::adjoint(v));
    h.slice(s![..keep, ..keep]).to_owned()
}

/// ‖Ĥ_F − Ĥ⁽ᴺ⁾‖ on the lowest `keep` Fock levels.
pub fn effective_hamiltonian_deviation(sol: &FloquetSolution, target: &Array2<f64>, keep: usize) -> Result<f64> {
    let hf = effective_hamiltonian(sol, keep);
    let t = complexify(&target.slice(s![..keep, ..keep]).to_owned());
    linalg::spectral_norm((&hf - &t).view())
}

/// Largest over all states of the largest single-Fock-level population
/// deficit, `max_i (1 − max_n |⟨n|ψᵢ⟩|²)`.
pub fn worst_fock_overlap_deficit(sol: &FloquetSolution) -> f64 {
    sol.states
        .columns()
        .into_iter()
        .map(|c| 1.0 - c.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// Harmonic-drive Floquet analysis with every state's metrics.
#[derive(Debug, Clone)]
pub struct FloquetReport {
    pub solution: FloquetSolution,
    pub metrics: Vec<StateMetrics>,
    pub pair: GkpPair,
    pub integrator: IntegratorConfig,
}

impl FloquetReport {
    pub fn plus_state(&self) -> Array1<C64> {
        self.solution.state(self.pair.plus.index)
    }

    pub fn minus_state(&self) -> Array1<C64> {
        self.solution.state(self.pair.minus.index)
    }
}

pub fn analyze(bench: &Workbench, cfg: IntegratorConfig) -> Result<FloquetReport> {
    let u = harmonic_propagator(bench.ops(), cfg)?;
    let mut solution = floquet_states(u)?;
    let metrics = state_metrics(&solution, bench.stabilizers(), bench.decoder())?;
    let pair = select_gkp_pair(&metrics)?;
    solution.gkp_pair = Some(pair);
    Ok(FloquetReport { solution, metrics, pair, integrator: cfg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use crate::linalg::ONE;
    use crate::model::ModelParams;

    fn identity(d: usize) -> Array2<C64> {
        Array2::from_diag(&Array1::from_elem(d, ONE))
    }

    #[test]
    fn zero_coupling_is_identity_at_resonance() {
        let s = FockSpace::new(20).unwrap();
        let ops =
            ModelOperators::new(&s, ModelParams { j_over_omega0: 0.0, n_harmonics: 1, ..Default::default() }).unwrap();
        let u = harmonic_propagator(&ops, IntegratorConfig { steps_per_period: 64, scheme: Scheme::CommutatorFree4 })
            .unwrap();
        assert!(u.indexed_iter().all(|((i, j), v)| (v - if i == j { ONE } else { C64::new(0.0, 0.0) }).norm() < 1e-11));
        let k = kicked_propagator(&ops, PI / 2.0).unwrap();
        assert!(k.indexed_iter().all(|((i, j), v)| (v - if i == j { ONE } else { C64::new(0.0, 0.0) }).norm() < 1e-11));
    }

    #[test]
    fn identity_has_zero_quasienergies() {
        let sol = floquet_states(identity(6)).unwrap();
        assert!(sol.quasienergies.iter().all(|e| e.abs() < 1e-15));
    }

    #[test]
    fn diagonal_phases_give_fock_states() {
        let theta = 0.3;
        let u = Array2::from_diag(&Array1::from_shape_fn(5, |n| C64::from_polar(1.0, -theta * n as f64)));
        let sol = floquet_states(u).unwrap();
        for i in 0..5 {
            let c = sol.state(i);
            let n = (0..5).max_by(|&a, &b| c[a].norm().total_cmp(&c[b].norm())).unwrap();
            assert!((c[n].norm() - 1.0).abs() < 1e-12);
            assert!((sol.quasienergies[i] - fold_quasienergy(theta * n as f64 / PERIOD)).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_steps_rejected() {
        let cfg = IntegratorConfig { steps_per_period: 100, scheme: Scheme::CommutatorFree4 };
        assert!(cfg.validate(2).is_err());
    }
}
