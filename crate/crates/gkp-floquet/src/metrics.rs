//! GKP quality metrics: stabilizer expectations, squeezing, the ideal
//! decoder, and phase-space pictures.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{hermite_functions, DensityMatrix, FockSpace, StateVector};
use crate::linalg::{matvec, C64, ZERO};

/// Stabilizer generators `D(√2π)` (x-type) and `D(i√2π)` (p-type).
#[derive(Debug, Clone)]
pub struct Stabilizers {
    x_type: Array2<C64>,
    p_type: Array2<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    XType,
    PType,
}

impl Stabilizers {
    pub fn new(space: &FockSpace) -> Result<Self> {
        let l = (2.0 * PI).sqrt();
        Ok(Self { x_type: space.displacement(C64::new(l, 0.0))?, p_type: space.displacement(C64::new(0.0, l))? })
    }

    pub fn operator(&self, g: Generator) -> &Array2<C64> {
        match g {
            Generator::XType => &self.x_type,
            Generator::PType => &self.p_type,
        }
    }

    /// `⟨ψ|D|ψ⟩/⟨ψ|ψ⟩`
    pub fn expectation(&self, state: &StateVector, g: Generator) -> C64 {
        let dv = matvec(self.operator(g), state);
        crate::linalg::inner(state, &dv) / crate::linalg::norm_sqr(state)
    }

    /// `Tr(D ρ)/Tr ρ`
    pub fn expectation_density(&self, rho: &DensityMatrix, g: Generator) -> C64 {
        let d = self.operator(g);
        let tr: C64 = rho.diag().iter().sum();
        let mut acc = ZERO;
        for ((i, j), v) in d.indexed_iter() {
            acc += v * rho[[j, i]];
        }
        acc / tr
    }

    pub fn squeezing(&self, state: &StateVector) -> Result<SqueezingReport> {
        SqueezingReport::from_expectations(
            self.expectation(state, Generator::XType),
            self.expectation(state, Generator::PType),
        )
    }

    pub fn squeezing_density(&self, rho: &DensityMatrix) -> Result<SqueezingReport> {
        SqueezingReport::from_expectations(
            self.expectation_density(rho, Generator::XType),
            self.expectation_density(rho, Generator::PType),
        )
    }
}

/// Δ = √(−ln|⟨D⟩|²/2π) for one generator.
pub fn squeezing_delta(expectation: C64) -> Result<f64> {
    let m = expectation.norm();
    if m == 0.0 || !m.is_finite() {
        return Err(Error::UndefinedSqueezing);
    }
    if m > 1.0 + 1e-8 {
        return Err(Error::Numerical(format!("|<D>| = {m} exceeds 1")));
    }
    let m = m.min(1.0);
    Ok((-(m * m).ln() / (2.0 * PI)).sqrt())
}

/// S = −10 log₁₀ Δ²
pub fn delta_to_db(delta: f64) -> f64 {
    -10.0 * (delta * delta).log10()
}

pub fn db_to_delta(db: f64) -> f64 {
    10f64.powf(-db / 20.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub delta_x: f64,
    pub delta_p: f64,
    pub db_x: f64,
    pub db_p: f64,
}

impl SqueezingReport {
    pub fn from_expectations(x: C64, p: C64) -> Result<Self> {
        let delta_x = squeezing_delta(x)?;
        let delta_p = squeezing_delta(p)?;
        Ok(Self { delta_x, delta_p, db_x: delta_to_db(delta_x), db_p: delta_to_db(delta_p) })
    }

    /// The x-type value, which is the headline number for Fourier-symmetric states.
    pub fn db(&self) -> f64 {
        self.db_x
    }
}

/// Hadamard eigenstates `|H±⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogicalTarget {
    #[serde(rename = "H+")]
    HPlus,
    #[serde(rename = "H-")]
    HMinus,
}

impl LogicalTarget {
    pub fn amplitudes(&self) -> [f64; 2] {
        let (c, s) = ((PI / 8.0).cos(), (PI / 8.0).sin());
        match self {
            LogicalTarget::HPlus => [c, s],
            LogicalTarget::HMinus => [-s, c],
        }
    }
}

/// 2×2 logical density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogicalState {
    pub rho: [[C64; 2]; 2],
}

impl LogicalState {
    pub fn fidelity(&self, target: LogicalTarget) -> f64 {
        let v = target.amplitudes();
        let mut f = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                f += v[i] * self.rho[i][j] * v[j];
            }
        }
        f.re
    }

    /// Bloch vector (X, Y, Z).
    pub fn bloch(&self) -> [f64; 3] {
        let r01 = self.rho[0][1];
        [2.0 * r01.re, -2.0 * r01.im, (self.rho[0][0] - self.rho[1][1]).re]
    }

    pub fn trace(&self) -> C64 {
        self.rho[0][0] + self.rho[1][1]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.rho[0][0].re;
        let d = self.rho[1][1].re;
        let b = self.rho[0][1].norm();
        (a + d) / 2.0 - (((a - d) / 2.0).powi(2) + b * b).sqrt()
    }

    /// Normalize a decoded block by its trace, rejecting non-positive results.
    pub fn from_unnormalized(rho: [[C64; 2]; 2]) -> Result<Self> {
        let tr = (rho[0][0] + rho[1][1]).re;
        if !(tr > 0.0) {
            return Err(Error::Decoder(format!("decoded trace {tr} is not positive")));
        }
        let s = Self { rho: rho.map(|row| row.map(|v| v / tr)) };
        if s.min_eigenvalue() < -1e-6 {
            return Err(Error::Decoder(format!(
                "decoded state has eigenvalue {:.3e}; grid or Fock truncation is insufficient",
                s.min_eigenvalue()
            )));
        }
        Ok(s)
    }
}

/// Kernel weight coupling bins whose integer offset is `d`: sinc(πd/2).
pub fn bin_weight(d: i64) -> f64 {
    if d == 0 {
        1.0
    } else if d % 2 == 0 {
        0.0
    } else {
        let sign = if (d.abs() - 1) / 2 % 2 == 0 { 1.0 } else { -1.0 };
        2.0 * sign / (PI * d.abs() as f64)
    }
}

/// Quadrature settings of the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderGrid {
    /// Gauss-Legendre nodes per bin in the gauge coordinate u.
    pub u_nodes: usize,
    /// Bins s = −s_max..=s_max.
    pub s_max: i64,
}

impl DecoderGrid {
    /// Enough bins to cover the classically allowed region of the top Fock
    /// level plus a decay margin.
    pub fn for_dim(dim: usize) -> Self {
        let reach = (2.0 * dim as f64 + 1.0).sqrt() + 8.0;
        Self { u_nodes: 64, s_max: (reach / (2.0 * PI.sqrt())).ceil() as i64 }
    }
}

/// Gauss-Legendre nodes and weights on [−1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Position of bin `(s, μ)` at gauge offset `u`.
fn bin_point(s: i64, mu: usize, u: f64) -> f64 {
    PI.sqrt() * (2 * s + mu as i64) as f64 + u
}

/// Quadrature nodes and weights in u ∈ [−√π/2, √π/2).
fn gauge_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = PI.sqrt() / 2.0;
    (x.iter().map(|v| v * half).collect(), w.iter().map(|v| v * half).collect())
}

/// Ideal GKP decoder from the stabilizer subsystem decomposition.
///
/// Position is split as x = √π(2s + μ) + u. The logical matrix is
/// ρ_L[μ,ν] = ∫du Σ_{s,s′} w(d) ρ(x_{sμ}(u), x_{s′ν}(u)) with
/// d = 2(s − s′) + μ − ν and w = [`bin_weight`]. The kernel makes the
/// Fourier transform act as the logical Hadamard exactly; a plain
/// same-bin partial trace (w = δ_{d0}) does not.
///
/// In the Fock basis this is linear in ρ with precomputed real kernels
/// `G_{μν}[m, n]`, so `ρ_L[μ,ν] = Σ ρ_{mn} G_{μν}[m, n]`.
#[derive(Debug, Clone)]
pub struct Decoder {
    grid: DecoderGrid,
    g00: Array2<f64>,
    g01: Array2<f64>,
    g11: Array2<f64>,
}

impl Decoder {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_grid(dim, DecoderGrid::for_dim(dim))
    }

    pub fn with_grid(dim: usize, grid: DecoderGrid) -> Result<Self> {
        let (us, ws) = gauge_nodes(grid.u_nodes);
        let bins: Vec<i64> = (-grid.s_max..=grid.s_max).collect();
        let nb = bins.len();
        let weight = |mu: usize, nu: usize| {
            Array2::from_shape_fn((nb, nb), |(a, b)| bin_weight(2 * (bins[a] - bins[b]) + mu as i64 - nu as i64))
        };
        let (w00, w01, w11) = (weight(0, 0), weight(0, 1), weight(1, 1));
        let mut g00 = Array2::<f64>::zeros((dim, dim));
        let mut g01 = Array2::<f64>::zeros((dim, dim));
        let mut g11 = Array2::<f64>::zeros((dim, dim));
        for (&u, &wu) in us.iter().zip(&ws) {
            // Rows: bins, columns: Fock index.
            let mut h = [Array2::<f64>::zeros((nb, dim)), Array2::<f64>::zeros((nb, dim))];
            for mu in 0..2 {
                for (a, &s) in bins.iter().enumerate() {
                    let hv = hermite_functions(dim, bin_point(s, mu, u))?;
                    h[mu].row_mut(a).assign(&Array1::from(hv));
                }
            }
            let sandwich = |hm: &Array2<f64>, w: &Array2<f64>, hn: &Array2<f64>| hm.t().dot(&w.dot(hn));
            g00.scaled_add(wu, &sandwich(&h[0], &w00, &h[0]));
            g01.scaled_add(wu, &sandwich(&h[0], &w01, &h[1]));
            g11.scaled_add(wu, &sandwich(&h[1], &w11, &h[1]));
        }
        Ok(Self { grid, g00, g01, g11 })
    }

    pub fn dim(&self) -> usize {
        self.g00.nrows()
    }

    pub fn grid(&self) -> DecoderGrid {
        self.grid
    }

    /// Raw (unnormalized) logical matrix of a pure state.
    pub fn decode_unnormalized(&self, state: &StateVector) -> [[C64; 2]; 2] {
        let re = state.mapv(|c| c.re);
        let im = state.mapv(|c| c.im);
        // cᵀ G c̄ with real G.
        let form = |g: &Array2<f64>| {
            let gr = g.dot(&re);
            let gi = g.dot(&im);
            state.iter().zip(gr.iter().zip(&gi)).map(|(c, (r, i))| c * C64::new(*r, -*i)).sum::<C64>()
        };
        let r00 = form(&self.g00);
        let r01 = form(&self.g01);
        let r11 = form(&self.g11);
        [[r00, r01], [r01.conj(), r11]]
    }

    pub fn decode(&self, state: &StateVector) -> Result<LogicalState> {
        self.check_dim(state.len())?;
        LogicalState::from_unnormalized(self.decode_unnormalized(state))
    }

    pub fn decode_density(&self, rho: &DensityMatrix) -> Result<LogicalState> {
        self.check_dim(rho.nrows())?;
        let form = |g: &Array2<f64>| {
            let mut acc = ZERO;
            for ((m, n), v) in g.indexed_iter() {
                acc += rho[[m, n]] * *v;
            }
            acc
        };
        let r00 = form(&self.g00);
        let r01 = form(&self.g01);
        let r11 = form(&self.g11);
        // ρ_L[1,0] uses G₁₀ = G₀₁ᵀ.
        let mut r10 = ZERO;
        for ((m, n), v) in self.g01.indexed_iter() {
            r10 += rho[[n, m]] * *v;
        }
        LogicalState::from_unnormalized([[r00, r01], [r10, r11]])
    }

    pub fn fidelity(&self, state: &StateVector, target: LogicalTarget) -> Result<f64> {
        Ok(self.decode(state)?.fidelity(target))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "state dimension {d} does not match decoder dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Decode a wavefunction given directly in position space.
///
/// Uses the same kernel as [`Decoder`] without any Fock representation;
/// serves as an independent check of it.
pub fn decode_wavefunction<F: Fn(f64) -> C64>(psi: F, grid: DecoderGrid) -> Result<LogicalState> {
    let (us, ws) = gauge_nodes(grid.u_nodes);
    let bins: Vec<i64> = (-grid.s_max..=grid.s_max).collect();
    let mut rho = [[ZERO; 2]; 2];
    for (&u, &wu) in us.iter().zip(&ws) {
        let vals: [Vec<C64>; 2] = [0, 1].map(|mu| bins.iter().map(|&s| psi(bin_point(s, mu, u))).collect());
        for mu in 0..2 {
            for nu in 0..2 {
                let mut acc = ZERO;
                for (a, &s) in bins.iter().enumerate() {
                    for (b, &t) in bins.iter().enumerate() {
                        let w = bin_weight(2 * (s - t) + mu as i64 - nu as i64);
                        if w != 0.0 {
                            acc += w * vals[mu][a] * vals[nu][b].conj();
                        }
                    }
                }
                rho[mu][nu] += wu * acc;
            }
        }
    }
    LogicalState::from_unnormalized(rho)
}

/// Finite-energy GKP state `e^{−β n̂} Σ_μ c_μ |μ_L⟩`, normalized.
///
/// The ideal codewords enter through their Fock amplitudes
/// `⟨n|μ_L⟩ ∝ Σ_s hₙ(√π(2s + μ))`.
pub fn finite_energy_state(space: &FockSpace, logical: [C64; 2], beta: f64) -> Result<StateVector> {
    let d = space.dim();
    let s_max = DecoderGrid::for_dim(d).s_max;
    let mut amp = Array1::<C64>::zeros(d);
    for (mu, c) in logical.iter().enumerate() {
        for s in -s_max..=s_max {
            let h = hermite_functions(d, bin_point(s, mu, 0.0))?;
            for n in 0..d {
                amp[n] += c * h[n];
            }
        }
    }
    for n in 0..d {
        amp[n] *= (-beta * n as f64).exp();
    }
    crate::fock::normalize(&mut amp);
    Ok(amp)
}

pub fn finite_energy_magic_state(space: &FockSpace, target: LogicalTarget, beta: f64) -> Result<StateVector> {
    let [a, b] = target.amplitudes();
    finite_energy_state(space, [C64::new(a, 0.0), C64::new(b, 0.0)], beta)
}

/// Wigner function W(x, p) = (1/π) Σₙ (−1)ⁿ |⟨n|D(−α)|ψ⟩|², α = (x + ip)/√2,
/// on the product grid `xs × ps` (rows x, columns p).
pub fn wigner(space: &FockSpace, state: &StateVector, xs: &[f64], ps: &[f64]) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            ps.iter()
                .map(|&p| {
                    let alpha = C64::new(x, p) / 2f64.sqrt();
                    let phi = matvec(&space.displacement(-alpha)?, state);
                    let parity: f64 = phi
                        .iter()
                        .enumerate()
                        .map(|(n, c)| if n % 2 == 0 { c.norm_sqr() } else { -c.norm_sqr() })
                        .sum();
                    Ok(parity / PI)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_fn((xs.len(), ps.len()), |(i, j)| rows[i][j]))
}

/// Position and momentum densities |ψ(x)|², |ψ̃(p)|².
pub fn marginals(state: &StateVector, xs: &[f64], ps: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let px = crate::fock::position_wavefunction(state, xs)?.iter().map(|c| c.norm_sqr()).collect();
    let pp = crate::fock::momentum_wavefunction(state, ps)?.iter().map(|c| c.norm_sqr()).collect();
    Ok((px, pp))
}
