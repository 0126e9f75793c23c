//! Model Hamiltonians in units of ω₀ (time in units of 1/ω₀, so T = 2π).

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::linalg::C64;

/// Drive period in units of 1/ω₀.
pub const PERIOD: f64 = 2.0 * PI;

/// Resistance quantum h/(2e)² in ohms.
pub const RESISTANCE_QUANTUM: f64 = 6_453.204_8;

/// Dimensionless parameters of the driven oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// J/ω₀
    pub j_over_omega0: f64,
    /// Number of drive harmonics N.
    pub n_harmonics: usize,
    /// η² = Z/(2R_Q)
    pub impedance_ratio: f64,
    /// d = ΔE_J/E_J
    pub ej_asymmetry: f64,
    /// E_J/(ħω₀); only enters through the asymmetry term and flux noise.
    pub ej_over_omega0: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { j_over_omega0: 2.5e-3, n_harmonics: 4, impedance_ratio: 1.0, ej_asymmetry: 0.0, ej_over_omega0: 2.0 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.j_over_omega0.is_finite() && self.j_over_omega0 >= 0.0) {
            return bad(format!("j_over_omega0 must be finite and non-negative, got {}", self.j_over_omega0));
        }
        if self.n_harmonics == 0 {
            return bad("n_harmonics must be at least 1".into());
        }
        if !(self.impedance_ratio > 0.5 && self.impedance_ratio < 1.5) {
            return bad(format!("impedance_ratio {} outside the sanity bound (0.5, 1.5)", self.impedance_ratio));
        }
        if !(self.ej_asymmetry.is_finite() && self.ej_asymmetry.abs() < 1.0) {
            return bad(format!("ej_asymmetry {} must lie in (-1, 1)", self.ej_asymmetry));
        }
        if !(self.ej_over_omega0.is_finite() && self.ej_over_omega0 > 0.0) {
            return bad(format!("ej_over_omega0 must be positive, got {}", self.ej_over_omega0));
        }
        Ok(())
    }

    /// η = √(Z/2R_Q)
    pub fn eta(&self) -> f64 {
        self.impedance_ratio.sqrt()
    }

    /// Flux modulation amplitude ε = ħJ/E_J.
    pub fn epsilon(&self) -> f64 {
        self.j_over_omega0 / self.ej_over_omega0
    }

    /// Drive symmetric under t → t + T/4 with parity-preserving operators.
    pub fn is_symmetric(&self) -> bool {
        self.ej_asymmetry == 0.0
    }
}

/// Time profile of the drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Drive {
    /// Four delta kicks per period; consumed analytically, never sampled.
    DeltaKick,
    Harmonic {
        n_harmonics: usize,
    },
}

impl Drive {
    /// f(t) = 2 + 4 Σₙ cos(4nt) at resonance.
    pub fn value(&self, t: f64) -> Result<f64> {
        match *self {
            Drive::DeltaKick => Err(Error::ContractViolation("a delta-kick drive has no pointwise values".into())),
            Drive::Harmonic { n_harmonics } => Ok(harmonic_drive(n_harmonics, t)),
        }
    }
}

/// `2 + 4 Σₙ₌₁ᴺ cos(4nφ)` for drive phase φ (φ = ω₀t on resonance).
pub fn harmonic_drive(n_harmonics: usize, phase: f64) -> f64 {
    2.0 + 4.0 * (1..=n_harmonics).map(|n| (4.0 * n as f64 * phase).cos()).sum::<f64>()
}

/// `(D(β) + D(−β))/2`, real symmetric for purely real or imaginary β.
fn cosine_of_displacement(space: &FockSpace, beta: C64) -> Result<Array2<f64>> {
    let plus = space.displacement(beta)?;
    let minus = space.displacement(-beta)?;
    Ok(((plus + minus) * 0.5).mapv(|v| v.re))
}

/// cos(2√π η x̂) = (D(iη√2π) + D(−iη√2π))/2
pub fn cos_x(space: &FockSpace, eta: f64) -> Result<Array2<f64>> {
    cosine_of_displacement(space, C64::new(0.0, eta * (2.0 * PI).sqrt()))
}

/// cos(2√π p̂/η) = (D(√2π/η) + D(−√2π/η))/2
pub fn cos_p(space: &FockSpace, eta: f64) -> Result<Array2<f64>> {
    cosine_of_displacement(space, C64::new((2.0 * PI).sqrt() / eta, 0.0))
}

/// sin(2√π η x̂) = (D(iβ) − D(−iβ))/(2i), β = η√2π
pub fn sin_x(space: &FockSpace, eta: f64) -> Result<Array2<f64>> {
    let beta = C64::new(0.0, eta * (2.0 * PI).sqrt());
    let diff = space.displacement(beta)? - space.displacement(-beta)?;
    Ok(diff.mapv(|v| (v / C64::new(0.0, 2.0)).re))
}

/// Zero all entries with |m − n| > width.
pub fn band_truncate(a: &Array2<f64>, width: usize) -> Array2<f64> {
    let mut out = a.clone();
    for ((i, j), v) in out.indexed_iter_mut() {
        if i.abs_diff(j) > width {
            *v = 0.0;
        }
    }
    out
}

/// Operators of the driven model for one parameter set, built once.
#[derive(Debug, Clone)]
pub struct ModelOperators {
    params: ModelParams,
    number: Array1<f64>,
    cos_x: Array2<f64>,
    cos_p: Array2<f64>,
    sin_x: Option<Array2<f64>>,
}

impl ModelOperators {
    pub fn new(space: &FockSpace, params: ModelParams) -> Result<Self> {
        params.validate()?;
        let eta = params.eta();
        let sin_x = if params.ej_asymmetry != 0.0 { Some(sin_x(space, eta)?) } else { None };
        Ok(Self { params, number: space.number_diag(), cos_x: cos_x(space, eta)?, cos_p: cos_p(space, eta)?, sin_x })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.number.len()
    }

    pub fn number(&self) -> &Array1<f64> {
        &self.number
    }

    pub fn cos_x(&self) -> &Array2<f64> {
        &self.cos_x
    }

    pub fn cos_p(&self) -> &Array2<f64> {
        &self.cos_p
    }

    pub fn sin_x(&self) -> Option<&Array2<f64>> {
        self.sin_x.as_ref()
    }

    /// Ĥ_GKP = −J(cos 2√πx̂ + cos 2√πp̂)
    pub fn gkp_hamiltonian(&self) -> Array2<f64> {
        (&self.cos_x + &self.cos_p) * (-self.params.j_over_omega0)
    }

    /// Ĥ_GKP with Fock matrix elements beyond the ±4N diagonals removed.
    pub fn truncated_gkp_hamiltonian(&self) -> Array2<f64> {
        band_truncate(&self.gkp_hamiltonian(), 4 * self.params.n_harmonics)
    }

    /// Coefficient multiplying sin(2√πηx̂) for drive value `f`.
    ///
    /// −2d (E_J/ħ) sin(φ_e/2φ₀) with φ_e/φ₀ = π − εf.
    pub fn asymmetry_coefficient(&self, f: f64) -> f64 {
        let p = &self.params;
        let phi_e = PI - p.epsilon() * f;
        -2.0 * p.ej_asymmetry * p.ej_over_omega0 * (phi_e / 2.0).sin()
    }

    /// Ĥ for a given drive value f: ω₀â†â − J f cos(2√πηx̂) + asymmetry term.
    pub fn hamiltonian_for_drive(&self, f: f64) -> Array2<f64> {
        let mut h = &self.cos_x * (-self.params.j_over_omega0 * f);
        for (n, v) in self.number.iter().enumerate() {
            h[[n, n]] += v;
        }
        if let Some(s) = &self.sin_x {
            h.scaled_add(self.asymmetry_coefficient(f), s);
        }
        h
    }

    /// Ĥ(t) of the harmonic drive at resonance.
    pub fn driven_hamiltonian(&self, drive: Drive, t: f64) -> Result<Array2<f64>> {
        Ok(self.hamiltonian_for_drive(drive.value(t)?))
    }
}

pub fn gkp_hamiltonian(space: &FockSpace, params: ModelParams) -> Result<Array2<f64>> {
    Ok(ModelOperators::new(space, params)?.gkp_hamiltonian())
}

pub fn truncated_gkp_hamiltonian(space: &FockSpace, params: ModelParams) -> Result<Array2<f64>> {
    Ok(ModelOperators::new(space, params)?.truncated_gkp_hamiltonian())
}

/// Circuit-level description in laboratory units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitParams {
    pub ej_over_h_ghz: f64,
    pub omega0_over_2pi_ghz: f64,
    pub epsilon: f64,
    #[serde(default = "default_harmonics")]
    pub n_harmonics: usize,
    #[serde(default)]
    pub inductance_nh: Option<f64>,
    #[serde(default)]
    pub capacitance_ff: Option<f64>,
    #[serde(default)]
    pub junction_capacitance_ff: Option<f64>,
    #[serde(default)]
    pub ej_asymmetry: f64,
}

fn default_harmonics() -> usize {
    4
}

/// Output of [`circuit_map`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitMapping {
    pub params: ModelParams,
    pub max_modulation_ghz: f64,
    /// ε(2 + 4N), in units of the reduced flux quantum.
    pub peak_flux_excursion: f64,
    pub impedance_ohm: Option<f64>,
}

pub fn circuit_map(c: &CircuitParams) -> Result<CircuitMapping> {
    for (name, v) in [("ej_over_h_ghz", c.ej_over_h_ghz), ("omega0_over_2pi_ghz", c.omega0_over_2pi_ghz)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    if !(c.epsilon.is_finite() && c.epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be non-negative, got {}", c.epsilon)));
    }
    let (impedance_ohm, impedance_ratio) = match (c.inductance_nh, c.capacitance_ff, c.junction_capacitance_ff) {
        (Some(l), Some(cap), cj) => {
            let c_sigma = (cap + 2.0 * cj.unwrap_or(0.0)) * 1e-15;
            if !(l > 0.0 && c_sigma > 0.0) {
                return Err(Error::InvalidArgument("inductance and capacitance must be positive".into()));
            }
            let z = (l * 1e-9 / c_sigma).sqrt();
            (Some(z), z / (2.0 * RESISTANCE_QUANTUM))
        }
        _ => (None, 1.0),
    };
    let ej_over_omega0 = c.ej_over_h_ghz / c.omega0_over_2pi_ghz;
    let params = ModelParams {
        j_over_omega0: c.epsilon * ej_over_omega0,
        n_harmonics: c.n_harmonics,
        impedance_ratio,
        ej_asymmetry: c.ej_asymmetry,
        ej_over_omega0,
    };
    params.validate()?;
    let peak = c.epsilon * (2.0 + 4.0 * c.n_harmonics as f64);
    if peak > 0.1 {
        log::warn!("peak flux excursion {peak:.3} φ₀ is not small; the linearized drive is unreliable");
    }
    Ok(CircuitMapping {
        params,
        max_modulation_ghz: 4.0 * c.n_harmonics as f64 * c.omega0_over_2pi_ghz,
        peak_flux_excursion: peak,
        impedance_ohm,
    })
}
