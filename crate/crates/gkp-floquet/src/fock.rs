//! Truncated Fock space of a single bosonic mode.
//!
//! Quadratures are dimensionless with `x̂ = (â† + â)/√2`, `p̂ = i(â† − â)/√2`,
//! so `[x̂, p̂] = i` away from the truncation edge and the vacuum has
//! variance 1/2 in each quadrature.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::{complexify, C64, I, ONE};

/// Pure state amplitudes in the Fock basis.
pub type StateVector = Array1<C64>;

/// Density matrix in the Fock basis.
pub type DensityMatrix = Array2<C64>;

/// Fraction of the top of the Fock ladder watched for truncation leakage.
pub const LEAKAGE_FRACTION: f64 = 0.1;

/// A Fock space of dimension `dim` with its ladder and quadrature operators.
///
/// Operators are built once and never mutated, so the space can be shared
/// freely between threads.
#[derive(Debug, Clone)]
pub struct FockSpace {
    dim: usize,
    annihilation: Array2<f64>,
    position: Array2<f64>,
    momentum: Array2<C64>,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("Fock dimension must be at least 2, got {dim}")));
        }
        let mut a = Array2::<f64>::zeros((dim, dim));
        for n in 1..dim {
            a[[n - 1, n]] = (n as f64).sqrt();
        }
        let ad = a.t().to_owned();
        let position = (&ad + &a) / 2f64.sqrt();
        let momentum = (complexify(&ad) - complexify(&a)).mapv(|v| v * I / 2f64.sqrt());
        Ok(Self { dim, annihilation: a, position, momentum })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn annihilation(&self) -> &Array2<f64> {
        &self.annihilation
    }

    pub fn creation(&self) -> Array2<f64> {
        self.annihilation.t().to_owned()
    }

    /// Diagonal of `â†â`.
    pub fn number_diag(&self) -> Array1<f64> {
        Array1::from_shape_fn(self.dim, |n| n as f64)
    }

    pub fn number(&self) -> Array2<f64> {
        Array2::from_diag(&self.number_diag())
    }

    pub fn position(&self) -> &Array2<f64> {
        &self.position
    }

    pub fn momentum(&self) -> &Array2<C64> {
        &self.momentum
    }

    /// Index bound of the "lower half" used when comparing operators that the
    /// truncation corrupts near the top of the ladder.
    pub fn lower_half(&self) -> usize {
        self.dim / 2
    }

    pub fn fock(&self, n: usize) -> Result<StateVector> {
        if n >= self.dim {
            return Err(Error::InvalidArgument(format!("Fock level {n} outside dimension {}", self.dim)));
        }
        let mut v = Array1::zeros(self.dim);
        v[n] = ONE;
        Ok(v)
    }

    /// Coherent state `|α⟩`, truncated and renormalized.
    pub fn coherent(&self, alpha: C64) -> StateVector {
        let mut v = Array1::<C64>::zeros(self.dim);
        let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..self.dim {
            v[n] = c;
            c *= alpha / ((n + 1) as f64).sqrt();
        }
        normalize(&mut v);
        v
    }

    /// Squeezed vacuum `exp(r(â² − â†²)/2)|0⟩` with x-variance `e^{-2r}/2`.
    ///
    /// Negative `r` squeezes momentum instead.
    pub fn squeezed_vacuum(&self, r: f64) -> StateVector {
        let mut v = Array1::<C64>::zeros(self.dim);
        let t = r.tanh();
        let mut c = 1.0 / r.cosh().sqrt();
        let mut m = 0;
        while 2 * m < self.dim {
            v[2 * m] = C64::new(c, 0.0);
            c *= -t * ((2 * m + 1) as f64 / (2 * m + 2) as f64).sqrt();
            m += 1;
        }
        normalize(&mut v);
        v
    }

    /// Displacement operator `D(α) = exp(α↠− α* â)` from the closed-form
    /// Laguerre matrix elements.
    ///
    /// Each subdiagonal `k` is generated by a normalized three-term recurrence
    /// in the row index, which stays finite where factorial forms overflow.
    pub fn displacement(&self, alpha: C64) -> Result<Array2<C64>> {
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::InvalidArgument(format!("displacement amplitude {alpha} is not finite")));
        }
        if alpha.norm_sqr() > self.dim as f64 / 4.0 {
            log::warn!("|alpha|^2 = {:.2} exceeds dim/4; truncation artifacts will dominate", alpha.norm_sqr());
        }
        let d = self.dim;
        let x = alpha.norm_sqr();
        let r = alpha.norm();
        let ph = alpha.arg();
        let mut out = Array2::<C64>::zeros((d, d));
        // hk = r^k e^{-x/2} / sqrt(k!)
        let mut hk = (-x / 2.0).exp();
        for k in 0..d {
            if k > 0 {
                hk *= r / (k as f64).sqrt();
            }
            let lower = C64::from_polar(1.0, k as f64 * ph);
            let upper = C64::from_polar(1.0, k as f64 * (PI - ph));
            let kf = k as f64;
            let mut g_prev = 0.0;
            let mut g = hk;
            for n in 0..d - k {
                out[[n + k, n]] = lower * g;
                if k > 0 {
                    out[[n, n + k]] = upper * g;
                }
                let nf = n as f64;
                let g_next = ((2.0 * nf + kf + 1.0 - x) * g - (nf * (nf + kf)).sqrt() * g_prev)
                    / ((nf + 1.0) * (nf + 1.0 + kf)).sqrt();
                g_prev = g;
                g = g_next;
            }
        }
        Ok(out)
    }

    /// Displacement by exponentiating the anti-Hermitian generator.
    ///
    /// Independent of [`FockSpace::displacement`] and used to validate it.
    pub fn displacement_by_generator(&self, alpha: C64) -> Result<Array2<C64>> {
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::InvalidArgument(format!("displacement amplitude {alpha} is not finite")));
        }
        let a = complexify(&self.annihilation);
        let ad = complexify(&self.creation());
        // D = exp(-i h) with Hermitian h = i(α a† − α* a).
        let h = (ad * alpha - a * alpha.conj()).mapv(|v| v * I);
        crate::linalg::expm_i_hermitian(&h, 1.0)
    }

    /// Phases `e^{iθn}` forming the diagonal of the rotation `R(θ)`.
    pub fn rotation_phases(&self, theta: f64) -> Array1<C64> {
        Array1::from_shape_fn(self.dim, |n| C64::from_polar(1.0, theta * n as f64))
    }

    /// `R(θ) = exp(iθ â†â)`; `R(π/2)` is the Fourier transform.
    pub fn rotation(&self, theta: f64) -> Array2<C64> {
        Array2::from_diag(&self.rotation_phases(theta))
    }
}

/// Normalized Hermite functions `h_0(x) .. h_{n_max-1}(x)`.
pub fn hermite_functions(n_max: usize, x: f64) -> Result<Vec<f64>> {
    let mut h = vec![0.0; n_max];
    if n_max == 0 {
        return Ok(h);
    }
    h[0] = PI.powf(-0.25) * (-x * x / 2.0).exp();
    if n_max > 1 {
        h[1] = 2f64.sqrt() * x * h[0];
    }
    for n in 1..n_max.saturating_sub(1) {
        let nf = n as f64;
        h[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * h[n] - (nf / (nf + 1.0)).sqrt() * h[n - 1];
        if !h[n + 1].is_finite() {
            return Err(Error::HermiteOverflow { index: n + 1 });
        }
    }
    Ok(h)
}

/// `ψ(x) = Σ cₙ hₙ(x)` on each grid point.
pub fn position_wavefunction(state: &StateVector, grid: &[f64]) -> Result<Vec<C64>> {
    grid.iter()
        .map(|&x| {
            if !x.is_finite() {
                return Err(Error::InvalidArgument(format!("grid point {x} is not finite")));
            }
            let h = hermite_functions(state.len(), x)?;
            Ok(state.iter().zip(&h).map(|(c, hn)| c * hn).sum())
        })
        .collect()
}

/// `ψ̃(p) = Σ cₙ (−i)ⁿ hₙ(p)`.
pub fn momentum_wavefunction(state: &StateVector, grid: &[f64]) -> Result<Vec<C64>> {
    let rotated: StateVector =
        Array1::from_shape_fn(state.len(), |n| state[n] * C64::from_polar(1.0, -PI / 2.0 * n as f64));
    position_wavefunction(&rotated, grid)
}

pub fn normalize(v: &mut StateVector) -> f64 {
    let nrm = crate::linalg::norm_sqr(v).sqrt();
    if nrm > 0.0 {
        v.mapv_inplace(|c| c / nrm);
    }
    nrm
}

/// Population in the top [`LEAKAGE_FRACTION`] of Fock levels.
pub fn top_population(state: &StateVector) -> f64 {
    let d = state.len();
    let start = d - ((d as f64 * LEAKAGE_FRACTION).ceil() as usize).max(1);
    state.iter().skip(start).map(|c| c.norm_sqr()).sum::<f64>() / crate::linalg::norm_sqr(state)
}

pub fn mean_photon_number(state: &StateVector) -> f64 {
    state.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum::<f64>() / crate::linalg::norm_sqr(state)
}

pub fn pure_density(state: &StateVector) -> DensityMatrix {
    let d = state.len();
    Array2::from_shape_fn((d, d), |(i, j)| state[i] * state[j].conj())
}

/// Departures of a density matrix from Hermiticity, unit trace and positivity.
#[derive(Debug, Clone, Copy)]
pub struct DensityDefects {
    pub hermiticity: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
}

impl DensityDefects {
    pub fn within(&self, tol: f64) -> bool {
        self.hermiticity < tol && self.trace < tol && self.min_eigenvalue > -tol
    }
}

pub fn density_defects(rho: &DensityMatrix) -> Result<DensityDefects> {
    use ndarray_linalg::{EigValsh, UPLO};
    let mut herm: f64 = 0.0;
    for ((i, j), v) in rho.indexed_iter() {
        herm = herm.max((v - rho[[j, i]].conj()).norm());
    }
    let tr: C64 = rho.diag().iter().sum();
    let sym = (rho + &crate::linalg::adjoint(rho)).mapv(|v| v * 0.5);
    let ev = sym.eigvalsh(UPLO::Lower)?;
    Ok(DensityDefects {
        hermiticity: herm,
        trace: (tr - ONE).norm(),
        min_eigenvalue: ev.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

/// Largest entry-wise deviation on the lower-left `k × k` block.
pub fn max_abs_diff_leading(a: &Array2<C64>, b: &Array2<C64>, k: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            worst = worst.max((a[[i, j]] - b[[i, j]]).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;

    #[test]
    fn annihilation_layout() {
        let s = FockSpace::new(6).unwrap();
        let a = s.annihilation();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if j == i + 1 { (j as f64).sqrt() } else { 0.0 };
                assert_eq!(a[[i, j]], expect);
            }
        }
    }

    #[test]
    fn number_operator_is_exact() {
        let s = FockSpace::new(40).unwrap();
        let n = s.number();
        let ada = s.creation().dot(s.annihilation());
        for k in 0..40 {
            let ket = s.fock(k).unwrap().mapv(|c| c.re);
            let out = n.dot(&ket);
            for (i, v) in out.iter().enumerate() {
                assert_eq!(*v, if i == k { k as f64 } else { 0.0 });
            }
            let out = ada.dot(&ket);
            for (i, v) in out.iter().enumerate() {
                assert!((*v - if i == k { k as f64 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn quadratures_hermitian_and_canonical() {
        let s = FockSpace::new(30).unwrap();
        let x = complexify(s.position());
        let p = s.momentum().clone();
        let herm_x = (&x - &crate::linalg::adjoint(&x)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        let herm_p = (&p - &crate::linalg::adjoint(&p)).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(herm_x < 1e-15 && herm_p < 1e-15);
        let comm = x.dot(&p) - p.dot(&x);
        for i in 0..29 {
            for j in 0..29 {
                let expect = if i == j { I } else { ZERO };
                assert!((comm[[i, j]] - expect).norm() < 1e-12, "({i},{j})");
            }
        }
        // Only the top level breaks the commutator.
        assert!((comm[[29, 29]] - I).norm() > 1.0);
    }

    #[test]
    fn vacuum_displacement_overlap() {
        let s = FockSpace::new(60).unwrap();
        let d = s.displacement(C64::new((2.0 * PI).sqrt(), 0.0)).unwrap();
        assert!((d[[0, 0]].re - (-PI).exp()).abs() < 1e-15);
        assert!((d[[0, 0]].re - 0.04321391826377226).abs() < 1e-12);
        let id = s.displacement(ZERO).unwrap();
        assert!(id.indexed_iter().all(|((i, j), v)| (*v - if i == j { ONE } else { ZERO }).norm() < 1e-15));
    }

    #[test]
    fn displacement_column_is_coherent_state() {
        let s = FockSpace::new(80).unwrap();
        let alpha = C64::new(0.7, -1.1);
        let d = s.displacement(alpha).unwrap();
        let coh = s.coherent(alpha);
        for n in 0..80 {
            assert!((d[[n, 0]] - coh[n]).norm() < 1e-13);
        }
    }

    #[test]
    fn hermite_ground_and_parity() {
        let h = hermite_functions(4, 0.0).unwrap();
        assert!((h[0] - PI.powf(-0.25)).abs() < 1e-15);
        assert_eq!(h[1], 0.0);
        let s = FockSpace::new(4).unwrap();
        let psi = position_wavefunction(&s.fock(1).unwrap(), &[0.0]).unwrap();
        assert_eq!(psi[0].norm(), 0.0);
    }

    #[test]
    fn hermite_recurrence_reaches_high_orders() {
        let h = hermite_functions(400, 3.3).unwrap();
        assert!(h.iter().all(|v| v.is_finite() && v.abs() < 1.0));
    }

    #[test]
    fn rotation_fourth_power_is_identity() {
        let s = FockSpace::new(50).unwrap();
        let r = s.rotation(PI / 2.0);
        let r4 = r.dot(&r).dot(&r).dot(&r);
        for ((i, j), v) in r4.indexed_iter() {
            let expect = if i == j { ONE } else { ZERO };
            assert!((v - expect).norm() < 1e-12);
        }
        assert!(s.rotation(0.0).diag().iter().all(|v| *v == ONE));
    }

    #[test]
    fn squeezed_vacuum_variance() {
        let s = FockSpace::new(120).unwrap();
        let v = s.squeezed_vacuum(0.5);
        let x = complexify(s.position());
        let x2 = x.dot(&x);
        let var: C64 = v.iter().zip(crate::linalg::matvec(&x2, &v).iter()).map(|(a, b)| a.conj() * b).sum();
        assert!((var.re - (-1.0f64).exp() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn leakage_monitor() {
        let s = FockSpace::new(100).unwrap();
        assert_eq!(top_population(&s.fock(3).unwrap()), 0.0);
        assert_eq!(top_population(&s.fock(95).unwrap()), 1.0);
    }
}
