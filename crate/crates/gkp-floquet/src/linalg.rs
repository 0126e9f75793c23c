//! Thin wrappers over BLAS/LAPACK for the few dense kernels on hot paths.

use std::ffi::c_int;

use cblas_sys::{cblas_zgemv, CBLAS_LAYOUT, CBLAS_TRANSPOSE};
use ndarray::{s, Array1, Array2, ArrayView2, Zip};
use ndarray_linalg::{Eig, Eigh, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// `y = a x` for a row-major square or rectangular complex matrix.
///
/// ndarray's generic complex matvec does not reach BLAS, and this call
/// dominates the time-stepping loops.
pub fn matvec_into(a: &Array2<C64>, x: &[C64], y: &mut [C64]) {
    let (m, n) = a.dim();
    assert_eq!(x.len(), n);
    assert_eq!(y.len(), m);
    let a = a.as_standard_layout();
    let one = [1.0, 0.0];
    let zero = [0.0, 0.0];
    // SAFETY: dimensions checked above, the matrix is contiguous row-major and
    // `C64` has the same layout as `[f64; 2]`.
    unsafe {
        cblas_zgemv(
            CBLAS_LAYOUT::CblasRowMajor,
            CBLAS_TRANSPOSE::CblasNoTrans,
            m as c_int,
            n as c_int,
            one.as_ptr() as *const _,
            a.as_ptr() as *const _,
            n as c_int,
            x.as_ptr() as *const _,
            1,
            zero.as_ptr() as *const _,
            y.as_mut_ptr() as *mut _,
            1,
        );
    }
}

pub fn matvec(a: &Array2<C64>, x: &Array1<C64>) -> Array1<C64> {
    let mut y = Array1::zeros(a.nrows());
    matvec_into(a, x.as_slice().expect("contiguous"), y.as_slice_mut().expect("contiguous"));
    y
}

pub fn complexify(a: &Array2<f64>) -> Array2<C64> {
    a.mapv(|v| C64::new(v, 0.0))
}

pub fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|v| v.conj())
}

/// `⟨x|y⟩`
pub fn inner(x: &Array1<C64>, y: &Array1<C64>) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(x: &Array1<C64>) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// Eigen-decomposition of a real symmetric matrix, ascending eigenvalues.
pub fn eigh_real(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    Ok(a.eigh(UPLO::Lower)?)
}

/// `exp(-i t a)` for real symmetric `a`.
pub fn expm_i_symmetric(a: &Array2<f64>, t: f64) -> Result<Array2<C64>> {
    let (w, v) = eigh_real(a)?;
    Ok(spectral_exp(&w, &v, t))
}

/// `V diag(exp(-i t w)) Vᵀ` for real orthogonal `V`.
pub fn spectral_exp(w: &Array1<f64>, v: &Array2<f64>, t: f64) -> Array2<C64> {
    let vc = complexify(v);
    let mut scaled = vc.clone();
    for (mut col, &wi) in scaled.columns_mut().into_iter().zip(w) {
        let ph = C64::from_polar(1.0, -t * wi);
        col.mapv_inplace(|x| x * ph);
    }
    scaled.dot(&vc.t())
}

/// `exp(-i t h)` for complex Hermitian `h`.
pub fn expm_i_hermitian(h: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let (w, v) = h.eigh(UPLO::Lower)?;
    let mut scaled = v.clone();
    for (mut col, &wi) in scaled.columns_mut().into_iter().zip(&w) {
        let ph = C64::from_polar(1.0, -t * wi);
        col.mapv_inplace(|x| x * ph);
    }
    Ok(scaled.dot(&adjoint(&v)))
}

/// Largest singular value.
pub fn spectral_norm(a: ArrayView2<C64>) -> Result<f64> {
    let (_, sv, _) = a.to_owned().svd(false, false)?;
    Ok(sv.iter().cloned().fold(0.0, f64::max))
}

pub fn spectral_norm_real(a: ArrayView2<f64>) -> Result<f64> {
    let (_, sv, _) = a.to_owned().svd(false, false)?;
    Ok(sv.iter().cloned().fold(0.0, f64::max))
}

/// Restriction of a square matrix to the leading `k` basis states.
pub fn leading_block<T: Clone>(a: &Array2<T>, k: usize) -> Array2<T> {
    a.slice(s![..k, ..k]).to_owned()
}

/// `‖U†U − I‖_max`
pub fn unitarity_defect(u: &Array2<C64>) -> f64 {
    let g = adjoint(u).dot(u);
    let mut worst: f64 = 0.0;
    for ((i, j), v) in g.indexed_iter() {
        let target = if i == j { ONE } else { ZERO };
        worst = worst.max((v - target).norm());
    }
    worst
}

/// Eigen-decomposition of a unitary matrix with orthonormal eigenvectors.
///
/// LAPACK's general solver does not orthogonalize eigenvectors of
/// (nearly) degenerate eigenvalues, so clusters closer than `cluster_tol`
/// are re-orthonormalized with modified Gram-Schmidt. The residual
/// `max ‖U v − λ v‖` is returned alongside.
pub fn unitary_eig(u: &Array2<C64>, cluster_tol: f64) -> Result<(Array1<C64>, Array2<C64>, f64)> {
    let (vals, mut vecs) = u.eig()?;
    let n = vals.len();
    // Project eigenvalues onto the unit circle; the departure is roundoff.
    let vals = vals.mapv(|z| z / z.norm());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].arg().total_cmp(&vals[b].arg()));
    let mut seen = vec![false; n];
    for &i in &order {
        if seen[i] {
            continue;
        }
        let cluster: Vec<usize> = (0..n).filter(|&j| !seen[j] && (vals[j] - vals[i]).norm() < cluster_tol).collect();
        for (k, &j) in cluster.iter().enumerate() {
            seen[j] = true;
            let mut v = vecs.column(j).to_owned();
            for &prev in &cluster[..k] {
                let p = vecs.column(prev).to_owned();
                let ov = inner(&p, &v);
                Zip::from(&mut v).and(&p).for_each(|a, &b| *a -= ov * b);
            }
            let nrm = norm_sqr(&v).sqrt();
            if nrm < 1e-12 {
                return Err(Error::Numerical("degenerate eigenvectors are linearly dependent".into()));
            }
            v.mapv_inplace(|x| x / nrm);
            vecs.column_mut(j).assign(&v);
        }
    }
    let uv = u.dot(&vecs);
    let mut residual: f64 = 0.0;
    for j in 0..n {
        let r: f64 = uv.column(j).iter().zip(vecs.column(j)).map(|(a, b)| (a - vals[j] * b).norm_sqr()).sum();
        residual = residual.max(r.sqrt());
    }
    Ok((vals, vecs, residual))
}

/// Check the linked BLAS against naive products on shapes known to trip
/// faulty kernels.
///
/// Some OpenBLAS builds pick an AVX-512 small-matrix DGEMM kernel that
/// returns wrong results; `OPENBLAS_CORETYPE=Haswell` avoids it.
pub fn blas_self_test() -> Result<()> {
    for (m, k, n) in [(250, 19, 250), (125, 125, 125), (37, 5, 61)] {
        let a = Array2::from_shape_fn((m, k), |(i, j)| ((i * 7 + j * 13) % 17) as f64 - 8.0);
        let b = Array2::from_shape_fn((k, n), |(i, j)| ((i + 2 * j) % 5) as f64 - 2.0);
        let c = a.dot(&b);
        for i in 0..m {
            for j in 0..n {
                let s: f64 = (0..k).map(|l| a[[i, l]] * b[[l, j]]).sum();
                if (s - c[[i, j]]).abs() > 1e-9 {
                    return Err(Error::Numerical(format!(
                        "BLAS dgemm returned a wrong {m}x{k}x{n} product; set OPENBLAS_CORETYPE=Haswell"
                    )));
                }
            }
        }
        let ac = complexify(&a).mapv(|v| v * C64::new(0.5, -1.0));
        let x = Array1::from_shape_fn(k, |i| C64::new(i as f64, 1.0));
        let y = matvec(&ac, &x);
        for i in 0..m {
            let s: C64 = (0..k).map(|l| ac[[i, l]] * x[l]).sum();
            if (s - y[i]).norm() > 1e-9 {
                return Err(Error::Numerical(format!("BLAS zgemv returned a wrong {m}x{k} product")));
            }
        }
    }
    Ok(())
}
