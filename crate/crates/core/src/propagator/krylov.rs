//! Short-iterative Krylov propagation: Lanczos for Hermitian operators,
//! Arnoldi when an absorbing potential makes the operator non-Hermitian.
//!
//! Each step builds a Krylov space at the current state, then picks the
//! largest substep whose truncation error estimate passes the tolerance.
//! The estimate compares the order-m and order-(m-1) propagated
//! coefficients, which is conservative and costs only small-matrix work.

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{expm, tridiag_eig};
use crate::tensor;

/// Operator application used by the stepper.
pub type ApplyFn<'a> = dyn FnMut(&Array3<Complex64>, &mut Array3<Complex64>) -> Result<()> + 'a;

#[derive(Debug, Clone, Copy)]
pub struct KrylovSettings {
    /// Maximum Krylov dimension per step.
    pub dim: usize,
    /// Local truncation error accepted per substep.
    pub tol: f64,
    /// Treat the operator as Hermitian (Lanczos) or general (Arnoldi).
    pub hermitian: bool,
}

impl KrylovSettings {
    pub fn hermitian(dim: usize, tol: f64) -> Self {
        KrylovSettings {
            dim,
            tol,
            hermitian: true,
        }
    }

    pub fn general(dim: usize, tol: f64) -> Self {
        KrylovSettings {
            dim,
            tol,
            hermitian: false,
        }
    }
}

/// Advance `psi` by `dt_au` (either sign) under the operator `apply`,
/// taking as many substeps as the error control requires.
pub fn propagate(
    settings: KrylovSettings,
    apply: &mut ApplyFn,
    psi: &mut Array3<Complex64>,
    dt_au: f64,
    t_fs_for_errors: f64,
) -> Result<()> {
    let total = dt_au;
    let mut done = 0.0f64;
    let min_step = total.abs() * 1e-12;
    while (total - done).abs() > min_step.max(1e-14) {
        let remaining = total - done;
        let taken = krylov_substep(settings, apply, psi, remaining, t_fs_for_errors)?;
        done += taken;
    }
    Ok(())
}

fn krylov_substep(
    settings: KrylovSettings,
    apply: &mut ApplyFn,
    psi: &mut Array3<Complex64>,
    dt_max: f64,
    t_fs: f64,
) -> Result<f64> {
    let beta0 = norm3(psi);
    if beta0 == 0.0 {
        return Ok(dt_max);
    }
    if !beta0.is_finite() {
        return Err(Error::Propagation {
            t_fs,
            msg: "non-finite amplitudes".into(),
        });
    }
    let dims = psi.dim();
    let m_max = settings.dim.max(2);

    let mut basis: Vec<Array3<Complex64>> = Vec::with_capacity(m_max + 1);
    basis.push(psi.mapv(|a| a / beta0));

    // Hessenberg in column-major m_max+1 rows; for Lanczos only the
    // tridiagonal entries are filled.
    let mut hess = vec![Complex64::ZERO; (m_max + 1) * m_max];
    let mut w = Array3::<Complex64>::zeros(dims);
    let mut m_eff = m_max;
    let mut breakdown = false;

    for j in 0..m_max {
        apply(&basis[j], &mut w)?;
        if settings.hermitian {
            let alpha = tensor::inner(&basis[j], &w);
            hess[j + j * (m_max + 1)] = Complex64::new(alpha.re, 0.0);
            tensor::axpy(-Complex64::new(alpha.re, 0.0), &basis[j], &mut w);
        } else {
            for (i, b) in basis.iter().enumerate() {
                let hij = tensor::inner(b, &w);
                hess[i + j * (m_max + 1)] = hij;
                tensor::axpy(-hij, b, &mut w);
            }
        }
        // orthogonalize against the whole basis. For the Hermitian branch
        // this removes the beta_{j-1} v_{j-1} component (recorded in the
        // ignored upper triangle) and doubles as full reorthogonalization;
        // for Arnoldi it is the usual refinement pass.
        for (i, b) in basis.iter().enumerate() {
            let c = tensor::inner(b, &w);
            hess[i + j * (m_max + 1)] += c;
            tensor::axpy(-c, b, &mut w);
        }
        let beta_next = norm3(&w);
        if !beta_next.is_finite() {
            return Err(Error::Propagation {
                t_fs,
                msg: "Krylov recurrence produced non-finite values".into(),
            });
        }
        hess[(j + 1) + j * (m_max + 1)] = Complex64::new(beta_next, 0.0);
        if beta_next < 1e-13 {
            m_eff = j + 1;
            breakdown = true;
            break;
        }
        if j + 1 < m_max {
            basis.push(w.mapv(|a| a / beta_next));
        }
    }

    // choose the largest step passing the error estimate
    let mut h = dt_max;
    let mut coeffs;
    loop {
        let (y, est) = small_propagator(settings, &hess, m_max, m_eff, breakdown, h)?;
        coeffs = y;
        if breakdown || est <= settings.tol || h.abs() < dt_max.abs() * 1e-9 {
            break;
        }
        h *= 0.5;
    }

    // psi = beta0 * V y
    psi.fill(Complex64::ZERO);
    for (j, b) in basis.iter().enumerate().take(m_eff) {
        tensor::axpy(coeffs[j] * beta0, b, psi);
    }
    Ok(h)
}

#[inline]
fn j_col(j: usize, m_max: usize) -> usize {
    j * (m_max + 1)
}

/// Coefficient vector y = exp(-i T h) e1 in the Krylov basis, plus the
/// order-(m-1) comparison error estimate.
fn small_propagator(
    settings: KrylovSettings,
    hess: &[Complex64],
    m_max: usize,
    m: usize,
    breakdown: bool,
    h: f64,
) -> Result<(Vec<Complex64>, f64)> {
    let y_full = expm_column(settings, hess, m_max, m, h)?;
    if breakdown || m == 1 {
        return Ok((y_full, 0.0));
    }
    let y_low = expm_column(settings, hess, m_max, m - 1, h)?;
    let mut err2 = y_full[m - 1].norm_sqr();
    for i in 0..m - 1 {
        err2 += (y_full[i] - y_low[i]).norm_sqr();
    }
    Ok((y_full, err2.sqrt()))
}

fn expm_column(
    settings: KrylovSettings,
    hess: &[Complex64],
    m_max: usize,
    m: usize,
    h: f64,
) -> Result<Vec<Complex64>> {
    if settings.hermitian {
        let diag: Vec<f64> = (0..m).map(|j| hess[j + j_col(j, m_max)].re).collect();
        let off: Vec<f64> = (0..m.saturating_sub(1))
            .map(|j| hess[(j + 1) + j_col(j, m_max)].re)
            .collect();
        let (vals, vecs) = tridiag_eig(&diag, &off)?;
        let mut y = vec![Complex64::ZERO; m];
        for k in 0..m {
            let phase = Complex64::from_polar(1.0, -vals[k] * h);
            let weight = vecs[k * m]; // first component of eigenvector k
            for i in 0..m {
                y[i] += vecs[i + k * m] * weight * phase;
            }
        }
        Ok(y)
    } else {
        let mut t = Array2::<Complex64>::zeros((m, m));
        for j in 0..m {
            for i in 0..m {
                t[[i, j]] = hess[i + j_col(j, m_max)] * Complex64::new(0.0, -h);
            }
        }
        let e = expm(&t);
        Ok((0..m).map(|i| e[[i, 0]]).collect())
    }
}

fn norm3(x: &Array3<Complex64>) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}
