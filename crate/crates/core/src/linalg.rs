//! Dense eigensolvers and small-matrix kernels used throughout the crate.
//!
//! Everything here is deterministic: no randomness, no thread-order
//! dependence, so repeated runs produce bit-identical results.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigendecomposition of a real symmetric matrix by the cyclic Jacobi
/// method. Returns eigenvalues in ascending order and the matching
/// eigenvectors as columns. Eigenvector signs are fixed so that the
/// component of largest magnitude is positive.
pub fn eigh_sym(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "eigh_sym needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    if n > 1 {
        jacobi_sweeps(&mut m, &mut v, n)?;
    }
    let mut vals: Vec<(f64, usize)> = (0..n).map(|i| (m[[i, i]], i)).collect();
    vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut energies = Array1::<f64>::zeros(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (dst, &(val, src)) in vals.iter().enumerate() {
        energies[dst] = val;
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for r in 0..n {
            let x = v[[r, src]].abs();
            if x > best_abs {
                best_abs = x;
                best = r;
            }
        }
        let sign = if v[[best, src]] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vecs[[r, dst]] = sign * v[[r, src]];
        }
    }
    Ok((energies, vecs))
}

fn jacobi_sweeps(m: &mut Array2<f64>, v: &mut Array2<f64>, n: usize) -> Result<()> {
    let scale: f64 = (0..n)
        .map(|i| (0..n).map(|j| m[[i, j]].abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[[p, q]].abs());
            }
        }
        if off <= tol {
            return Ok(());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                // t = sign(theta) / (|theta| + sqrt(theta^2 + 1)), stable form
                let t = if theta.abs() > 1e12 {
                    1.0 / (2.0 * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    // measure the residual for the error report
    let mut worst = 0.0f64;
    for p in 0..n {
        for q in (p + 1)..n {
            worst = worst.max(m[[p, q]].abs());
        }
    }
    Err(Error::Convergence {
        residual: worst,
        iterations: 60,
    })
}

/// Eigendecomposition of a complex Hermitian matrix by the cyclic Jacobi
/// method with complex rotations. Eigenvalues ascending, eigenvectors as
/// columns. Used for reduced density matrices and MCTDH mode densities.
pub fn eigh_hermitian(a: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "eigh_hermitian needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut m = a.clone();
    let mut v = Array2::<Complex64>::eye(n);
    let scale: f64 = (0..n)
        .map(|i| (0..n).map(|j| m[[i, j]].norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tol = 1e-14 * scale;
    let mut converged = n <= 1;
    for _sweep in 0..60 {
        if converged {
            break;
        }
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(m[[p, q]].norm());
            }
        }
        if off <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                let mag = apq.norm();
                if mag <= tol * 1e-2 {
                    continue;
                }
                // phase that makes the pivot real, then a real rotation
                let phase = apq / mag;
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = if theta.abs() > 1e12 {
                    1.0 / (2.0 * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // column update: J has entries [[c, -s*phase],[s*conj(phase), c]]
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * phase.conj() * mkq;
                    m[[k, q]] = s * phase * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * phase * mqk;
                    m[[q, k]] = s * phase.conj() * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * phase.conj() * vkq;
                    v[[k, q]] = s * phase * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                worst = worst.max(m[[p, q]].norm());
            }
        }
        return Err(Error::Convergence {
            residual: worst,
            iterations: 60,
        });
    }
    let mut vals: Vec<(f64, usize)> = (0..n).map(|i| (m[[i, i]].re, i)).collect();
    vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut energies = Array1::<f64>::zeros(n);
    let mut vecs = Array2::<Complex64>::zeros((n, n));
    for (dst, &(val, src)) in vals.iter().enumerate() {
        energies[dst] = val;
        // fix the global phase: largest-magnitude component made real positive
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for r in 0..n {
            let x = v[[r, src]].norm();
            if x > best_abs {
                best_abs = x;
                best = r;
            }
        }
        let phase = if best_abs > 0.0 {
            v[[best, src]].conj() / best_abs
        } else {
            Complex64::new(1.0, 0.0)
        };
        for r in 0..n {
            vecs[[r, dst]] = phase * v[[r, src]];
        }
    }
    Ok((energies, vecs))
}

/// Lanczos iteration with full reorthogonalization for the lowest `k`
/// eigenpairs of a real symmetric operator given through its matvec.
///
/// Grows the Krylov space until the `k` lowest Ritz residuals fall below
/// `tol`, or fails with the worst residual seen.
pub fn lanczos_lowest(
    dim: usize,
    matvec: &dyn Fn(&[f64], &mut [f64]),
    k: usize,
    tol: f64,
    max_space: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a dimension-{dim} operator"
        )));
    }
    let cap = max_space.min(dim).max(k);
    // deterministic start vector with no accidental symmetry
    let mut v0 = vec![0.0f64; dim];
    for (i, x) in v0.iter_mut().enumerate() {
        *x = 1.0 + 0.37 * ((1.7 * (i as f64) + 0.3).sin());
    }
    normalize(&mut v0);

    let mut basis: Vec<Vec<f64>> = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0f64; dim];

    loop {
        let j = alphas.len();
        matvec(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w);
        alphas.push(alpha);
        for (wi, vi) in w.iter_mut().zip(basis[j].iter()) {
            *wi -= alpha * vi;
        }
        if j > 0 {
            let beta_prev = betas[j - 1];
            for (wi, vi) in w.iter_mut().zip(basis[j - 1].iter()) {
                *wi -= beta_prev * vi;
            }
        }
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b.iter()) {
                    *wi -= c * bi;
                }
            }
        }
        let m = alphas.len();
        let beta_next = norm(&w);

        if m >= k.min(dim) {
            let (ritz_vals, ritz_vecs) = tridiag_eig(&alphas, &betas)?;
            // residual of a Ritz pair is beta_next * |last basis component|
            let mut worst = 0.0f64;
            for idx in 0..k {
                worst = worst.max(beta_next * ritz_vecs[(m - 1) + idx * m].abs());
            }
            if worst < tol || m == dim {
                if worst >= tol {
                    return Err(Error::Convergence {
                        residual: worst,
                        iterations: m,
                    });
                }
                let mut vals = Vec::with_capacity(k);
                let mut vecs = Vec::with_capacity(k);
                for idx in 0..k {
                    vals.push(ritz_vals[idx]);
                    let mut full = vec![0.0f64; dim];
                    for (jj, b) in basis.iter().enumerate() {
                        let c = ritz_vecs[jj + idx * m];
                        for (fi, bi) in full.iter_mut().zip(b.iter()) {
                            *fi += c * bi;
                        }
                    }
                    normalize(&mut full);
                    vecs.push(full);
                }
                return Ok((vals, vecs));
            }
            if m == cap {
                return Err(Error::Convergence {
                    residual: worst,
                    iterations: m,
                });
            }
        }

        if beta_next < 1e-14 {
            // invariant subspace: continue with a fresh orthogonal direction
            let mut fresh = vec![0.0f64; dim];
            for (i, x) in fresh.iter_mut().enumerate() {
                *x = ((0.91 * (i as f64) + 1.1).cos()) + 0.5;
            }
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &fresh);
                    for (fi, bi) in fresh.iter_mut().zip(b.iter()) {
                        *fi -= c * bi;
                    }
                }
            }
            let nrm = norm(&fresh);
            if nrm < 1e-12 {
                return Err(Error::Convergence {
                    residual: beta_next,
                    iterations: alphas.len(),
                });
            }
            for x in fresh.iter_mut() {
                *x /= nrm;
            }
            betas.push(0.0);
            basis.push(fresh);
        } else {
            betas.push(beta_next);
            let next: Vec<f64> = w.iter().map(|x| x / beta_next).collect();
            basis.push(next);
        }
    }
}

/// Eigendecomposition of a symmetric tridiagonal matrix given by its
/// diagonal and off-diagonal. Returns ascending eigenvalues and the
/// eigenvector matrix in column-major storage (length m*m).
pub fn tridiag_eig(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = diag.len();
    let mut a = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        a[[i, i]] = diag[i];
        if i + 1 < m {
            a[[i, i + 1]] = off[i];
            a[[i + 1, i]] = off[i];
        }
    }
    let (vals, vecs) = eigh_sym(&a)?;
    let mut flat = vec![0.0f64; m * m];
    for col in 0..m {
        for row in 0..m {
            flat[row + col * m] = vecs[[row, col]];
        }
    }
    Ok((vals.to_vec(), flat))
}

/// exp(A) for a small complex matrix by scaling and squaring with a
/// Taylor series carried to machine precision.
pub fn expm(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    let norm1: f64 = (0..n)
        .map(|j| (0..n).map(|i| a[[i, j]].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > 0.25 {
        (norm1 / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(s as i32);
    let b = a.mapv(|x| x * scale);

    let mut result = Array2::<Complex64>::eye(n);
    let mut term = Array2::<Complex64>::eye(n);
    for k in 1..60 {
        term = term.dot(&b) / Complex64::new(k as f64, 0.0);
        result = result + &term;
        let tnorm: f64 = term.iter().map(|x| x.norm()).sum();
        if tnorm < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Hermitian matrix function f(H) = V f(diag) V^dagger for small matrices.
pub fn hermitian_function(
    a: &Array2<Complex64>,
    f: impl Fn(f64) -> f64,
) -> Result<Array2<Complex64>> {
    let (vals, vecs) = eigh_hermitian(a)?;
    let n = a.nrows();
    let mut out = Array2::<Complex64>::zeros((n, n));
    for k in 0..n {
        let fk = f(vals[k]);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += vecs[[i, k]] * vecs[[j, k]].conj() * fk;
            }
        }
    }
    Ok(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn normalize(a: &mut [f64]) {
    let n = norm(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
}
