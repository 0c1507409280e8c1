//! Low-rank propagation with the multiconfiguration time-dependent
//! Hartree ansatz: a core tensor of configuration weights combined with a
//! stack of single-particle functions per mode.
//!
//! Integration uses a fixed-step constant-mean-field splitting. Within a
//! CMF step the core tensor is advanced by Arnoldi half-steps in the
//! configuration space, and the single-particle functions by fixed RK4
//! substeps with the mean fields and inverse densities frozen; densities
//! are regularized by adding a small epsilon to their eigenvalues before
//! inversion. A Loewdin transform after every step restores orthonormality
//! exactly and is compensated in the core tensor, so the represented state
//! is unchanged.

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::constants::fs_to_au;
use crate::diagnostics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::hamiltonian::{Factor, SopOperator};
use crate::linalg::{eigh_hermitian, hermitian_function};
use crate::propagator::krylov::{propagate as krylov_propagate, KrylovSettings};
use crate::tensor;
use crate::wavefunction::GridWavefunction;

/// Wavefunction in the low-rank ansatz: configuration weights plus
/// per-mode single-particle function stacks with orthonormal columns.
#[derive(Debug, Clone)]
pub struct MctdhWavefunction {
    pub core: Array3<Complex64>,
    pub spfs: [Array2<Complex64>; 3],
    pub time_fs: f64,
    pub regularization_eps: f64,
}

impl MctdhWavefunction {
    /// Build from a grid wavefunction by mode-density eigenvectors: the
    /// leading `n_spf` natural orbitals per mode, with the core tensor as
    /// the projection of the state onto them.
    pub fn from_grid(
        psi: &GridWavefunction,
        n_spf: [usize; 3],
        regularization_eps: f64,
    ) -> Result<Self> {
        let dims = psi.dims();
        for k in 0..3 {
            if n_spf[k] < 1 {
                return Err(Error::InvalidArgument(format!(
                    "n_spf must be >= 1, got {} for mode {k}",
                    n_spf[k]
                )));
            }
            if n_spf[k] > dims[k] {
                return Err(Error::InvalidArgument(format!(
                    "n_spf {} exceeds grid dimension {} for mode {k}",
                    n_spf[k], dims[k]
                )));
            }
        }
        let mut spfs: Vec<Array2<Complex64>> = Vec::with_capacity(3);
        for mode in 0..3 {
            let rho = mode_density_grid(&psi.amplitudes, mode);
            let (_vals, vecs) = eigh_hermitian(&rho)?;
            // eigenvalues ascend; natural orbitals are the top columns
            let n = dims[mode];
            let mut cols = Array2::<Complex64>::zeros((n, n_spf[mode]));
            for j in 0..n_spf[mode] {
                let src = n - 1 - j;
                for r in 0..n {
                    cols[[r, j]] = vecs[[r, src]];
                }
            }
            spfs.push(cols);
        }
        let spfs: [Array2<Complex64>; 3] = [
            spfs[0].clone(),
            spfs[1].clone(),
            spfs[2].clone(),
        ];
        let mut core = psi.amplitudes.clone();
        for (mode, spf) in spfs.iter().enumerate() {
            let proj = conj_transpose(spf);
            core = tensor::apply_dense_complex(&core, &proj, mode);
        }
        Ok(MctdhWavefunction {
            core,
            spfs,
            time_fs: psi.time_fs,
            regularization_eps,
        })
    }

    /// Expand to the full grid.
    pub fn to_grid(&self) -> GridWavefunction {
        let mut amps = self.core.clone();
        for (mode, spf) in self.spfs.iter().enumerate() {
            amps = tensor::apply_dense_complex(&amps, spf, mode);
        }
        GridWavefunction::new(amps, self.time_fs)
    }

    pub fn ranks(&self) -> [usize; 3] {
        let (a, b, c) = self.core.dim();
        [a, b, c]
    }

    pub fn norm_sq(&self) -> f64 {
        // orthonormal SPFs: the core carries the norm
        self.core.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Largest deviation of the SPF overlap matrices from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for spf in &self.spfs {
            let s = overlap(spf);
            let n = s.nrows();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::ZERO
                    };
                    worst = worst.max((s[[i, j]] - want).norm());
                }
            }
        }
        worst
    }
}

/// Integration controls for the MCTDH backend.
#[derive(Debug, Clone, Copy)]
pub struct MctdhSettings {
    pub n_spf: [usize; 3],
    /// Constant-mean-field step, femtoseconds.
    pub cmf_dt_fs: f64,
    /// Density regularization added to eigenvalues before inversion.
    pub eps: f64,
    /// Target RK4 substep for the single-particle functions, atomic units.
    pub spf_substep_au: f64,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
}

impl MctdhSettings {
    pub fn new(n_spf: [usize; 3]) -> Self {
        MctdhSettings {
            n_spf,
            cmf_dt_fs: 0.05,
            eps: 1e-8,
            spf_substep_au: 0.5,
            krylov_dim: 30,
            krylov_tol: 1e-11,
        }
    }
}

/// Propagate with the low-rank ansatz; snapshots are expanded to the grid.
pub fn propagate_mctdh(
    psi0: &GridWavefunction,
    h: &SopOperator,
    n_spf: [usize; 3],
    dt_out_fs: f64,
    t_final_fs: f64,
) -> Result<TrajectoryRecord> {
    let mut record = TrajectoryRecord::new(!h.hermitian);
    propagate_mctdh_with(
        psi0,
        h,
        MctdhSettings::new(n_spf),
        dt_out_fs,
        t_final_fs,
        |snap| {
            record.push(snap.clone());
            Ok(())
        },
    )?;
    Ok(record)
}

/// Streaming MCTDH propagation.
pub fn propagate_mctdh_with(
    psi0: &GridWavefunction,
    h: &SopOperator,
    settings: MctdhSettings,
    dt_out_fs: f64,
    t_final_fs: f64,
    mut sink: impl FnMut(&GridWavefunction) -> Result<()>,
) -> Result<()> {
    if !(dt_out_fs > 0.0) || t_final_fs < dt_out_fs {
        return Err(Error::InvalidArgument(format!(
            "need t_final >= dt_out > 0, got dt_out={dt_out_fs}, t_final={t_final_fs}"
        )));
    }
    if !(settings.cmf_dt_fs > 0.0) {
        return Err(Error::InvalidArgument(
            "cmf_dt_fs must be positive".into(),
        ));
    }
    let mut wf = MctdhWavefunction::from_grid(psi0, settings.n_spf, settings.eps)?;
    let n_out = (t_final_fs / dt_out_fs).round() as usize;
    let n_cmf = (dt_out_fs / settings.cmf_dt_fs).ceil().max(1.0) as usize;
    let cmf_dt_au = fs_to_au(dt_out_fs) / n_cmf as f64;

    sink(&wf.to_grid())?;
    for k in 1..=n_out {
        let t_fs = k as f64 * dt_out_fs;
        for _ in 0..n_cmf {
            cmf_step(&mut wf, h, &settings, cmf_dt_au, t_fs)?;
        }
        wf.time_fs = t_fs;
        let snap = wf.to_grid();
        if snap.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::Propagation {
                t_fs,
                msg: "non-finite amplitudes in low-rank propagation".into(),
            });
        }
        sink(&snap)?;
    }
    Ok(())
}

/// One constant-mean-field step: core half step, SPF full step with frozen
/// mean fields, core half step, then the orthonormality restoration.
fn cmf_step(
    wf: &mut MctdhWavefunction,
    h: &SopOperator,
    settings: &MctdhSettings,
    dt_au: f64,
    t_fs: f64,
) -> Result<()> {
    let full_rank = {
        let ranks = wf.ranks();
        let dims = wf.spfs[0].nrows();
        let dims = [dims, wf.spfs[1].nrows(), wf.spfs[2].nrows()];
        ranks == dims
    };

    // core half step in the configuration space
    let mats = spf_matrices(h, &wf.spfs);
    core_step(&mut wf.core, &mats, h, settings, dt_au / 2.0, t_fs)?;

    // single-particle function step with mean fields from the midpoint core
    if !full_rank {
        spf_step(wf, h, settings, dt_au, t_fs)?;
    }

    // second core half step with the updated matrix elements
    let mats = spf_matrices(h, &wf.spfs);
    core_step(&mut wf.core, &mats, h, settings, dt_au / 2.0, t_fs)?;

    restore_orthonormality(wf)?;
    Ok(())
}

/// SPF-space matrix elements of every term factor; None marks identity.
fn spf_matrices(
    h: &SopOperator,
    spfs: &[Array2<Complex64>; 3],
) -> Vec<[Option<Array2<Complex64>>; 3]> {
    h.terms
        .iter()
        .map(|term| {
            let mut out: [Option<Array2<Complex64>>; 3] = [None, None, None];
            for mode in 0..3 {
                out[mode] = match &term.factors[mode] {
                    Factor::Identity => None,
                    factor => {
                        let hphi = apply_factor_columns(factor, &spfs[mode]);
                        Some(conj_transpose(&spfs[mode]).dot(&hphi))
                    }
                };
            }
            out
        })
        .collect()
}

fn core_step(
    core: &mut Array3<Complex64>,
    mats: &[[Option<Array2<Complex64>>; 3]],
    h: &SopOperator,
    settings: &MctdhSettings,
    dt_au: f64,
    t_fs: f64,
) -> Result<()> {
    let krylov = KrylovSettings::general(settings.krylov_dim, settings.krylov_tol);
    let mut apply = |x: &Array3<Complex64>, out: &mut Array3<Complex64>| -> Result<()> {
        out.fill(Complex64::ZERO);
        for (term, tmats) in h.terms.iter().zip(mats.iter()) {
            let mut cur: Option<Array3<Complex64>> = None;
            for mode in 0..3 {
                if let Some(m) = &tmats[mode] {
                    let src = cur.as_ref().unwrap_or(x);
                    cur = Some(tensor::apply_dense_complex(src, m, mode));
                }
            }
            tensor::axpy(term.coeff, cur.as_ref().unwrap_or(x), out);
        }
        Ok(())
    };
    krylov_propagate(krylov, &mut apply, core, dt_au, t_fs)
}

/// Advance the single-particle functions by RK4 substeps under the
/// projected mean-field equation of motion.
fn spf_step(
    wf: &mut MctdhWavefunction,
    h: &SopOperator,
    settings: &MctdhSettings,
    dt_au: f64,
    t_fs: f64,
) -> Result<()> {
    // frozen quantities: rho^-1 and the mean-field matrices per term/mode
    let mats = spf_matrices(h, &wf.spfs);
    let ranks = wf.ranks();
    let mut weight: Vec<[Option<Array2<Complex64>>; 3]> = Vec::with_capacity(h.terms.len());
    let mut rho_inv: Vec<Array2<Complex64>> = Vec::with_capacity(3);
    for mode in 0..3 {
        let rho = mode_density_core(&wf.core, mode);
        let eps = settings.eps;
        let inv = hermitian_function(&rho, |lambda| 1.0 / (lambda.max(0.0) + eps))?;
        rho_inv.push(inv);
    }
    for (term, tmats) in h.terms.iter().zip(mats.iter()) {
        let _ = term;
        let mut per_mode: [Option<Array2<Complex64>>; 3] = [None, None, None];
        for mode in 0..3 {
            // B = core with the other-mode matrix elements applied
            let mut b: Option<Array3<Complex64>> = None;
            for other in 0..3 {
                if other == mode {
                    continue;
                }
                if let Some(m) = &tmats[other] {
                    let src = b.as_ref().unwrap_or(&wf.core);
                    b = Some(tensor::apply_dense_complex(src, m, other));
                }
            }
            let f = tensor::fold_density(&wf.core, b.as_ref().unwrap_or(&wf.core), mode);
            per_mode[mode] = Some(rho_inv[mode].dot(&f));
        }
        weight.push(per_mode);
    }
    let _ = ranks;

    let n_sub = ((dt_au / settings.spf_substep_au).abs().ceil() as usize).max(1);
    let h_sub = dt_au / n_sub as f64;
    for _ in 0..n_sub {
        rk4_spf(wf, h, &weight, h_sub)?;
    }
    let _ = t_fs;
    Ok(())
}

/// d(Phi)/dt for every mode under frozen mean fields.
fn spf_derivative(
    spfs: &[Array2<Complex64>; 3],
    h: &SopOperator,
    weight: &[[Option<Array2<Complex64>>; 3]],
) -> [Array2<Complex64>; 3] {
    let mut out: [Array2<Complex64>; 3] = [
        Array2::zeros(spfs[0].dim()),
        Array2::zeros(spfs[1].dim()),
        Array2::zeros(spfs[2].dim()),
    ];
    for (term, tweights) in h.terms.iter().zip(weight.iter()) {
        for mode in 0..3 {
            if let Some(w) = &tweights[mode] {
                let hphi = apply_factor_columns(&term.factors[mode], &spfs[mode]);
                // columns mix through the transposed weight matrix
                let contrib = hphi.dot(&w.t());
                out[mode].scaled_add(term.coeff, &contrib);
            }
        }
    }
    for mode in 0..3 {
        // project out the occupied space: G - Phi (Phi^dagger G)
        let phi = &spfs[mode];
        let inside = conj_transpose(phi).dot(&out[mode]);
        let projected = phi.dot(&inside);
        out[mode] -= &projected;
        out[mode].mapv_inplace(|c| c * Complex64::new(0.0, -1.0));
    }
    out
}

fn rk4_spf(
    wf: &mut MctdhWavefunction,
    h: &SopOperator,
    weight: &[[Option<Array2<Complex64>>; 3]],
    dt: f64,
) -> Result<()> {
    let y0 = wf.spfs.clone();
    let k1 = spf_derivative(&y0, h, weight);
    let y1 = advance(&y0, &k1, dt / 2.0);
    let k2 = spf_derivative(&y1, h, weight);
    let y2 = advance(&y0, &k2, dt / 2.0);
    let k3 = spf_derivative(&y2, h, weight);
    let y3 = advance(&y0, &k3, dt);
    let k4 = spf_derivative(&y3, h, weight);
    for mode in 0..3 {
        let mut step = k1[mode].clone();
        step.scaled_add(Complex64::new(2.0, 0.0), &k2[mode]);
        step.scaled_add(Complex64::new(2.0, 0.0), &k3[mode]);
        step += &k4[mode];
        wf.spfs[mode].scaled_add(Complex64::new(dt / 6.0, 0.0), &step);
    }
    Ok(())
}

fn advance(
    y: &[Array2<Complex64>; 3],
    k: &[Array2<Complex64>; 3],
    dt: f64,
) -> [Array2<Complex64>; 3] {
    let mut out = y.clone();
    for mode in 0..3 {
        out[mode].scaled_add(Complex64::new(dt, 0.0), &k[mode]);
    }
    out
}

/// Loewdin orthonormalization of the SPFs, compensated in the core tensor
/// so the represented state is exactly unchanged.
fn restore_orthonormality(wf: &mut MctdhWavefunction) -> Result<()> {
    for mode in 0..3 {
        let s = overlap(&wf.spfs[mode]);
        let s_half = hermitian_function(&s, |l| l.max(1e-300).sqrt())?;
        let s_inv_half = hermitian_function(&s, |l| 1.0 / l.max(1e-300).sqrt())?;
        wf.spfs[mode] = wf.spfs[mode].dot(&s_inv_half);
        wf.core = tensor::apply_dense_complex(&wf.core, &s_half, mode);
    }
    Ok(())
}

/// Grid-space one-mode density of a full wavefunction.
fn mode_density_grid(amps: &Array3<Complex64>, mode: usize) -> Array2<Complex64> {
    tensor::fold_density(amps, amps, mode)
}

/// Configuration-space one-mode density of the core tensor.
fn mode_density_core(core: &Array3<Complex64>, mode: usize) -> Array2<Complex64> {
    tensor::fold_density(core, core, mode)
}

/// Apply a real one-dimensional factor to every column of a complex matrix.
fn apply_factor_columns(factor: &Factor, phi: &Array2<Complex64>) -> Array2<Complex64> {
    match factor {
        Factor::Identity => phi.clone(),
        Factor::Diagonal(d) => {
            let mut out = phi.clone();
            for (mut row, &scale) in out.rows_mut().into_iter().zip(d.iter()) {
                for v in row.iter_mut() {
                    *v = *v * scale;
                }
            }
            out
        }
        Factor::Dense(m) => {
            let (n, cols) = phi.dim();
            let mut out = Array2::<Complex64>::zeros((n, cols));
            for i in 0..n {
                for k in 0..n {
                    let c = m[[i, k]];
                    if c == 0.0 {
                        continue;
                    }
                    for j in 0..cols {
                        out[[i, j]] += c * phi[[k, j]];
                    }
                }
            }
            out
        }
    }
}

fn conj_transpose(m: &Array2<Complex64>) -> Array2<Complex64> {
    let (r, c) = m.dim();
    let mut out = Array2::<Complex64>::zeros((c, r));
    for i in 0..r {
        for j in 0..c {
            out[[j, i]] = m[[i, j]].conj();
        }
    }
    out
}

fn overlap(phi: &Array2<Complex64>) -> Array2<Complex64> {
    conj_transpose(phi).dot(phi)
}
