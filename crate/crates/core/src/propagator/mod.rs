//! Time evolution of the wavepacket: a numerically exact short-iterative
//! Krylov propagator on the full grid, and a low-rank MCTDH backend.

mod krylov;
mod mctdh;

pub use krylov::{propagate as krylov_propagate, KrylovSettings};
pub use mctdh::{propagate_mctdh, propagate_mctdh_with, MctdhSettings, MctdhWavefunction};

use ndarray::Array3;
use num_complex::Complex64;

use crate::constants::fs_to_au;
use crate::diagnostics::TrajectoryRecord;
use crate::eigensolver::{ModeSpectra, StateLabel};
use crate::error::{Error, Result};
use crate::hamiltonian::{Scratch, SopOperator};
use crate::wavefunction::GridWavefunction;

/// Default Krylov space dimension for the exact propagator.
pub const DEFAULT_KRYLOV_DIM: usize = 40;
/// Default local error tolerance per internal substep.
pub const DEFAULT_KRYLOV_TOL: f64 = 1e-10;

/// The zero-order product state |n m l> as a grid wavefunction.
pub fn make_initial_state(label: StateLabel, spectra: &ModeSpectra) -> Result<GridWavefunction> {
    if !spectra.contains(label) {
        return Err(Error::InvalidArgument(format!(
            "label {label} outside the retained spectra {:?}",
            spectra.lens()
        )));
    }
    let v_cs = spectra.cs.vectors.column(label.n);
    let v_oc = spectra.oc.vectors.column(label.m);
    let v_th = spectra.theta.vectors.column(label.l);
    let (n0, n1, n2) = (v_cs.len(), v_oc.len(), v_th.len());
    let mut amps = Array3::<Complex64>::zeros((n0, n1, n2));
    for a in 0..n0 {
        for b in 0..n1 {
            let ab = v_cs[a] * v_oc[b];
            for g in 0..n2 {
                amps[[a, b, g]] = Complex64::new(ab * v_th[g], 0.0);
            }
        }
    }
    Ok(GridWavefunction::new(amps, 0.0))
}

/// Unit-norm copy of a wavefunction for expectation values under absorber
/// norm loss.
pub fn renormalized_view(psi: &GridWavefunction) -> Result<GridWavefunction> {
    psi.renormalized()
}

/// Streaming exact propagation: the sink receives every output snapshot,
/// starting with the initial state at t = 0.
pub fn propagate_exact_with(
    psi0: &GridWavefunction,
    h: &SopOperator,
    dt_out_fs: f64,
    t_final_fs: f64,
    krylov_dim: usize,
    krylov_tol: f64,
    mut sink: impl FnMut(&GridWavefunction) -> Result<()>,
) -> Result<()> {
    if !(dt_out_fs > 0.0) || t_final_fs < dt_out_fs {
        return Err(Error::InvalidArgument(format!(
            "need t_final >= dt_out > 0, got dt_out={dt_out_fs}, t_final={t_final_fs}"
        )));
    }
    let settings = if h.hermitian {
        KrylovSettings::hermitian(krylov_dim, krylov_tol)
    } else {
        KrylovSettings::general(krylov_dim, krylov_tol)
    };
    let n_out = (t_final_fs / dt_out_fs).round() as usize;
    let dt_au = fs_to_au(dt_out_fs);

    let mut amps = psi0.amplitudes.clone();
    let mut scratch = Scratch::default();
    sink(&GridWavefunction::new(amps.clone(), 0.0))?;
    let mut apply = |x: &Array3<Complex64>, out: &mut Array3<Complex64>| -> Result<()> {
        h.apply_into(x, out, &mut scratch)
    };
    for k in 1..=n_out {
        let t_fs = k as f64 * dt_out_fs;
        krylov_propagate(settings, &mut apply, &mut amps, dt_au, t_fs)?;
        if amps.iter().any(|a| !a.is_finite()) {
            return Err(Error::Propagation {
                t_fs,
                msg: "non-finite amplitudes after step".into(),
            });
        }
        sink(&GridWavefunction::new(amps.clone(), t_fs))?;
    }
    Ok(())
}

/// Exact propagation collecting all snapshots in memory.
pub fn propagate_exact(
    psi0: &GridWavefunction,
    h: &SopOperator,
    dt_out_fs: f64,
    t_final_fs: f64,
) -> Result<TrajectoryRecord> {
    let mut record = TrajectoryRecord::new(!h.hermitian);
    propagate_exact_with(
        psi0,
        h,
        dt_out_fs,
        t_final_fs,
        DEFAULT_KRYLOV_DIM,
        DEFAULT_KRYLOV_TOL,
        |snap| {
            record.push(snap.clone());
            Ok(())
        },
    )?;
    Ok(record)
}
