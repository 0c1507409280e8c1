//! Grid-space wavefunctions.

use ndarray::Array3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tensor;

/// A complex rank-3 amplitude tensor on the direct-product DVR grid,
/// indexed (cs, oc, theta). Quadrature weights are absorbed into the
/// amplitudes, so the squared Euclidean norm is the physical norm.
#[derive(Debug, Clone)]
pub struct GridWavefunction {
    pub amplitudes: Array3<Complex64>,
    /// Trajectory time of this snapshot, femtoseconds.
    pub time_fs: f64,
    norm_sq: f64,
}

impl GridWavefunction {
    pub fn new(amplitudes: Array3<Complex64>, time_fs: f64) -> Self {
        let norm_sq = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        GridWavefunction {
            amplitudes,
            time_fs,
            norm_sq,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        let (a, b, c) = self.amplitudes.dim();
        [a, b, c]
    }

    /// Cached squared norm, updated on construction.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    /// <self|other>.
    pub fn inner(&self, other: &GridWavefunction) -> Complex64 {
        tensor::inner(&self.amplitudes, &other.amplitudes)
    }

    /// Unit-norm copy for expectation values under absorber norm loss.
    pub fn renormalized(&self) -> Result<GridWavefunction> {
        let n = self.norm();
        if n <= 1e-12 {
            return Err(Error::DegenerateState { norm: n });
        }
        let inv = Complex64::new(1.0 / n, 0.0);
        Ok(GridWavefunction::new(
            self.amplitudes.mapv(|a| a * inv),
            self.time_fs,
        ))
    }
}
