//! Eigensolvers for the one-dimensional mode Hamiltonians, enumeration of
//! zero-order product states, and the density-of-states histogram.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::DvrBasis;
use crate::hamiltonian::ZeroOrderSet;
use crate::linalg::{eigh_sym, lanczos_lowest};

/// Which local mode a spectrum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Cs,
    Oc,
    Theta,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Cs => "cs",
            Mode::Oc => "oc",
            Mode::Theta => "theta",
        }
    }
}

/// Zero-order quantum numbers (n, m, l) of a product state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateLabel {
    pub n: usize,
    pub m: usize,
    pub l: usize,
}

impl StateLabel {
    pub fn new(n: usize, m: usize, l: usize) -> Self {
        StateLabel { n, m, l }
    }

    pub fn index(&self, mode: Mode) -> usize {
        match mode {
            Mode::Cs => self.n,
            Mode::Oc => self.m,
            Mode::Theta => self.l,
        }
    }
}

impl std::fmt::Display for StateLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({} {} {})", self.n, self.m, self.l)
    }
}

/// Retained eigenpairs of one mode Hamiltonian, energies ascending,
/// eigenvectors as orthonormal columns in the DVR representation.
#[derive(Debug, Clone)]
pub struct ZeroOrderSpectrum {
    pub mode: Mode,
    pub energies: Vec<f64>,
    pub vectors: Array2<f64>,
}

impl ZeroOrderSpectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn max_energy(&self) -> f64 {
        self.energies.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Threshold below which a dense solve replaces the Lanczos iteration.
pub const DENSE_CUTOVER: usize = 256;

/// Lowest `k` eigenpairs of a one-dimensional Hermitian matrix.
///
/// Uses Lanczos with full reorthogonalization, falling back to a dense
/// solve for small dimensions. Residuals and orthonormality are verified
/// before returning.
pub fn solve_mode(mode: Mode, h: &Array2<f64>, k: usize) -> Result<ZeroOrderSpectrum> {
    let dim = h.nrows();
    if h.ncols() != dim {
        return Err(Error::InvalidArgument(
            "mode Hamiltonian must be square".into(),
        ));
    }
    if k == 0 || k > dim {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {dim}-dimensional mode Hamiltonian"
        )));
    }
    let (energies, vectors) = if dim <= DENSE_CUTOVER {
        let (vals, vecs) = eigh_sym(h)?;
        let mut v = Array2::zeros((dim, k));
        for c in 0..k {
            for r in 0..dim {
                v[[r, c]] = vecs[[r, c]];
            }
        }
        (vals.iter().take(k).copied().collect::<Vec<f64>>(), v)
    } else {
        let matvec = |x: &[f64], y: &mut [f64]| {
            for (i, yi) in y.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, xj) in x.iter().enumerate() {
                    acc += h[[i, j]] * xj;
                }
                *yi = acc;
            }
        };
        let (vals, vecs) = lanczos_lowest(dim, &matvec, k, 1e-10, dim.min(4 * k + 80))?;
        let mut v = Array2::zeros((dim, k));
        for (c, vec) in vecs.iter().enumerate() {
            for (r, x) in vec.iter().enumerate() {
                v[[r, c]] = *x;
            }
        }
        (vals, v)
    };

    // verify residuals and orthonormality
    let mut worst_res = 0.0f64;
    for c in 0..k {
        let mut res = 0.0f64;
        for r in 0..dim {
            let mut hv = 0.0;
            for j in 0..dim {
                hv += h[[r, j]] * vectors[[j, c]];
            }
            res += (hv - energies[c] * vectors[[r, c]]).powi(2);
        }
        worst_res = worst_res.max(res.sqrt());
    }
    if worst_res > 1e-9 {
        return Err(Error::Convergence {
            residual: worst_res,
            iterations: dim,
        });
    }
    let mut worst_orth = 0.0f64;
    for a in 0..k {
        for b in 0..k {
            let mut g = 0.0;
            for r in 0..dim {
                g += vectors[[r, a]] * vectors[[r, b]];
            }
            let want = if a == b { 1.0 } else { 0.0 };
            worst_orth = worst_orth.max((g - want).abs());
        }
    }
    if worst_orth > 1e-10 {
        return Err(Error::Convergence {
            residual: worst_orth,
            iterations: dim,
        });
    }
    Ok(ZeroOrderSpectrum {
        mode,
        energies,
        vectors,
    })
}

/// The three mode spectra used as the analysis basis.
#[derive(Debug, Clone)]
pub struct ModeSpectra {
    pub cs: ZeroOrderSpectrum,
    pub oc: ZeroOrderSpectrum,
    pub theta: ZeroOrderSpectrum,
}

impl ModeSpectra {
    pub fn get(&self, mode: Mode) -> &ZeroOrderSpectrum {
        match mode {
            Mode::Cs => &self.cs,
            Mode::Oc => &self.oc,
            Mode::Theta => &self.theta,
        }
    }

    pub fn lens(&self) -> [usize; 3] {
        [self.cs.len(), self.oc.len(), self.theta.len()]
    }

    pub fn energy(&self, label: StateLabel) -> f64 {
        self.cs.energies[label.n] + self.oc.energies[label.m] + self.theta.energies[label.l]
    }

    pub fn contains(&self, label: StateLabel) -> bool {
        label.n < self.cs.len() && label.m < self.oc.len() && label.l < self.theta.len()
    }

    /// Zero-point energy of the product ground state.
    pub fn zero_point(&self) -> f64 {
        self.cs.energies[0] + self.oc.energies[0] + self.theta.energies[0]
    }
}

/// Solve all three mode Hamiltonians, retaining states below
/// `e_max` + 0.02 hartree. CS states that leak past the absorber onset
/// (amplitude beyond `cap_r_abs` above 1e-4 of the maximum) are dropped;
/// retention stops at the first leaky state to keep indices contiguous.
pub fn solve_zero_order_spectra(
    zs: &ZeroOrderSet,
    bases: &[DvrBasis; 3],
    e_max: f64,
    cap_r_abs: Option<f64>,
) -> Result<ModeSpectra> {
    let margin = 0.02;
    let solve_retained = |mode: Mode, h: &Array2<f64>| -> Result<ZeroOrderSpectrum> {
        let dim = h.nrows();
        let full = solve_mode(mode, h, dim.min(DENSE_CUTOVER))?;
        let mut keep = 0usize;
        for (idx, &e) in full.energies.iter().enumerate() {
            if e > e_max + margin {
                break;
            }
            if mode == Mode::Cs {
                if let Some(r_abs) = cap_r_abs {
                    let mut peak = 0.0f64;
                    let mut beyond = 0.0f64;
                    for (a, &r) in bases[0].points.iter().enumerate() {
                        let amp = full.vectors[[a, idx]].abs();
                        peak = peak.max(amp);
                        if r > r_abs {
                            beyond = beyond.max(amp);
                        }
                    }
                    if beyond > 1e-4 * peak {
                        break;
                    }
                }
            }
            keep = idx + 1;
        }
        if keep == 0 {
            return Err(Error::Coverage {
                mode: mode.name(),
                reached: f64::NEG_INFINITY,
                needed: e_max,
            });
        }
        let mut vectors = Array2::zeros((dim, keep));
        for c in 0..keep {
            for r in 0..dim {
                vectors[[r, c]] = full.vectors[[r, c]];
            }
        }
        Ok(ZeroOrderSpectrum {
            mode,
            energies: full.energies[..keep].to_vec(),
            vectors,
        })
    };
    Ok(ModeSpectra {
        cs: solve_retained(Mode::Cs, &zs.h_cs)?,
        oc: solve_retained(Mode::Oc, &zs.h_oc)?,
        theta: solve_retained(Mode::Theta, &zs.h_theta)?,
    })
}

/// All product states with total zero-order energy at or below `e_max`,
/// sorted by energy (ties broken by ascending quantum numbers).
pub fn enumerate_states(spectra: &ModeSpectra, e_max: f64) -> Result<Vec<(StateLabel, f64)>> {
    for mode in [Mode::Cs, Mode::Oc, Mode::Theta] {
        let s = spectra.get(mode);
        if s.max_energy() < e_max {
            return Err(Error::Coverage {
                mode: mode.name(),
                reached: s.max_energy(),
                needed: e_max,
            });
        }
    }
    let mut out = Vec::new();
    for (n, &e_n) in spectra.cs.energies.iter().enumerate() {
        if e_n + spectra.oc.energies[0] + spectra.theta.energies[0] > e_max {
            break;
        }
        for (m, &e_m) in spectra.oc.energies.iter().enumerate() {
            if e_n + e_m + spectra.theta.energies[0] > e_max {
                break;
            }
            for (l, &e_l) in spectra.theta.energies.iter().enumerate() {
                let e = e_n + e_m + e_l;
                if e > e_max {
                    break;
                }
                out.push((StateLabel::new(n, m, l), e));
            }
        }
    }
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(out)
}

/// Counts of product states per energy bin, starting at zero energy.
#[derive(Debug, Clone)]
pub struct DosHistogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl DosHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Bin centers in hartree.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|i| (i as f64 + 0.5) * self.bin_width)
            .collect()
    }
}

/// Default histogram bin width, hartree.
pub const DOS_BIN_WIDTH: f64 = 0.01;

/// Histogram of the state count versus zero-order energy.
pub fn dos_histogram(states: &[(StateLabel, f64)], bin_width: f64) -> Result<DosHistogram> {
    if states.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot histogram an empty state list".into(),
        ));
    }
    if !(bin_width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let e_max = states
        .iter()
        .map(|(_, e)| *e)
        .fold(f64::NEG_INFINITY, f64::max);
    let n_bins = (e_max / bin_width).floor() as usize + 1;
    let mut counts = vec![0usize; n_bins];
    for (_, e) in states {
        let mut bin = (e / bin_width).floor() as usize;
        if bin >= n_bins {
            bin = n_bins - 1;
        }
        counts[bin] += 1;
    }
    Ok(DosHistogram { bin_width, counts })
}
