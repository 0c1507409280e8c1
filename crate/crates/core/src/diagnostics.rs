//! Observables derived from trajectory snapshots: mode energies,
//! populations in quantum-number space, time averages, the spectral
//! function, entanglement entropies, dissociation probability, and
//! Boltzmann fits of mode population distributions.

use std::collections::BTreeMap;

use ndarray::{Array2, Array3};
use num_complex::Complex64;

use crate::constants::{fs_to_au, KB_HARTREE_PER_K};
use crate::eigensolver::{ModeSpectra, StateLabel};
use crate::error::{Error, Result};
use crate::hamiltonian::{expectation_mode, SopOperator, ZeroOrderSet};
use crate::linalg::eigh_hermitian;
use crate::tensor;
use crate::wavefunction::GridWavefunction;

/// Time series of wavefunction snapshots with run metadata.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    /// Identifier of the producing configuration (checksum or free text).
    pub fingerprint: String,
    pub times_fs: Vec<f64>,
    pub snapshots: Vec<GridWavefunction>,
    pub norms_sq: Vec<f64>,
    pub cap_active: bool,
}

impl TrajectoryRecord {
    pub fn new(cap_active: bool) -> Self {
        TrajectoryRecord {
            cap_active,
            ..Default::default()
        }
    }

    pub fn push(&mut self, snap: GridWavefunction) {
        if let Some(&last) = self.times_fs.last() {
            assert!(snap.time_fs > last, "snapshot times must increase");
        }
        self.times_fs.push(snap.time_fs);
        self.norms_sq.push(snap.norm_sq());
        self.snapshots.push(snap);
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// A named scalar time series.
#[derive(Debug, Clone)]
pub struct ObservableSeries {
    pub name: String,
    pub times_fs: Vec<f64>,
    pub values: Vec<f64>,
}

/// Expectation values of the zero-order mode Hamiltonians, the residual
/// coupling, and the total energy, for one snapshot.
#[derive(Debug, Clone, Copy)]
pub struct ModeEnergies {
    pub e_cs: f64,
    pub e_oc: f64,
    pub e_theta: f64,
    pub e_i: f64,
    pub e_total: f64,
}

impl ModeEnergies {
    /// Residual of the splitting identity; zero up to round-off.
    pub fn sum_rule_residual(&self) -> f64 {
        (self.e_cs + self.e_oc + self.e_theta + self.e_i - self.e_total).abs()
    }
}

/// Mode energies of a normalized snapshot. Under an absorbing potential
/// pass the renormalized view.
pub fn mode_energies(
    psi: &GridWavefunction,
    zs: &ZeroOrderSet,
    full: &SopOperator,
) -> Result<ModeEnergies> {
    let amps = &psi.amplitudes;
    let e_cs = expectation_mode(amps, &zs.h_cs, 0).re;
    let e_oc = expectation_mode(amps, &zs.h_oc, 1).re;
    let e_theta = expectation_mode(amps, &zs.h_theta, 2).re;
    let e_i = zs.h_i.expectation(amps)?.re;
    let e_total = full.expectation(amps)?.re;
    Ok(ModeEnergies {
        e_cs,
        e_oc,
        e_theta,
        e_i,
        e_total,
    })
}

/// Mode-energy rows for a whole trajectory (renormalizing under a CAP).
#[derive(Debug, Clone)]
pub struct EnergySeries {
    pub times_fs: Vec<f64>,
    pub rows: Vec<ModeEnergies>,
}

pub fn energy_series(
    traj: &TrajectoryRecord,
    zs: &ZeroOrderSet,
    full: &SopOperator,
) -> Result<EnergySeries> {
    let mut rows = Vec::with_capacity(traj.len());
    for snap in &traj.snapshots {
        let view = if traj.cap_active {
            snap.renormalized()?
        } else {
            snap.clone()
        };
        rows.push(mode_energies(&view, zs, full)?);
    }
    Ok(EnergySeries {
        times_fs: traj.times_fs.clone(),
        rows,
    })
}

/// Projection of a snapshot onto the retained zero-order product basis:
/// c[n, m, l] = <n m l | psi>.
pub fn coefficient_tensor(psi: &GridWavefunction, spectra: &ModeSpectra) -> Array3<Complex64> {
    let mut c = psi.amplitudes.clone();
    for (mode, spectrum) in [&spectra.cs, &spectra.oc, &spectra.theta]
        .into_iter()
        .enumerate()
    {
        let (dim, k) = spectrum.vectors.dim();
        let mut proj = Array2::<Complex64>::zeros((k, dim));
        for col in 0..k {
            for row in 0..dim {
                proj[[col, row]] = Complex64::new(spectrum.vectors[[row, col]], 0.0);
            }
        }
        c = tensor::apply_dense_complex(&c, &proj, mode);
    }
    c
}

/// Populations |<n m l|psi>|^2 of the requested product states.
pub fn product_populations(
    psi: &GridWavefunction,
    spectra: &ModeSpectra,
    labels: &[StateLabel],
) -> Result<Vec<f64>> {
    for label in labels {
        if !spectra.contains(*label) {
            return Err(Error::InvalidArgument(format!(
                "label {label} outside the retained spectra"
            )));
        }
    }
    let c = coefficient_tensor(psi, spectra);
    Ok(labels
        .iter()
        .map(|s| c[[s.n, s.m, s.l]].norm_sqr())
        .collect())
}

/// Trapezoidal time average of a sampled series over [0, t_fs].
fn trapezoid_average(times: &[f64], values: &[f64], t_fs: f64) -> f64 {
    let mut acc = 0.0;
    let mut span = 0.0;
    for i in 1..times.len() {
        if times[i] > t_fs + 1e-9 {
            break;
        }
        let dt = times[i] - times[i - 1];
        acc += 0.5 * (values[i] + values[i - 1]) * dt;
        span += dt;
    }
    if span > 0.0 {
        acc / span
    } else {
        values.first().copied().unwrap_or(0.0)
    }
}

/// Time-averaged populations of the requested labels over [0, t_fs].
pub fn time_average_populations(
    traj: &TrajectoryRecord,
    spectra: &ModeSpectra,
    labels: &[StateLabel],
    t_fs: f64,
) -> Result<BTreeMap<StateLabel, f64>> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let series: Vec<Vec<f64>> = traj
        .snapshots
        .iter()
        .map(|snap| product_populations(snap, spectra, labels))
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for (idx, label) in labels.iter().enumerate() {
        let values: Vec<f64> = series.iter().map(|row| row[idx]).collect();
        out.insert(*label, trapezoid_average(&traj.times_fs, &values, t_fs));
    }
    Ok(out)
}

/// Default pruning threshold for stored quantum-number-space populations.
pub const QNS_PRUNE: f64 = 1e-8;

/// Time-averaged populations over the whole retained product basis,
/// pruned below `prune`.
pub fn qns_time_average(
    traj: &TrajectoryRecord,
    spectra: &ModeSpectra,
    t_fs: f64,
    prune: f64,
) -> Result<BTreeMap<StateLabel, f64>> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let lens = spectra.lens();
    let mut acc = Array3::<f64>::zeros((lens[0], lens[1], lens[2]));
    let mut span = 0.0;
    let mut prev: Option<Array3<f64>> = None;
    for (i, snap) in traj.snapshots.iter().enumerate() {
        if traj.times_fs[i] > t_fs + 1e-9 {
            break;
        }
        let c = coefficient_tensor(snap, spectra);
        let p = c.mapv(|z| z.norm_sqr());
        if let Some(prev_p) = prev.take() {
            let dt = traj.times_fs[i] - traj.times_fs[i - 1];
            acc.scaled_add(0.5 * dt, &prev_p);
            acc.scaled_add(0.5 * dt, &p);
            span += dt;
        }
        prev = Some(p);
    }
    if span > 0.0 {
        acc.mapv_inplace(|x| x / span);
    }
    let mut out = BTreeMap::new();
    for n in 0..lens[0] {
        for m in 0..lens[1] {
            for l in 0..lens[2] {
                let v = acc[[n, m, l]];
                if v >= prune {
                    out.insert(StateLabel::new(n, m, l), v);
                }
            }
        }
    }
    Ok(out)
}

/// Window applied to the autocorrelation before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Triangular window 1 - |t|/T; its kernel is nonnegative, so the
    /// spectrum stays positive to round-off.
    Fejer,
    /// cos^2(pi t / 2T) window.
    CosineSq,
}

impl Window {
    fn value(self, t: f64, t_total: f64) -> f64 {
        match self {
            Window::Fejer => 1.0 - (t / t_total).abs(),
            Window::CosineSq => {
                let c = (std::f64::consts::FRAC_PI_2 * t / t_total).cos();
                c * c
            }
        }
    }
}

/// Windowed Fourier transform of the autocorrelation on an energy grid.
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    pub energies: Vec<f64>,
    pub sigma: Vec<f64>,
    pub window: Window,
    pub t_used_fs: f64,
}

impl SpectralFunction {
    /// Trapezoidal integral of sigma over the grid.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.energies.len() {
            acc += 0.5 * (self.sigma[i] + self.sigma[i - 1])
                * (self.energies[i] - self.energies[i - 1]);
        }
        acc
    }
}

/// Autocorrelation C(t) = <psi(0)|psi(t)> along a trajectory.
pub fn autocorrelation(traj: &TrajectoryRecord) -> Vec<Complex64> {
    let psi0 = &traj.snapshots[0];
    traj.snapshots.iter().map(|s| psi0.inner(s)).collect()
}

/// Spectral function from a uniformly sampled autocorrelation: the
/// series is extended to negative times by C(-t) = C*(t), windowed, and
/// transformed; the 1/(2 pi) normalization makes the integral equal the
/// squared initial norm.
pub fn spectral_function(
    times_fs: &[f64],
    autocorr: &[Complex64],
    e_grid: &[f64],
    window: Window,
) -> Result<SpectralFunction> {
    if times_fs.len() != autocorr.len() || times_fs.len() < 2 {
        return Err(Error::InvalidArgument(
            "autocorrelation needs at least two uniform samples".into(),
        ));
    }
    let n = times_fs.len();
    let dt_fs = times_fs[1] - times_fs[0];
    for k in 1..n {
        let want = times_fs[0] + k as f64 * dt_fs;
        if (times_fs[k] - want).abs() > 1e-9 * times_fs[n - 1].abs().max(1.0) {
            return Err(Error::InvalidArgument(
                "autocorrelation samples are not uniformly spaced".into(),
            ));
        }
    }
    let t_total_fs = times_fs[n - 1] - times_fs[0];
    let t_total = fs_to_au(t_total_fs);
    let dt = fs_to_au(dt_fs);
    let mut sigma = Vec::with_capacity(e_grid.len());
    for &e in e_grid {
        // trapezoid over [-T, T] using C(-t) = C*(t):
        // sigma = dt/(2 pi) [ C0 + 2 sum_k Re(C_k W_k e^{i E t_k}) ]
        let mut acc = autocorr[0].re * window.value(0.0, t_total);
        for k in 1..n {
            let t = k as f64 * dt;
            let w = window.value(t, t_total);
            let half = if k == n - 1 { 0.5 } else { 1.0 };
            let phase = Complex64::from_polar(1.0, e * t);
            acc += 2.0 * half * w * (autocorr[k] * phase).re;
        }
        sigma.push(acc * dt / (2.0 * std::f64::consts::PI));
    }
    Ok(SpectralFunction {
        energies: e_grid.to_vec(),
        sigma,
        window,
        t_used_fs: t_total_fs,
    })
}

pub fn spectral_function_from_traj(
    traj: &TrajectoryRecord,
    e_grid: &[f64],
    window: Window,
) -> Result<SpectralFunction> {
    let c = autocorrelation(traj);
    spectral_function(&traj.times_fs, &c, e_grid, window)
}

/// Uniform energy grid from 0 to `e_max` with spacing at most
/// pi / (4 T), so the lineshape width set by T is resolved.
pub fn default_energy_grid(t_final_fs: f64, e_max: f64) -> Vec<f64> {
    let t_au = fs_to_au(t_final_fs);
    let spacing = std::f64::consts::PI / (4.0 * t_au);
    let n = (e_max / spacing).ceil() as usize + 1;
    (0..=n).map(|i| i as f64 * e_max / n as f64).collect()
}

/// Von Neumann entanglement entropy of each mode with respect to the
/// other two, for a normalized snapshot.
pub fn entanglement_entropy(psi: &GridWavefunction) -> Result<[f64; 3]> {
    let mut out = [0.0f64; 3];
    for mode in 0..3 {
        let rho = tensor::fold_density(&psi.amplitudes, &psi.amplitudes, mode);
        let (vals, _) = eigh_hermitian(&rho)?;
        let mut s = 0.0;
        for &p in vals.iter() {
            if p < -1e-12 {
                return Err(Error::InvalidState(format!(
                    "reduced density eigenvalue {p} below tolerance"
                )));
            }
            let p = p.max(0.0);
            if p > 0.0 {
                s -= p * p.ln();
            }
        }
        out[mode] = s;
    }
    Ok(out)
}

/// Per-mode population distributions with the spillover outside the
/// retained basis.
#[derive(Debug, Clone)]
pub struct ModePopulations {
    /// p^(cs)_n, p^(oc)_m, p^(theta)_l.
    pub dists: [Vec<f64>; 3],
    /// norm^2 minus the total retained population.
    pub spillover: f64,
    /// Set when the spillover exceeds 1e-3.
    pub coverage_warning: bool,
}

/// Populations of the zero-order states of each local mode (marginals of
/// the product-state table).
pub fn mode_populations(psi: &GridWavefunction, spectra: &ModeSpectra) -> ModePopulations {
    let c = coefficient_tensor(psi, spectra);
    let p = c.mapv(|z| z.norm_sqr());
    let lens = spectra.lens();
    let mut dists = [
        vec![0.0; lens[0]],
        vec![0.0; lens[1]],
        vec![0.0; lens[2]],
    ];
    let mut total = 0.0;
    for n in 0..lens[0] {
        for m in 0..lens[1] {
            for l in 0..lens[2] {
                let v = p[[n, m, l]];
                dists[0][n] += v;
                dists[1][m] += v;
                dists[2][l] += v;
                total += v;
            }
        }
    }
    let spillover = (psi.norm_sq() - total).max(0.0);
    ModePopulations {
        dists,
        spillover,
        coverage_warning: spillover > 1e-3,
    }
}

/// Dissociation probability 1 - |<psi|psi>|^2 along a trajectory with an
/// active absorber.
pub fn dissociation_probability(traj: &TrajectoryRecord) -> Result<ObservableSeries> {
    if !traj.cap_active {
        return Err(Error::InvalidState(
            "dissociation probability needs an active absorbing potential".into(),
        ));
    }
    let values = traj
        .norms_sq
        .iter()
        .map(|&n2| 1.0 - n2 * n2)
        .collect();
    Ok(ObservableSeries {
        name: "P_D".into(),
        times_fs: traj.times_fs.clone(),
        values,
    })
}

/// Result of a Boltzmann fit of a mode population distribution.
#[derive(Debug, Clone, Copy)]
pub struct BoltzmannFit {
    /// Fitted kT in hartree; infinite when the distribution is flat.
    pub kt_hartree: f64,
    /// kT converted to kelvin.
    pub temperature_k: f64,
    /// Weighted RMS residual of ln p against the fit.
    pub rms_residual: f64,
    /// False when the fitted slope is nonnegative or negligible.
    pub thermal: bool,
}

/// Weighted least-squares fit of ln p against E with weights p.
pub fn boltzmann_fit(populations: &[f64], energies: &[f64]) -> Result<BoltzmannFit> {
    if populations.len() != energies.len() {
        return Err(Error::InvalidArgument(
            "populations and energies must have the same length".into(),
        ));
    }
    let pts: Vec<(f64, f64, f64)> = populations
        .iter()
        .zip(energies.iter())
        .filter(|(p, _)| **p > 1e-6)
        .map(|(&p, &e)| (e, p.ln(), p))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Boltzmann fit needs at least 3 populated states, got {}",
            pts.len()
        )));
    }
    let wsum: f64 = pts.iter().map(|(_, _, w)| w).sum();
    let ex: f64 = pts.iter().map(|(e, _, w)| w * e).sum::<f64>() / wsum;
    let ly: f64 = pts.iter().map(|(_, l, w)| w * l).sum::<f64>() / wsum;
    let sxx: f64 = pts.iter().map(|(e, _, w)| w * (e - ex) * (e - ex)).sum();
    let sxy: f64 = pts.iter().map(|(e, l, w)| w * (e - ex) * (l - ly)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData(
            "Boltzmann fit needs distinct energies".into(),
        ));
    }
    let slope = sxy / sxx;
    let mut rss = 0.0;
    for (e, l, w) in &pts {
        let fit = ly + slope * (e - ex);
        rss += w * (l - fit) * (l - fit);
    }
    let rms_residual = (rss / wsum).sqrt();
    // slope = -1/kT for a thermal distribution
    let thermal = slope < -1e-3;
    let kt_hartree = if slope < 0.0 {
        -1.0 / slope
    } else {
        f64::INFINITY
    };
    Ok(BoltzmannFit {
        kt_hartree,
        temperature_k: kt_hartree / KB_HARTREE_PER_K,
        rms_residual,
        thermal,
    })
}
