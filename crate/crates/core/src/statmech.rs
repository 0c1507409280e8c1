//! Microcanonical averaging in the zero-order product basis.
//!
//! The ensemble is an equal-weight mixture of the zero-order product
//! states inside a narrow energy window. Because the zero-order energies
//! are shifted against the full spectrum by the residual coupling, the
//! window is centered at the run energy minus the long-time expectation
//! of the coupling. States landing exactly on the window boundary are
//! included (closed window).

use crate::diagnostics::EnergySeries;
use crate::eigensolver::{enumerate_states, Mode, ModeSpectra, StateLabel};
use crate::error::{Error, Result};

/// Default window half-width, hartree.
pub const DEFAULT_DELTA_E: f64 = 0.025;

/// An energy window in the zero-order spectrum with its member states.
#[derive(Debug, Clone)]
pub struct MicroWindow {
    /// Window center: run energy minus the thermalized coupling energy.
    pub center: f64,
    pub half_width: f64,
    pub members: Vec<StateLabel>,
}

impl MicroWindow {
    /// Number of member states.
    pub fn omega(&self) -> usize {
        self.members.len()
    }
}

/// Build the window around `e_total - h_i_longtime` with half-width
/// `delta_e`.
pub fn build_window(
    spectra: &ModeSpectra,
    e_total: f64,
    h_i_longtime: f64,
    delta_e: f64,
) -> Result<MicroWindow> {
    if !(delta_e > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "window half-width must be positive, got {delta_e}"
        )));
    }
    let center = e_total - h_i_longtime;
    let states = enumerate_states(spectra, center + delta_e)?;
    let members: Vec<StateLabel> = states
        .iter()
        .filter(|(_, e)| (e - center).abs() <= delta_e)
        .map(|(s, _)| *s)
        .collect();
    if members.is_empty() {
        return Err(Error::DegenerateWindow {
            center,
            half_width: delta_e,
        });
    }
    Ok(MicroWindow {
        center,
        half_width: delta_e,
        members,
    })
}

/// Equal-weight mean of the selected mode's zero-order energy over the
/// window members.
pub fn microcanonical_average(window: &MicroWindow, spectra: &ModeSpectra, mode: Mode) -> f64 {
    let spectrum = spectra.get(mode);
    let sum: f64 = window
        .members
        .iter()
        .map(|label| spectrum.energies[label.index(mode)])
        .sum();
    sum / window.omega() as f64
}

/// Comparison of one mode's long-time energy with its microcanonical
/// average.
#[derive(Debug, Clone, Copy)]
pub struct ThermalizationEntry {
    pub mode: Mode,
    pub e_timeavg: f64,
    pub e_mic: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
}

/// Per-trajectory comparisons plus the cross-trajectory spread of the
/// long-time mode energies (the mode-specificity metric).
#[derive(Debug, Clone)]
pub struct ThermalizationReport {
    pub per_run: Vec<[ThermalizationEntry; 3]>,
    /// max - min of e_timeavg across runs, per mode; zero for one run.
    pub mode_spread: [f64; 3],
    /// Fraction of each trajectory used as the long-time tail.
    pub tail_fraction: f64,
}

/// Mean of the tail of a series (final `tail_fraction` of the samples).
pub fn tail_average(times_fs: &[f64], values: &[f64], tail_fraction: f64) -> f64 {
    let n = times_fs.len();
    let start = ((1.0 - tail_fraction) * n as f64).floor() as usize;
    let start = start.min(n.saturating_sub(1));
    let slice = &values[start..];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Compare long-time mode energies with microcanonical averages for one
/// or more trajectories sharing the same window and spectra.
pub fn thermalization_report(
    series: &[&EnergySeries],
    window: &MicroWindow,
    spectra: &ModeSpectra,
    tail_fraction: f64,
) -> Result<ThermalizationReport> {
    if series.is_empty() {
        return Err(Error::InvalidArgument(
            "thermalization report needs at least one trajectory".into(),
        ));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let mut per_run = Vec::with_capacity(series.len());
    let mut tails: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for es in series {
        let columns: [(Mode, Vec<f64>); 3] = [
            (Mode::Cs, es.rows.iter().map(|r| r.e_cs).collect()),
            (Mode::Oc, es.rows.iter().map(|r| r.e_oc).collect()),
            (Mode::Theta, es.rows.iter().map(|r| r.e_theta).collect()),
        ];
        let mut entries = Vec::with_capacity(3);
        for (i, (mode, values)) in columns.iter().enumerate() {
            let e_timeavg = tail_average(&es.times_fs, values, tail_fraction);
            let e_mic = microcanonical_average(window, spectra, *mode);
            let abs_dev = (e_timeavg - e_mic).abs();
            let rel_dev = if e_mic.abs() > 0.0 {
                abs_dev / e_mic.abs()
            } else {
                f64::INFINITY
            };
            entries.push(ThermalizationEntry {
                mode: *mode,
                e_timeavg,
                e_mic,
                abs_dev,
                rel_dev,
            });
            tails[i].push(e_timeavg);
        }
        per_run.push([entries[0], entries[1], entries[2]]);
    }
    let mut mode_spread = [0.0f64; 3];
    for i in 0..3 {
        let max = tails[i].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = tails[i].iter().cloned().fold(f64::INFINITY, f64::min);
        mode_spread[i] = max - min;
    }
    Ok(ThermalizationReport {
        per_run,
        mode_spread,
        tail_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::ZeroOrderSpectrum;
    use ndarray::Array2;

    fn spectra() -> ModeSpectra {
        let mk = |mode: Mode, omega: f64, count: usize| ZeroOrderSpectrum {
            mode,
            energies: (0..count).map(|k| omega * (k as f64 + 0.5)).collect(),
            vectors: Array2::eye(count),
        };
        // incommensurate spacings so product energies never tie exactly
        ModeSpectra {
            cs: mk(Mode::Cs, 0.0041232, 40),
            oc: mk(Mode::Oc, 0.0061771, 40),
            theta: mk(Mode::Theta, 0.0020317, 60),
        }
    }

    #[test]
    fn tight_window_holds_single_state() {
        let spectra = spectra();
        let label = StateLabel::new(1, 1, 1);
        let target = spectra.energy(label);
        // local level spacing around the target, by brute force
        let mut gap = f64::INFINITY;
        for n in 0..spectra.cs.len() {
            for m in 0..spectra.oc.len() {
                for l in 0..spectra.theta.len() {
                    if (n, m, l) == (1, 1, 1) {
                        continue;
                    }
                    let e = spectra.cs.energies[n]
                        + spectra.oc.energies[m]
                        + spectra.theta.energies[l];
                    gap = gap.min((e - target).abs());
                }
            }
        }
        assert!(gap > 0.0);
        let w = build_window(&spectra, target, 0.0, 0.45 * gap).unwrap();
        assert_eq!(w.omega(), 1);
        assert_eq!(w.members[0], label);
        // the one-member averages are the state's own mode energies
        for mode in [Mode::Cs, Mode::Oc, Mode::Theta] {
            let want = spectra.get(mode).energies[1];
            let got = microcanonical_average(&w, &spectra, mode);
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_coupling_centers_window_at_total_energy() {
        let spectra = spectra();
        let w = build_window(&spectra, 0.03, 0.0, 0.01).unwrap();
        assert!((w.center - 0.03).abs() < 1e-15);
    }

    #[test]
    fn members_match_brute_force_enumeration() {
        let spectra = spectra();
        let (center, delta) = (0.035, 0.012);
        let w = build_window(&spectra, center, 0.0, delta).unwrap();
        let mut brute = Vec::new();
        for n in 0..spectra.cs.len() {
            for m in 0..spectra.oc.len() {
                for l in 0..spectra.theta.len() {
                    let e = spectra.cs.energies[n]
                        + spectra.oc.energies[m]
                        + spectra.theta.energies[l];
                    if (e - center).abs() <= delta {
                        brute.push(StateLabel::new(n, m, l));
                    }
                }
            }
        }
        assert_eq!(w.omega(), brute.len());
        let set: std::collections::BTreeSet<_> = w.members.iter().collect();
        for s in &brute {
            assert!(set.contains(s));
        }
        // averages agree with the brute-force mean to round-off
        for mode in [Mode::Cs, Mode::Oc, Mode::Theta] {
            let avg = microcanonical_average(&w, &spectra, mode);
            let brute_avg: f64 = brute
                .iter()
                .map(|s| spectra.get(mode).energies[s.index(mode)])
                .sum::<f64>()
                / brute.len() as f64;
            assert!((avg - brute_avg).abs() < 1e-12);
        }
    }

    #[test]
    fn average_invariant_under_member_reordering() {
        let spectra = spectra();
        let mut w = build_window(&spectra, 0.03, 0.0, 0.01).unwrap();
        let before = microcanonical_average(&w, &spectra, Mode::Oc);
        w.members.reverse();
        let after = microcanonical_average(&w, &spectra, Mode::Oc);
        assert!((before - after).abs() < 1e-15);
    }

    #[test]
    fn window_membership_monotone_in_width() {
        let spectra = spectra();
        let center = 0.03;
        let mut prev: Option<std::collections::BTreeSet<StateLabel>> = None;
        for delta in [0.004, 0.008, 0.016, 0.032] {
            let w = build_window(&spectra, center, 0.0, delta).unwrap();
            let set: std::collections::BTreeSet<StateLabel> =
                w.members.iter().copied().collect();
            if let Some(p) = &prev {
                assert!(p.is_subset(&set), "window did not grow with delta");
            }
            prev = Some(set);
        }
    }

    #[test]
    fn per_mode_averages_sum_to_window_mean() {
        let spectra = spectra();
        let w = build_window(&spectra, 0.04, 0.0, 0.01).unwrap();
        let sum: f64 = [Mode::Cs, Mode::Oc, Mode::Theta]
            .iter()
            .map(|&m| microcanonical_average(&w, &spectra, m))
            .sum();
        let mean_e0: f64 = w
            .members
            .iter()
            .map(|s| spectra.energy(*s))
            .sum::<f64>()
            / w.omega() as f64;
        assert!((sum - mean_e0).abs() < 1e-12);
        assert!((mean_e0 - w.center).abs() <= w.half_width + 1e-12);
    }

    #[test]
    fn empty_window_is_reported() {
        let spectra = spectra();
        // center far below the zero-point energy
        let err = build_window(&spectra, 0.001, 0.0, 1e-5).unwrap_err();
        assert!(err.to_string().contains("window"));
    }

    #[test]
    fn identical_trajectories_have_zero_spread() {
        use crate::diagnostics::{EnergySeries, ModeEnergies};
        let spectra = spectra();
        let w = build_window(&spectra, 0.03, 0.0, 0.01).unwrap();
        let series = EnergySeries {
            times_fs: (0..100).map(|i| i as f64 * 0.25).collect(),
            rows: (0..100)
                .map(|i| ModeEnergies {
                    e_cs: 0.01 + 1e-4 * ((i as f64) * 0.3).sin(),
                    e_oc: 0.012,
                    e_theta: 0.008,
                    e_i: -0.002,
                    e_total: 0.028,
                })
                .collect(),
        };
        let report =
            thermalization_report(&[&series, &series], &w, &spectra, 0.25).unwrap();
        for spread in report.mode_spread {
            assert_eq!(spread, 0.0);
        }
        // time average of a constant column is the constant
        assert!((report.per_run[0][1].e_timeavg - 0.012).abs() < 1e-15);
    }
}
