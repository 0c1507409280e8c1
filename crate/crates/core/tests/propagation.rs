//! Dynamics checks: stationary states, conservation laws, the analytic
//! coherent-state oracle, absorber behavior, and the low-rank backend
//! against the exact propagator.

mod common;

use common::{build_system, separable_operator};
use ivr_core::constants::fs_to_au;
use ivr_core::eigensolver::StateLabel;
use ivr_core::grid::{build_ho_dvr, build_legendre_dvr};
use ivr_core::hamiltonian::{build_cap, Factor, SopOperator, SopTerm};
use ivr_core::pes::PesModel;
use ivr_core::propagator::{
    make_initial_state, propagate_exact, propagate_mctdh, renormalized_view,
};
use ivr_core::wavefunction::GridWavefunction;
use ndarray::{Array1, Array3};
use num_complex::Complex64;

#[test]
fn product_state_is_stationary_under_separable_operator() {
    let sys = build_system(PesModel::synthetic(), [14, 12, 8], [1.3, 1.0], 0.04);
    let h0 = separable_operator(&sys.zs);
    for label in [StateLabel::new(0, 0, 0), StateLabel::new(2, 1, 1)] {
        let psi0 = make_initial_state(label, &sys.spectra).unwrap();
        let traj = propagate_exact(&psi0, &h0, 1.0, 20.0).unwrap();
        for snap in &traj.snapshots {
            let overlap = psi0.inner(snap).norm();
            assert!(
                (overlap - 1.0).abs() < 1e-9,
                "survival dropped to {overlap} at t={}",
                snap.time_fs
            );
        }
        // the phase advances at the eigenenergy
        let e = sys.spectra.energy(label);
        let last = traj.snapshots.last().unwrap();
        let expected_phase = Complex64::from_polar(1.0, -e * fs_to_au(last.time_fs));
        let got = psi0.inner(last);
        assert!(
            (got - expected_phase).norm() < 1e-7,
            "phase mismatch: {got} vs {expected_phase}"
        );
    }
}

#[test]
fn separable_eigenvalues_add_mode_energies() {
    let sys = build_system(PesModel::synthetic_separable(), [12, 10, 8], [1.2, 0.9], 0.05);
    let h0 = separable_operator(&sys.zs);
    for label in [StateLabel::new(0, 0, 0), StateLabel::new(1, 2, 0)] {
        let psi = make_initial_state(label, &sys.spectra).unwrap();
        let e = h0.expectation(&psi.amplitudes).unwrap().re;
        let want = sys.spectra.energy(label);
        assert!(
            (e - want).abs() < 1e-10,
            "label {label}: {e} vs sum {want}"
        );
    }
}

#[test]
fn norm_and_energy_conserved_without_absorber() {
    let sys = build_system(PesModel::synthetic(), [16, 12, 10], [1.4, 1.0], 0.04);
    let psi0 = make_initial_state(StateLabel::new(1, 0, 1), &sys.spectra).unwrap();
    let traj = propagate_exact(&psi0, &sys.full, 0.5, 60.0).unwrap();
    let e0 = sys.full.expectation(&traj.snapshots[0].amplitudes).unwrap().re;
    for snap in &traj.snapshots {
        assert!(
            (snap.norm() - 1.0).abs() < 1e-9,
            "norm drift {} at t={}",
            (snap.norm() - 1.0).abs(),
            snap.time_fs
        );
        let e = sys.full.expectation(&snap.amplitudes).unwrap().re;
        assert!(
            (e - e0).abs() < 1e-9,
            "energy drift {} at t={}",
            (e - e0).abs(),
            snap.time_fs
        );
    }
}

#[test]
fn coherent_state_follows_classical_oscillation() {
    // one-dimensional oscillator on the first mode; identity elsewhere
    let (n, mass, omega, center) = (48usize, 2000.0, 0.01, 0.0);
    let basis = build_ho_dvr(n, mass, omega, center).unwrap();
    let mut h_terms = vec![SopTerm::new(
        Complex64::new(-0.5 / mass, 0.0),
        [
            Factor::Dense(basis.d2.clone()),
            Factor::Identity,
            Factor::Identity,
        ],
    )];
    let v: Array1<f64> = Array1::from_iter(
        basis
            .points
            .iter()
            .map(|&q| 0.5 * mass * omega * omega * (q - center) * (q - center)),
    );
    h_terms.push(SopTerm::new(
        Complex64::new(1.0, 0.0),
        [Factor::Diagonal(v), Factor::Identity, Factor::Identity],
    ));
    let h = SopOperator::new(h_terms, true);

    // displaced ground state
    let x0 = 0.3;
    let mut amps = Array3::<Complex64>::zeros((n, 1, 1));
    let norm_const = (mass * omega / std::f64::consts::PI).powf(0.25);
    for (a, &q) in basis.points.iter().enumerate() {
        let value = norm_const * (-0.5 * mass * omega * (q - x0) * (q - x0)).exp();
        amps[[a, 0, 0]] = Complex64::new(basis.weights[a].sqrt() * value, 0.0);
    }
    let psi0 = GridWavefunction::new(amps, 0.0);
    assert!((psi0.norm() - 1.0).abs() < 1e-10, "norm {}", psi0.norm());

    let q_op = SopOperator::new(
        vec![SopTerm::new(
            Complex64::new(1.0, 0.0),
            [
                Factor::Diagonal(Array1::from_iter(basis.points.iter().copied())),
                Factor::Identity,
                Factor::Identity,
            ],
        )],
        true,
    );
    let traj = propagate_exact(&psi0, &h, 0.25, 40.0).unwrap();
    for snap in &traj.snapshots {
        let q = q_op.expectation(&snap.amplitudes).unwrap().re;
        let want = center + (x0 - center) * (omega * fs_to_au(snap.time_fs)).cos();
        assert!(
            (q - want).abs() < 1e-6,
            "<q>({}) = {q}, classical {want}",
            snap.time_fs
        );
    }
}

#[test]
fn autocorrelation_time_reversal() {
    let sys = build_system(PesModel::synthetic(), [12, 10, 8], [1.2, 0.9], 0.04);
    let psi0 = make_initial_state(StateLabel::new(2, 0, 0), &sys.spectra).unwrap();
    let forward = propagate_exact(&psi0, &sys.full, 1.0, 15.0).unwrap();
    // backward evolution through negated Hamiltonian coefficients
    let mut neg = sys.full.clone();
    for term in neg.terms.iter_mut() {
        term.coeff = -term.coeff;
    }
    let backward = propagate_exact(&psi0, &neg, 1.0, 15.0).unwrap();
    for (fw, bw) in forward.snapshots.iter().zip(backward.snapshots.iter()) {
        let c_plus = psi0.inner(fw);
        let c_minus = psi0.inner(bw);
        assert!(
            (c_minus - c_plus.conj()).norm() < 1e-9,
            "time reversal broken at t={}: {c_minus} vs {}",
            fw.time_fs,
            c_plus.conj()
        );
    }
}

#[test]
fn absorber_gives_monotone_norm_loss() {
    // free spreading Gaussian on the first mode reaching the absorber
    let (n, mass) = (48usize, 1500.0);
    let basis = build_ho_dvr(n, mass, 4.0e-3, 0.0).unwrap();
    let kinetic = SopOperator::new(
        vec![SopTerm::new(
            Complex64::new(-0.5 / mass, 0.0),
            [
                Factor::Dense(basis.d2.clone()),
                Factor::Identity,
                Factor::Identity,
            ],
        )],
        true,
    );
    let cap = build_cap(0.075, 1.0, &basis).unwrap();
    let h = kinetic.plus(&cap);
    assert!(!h.hermitian);

    let sigma = 0.25;
    let mut amps = Array3::<Complex64>::zeros((n, 1, 1));
    for (a, &q) in basis.points.iter().enumerate() {
        let g = (-q * q / (4.0 * sigma * sigma)).exp();
        amps[[a, 0, 0]] = Complex64::new(basis.weights[a].sqrt() * g, 0.0);
    }
    let norm = amps.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    amps.mapv_inplace(|c| c / norm);
    let psi0 = GridWavefunction::new(amps, 0.0);

    let traj = propagate_exact(&psi0, &h, 0.5, 30.0).unwrap();
    let pd = ivr_core::diagnostics::dissociation_probability(&traj).unwrap();
    assert!(pd.values[0].abs() < 1e-12, "P_D(0) = {}", pd.values[0]);
    for w in pd.values.windows(2) {
        assert!(w[1] + 1e-12 >= w[0], "absorbed fraction decreased");
    }
    let last = *pd.values.last().unwrap();
    assert!(last > 1e-3, "absorber never engaged: P_D(end) = {last}");
    // norms never increase
    for w in traj.norms_sq.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn renormalized_view_homogeneity() {
    let sys = build_system(PesModel::synthetic(), [10, 8, 8], [1.1, 0.9], 0.04);
    let psi = make_initial_state(StateLabel::new(1, 1, 0), &sys.spectra).unwrap();
    let view = renormalized_view(&psi).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in psi.amplitudes.iter().zip(view.amplitudes.iter()) {
        worst = f64::max(worst, (a - b).norm());
    }
    assert!(worst < 1e-12, "unit-norm input changed by {worst}");

    let half = GridWavefunction::new(psi.amplitudes.mapv(|a| a * 0.5), psi.time_fs);
    let view_half = renormalized_view(&half).unwrap();
    let e_full = sys.full.expectation(&view.amplitudes).unwrap().re;
    let e_half = sys.full.expectation(&view_half.amplitudes).unwrap().re;
    assert!((e_full - e_half).abs() < 1e-12);

    let zero = GridWavefunction::new(Array3::zeros((10, 8, 8)), 0.0);
    assert!(renormalized_view(&zero).is_err());
}

#[test]
fn mctdh_full_rank_matches_exact_propagator() {
    let dims = [10, 8, 8];
    let sys = build_system(PesModel::synthetic(), dims, [1.1, 0.9], 0.04);
    let psi0 = make_initial_state(StateLabel::new(1, 1, 0), &sys.spectra).unwrap();
    let t_final = 25.0;
    let exact = propagate_exact(&psi0, &sys.full, 2.5, t_final).unwrap();
    let low = propagate_mctdh(&psi0, &sys.full, dims, 2.5, t_final).unwrap();
    let fin_e = exact.snapshots.last().unwrap();
    let fin_m = low.snapshots.last().unwrap();
    let overlap = fin_e.inner(fin_m).norm();
    assert!(
        overlap >= 0.9999,
        "full-rank overlap with exact is only {overlap}"
    );
}

#[test]
fn mctdh_rank_one_is_a_hartree_product() {
    let sys = build_system(PesModel::synthetic(), [10, 8, 8], [1.1, 0.9], 0.04);
    let psi0 = make_initial_state(StateLabel::new(0, 1, 0), &sys.spectra).unwrap();
    let traj = propagate_mctdh(&psi0, &sys.full, [1, 1, 1], 2.0, 10.0).unwrap();
    // a rank-(1,1,1) state has zero entanglement entropy at all times
    for snap in &traj.snapshots {
        let view = snap.renormalized().unwrap();
        let s = ivr_core::diagnostics::entanglement_entropy(&view).unwrap();
        for v in s {
            assert!(v.abs() < 1e-8, "rank-1 state has entropy {v}");
        }
    }
}

#[test]
fn mctdh_error_decreases_with_rank() {
    let dims = [12, 10, 8];
    let sys = build_system(PesModel::synthetic(), dims, [1.2, 0.9], 0.05);
    let psi0 = make_initial_state(StateLabel::new(2, 1, 0), &sys.spectra).unwrap();
    let t_final = 20.0;
    let exact = propagate_exact(&psi0, &sys.full, 2.0, t_final).unwrap();
    let fin = exact.snapshots.last().unwrap();
    let mut errs = Vec::new();
    for rank in [2usize, 4, 6] {
        let low = propagate_mctdh(&psi0, &sys.full, [rank, rank, rank], 2.0, t_final).unwrap();
        let fin_m = low.snapshots.last().unwrap();
        let mut diff = 0.0f64;
        for (a, b) in fin.amplitudes.iter().zip(fin_m.amplitudes.iter()) {
            diff += (a - b).norm_sqr();
        }
        errs.push(diff.sqrt());
    }
    assert!(
        errs[2] < errs[0],
        "rank-6 error {} not below rank-2 error {}",
        errs[2],
        errs[0]
    );
    assert!(
        errs[1] <= errs[0] * 1.05,
        "rank-4 error {} above rank-2 error {}",
        errs[1],
        errs[0]
    );
}
