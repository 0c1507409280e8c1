//! Discrete variable representations for the three internal coordinates.
//!
//! Stretches use a harmonic-oscillator DVR (grid points are eigenvalues of
//! the position operator in the lowest oscillator eigenfunctions), the bend
//! uses a Gauss-Legendre DVR in x = cos(theta).
//!
//! Amplitude convention: quadrature weights are absorbed into the grid
//! amplitudes, so the discrete Euclidean norm of an amplitude vector equals
//! the continuous norm of the wavefunction (with the sin(theta) volume
//! element for the bend). All operator matrices below act on amplitudes in
//! that convention.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::eigh_sym;

/// Which DVR family a basis belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DvrKind {
    HarmonicOscillator,
    Legendre,
}

/// Parameters of the underlying oscillator basis for the HO DVR.
#[derive(Debug, Clone, Copy)]
pub struct HoParams {
    /// Mass in electron masses.
    pub mass: f64,
    /// Oscillator frequency in hartree.
    pub omega: f64,
    /// Grid center in bohr.
    pub center: f64,
}

/// Angular operator blocks needed by the bending kinetic energy, in the
/// DVR representation. All act on amplitudes with the absorbed
/// sin(theta) volume element.
#[derive(Debug, Clone)]
pub struct AngularOps {
    /// d/dtheta composed with multiplication by sin(theta); antisymmetric.
    pub dtheta_sin: Array2<f64>,
    /// cot(theta) d/dtheta sin(theta) d/dtheta
    /// + (1/sin) d/dtheta sin(theta) d/dtheta cos(theta); symmetric as a sum.
    pub bend_cross: Array2<f64>,
    /// (1/sin) d/dtheta sin(theta) d/dtheta; diagonal -l(l+1) in the
    /// Legendre basis.
    pub legendre: Array2<f64>,
}

/// One-dimensional DVR basis: points, weights and derivative matrices.
#[derive(Debug, Clone)]
pub struct DvrBasis {
    pub kind: DvrKind,
    pub n_points: usize,
    /// Grid values, strictly increasing. Bohr for stretches, x = cos(theta)
    /// for the bend.
    pub points: Vec<f64>,
    /// Bend only: theta in radians for each point (decreasing, paired with
    /// the ascending x values).
    pub thetas: Option<Vec<f64>>,
    /// Quadrature weights, all positive.
    pub weights: Vec<f64>,
    /// First-derivative representation. For the bend this is
    /// d/dtheta . sin(theta).
    pub d1: Array2<f64>,
    /// Second-derivative representation. For the bend this is the Legendre
    /// operator (1/sin) d/dtheta sin(theta) d/dtheta.
    pub d2: Array2<f64>,
    pub ho_params: Option<HoParams>,
    angular: Option<AngularOps>,
    /// FBR -> DVR transform, columns indexed by grid point.
    transform: Array2<f64>,
}

impl DvrBasis {
    /// Angular operator blocks; present for the Legendre DVR only.
    pub fn angular_ops(&self) -> Option<&AngularOps> {
        self.angular.as_ref()
    }

    /// The orthogonal transform from the spectral basis to the grid basis.
    pub fn transform(&self) -> &Array2<f64> {
        &self.transform
    }
}

/// Build an `n_points` harmonic-oscillator DVR for a stretch coordinate.
///
/// Grid points are the eigenvalues of the position operator in the
/// `n_points` lowest oscillator eigenfunctions, shifted by `center`;
/// `d1`/`d2` are the exact derivative matrices in that representation.
pub fn build_ho_dvr(n_points: usize, mass: f64, omega: f64, center: f64) -> Result<DvrBasis> {
    if n_points < 1 {
        return Err(Error::InvalidParameter(
            "ho dvr: n_points must be >= 1".into(),
        ));
    }
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ho dvr: mass must be positive, got {mass}"
        )));
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ho dvr: omega must be positive, got {omega}"
        )));
    }
    let n = n_points;
    let mw = mass * omega;

    // position operator in the oscillator basis: tridiagonal
    let mut x_fbr = Array2::<f64>::zeros((n, n));
    for k in 0..n.saturating_sub(1) {
        let off = (((k + 1) as f64) / (2.0 * mw)).sqrt();
        x_fbr[[k, k + 1]] = off;
        x_fbr[[k + 1, k]] = off;
    }
    let (raw_points, mut u) = eigh_sym(&x_fbr)?;

    // sign convention: overlap with the nodeless ground state positive
    for col in 0..n {
        if u[[0, col]] < 0.0 {
            for row in 0..n {
                u[[row, col]] = -u[[row, col]];
            }
        }
    }

    // weights from the ground-state function: w = (U_{0a} / phi_0(x_a))^2
    let phi0_norm = (mw / PI).powf(0.25);
    let mut weights = Vec::with_capacity(n);
    for a in 0..n {
        let x = raw_points[a];
        let phi0 = phi0_norm * (-0.5 * mw * x * x).exp();
        weights.push((u[[0, a]] / phi0).powi(2));
    }

    // analytic derivative matrices in the oscillator basis
    let mut d1_fbr = Array2::<f64>::zeros((n, n));
    let mut d2_fbr = Array2::<f64>::zeros((n, n));
    let half_mw = (mw / 2.0).sqrt();
    for k in 0..n {
        d2_fbr[[k, k]] = -(mw / 2.0) * (2.0 * k as f64 + 1.0);
        if k + 1 < n {
            let c = ((k + 1) as f64).sqrt() * half_mw;
            // d/dx = sqrt(m w / 2) (a - a^dagger)
            d1_fbr[[k, k + 1]] = c;
            d1_fbr[[k + 1, k]] = -c;
        }
        if k + 2 < n {
            let c = (mw / 2.0) * (((k + 1) * (k + 2)) as f64).sqrt();
            d2_fbr[[k, k + 2]] = c;
            d2_fbr[[k + 2, k]] = c;
        }
    }
    let d1 = u.t().dot(&d1_fbr).dot(&u);
    let d2 = u.t().dot(&d2_fbr).dot(&u);

    let points: Vec<f64> = raw_points.iter().map(|x| x + center).collect();

    Ok(DvrBasis {
        kind: DvrKind::HarmonicOscillator,
        n_points: n,
        points,
        thetas: None,
        weights,
        d1,
        d2,
        ho_params: Some(HoParams {
            mass,
            omega,
            center,
        }),
        angular: None,
        transform: u,
    })
}

/// Oscillator frequency that makes the outermost grid point of an
/// `n_points` HO DVR land at `half_width` from the center.
pub fn ho_omega_for_span(n_points: usize, mass: f64, half_width: f64) -> Result<f64> {
    if n_points < 1 || !(mass > 0.0) || !(half_width > 0.0) {
        return Err(Error::InvalidParameter(
            "ho span: need n_points >= 1, mass > 0, half_width > 0".into(),
        ));
    }
    if n_points == 1 {
        // single point sits at the center; any positive frequency works
        return Ok(1.0 / mass);
    }
    // largest Hermite node of the unit-parameter problem (m*w = 1)
    let probe = build_ho_dvr(n_points, 1.0, 1.0, 0.0)?;
    let t_max = probe.points.last().copied().unwrap();
    Ok(t_max * t_max / (mass * half_width * half_width))
}

/// Build an `n_points` Gauss-Legendre DVR for the bending angle.
pub fn build_legendre_dvr(n_points: usize) -> Result<DvrBasis> {
    if n_points < 1 {
        return Err(Error::InvalidParameter(
            "legendre dvr: n_points must be >= 1".into(),
        ));
    }
    let n = n_points;
    let (x, w) = gauss_legendre(n);

    // normalized Legendre values and derivatives at the nodes
    let mut p = Array2::<f64>::zeros((n, n)); // p[[l, a]]
    let mut dp = Array2::<f64>::zeros((n, n));
    let mut ddp = Array2::<f64>::zeros((n, n));
    for a in 0..n {
        let xa = x[a];
        let (vals, d1s, d2s) = legendre_all(n, xa);
        for l in 0..n {
            let nrm = ((2.0 * l as f64 + 1.0) / 2.0).sqrt();
            p[[l, a]] = nrm * vals[l];
            dp[[l, a]] = nrm * d1s[l];
            ddp[[l, a]] = nrm * d2s[l];
        }
    }

    // orthogonal FBR -> DVR transform
    let mut u = Array2::<f64>::zeros((n, n));
    for l in 0..n {
        for a in 0..n {
            u[[l, a]] = w[a].sqrt() * p[[l, a]];
        }
    }

    // FBR matrices of the angular operators by exact quadrature.
    // With x = cos(theta) the operator actions on f(x) are polynomial:
    //   d/dtheta sin(theta) f            = x f - (1 - x^2) f'
    //   cot d/dt sin d/dt f              = x ((1-x^2) f'' - 2 x f')
    //   (1/sin) d/dt sin d/dt (x f)      = (1-x^2)(2 f' + x f'') - 2 x (f + x f')
    //   (1/sin) d/dt sin d/dt f          = (1-x^2) f'' - 2 x f'
    let quad_fbr = |action: &dyn Fn(usize, usize) -> f64| -> Array2<f64> {
        let mut mat = Array2::<f64>::zeros((n, n));
        for k in 0..n {
            for l in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    acc += w[a] * p[[k, a]] * action(l, a);
                }
                mat[[k, l]] = acc;
            }
        }
        mat
    };
    let a1_fbr = quad_fbr(&|l, a| {
        let xa = x[a];
        xa * p[[l, a]] - (1.0 - xa * xa) * dp[[l, a]]
    });
    let a2_fbr = quad_fbr(&|l, a| {
        let xa = x[a];
        xa * ((1.0 - xa * xa) * ddp[[l, a]] - 2.0 * xa * dp[[l, a]])
    });
    let a3_fbr = quad_fbr(&|l, a| {
        let xa = x[a];
        (1.0 - xa * xa) * (2.0 * dp[[l, a]] + xa * ddp[[l, a]])
            - 2.0 * xa * (p[[l, a]] + xa * dp[[l, a]])
    });
    let a4_fbr = quad_fbr(&|l, a| {
        let xa = x[a];
        (1.0 - xa * xa) * ddp[[l, a]] - 2.0 * xa * dp[[l, a]]
    });

    let to_dvr = |m: &Array2<f64>| u.t().dot(m).dot(&u);
    let dtheta_sin = to_dvr(&a1_fbr);
    let bend_cross = to_dvr(&(&a2_fbr + &a3_fbr));
    let legendre = to_dvr(&a4_fbr);

    let thetas: Vec<f64> = x.iter().map(|xa| xa.acos()).collect();

    Ok(DvrBasis {
        kind: DvrKind::Legendre,
        n_points: n,
        points: x,
        thetas: Some(thetas),
        weights: w,
        d1: dtheta_sin.clone(),
        d2: legendre.clone(),
        ho_params: None,
        angular: Some(AngularOps {
            dtheta_sin,
            bend_cross,
            legendre,
        }),
        transform: u,
    })
}

/// Gauss-Legendre nodes (ascending) and weights on [-1, 1] by Newton
/// iteration on P_n; nodes are exactly symmetric about zero.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // descending-node initial guess (Tricomi)
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre_pair(n, z);
            let dz = pn / dpn;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dpn) = legendre_pair(n, z);
        let weight = 2.0 / ((1.0 - z * z) * dpn * dpn);
        // z from the guess above is the i-th node from the top
        x[n - 1 - i] = z;
        w[n - 1 - i] = weight;
        x[i] = -z;
        w[i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
        let (_, dpn) = legendre_pair(n, 0.0);
        w[n / 2] = 2.0 / (dpn * dpn);
    }
    (x, w)
}

/// P_n(x) and P_n'(x) by the upward recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0f64;
    let mut p = x;
    for l in 1..n {
        let lf = l as f64;
        let p_next = ((2.0 * lf + 1.0) * x * p - lf * p_prev) / (lf + 1.0);
        p_prev = p;
        p = p_next;
    }
    let dp = (n as f64) * (p_prev - x * p) / (1.0 - x * x);
    (p, dp)
}

/// Values, first and second derivatives of P_0..P_{n-1} at x.
fn legendre_all(n: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut vals = vec![0.0f64; n];
    let mut d1 = vec![0.0f64; n];
    let mut d2 = vec![0.0f64; n];
    vals[0] = 1.0;
    if n > 1 {
        vals[1] = x;
        d1[1] = 1.0;
    }
    for l in 1..n.saturating_sub(1) {
        let lf = l as f64;
        vals[l + 1] = ((2.0 * lf + 1.0) * x * vals[l] - lf * vals[l - 1]) / (lf + 1.0);
    }
    let om = 1.0 - x * x;
    for l in 2..n {
        let lf = l as f64;
        d1[l] = lf * (vals[l - 1] - x * vals[l]) / om;
    }
    // Legendre equation: (1-x^2) P'' = 2x P' - l(l+1) P
    for l in 0..n {
        let lf = l as f64;
        d2[l] = (2.0 * x * d1[l] - lf * (lf + 1.0) * vals[l]) / om;
    }
    (vals, d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_point_ho_dvr_sits_at_center() {
        let b = build_ho_dvr(1, 123.0, 0.3, 2.0).unwrap();
        assert_eq!(b.points.len(), 1);
        assert!((b.points[0] - 2.0).abs() < 1e-15);
        assert!(b.weights[0] > 0.0);
    }

    #[test]
    fn invalid_ho_parameters_rejected() {
        assert!(build_ho_dvr(0, 1.0, 1.0, 0.0).is_err());
        assert!(build_ho_dvr(4, -1.0, 1.0, 0.0).is_err());
        assert!(build_ho_dvr(4, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ho_dvr_reproduces_analytic_oscillator_spectrum() {
        // oracle: E_k = omega (k + 1/2) for the oscillator that defines the basis
        let (n, mass, omega) = (40usize, 1000.0, 0.01);
        let center = 1.5;
        let b = build_ho_dvr(n, mass, omega, center).unwrap();
        let mut h = b.d2.mapv(|x| -x / (2.0 * mass));
        for a in 0..n {
            let q = b.points[a] - center;
            h[[a, a]] += 0.5 * mass * omega * omega * q * q;
        }
        let (vals, _) = eigh_sym(&h).unwrap();
        for k in 0..6 {
            let want = omega * (k as f64 + 0.5);
            assert!(
                (vals[k] - want).abs() < 1e-9,
                "level {k}: {} vs {}",
                vals[k],
                want
            );
        }
    }

    #[test]
    fn ho_d1_antisymmetric_d2_symmetric() {
        let b = build_ho_dvr(24, 500.0, 0.02, 0.7).unwrap();
        let mut anti = 0.0f64;
        let mut sym = 0.0f64;
        for i in 0..24 {
            for j in 0..24 {
                anti = anti.max((b.d1[[i, j]] + b.d1[[j, i]]).abs());
                sym = sym.max((b.d2[[i, j]] - b.d2[[j, i]]).abs());
            }
        }
        assert!(anti < 1e-12, "d1 asymmetry {anti}");
        let scale = b.d2.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(sym < 1e-12 * scale, "d2 asymmetry {sym}");
    }

    #[test]
    fn ho_points_increasing_weights_positive() {
        let b = build_ho_dvr(32, 800.0, 0.01, -0.3).unwrap();
        for i in 1..32 {
            assert!(b.points[i] > b.points[i - 1]);
        }
        assert!(b.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn ho_kinetic_positive_definite() {
        let b = build_ho_dvr(20, 900.0, 0.015, 0.0).unwrap();
        let kin = b.d2.mapv(|x| -x / (2.0 * 900.0));
        let (vals, _) = eigh_sym(&kin).unwrap();
        assert!(vals[0] > 0.0, "lowest kinetic eigenvalue {}", vals[0]);
    }

    #[test]
    fn ho_d2_matches_analytic_gaussian_second_derivative() {
        // off-center Gaussian, narrower than the basis scale
        let (n, mass, omega) = (90usize, 1200.0, 0.008);
        let b = build_ho_dvr(n, mass, omega, 0.0).unwrap();
        let beta = 1.7 * mass * omega / 2.0;
        let x0 = 0.21;
        let g = |x: f64| (-beta * (x - x0) * (x - x0)).exp();
        let gdd = |x: f64| {
            let u = x - x0;
            (4.0 * beta * beta * u * u - 2.0 * beta) * g(x)
        };
        let amps: Vec<f64> = (0..n)
            .map(|a| b.weights[a].sqrt() * g(b.points[a]))
            .collect();
        let mut out = vec![0.0f64; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += b.d2[[i, j]] * amps[j];
            }
            out[i] = acc;
        }
        let scale = b
            .points
            .iter()
            .map(|&x| gdd(x).abs())
            .fold(0.0f64, f64::max);
        let span = b.points[n - 1];
        for a in 0..n {
            let x = b.points[a];
            if x.abs() > 0.55 * span {
                continue; // interior points only
            }
            let got = out[a] / b.weights[a].sqrt();
            assert!(
                (got - gdd(x)).abs() < 1e-8 * scale,
                "x={x}: {got} vs {}",
                gdd(x)
            );
        }
    }

    #[test]
    fn legendre_two_point_nodes() {
        let b = build_legendre_dvr(2).unwrap();
        let r = 1.0 / 3.0f64.sqrt();
        assert!((b.points[0] + r).abs() < 1e-14);
        assert!((b.points[1] - r).abs() < 1e-14);
    }

    #[test]
    fn legendre_weights_sum_to_two() {
        for n in [1usize, 2, 5, 16, 33, 64] {
            let b = build_legendre_dvr(n).unwrap();
            let s: f64 = b.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: sum {s}");
        }
    }

    #[test]
    fn legendre_quadrature_exact_for_quartic() {
        let b = build_legendre_dvr(16).unwrap();
        let s: f64 = b
            .points
            .iter()
            .zip(b.weights.iter())
            .map(|(x, w)| w * x.powi(4))
            .sum();
        assert!((s - 0.4).abs() < 1e-14, "int x^4 = {s}");
    }

    #[test]
    fn legendre_nodes_symmetric_and_interior() {
        for n in [7usize, 8, 31, 32] {
            let b = build_legendre_dvr(n).unwrap();
            for i in 0..n {
                let mirrored = -b.points[n - 1 - i];
                assert!((b.points[i] - mirrored).abs() < 1e-14);
                assert!(b.points[i] > -1.0 && b.points[i] < 1.0);
            }
        }
    }

    #[test]
    fn legendre_operator_diagonal_in_fbr() {
        // U^T legendre_dvr U must be diag(-l(l+1))
        let n = 14;
        let b = build_legendre_dvr(n).unwrap();
        let u = b.transform();
        let fbr = u.dot(&b.d2).dot(&u.t());
        for k in 0..n {
            for l in 0..n {
                let want = if k == l {
                    -((l * (l + 1)) as f64)
                } else {
                    0.0
                };
                assert!(
                    (fbr[[k, l]] - want).abs() < 1e-10,
                    "({k},{l}): {} vs {want}",
                    fbr[[k, l]]
                );
            }
        }
    }

    #[test]
    fn legendre_angular_symmetries() {
        let n = 18;
        let b = build_legendre_dvr(n).unwrap();
        let ops = b.angular_ops().unwrap();
        let mut anti = 0.0f64;
        let mut sym_cross = 0.0f64;
        let mut sym_leg = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                anti = anti.max((ops.dtheta_sin[[i, j]] + ops.dtheta_sin[[j, i]]).abs());
                sym_cross = sym_cross.max((ops.bend_cross[[i, j]] - ops.bend_cross[[j, i]]).abs());
                sym_leg = sym_leg.max((ops.legendre[[i, j]] - ops.legendre[[j, i]]).abs());
            }
        }
        assert!(anti < 1e-10, "dtheta_sin asymmetry {anti}");
        assert!(sym_cross < 1e-10, "bend_cross asymmetry {sym_cross}");
        assert!(sym_leg < 1e-10, "legendre asymmetry {sym_leg}");
    }

    #[test]
    fn ho_span_helper_hits_requested_half_width() {
        let mass = 15000.0;
        let half = 3.6;
        let omega = ho_omega_for_span(64, mass, half).unwrap();
        let b = build_ho_dvr(64, mass, omega, 0.0).unwrap();
        let outer = b.points.last().unwrap();
        assert!((outer - half).abs() < 1e-9, "outer point {outer}");
    }
}
