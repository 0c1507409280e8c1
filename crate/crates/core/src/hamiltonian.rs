//! Sum-of-products operators on the direct-product grid: the kinetic
//! operator in valence coordinates, the potential expansion, the absorbing
//! potential, and the zero-order splitting H = h_cs + h_oc + h_theta + H_I.
//!
//! The kinetic operator decomposes into eight strict product terms:
//! two stretch second derivatives, the cos(theta)-weighted mixed
//! stretch-stretch derivative, two stretch-bend couplings through
//! d/dtheta sin(theta), one combined bending block sharing the
//! 1/(r_cs r_oc) prefactor, and two centrifugal-style bending terms with
//! 1/r^2 prefactors. Radial prefactors are diagonal in the DVR; angular
//! blocks are dense matrices from the Legendre DVR.

use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{DvrBasis, DvrKind};
use crate::pes::PesModel;
use crate::tensor;
use crate::wavefunction::GridWavefunction;

/// One factor of a product term.
#[derive(Debug, Clone)]
pub enum Factor {
    Identity,
    Diagonal(Array1<f64>),
    Dense(Array2<f64>),
}

impl Factor {
    fn dim(&self) -> Option<usize> {
        match self {
            Factor::Identity => None,
            Factor::Diagonal(d) => Some(d.len()),
            Factor::Dense(m) => Some(m.nrows()),
        }
    }
}

/// A scalar coefficient times one factor per degree of freedom.
#[derive(Debug, Clone)]
pub struct SopTerm {
    pub coeff: Complex64,
    pub factors: [Factor; 3],
}

impl SopTerm {
    pub fn new(coeff: Complex64, factors: [Factor; 3]) -> Self {
        SopTerm { coeff, factors }
    }
}

/// A sum of products of one-dimensional operators.
#[derive(Debug, Clone)]
pub struct SopOperator {
    pub terms: Vec<SopTerm>,
    pub hermitian: bool,
}

/// Reusable buffers for operator application.
#[derive(Debug, Default)]
pub struct Scratch {
    a: Option<Array3<Complex64>>,
    b: Option<Array3<Complex64>>,
}

impl Scratch {
    fn get(&mut self, dims: (usize, usize, usize)) -> (&mut Array3<Complex64>, &mut Array3<Complex64>) {
        let fix = |slot: &mut Option<Array3<Complex64>>| {
            if slot.as_ref().map(|a| a.dim()) != Some(dims) {
                *slot = Some(Array3::zeros(dims));
            }
        };
        fix(&mut self.a);
        fix(&mut self.b);
        (self.a.as_mut().unwrap(), self.b.as_mut().unwrap())
    }
}

impl SopOperator {
    pub fn new(terms: Vec<SopTerm>, hermitian: bool) -> Self {
        SopOperator { terms, hermitian }
    }

    /// Concatenate the terms of two operators.
    pub fn plus(&self, other: &SopOperator) -> SopOperator {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        SopOperator {
            terms,
            hermitian: self.hermitian && other.hermitian,
        }
    }

    fn check_dims(&self, dims: [usize; 3]) -> Result<()> {
        for (ti, term) in self.terms.iter().enumerate() {
            for (mode, factor) in term.factors.iter().enumerate() {
                if let Some(d) = factor.dim() {
                    if d != dims[mode] {
                        return Err(Error::InvalidArgument(format!(
                            "term {ti}: factor for mode {mode} has dimension {d}, grid has {}",
                            dims[mode]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// out = O x. Buffers come from `scratch` so repeated applications do
    /// not allocate.
    pub fn apply_into(
        &self,
        x: &Array3<Complex64>,
        out: &mut Array3<Complex64>,
        scratch: &mut Scratch,
    ) -> Result<()> {
        let dims = x.dim();
        let [n0, n1, n2] = [dims.0, dims.1, dims.2];
        self.check_dims([n0, n1, n2])?;
        if out.dim() != dims {
            return Err(Error::InvalidArgument("output dimension mismatch".into()));
        }
        out.fill(Complex64::ZERO);
        let (buf_a, buf_b) = scratch.get(dims);
        for term in &self.terms {
            // chain the non-identity factors through the two buffers;
            // `holder` tracks where the current intermediate lives
            let mut holder = 0u8; // 0 = x, 1 = buf_a, 2 = buf_b
            for mode in 0..3 {
                let factor = &term.factors[mode];
                if matches!(factor, Factor::Identity) {
                    continue;
                }
                let next = if holder == 1 { 2 } else { 1 };
                {
                    let (src, dst): (&Array3<Complex64>, &mut Array3<Complex64>) =
                        match (holder, next) {
                            (0, 1) => (x, buf_a),
                            (1, 2) => (buf_a, buf_b),
                            (2, 1) => (buf_b, buf_a),
                            _ => unreachable!(),
                        };
                    match factor {
                        Factor::Diagonal(d) => {
                            tensor::apply_diag_real(src, d.as_slice().unwrap(), mode, dst)
                        }
                        Factor::Dense(m) => tensor::apply_dense_real(src, m, mode, dst),
                        Factor::Identity => unreachable!(),
                    }
                }
                holder = next;
            }
            let current: &Array3<Complex64> = match holder {
                0 => x,
                1 => buf_a,
                _ => buf_b,
            };
            tensor::axpy(term.coeff, current, out);
        }
        Ok(())
    }

    /// Allocating convenience wrapper around [`apply_into`].
    pub fn apply(&self, x: &Array3<Complex64>) -> Result<Array3<Complex64>> {
        let mut out = Array3::zeros(x.dim());
        let mut scratch = Scratch::default();
        self.apply_into(x, &mut out, &mut scratch)?;
        Ok(out)
    }

    /// <psi|O|psi> (no normalization applied).
    pub fn expectation(&self, psi: &Array3<Complex64>) -> Result<Complex64> {
        let opsi = self.apply(psi)?;
        Ok(tensor::inner(psi, &opsi))
    }

    /// Largest |<u|Ov> - <Ou|v>| over deterministic pseudo-random unit
    /// vector pairs.
    pub fn hermiticity_defect(&self, dims: [usize; 3], pairs: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        let mut seed = 0x2545f4914f6cdd1du64;
        for _ in 0..pairs {
            let u = random_state(dims, &mut seed);
            let v = random_state(dims, &mut seed);
            let ov = self.apply(&v)?;
            let ou = self.apply(&u)?;
            let lhs = tensor::inner(&u, &ov);
            let rhs = tensor::inner(&ou, &v);
            worst = worst.max((lhs - rhs).norm());
        }
        Ok(worst)
    }
}

fn random_state(dims: [usize; 3], seed: &mut u64) -> Array3<Complex64> {
    let mut x = Array3::zeros((dims[0], dims[1], dims[2]));
    for v in x.iter_mut() {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let re = ((*seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let im = ((*seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
        *v = Complex64::new(re, im);
    }
    let norm: f64 = x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    x.mapv_into(|a| a / norm)
}

/// Apply a sum-of-products operator to a wavefunction.
pub fn apply_sop(op: &SopOperator, psi: &GridWavefunction) -> Result<GridWavefunction> {
    let amps = op.apply(&psi.amplitudes)?;
    Ok(GridWavefunction::new(amps, psi.time_fs))
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Assemble the kinetic operator as eight product terms.
pub fn build_kinetic(bases: &[DvrBasis; 3], model: &PesModel) -> Result<SopOperator> {
    let [cs, oc, th] = bases;
    if cs.kind != DvrKind::HarmonicOscillator || oc.kind != DvrKind::HarmonicOscillator {
        return Err(Error::InvalidParameter(
            "stretch bases must be harmonic-oscillator DVRs".into(),
        ));
    }
    let ang = th.angular_ops().ok_or_else(|| {
        Error::InvalidParameter("bend basis must be a Legendre DVR".into())
    })?;
    let m_cs = model.m_cs();
    let m_oc = model.m_oc();
    let m_c = model.masses.m_c;
    if !(m_cs > 0.0 && m_oc > 0.0 && m_c > 0.0) {
        return Err(Error::InvalidParameter("masses must be positive".into()));
    }
    if cs.points.iter().chain(oc.points.iter()).any(|r| *r <= 0.0) {
        return Err(Error::InvalidParameter(
            "stretch grids must not reach nonpositive bond lengths".into(),
        ));
    }

    let inv_r_cs = Array1::from_iter(cs.points.iter().map(|r| 1.0 / r));
    let inv_r_oc = Array1::from_iter(oc.points.iter().map(|r| 1.0 / r));
    let inv_r2_cs = Array1::from_iter(cs.points.iter().map(|r| 1.0 / (r * r)));
    let inv_r2_oc = Array1::from_iter(oc.points.iter().map(|r| 1.0 / (r * r)));
    let cos_theta = Array1::from_iter(th.points.iter().copied());

    let terms = vec![
        // stretch kinetic energies
        SopTerm::new(
            re(-0.5 / m_cs),
            [Factor::Dense(cs.d2.clone()), Factor::Identity, Factor::Identity],
        ),
        SopTerm::new(
            re(-0.5 / m_oc),
            [Factor::Identity, Factor::Dense(oc.d2.clone()), Factor::Identity],
        ),
        // mixed stretch-stretch coupling, cos(theta)-weighted
        SopTerm::new(
            re(-1.0 / m_c),
            [
                Factor::Dense(cs.d1.clone()),
                Factor::Dense(oc.d1.clone()),
                Factor::Diagonal(cos_theta),
            ],
        ),
        // stretch-bend couplings through d/dtheta sin(theta)
        SopTerm::new(
            re(1.0 / m_c),
            [
                Factor::Diagonal(inv_r_cs.clone()),
                Factor::Dense(oc.d1.clone()),
                Factor::Dense(ang.dtheta_sin.clone()),
            ],
        ),
        SopTerm::new(
            re(1.0 / m_c),
            [
                Factor::Dense(cs.d1.clone()),
                Factor::Diagonal(inv_r_oc.clone()),
                Factor::Dense(ang.dtheta_sin.clone()),
            ],
        ),
        // combined bending block with the shared 1/(r_cs r_oc) prefactor
        SopTerm::new(
            re(0.5 / m_c),
            [
                Factor::Diagonal(inv_r_cs),
                Factor::Diagonal(inv_r_oc),
                Factor::Dense(ang.bend_cross.clone()),
            ],
        ),
        // centrifugal-style bending terms
        SopTerm::new(
            re(-0.5 / m_cs),
            [
                Factor::Diagonal(inv_r2_cs),
                Factor::Identity,
                Factor::Dense(ang.legendre.clone()),
            ],
        ),
        SopTerm::new(
            re(-0.5 / m_oc),
            [
                Factor::Identity,
                Factor::Diagonal(inv_r2_oc),
                Factor::Dense(ang.legendre.clone()),
            ],
        ),
    ];
    let op = SopOperator::new(terms, true);
    let dims = [cs.n_points, oc.n_points, th.n_points];
    let defect = op.hermiticity_defect(dims, 4)?;
    if defect > 1e-10 {
        return Err(Error::InvalidState(format!(
            "kinetic operator failed the self-adjointness check: defect {defect:.3e} \
             (derivative-matrix convention bug?)"
        )));
    }
    Ok(op)
}

/// Diagonal factor vectors of the potential expansion on the grid.
fn pes_factor(model: &PesModel, basis: &DvrBasis, mode: usize, power: u32) -> Array1<f64> {
    Array1::from_iter(basis.points.iter().map(|&p| {
        let y = match mode {
            0 => model.y_cs(p),
            1 => model.y_oc(p),
            // bend points are x = cos(theta)
            _ => p - model.theta_e.cos(),
        };
        y.powi(power as i32)
    }))
}

/// Full Hamiltonian: kinetic terms plus one product term per potential
/// coefficient.
pub fn build_full_h(
    kinetic: &SopOperator,
    model: &PesModel,
    bases: &[DvrBasis; 3],
) -> Result<SopOperator> {
    let mut terms = kinetic.terms.clone();
    for (&(i, j, k), &c) in &model.f {
        if c == 0.0 {
            continue;
        }
        let f_cs = if i == 0 {
            Factor::Identity
        } else {
            Factor::Diagonal(pes_factor(model, &bases[0], 0, i))
        };
        let f_oc = if j == 0 {
            Factor::Identity
        } else {
            Factor::Diagonal(pes_factor(model, &bases[1], 1, j))
        };
        let f_th = if k == 0 {
            Factor::Identity
        } else {
            Factor::Diagonal(pes_factor(model, &bases[2], 2, k))
        };
        terms.push(SopTerm::new(re(c), [f_cs, f_oc, f_th]));
    }
    Ok(SopOperator::new(terms, kinetic.hermitian))
}

/// Pointwise potential on the grid, evaluated through the scalar surface
/// expression (the oracle for the sum-of-products assembly).
pub fn potential_on_grid(model: &PesModel, bases: &[DvrBasis; 3]) -> Result<Array3<f64>> {
    let [cs, oc, th] = bases;
    let thetas = th
        .thetas
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("bend basis must be a Legendre DVR".into()))?;
    let mut v = Array3::zeros((cs.n_points, oc.n_points, th.n_points));
    for (a, &r1) in cs.points.iter().enumerate() {
        for (b, &r2) in oc.points.iter().enumerate() {
            for (g, &theta) in thetas.iter().enumerate() {
                v[[a, b, g]] = model.evaluate(r1, r2, theta)?;
            }
        }
    }
    Ok(v)
}

/// The complex absorbing potential -i eta (r - r_abs)^2 on the CS grid
/// beyond `r_abs`.
pub fn build_cap(eta: f64, r_abs: f64, basis_cs: &DvrBasis) -> Result<SopOperator> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "absorber strength must be positive, got {eta}"
        )));
    }
    let last = *basis_cs.points.last().unwrap();
    if r_abs >= last {
        return Err(Error::InvalidParameter(format!(
            "absorber onset {r_abs} lies beyond the grid end {last:.4}"
        )));
    }
    let ramp = Array1::from_iter(basis_cs.points.iter().map(|&r| {
        if r > r_abs {
            (r - r_abs) * (r - r_abs)
        } else {
            0.0
        }
    }));
    Ok(SopOperator::new(
        vec![SopTerm::new(
            Complex64::new(0.0, -eta),
            [Factor::Diagonal(ramp), Factor::Identity, Factor::Identity],
        )],
        false,
    ))
}

/// Pointwise value of the absorbing potential at a bond length.
pub fn cap_value(eta: f64, r_abs: f64, r: f64) -> Complex64 {
    if r > r_abs {
        Complex64::new(0.0, -eta * (r - r_abs) * (r - r_abs))
    } else {
        Complex64::ZERO
    }
}

/// The zero-order splitting: three one-dimensional mode Hamiltonians and
/// the residual coupling H_I = H - (h_cs + h_oc + h_theta).
#[derive(Debug, Clone)]
pub struct ZeroOrderSet {
    pub h_cs: Array2<f64>,
    pub h_oc: Array2<f64>,
    pub h_theta: Array2<f64>,
    /// Residual coupling as a sum of products: the full Hamiltonian terms
    /// followed by the three embedded mode Hamiltonians with coefficient -1,
    /// so the splitting identity holds to round-off by construction.
    pub h_i: SopOperator,
}

/// Build the zero-order mode Hamiltonians and the residual coupling.
///
/// The bending kinetic prefactors are frozen at the equilibrium bond
/// lengths, which makes h_theta a true one-dimensional operator.
pub fn build_zero_order(
    model: &PesModel,
    bases: &[DvrBasis; 3],
    full: &SopOperator,
) -> Result<ZeroOrderSet> {
    let [cs, oc, th] = bases;
    let ang = th.angular_ops().ok_or_else(|| {
        Error::InvalidParameter("bend basis must be a Legendre DVR".into())
    })?;
    let m_cs = model.m_cs();
    let m_oc = model.m_oc();
    let m_c = model.masses.m_c;

    let stretch_h = |basis: &DvrBasis, mass: f64, mode: usize| -> Array2<f64> {
        let mut h = basis.d2.mapv(|x| -x / (2.0 * mass));
        let coeffs = model.slice_coefficients(mode);
        for (a, &r) in basis.points.iter().enumerate() {
            let y = if mode == 0 { model.y_cs(r) } else { model.y_oc(r) };
            let mut v = 0.0;
            for (&p, &c) in &coeffs {
                v += c * y.powi(p as i32);
            }
            h[[a, a]] += v;
        }
        h
    };
    let h_cs = stretch_h(cs, m_cs, 0);
    let h_oc = stretch_h(oc, m_oc, 1);

    let r1e = model.r_cs_e;
    let r2e = model.r_oc_e;
    let mut h_theta = ang
        .bend_cross
        .mapv(|x| x * 0.5 / (m_c * r1e * r2e));
    let cent = 0.5 / (m_cs * r1e * r1e) + 0.5 / (m_oc * r2e * r2e);
    h_theta = h_theta + ang.legendre.mapv(|x| -cent * x);
    let coeffs = model.slice_coefficients(2);
    for (g, &x) in th.points.iter().enumerate() {
        let y = x - model.theta_e.cos();
        let mut v = 0.0;
        for (&p, &c) in &coeffs {
            v += c * y.powi(p as i32);
        }
        h_theta[[g, g]] += v;
    }

    let mut terms = full.terms.clone();
    terms.push(SopTerm::new(
        re(-1.0),
        [Factor::Dense(h_cs.clone()), Factor::Identity, Factor::Identity],
    ));
    terms.push(SopTerm::new(
        re(-1.0),
        [Factor::Identity, Factor::Dense(h_oc.clone()), Factor::Identity],
    ));
    terms.push(SopTerm::new(
        re(-1.0),
        [Factor::Identity, Factor::Identity, Factor::Dense(h_theta.clone())],
    ));
    let h_i = SopOperator::new(terms, full.hermitian);

    Ok(ZeroOrderSet {
        h_cs,
        h_oc,
        h_theta,
        h_i,
    })
}

/// <psi| (M acting on `mode`) |psi> for a one-dimensional operator.
pub fn expectation_mode(psi: &Array3<Complex64>, m: &Array2<f64>, mode: usize) -> Complex64 {
    let mut out = Array3::zeros(psi.dim());
    tensor::apply_dense_real(psi, m, mode, &mut out);
    tensor::inner(psi, &out)
}
