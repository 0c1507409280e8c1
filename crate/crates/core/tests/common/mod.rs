//! Shared setup for the integration suites: assembled operators on small
//! grids of the bundled synthetic surface.

use ivr_core::eigensolver::{solve_zero_order_spectra, ModeSpectra};
use ivr_core::grid::{build_ho_dvr, build_legendre_dvr, ho_omega_for_span, DvrBasis};
use ivr_core::hamiltonian::{build_full_h, build_kinetic, SopOperator, ZeroOrderSet};
use ivr_core::pes::PesModel;

pub struct System {
    pub model: PesModel,
    pub bases: [DvrBasis; 3],
    pub full: SopOperator,
    pub zs: ZeroOrderSet,
    pub spectra: ModeSpectra,
}

/// Assemble the full pipeline on a compact grid. `spans` are the HO-DVR
/// half-widths for the two stretches; `e_max` controls how many states
/// are retained per mode.
pub fn build_system(model: PesModel, dims: [usize; 3], spans: [f64; 2], e_max: f64) -> System {
    let m_cs = model.m_cs();
    let m_oc = model.m_oc();
    let w_cs = ho_omega_for_span(dims[0], m_cs, spans[0]).unwrap();
    let w_oc = ho_omega_for_span(dims[1], m_oc, spans[1]).unwrap();
    let bases = [
        build_ho_dvr(dims[0], m_cs, w_cs, model.r_cs_e + 0.25 * spans[0]).unwrap(),
        build_ho_dvr(dims[1], m_oc, w_oc, model.r_oc_e + 0.15 * spans[1]).unwrap(),
        build_legendre_dvr(dims[2]).unwrap(),
    ];
    let kinetic = build_kinetic(&bases, &model).unwrap();
    let full = build_full_h(&kinetic, &model, &bases).unwrap();
    let zs = ivr_core::hamiltonian::build_zero_order(&model, &bases, &full).unwrap();
    let spectra = solve_zero_order_spectra(&zs, &bases, e_max, None).unwrap();
    System {
        model,
        bases,
        full,
        zs,
        spectra,
    }
}

/// A strictly separable operator: the three embedded mode Hamiltonians.
pub fn separable_operator(zs: &ZeroOrderSet) -> SopOperator {
    use ivr_core::hamiltonian::{Factor, SopTerm};
    use num_complex::Complex64;
    let one = Complex64::new(1.0, 0.0);
    SopOperator::new(
        vec![
            SopTerm::new(
                one,
                [
                    Factor::Dense(zs.h_cs.clone()),
                    Factor::Identity,
                    Factor::Identity,
                ],
            ),
            SopTerm::new(
                one,
                [
                    Factor::Identity,
                    Factor::Dense(zs.h_oc.clone()),
                    Factor::Identity,
                ],
            ),
            SopTerm::new(
                one,
                [
                    Factor::Identity,
                    Factor::Identity,
                    Factor::Dense(zs.h_theta.clone()),
                ],
            ),
        ],
        true,
    )
}
