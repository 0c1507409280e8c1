//! Physical constants and unit conversions.
//!
//! All internal state is kept in Hartree atomic units (hartree, bohr,
//! electron mass, hbar = 1). Times cross the API boundary in femtoseconds
//! and are converted exactly once, here.

/// One atomic unit of time, in femtoseconds.
pub const AU_TIME_FS: f64 = 2.418884254e-2;

/// One unified atomic mass unit, in electron masses.
pub const U_TO_ME: f64 = 1822.888486;

/// Boltzmann constant, hartree per kelvin.
pub const KB_HARTREE_PER_K: f64 = 3.166811563e-6;

/// Convert a time from femtoseconds to atomic units.
#[inline]
pub fn fs_to_au(t_fs: f64) -> f64 {
    t_fs / AU_TIME_FS
}

/// Convert a time from atomic units to femtoseconds.
#[inline]
pub fn au_to_fs(t_au: f64) -> f64 {
    t_au * AU_TIME_FS
}
