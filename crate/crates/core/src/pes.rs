//! Morse-cosine potential energy surface and molecular constants.
//!
//! The surface is V(r_cs, r_oc, theta) = sum_ijk f_ijk y_cs^i y_oc^j y_th^k
//! with y_l = 1 - exp(-alpha_l (r_l - r_l,e)) for the stretches and
//! y_th = cos(theta) - cos(theta_e) for the bend. Energies are referenced
//! to the surface minimum: the loader subtracts V at equilibrium, so the
//! constant coefficient is zero after loading.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::constants::U_TO_ME;
use crate::error::{Error, Result};

/// Atomic masses in electron masses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Masses {
    pub m_o: f64,
    pub m_c: f64,
    pub m_s: f64,
}

impl Masses {
    /// Carbon-sulfur reduced mass.
    pub fn m_cs(&self) -> f64 {
        self.m_c * self.m_s / (self.m_c + self.m_s)
    }
    /// Oxygen-carbon reduced mass.
    pub fn m_oc(&self) -> f64 {
        self.m_o * self.m_c / (self.m_o + self.m_c)
    }
}

/// Masses of 16-O, 12-C, 32-S in electron masses.
pub fn standard_masses() -> Masses {
    Masses {
        m_o: 15.9949146221 * U_TO_ME,
        m_c: 12.0 * U_TO_ME,
        m_s: 31.9720711744 * U_TO_ME,
    }
}

/// Morse-cosine expansion of the potential plus the molecular constants.
#[derive(Debug, Clone)]
pub struct PesModel {
    /// Expansion coefficients keyed by (i, j, k), in hartree.
    pub f: BTreeMap<(u32, u32, u32), f64>,
    /// Morse range parameters, 1/bohr.
    pub alpha_cs: f64,
    pub alpha_oc: f64,
    /// Equilibrium bond lengths, bohr.
    pub r_cs_e: f64,
    pub r_oc_e: f64,
    /// Equilibrium bending angle, radians.
    pub theta_e: f64,
    pub masses: Masses,
    /// Optional metadata: nominal dissociation threshold in hartree.
    pub dissociation_threshold: Option<f64>,
}

impl PesModel {
    pub fn m_cs(&self) -> f64 {
        self.masses.m_cs()
    }

    pub fn m_oc(&self) -> f64 {
        self.masses.m_oc()
    }

    #[inline]
    pub fn y_cs(&self, r_cs: f64) -> f64 {
        1.0 - (-self.alpha_cs * (r_cs - self.r_cs_e)).exp()
    }

    #[inline]
    pub fn y_oc(&self, r_oc: f64) -> f64 {
        1.0 - (-self.alpha_oc * (r_oc - self.r_oc_e)).exp()
    }

    #[inline]
    pub fn y_theta(&self, theta: f64) -> f64 {
        theta.cos() - self.theta_e.cos()
    }

    /// Evaluate the surface at one geometry.
    pub fn evaluate(&self, r_cs: f64, r_oc: f64, theta: f64) -> Result<f64> {
        if !(r_cs > 0.0 && r_oc > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bond lengths must be positive, got r_cs={r_cs}, r_oc={r_oc}"
            )));
        }
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in [0, pi], got {theta}"
            )));
        }
        let y1 = self.y_cs(r_cs);
        let y2 = self.y_oc(r_oc);
        let y3 = self.y_theta(theta);
        let mut v = 0.0;
        for (&(i, j, k), &c) in &self.f {
            v += c * y1.powi(i as i32) * y2.powi(j as i32) * y3.powi(k as i32);
        }
        Ok(v)
    }

    /// Sum of the pure-CS coefficients: the energy of the surface with the
    /// CS bond removed to infinity and the other coordinates at
    /// equilibrium. With the post-load zero of energy this is the CS
    /// dissociation asymptote.
    pub fn cs_asymptote(&self) -> f64 {
        self.f
            .iter()
            .filter(|((_, j, k), _)| *j == 0 && *k == 0)
            .map(|(_, &c)| c)
            .sum()
    }

    /// One-dimensional potential slice along a mode with the other two
    /// coordinates fixed at equilibrium; `sel` picks which index of the
    /// coefficient key varies.
    pub fn slice_coefficients(&self, mode: usize) -> BTreeMap<u32, f64> {
        let mut out = BTreeMap::new();
        for (&(i, j, k), &c) in &self.f {
            let key = match mode {
                0 if j == 0 && k == 0 => Some(i),
                1 if i == 0 && k == 0 => Some(j),
                2 if i == 0 && j == 0 => Some(k),
                _ => None,
            };
            if let Some(key) = key {
                *out.entry(key).or_insert(0.0) += c;
            }
        }
        out
    }

    /// Load a model from the plain-text coefficient format.
    pub fn load(path: impl AsRef<Path>) -> Result<PesModel> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parse the plain-text format. Header lines are `key = value`; each
    /// remaining line is `i j k f_ijk`. `#` starts a comment.
    pub fn parse(text: &str, origin: &str) -> Result<PesModel> {
        let mut alpha_cs = None;
        let mut alpha_oc = None;
        let mut r_cs_e = None;
        let mut r_oc_e = None;
        let mut theta_e_deg = None;
        let mut masses_u: Option<[f64; 3]> = None;
        let mut dissociation_threshold = None;
        let mut f: BTreeMap<(u32, u32, u32), f64> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let fmt_err = |msg: String| Error::PesFormat {
                path: origin.to_string(),
                line: lineno,
                msg,
            };
            if let Some(eq) = line.find('=') {
                let key = line[..eq].trim();
                let value = line[eq + 1..].trim();
                let parse_f64 = |v: &str| -> Result<f64> {
                    v.parse::<f64>()
                        .map_err(|_| fmt_err(format!("cannot parse `{v}` as a number")))
                };
                match key {
                    "alpha_cs" => alpha_cs = Some(parse_f64(value)?),
                    "alpha_oc" => alpha_oc = Some(parse_f64(value)?),
                    "r_cs_e" => r_cs_e = Some(parse_f64(value)?),
                    "r_oc_e" => r_oc_e = Some(parse_f64(value)?),
                    "theta_e_deg" => theta_e_deg = Some(parse_f64(value)?),
                    "dissociation_threshold" => {
                        dissociation_threshold = Some(parse_f64(value)?)
                    }
                    "masses_u" => {
                        let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                        if parts.len() != 3 {
                            return Err(fmt_err(format!(
                                "masses_u needs three comma-separated values, got {}",
                                parts.len()
                            )));
                        }
                        let mut m = [0.0f64; 3];
                        for (slot, part) in m.iter_mut().zip(parts.iter()) {
                            *slot = part
                                .parse::<f64>()
                                .map_err(|_| fmt_err(format!("bad mass value `{part}`")))?;
                        }
                        masses_u = Some(m);
                    }
                    other => {
                        return Err(fmt_err(format!("unknown header key `{other}`")));
                    }
                }
            } else {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(fmt_err(format!(
                        "coefficient line needs `i j k f_ijk`, got {} fields",
                        parts.len()
                    )));
                }
                let mut idx3 = [0u32; 3];
                for (slot, part) in idx3.iter_mut().zip(parts.iter()) {
                    *slot = part
                        .parse::<u32>()
                        .map_err(|_| fmt_err(format!("bad index `{part}`")))?;
                }
                let coeff = parts[3]
                    .parse::<f64>()
                    .map_err(|_| fmt_err(format!("bad coefficient `{}`", parts[3])))?;
                if !coeff.is_finite() {
                    return Err(fmt_err(format!("non-finite coefficient `{}`", parts[3])));
                }
                let key = (idx3[0], idx3[1], idx3[2]);
                if f.contains_key(&key) {
                    return Err(fmt_err(format!(
                        "duplicate coefficient for ({} {} {})",
                        key.0, key.1, key.2
                    )));
                }
                f.insert(key, coeff);
            }
        }

        let alpha_cs = alpha_cs.ok_or(Error::MissingParameter("alpha_cs".into()))?;
        let alpha_oc = alpha_oc.ok_or(Error::MissingParameter("alpha_oc".into()))?;
        let r_cs_e = r_cs_e.ok_or(Error::MissingParameter("r_cs_e".into()))?;
        let r_oc_e = r_oc_e.ok_or(Error::MissingParameter("r_oc_e".into()))?;
        let theta_e_deg = theta_e_deg.ok_or(Error::MissingParameter("theta_e_deg".into()))?;
        let masses_u = masses_u.ok_or(Error::MissingParameter("masses_u".into()))?;

        if !(alpha_cs > 0.0 && alpha_oc > 0.0) {
            return Err(Error::InvalidParameter(
                "morse range parameters must be positive".into(),
            ));
        }
        if !(r_cs_e > 0.0 && r_oc_e > 0.0) {
            return Err(Error::InvalidParameter(
                "equilibrium bond lengths must be positive".into(),
            ));
        }
        let theta_e = theta_e_deg.to_radians();
        if !(theta_e > 0.0 && theta_e <= std::f64::consts::PI + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "theta_e must lie in (0, 180] degrees, got {theta_e_deg}"
            )));
        }
        if masses_u.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidParameter("masses must be positive".into()));
        }

        let mut model = PesModel {
            f,
            alpha_cs,
            alpha_oc,
            r_cs_e,
            r_oc_e,
            theta_e: theta_e.min(std::f64::consts::PI),
            masses: Masses {
                m_o: masses_u[0] * U_TO_ME,
                m_c: masses_u[1] * U_TO_ME,
                m_s: masses_u[2] * U_TO_ME,
            },
            dissociation_threshold,
        };
        // reference energies to the surface value at equilibrium, where all
        // y factors vanish and V equals the constant coefficient
        let v_eq = model.f.get(&(0, 0, 0)).copied().unwrap_or(0.0);
        if v_eq != 0.0 {
            model.f.insert((0, 0, 0), 0.0);
        }
        model.f.retain(|_, c| *c != 0.0);
        Ok(model)
    }

    /// Serialize back to the plain-text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Morse-cosine surface coefficients");
        let _ = writeln!(s, "alpha_cs = {:.12}", self.alpha_cs);
        let _ = writeln!(s, "alpha_oc = {:.12}", self.alpha_oc);
        let _ = writeln!(s, "r_cs_e = {:.12}", self.r_cs_e);
        let _ = writeln!(s, "r_oc_e = {:.12}", self.r_oc_e);
        let _ = writeln!(s, "theta_e_deg = {:.12}", self.theta_e.to_degrees());
        let _ = writeln!(
            s,
            "masses_u = {:.10},{:.10},{:.10}",
            self.masses.m_o / U_TO_ME,
            self.masses.m_c / U_TO_ME,
            self.masses.m_s / U_TO_ME
        );
        if let Some(d) = self.dissociation_threshold {
            let _ = writeln!(s, "dissociation_threshold = {:.12}", d);
        }
        for (&(i, j, k), &c) in &self.f {
            let _ = writeln!(s, "{i} {j} {k} {c:.15e}");
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Bundled synthetic test surface: a Morse bond per stretch, a bend
    /// quadratic in cos(theta), and one small stretch-stretch cross term.
    /// Geometry and masses are OCS-like so the default grids apply.
    pub fn synthetic() -> PesModel {
        let mut f = BTreeMap::new();
        f.insert((2, 0, 0), 0.10); // CS Morse well depth
        f.insert((0, 2, 0), 0.15); // OC Morse well depth
        f.insert((0, 0, 2), 0.04); // bend, quadratic in cos(theta)
        f.insert((1, 1, 0), 0.005); // weak stretch-stretch coupling
        PesModel {
            f,
            alpha_cs: 1.03,
            alpha_oc: 1.24,
            r_cs_e: 2.9506,
            r_oc_e: 2.1849,
            theta_e: std::f64::consts::PI,
            masses: standard_masses(),
            dissociation_threshold: Some(0.10),
        }
    }

    /// Synthetic surface without the cross term; exactly separable.
    pub fn synthetic_separable() -> PesModel {
        let mut model = Self::synthetic();
        model.f.remove(&(1, 1, 0));
        model
    }
}

/// Free-function form of [`PesModel::load`].
pub fn load_pes(path: impl AsRef<Path>) -> Result<PesModel> {
    PesModel::load(path)
}

/// Free-function form of [`PesModel::evaluate`].
pub fn evaluate_pes(model: &PesModel, r_cs: f64, r_oc: f64, theta: f64) -> Result<f64> {
    model.evaluate(r_cs, r_oc, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const HEADER: &str = "alpha_cs = 1.03\nalpha_oc = 1.24\nr_cs_e = 2.9506\nr_oc_e = 2.1849\ntheta_e_deg = 180\nmasses_u = 15.9949146221,12.0,31.9720711744\n";

    #[test]
    fn header_parses_and_round_trips() {
        let text = format!("{HEADER}2 0 0 0.1\n0 2 0 0.15\n");
        let model = PesModel::parse(&text, "test").unwrap();
        assert!((model.alpha_cs - 1.03).abs() < 1e-15);
        assert!((model.alpha_oc - 1.24).abs() < 1e-15);
        assert!((model.r_cs_e - 2.9506).abs() < 1e-15);
        assert!((model.r_oc_e - 2.1849).abs() < 1e-15);
        assert!((model.theta_e - PI).abs() < 1e-12);
        let again = PesModel::parse(&model.to_text(), "round").unwrap();
        assert_eq!(model.f, again.f);
        assert!((again.theta_e - model.theta_e).abs() < 1e-12);
    }

    #[test]
    fn single_constant_coefficient_gives_zero_surface() {
        let text = format!("{HEADER}0 0 0 0.0\n");
        let model = PesModel::parse(&text, "test").unwrap();
        for r in [2.0, 3.0, 5.0] {
            assert_eq!(model.evaluate(r, 2.2, 2.9).unwrap(), 0.0);
        }
    }

    #[test]
    fn missing_alpha_oc_is_reported_by_name() {
        let text = "alpha_cs = 1.0\nr_cs_e = 2.9\nr_oc_e = 2.2\ntheta_e_deg = 180\nmasses_u = 16,12,32\n0 0 0 0.0\n";
        let err = PesModel::parse(text, "test").unwrap_err();
        assert!(err.to_string().contains("missing parameter alpha_oc"));
    }

    #[test]
    fn duplicate_and_nonfinite_coefficients_rejected() {
        let dup = format!("{HEADER}1 0 0 0.1\n1 0 0 0.2\n");
        assert!(PesModel::parse(&dup, "t").is_err());
        let bad = format!("{HEADER}1 0 0 nan\n");
        assert!(PesModel::parse(&bad, "t").is_err());
    }

    #[test]
    fn equilibrium_value_is_rezeroed_constant() {
        let text = format!("{HEADER}0 0 0 -0.37\n2 0 0 0.1\n");
        let model = PesModel::parse(&text, "test").unwrap();
        let v = model
            .evaluate(model.r_cs_e, model.r_oc_e, model.theta_e)
            .unwrap();
        assert!(v.abs() < 1e-15, "V(eq) = {v}");
    }

    #[test]
    fn pure_morse_reaches_well_depth_asymptotically() {
        let model = PesModel::synthetic_separable();
        let v_far = model
            .evaluate(model.r_cs_e + 40.0, model.r_oc_e, model.theta_e)
            .unwrap();
        assert!((v_far - 0.10).abs() < 1e-12, "asymptote {v_far}");
        assert!((model.cs_asymptote() - 0.10).abs() < 1e-15);
    }

    #[test]
    fn standard_masses_match_isotope_tables() {
        let m = standard_masses();
        // 12C is exactly 12 u; conversion factor from constants tables
        assert!((m.m_c - 12.0 * 1822.888486).abs() < 1e-9);
        // 16O from 15.9949 u
        assert!((m.m_o / 1822.888486 - 15.9949).abs() < 1e-4);
        // reduced-mass ratio identity
        let lhs = m.m_cs() / m.m_oc();
        let rhs = (m.m_c * m.m_s * (m.m_o + m.m_c)) / (m.m_o * m.m_c * (m.m_c + m.m_s));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn finite_differences_converge_to_analytic_gradient() {
        let model = PesModel::synthetic();
        let (r1, r2, th) = (3.1, 2.3, 2.8);
        // analytic d/dr_cs of the expansion
        let y1 = model.y_cs(r1);
        let y2 = model.y_oc(r2);
        let y3 = model.y_theta(th);
        let dy1 = model.alpha_cs * (-model.alpha_cs * (r1 - model.r_cs_e)).exp();
        let mut dv = 0.0;
        for (&(i, j, k), &c) in &model.f {
            if i > 0 {
                dv += c * (i as f64)
                    * y1.powi(i as i32 - 1)
                    * dy1
                    * y2.powi(j as i32)
                    * y3.powi(k as i32);
            }
        }
        let errs: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&h| {
                let vp = model.evaluate(r1 + h, r2, th).unwrap();
                let vm = model.evaluate(r1 - h, r2, th).unwrap();
                ((vp - vm) / (2.0 * h) - dv).abs()
            })
            .collect();
        // central differences are second order: each halving divides the
        // error by about four
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "order ratio {ratio}");
        }
        assert!(errs[2] < 1e-6, "final error {}", errs[2]);
    }

    #[test]
    fn equilibrium_is_stationary_without_linear_terms() {
        let model = PesModel::synthetic();
        let h = 1e-5;
        let g1 = (model
            .evaluate(model.r_cs_e + h, model.r_oc_e, model.theta_e)
            .unwrap()
            - model
                .evaluate(model.r_cs_e - h, model.r_oc_e, model.theta_e)
                .unwrap())
            / (2.0 * h);
        let g2 = (model
            .evaluate(model.r_cs_e, model.r_oc_e + h, model.theta_e)
            .unwrap()
            - model
                .evaluate(model.r_cs_e, model.r_oc_e - h, model.theta_e)
                .unwrap())
            / (2.0 * h);
        assert!(g1.abs() < 1e-10, "grad r_cs {g1}");
        assert!(g2.abs() < 1e-10, "grad r_oc {g2}");
    }

    #[test]
    fn evaluate_rejects_bad_geometry() {
        let model = PesModel::synthetic();
        assert!(model.evaluate(-1.0, 2.2, 1.0).is_err());
        assert!(model.evaluate(3.0, 2.2, 4.0).is_err());
    }
}
