//! Refractive indices and beam walk-off for negative uniaxial crystals such
//! as BBO.
//!
//! Wavelengths are in micrometers (the native unit of the Sellmeier
//! coefficients) and angles in radians throughout.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Crystal file bundled with the crate: BBO with the Eimerl coefficients.
pub const BBO_EIMERL_JSON: &str = include_str!("../data/bbo_eimerl.json");
/// Alternate BBO coefficient set (Kato).
pub const BBO_KATO_JSON: &str = include_str!("../data/bbo_kato.json");

/// Coefficients of `n²(λ) = a + b/(λ² − c) − d·λ²` with λ in µm, together
/// with the wavelength range over which the fit is valid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellmeierSet {
    #[serde(default)]
    pub source: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub lambda_min_um: f64,
    pub lambda_max_um: f64,
}

impl SellmeierSet {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.lambda_min_um, self.lambda_max_um);
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(Error::CrystalData(format!(
                "validity range {lo}..{hi} µm is not an increasing positive interval"
            )));
        }
        if lo * lo - self.c <= 0.0 {
            return Err(Error::CrystalData(format!(
                "pole of the Sellmeier term (λ² = c = {}) lies inside the validity range",
                self.c
            )));
        }
        const GRID: usize = 256;
        for k in 0..=GRID {
            let lambda = lo + (hi - lo) * k as f64 / GRID as f64;
            let n2 = self.n_squared(lambda);
            if !(n2 > 1.0) {
                return Err(Error::CrystalData(format!("n²({lambda:.4} µm) = {n2} is not above 1")));
            }
        }
        Ok(())
    }

    fn n_squared(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        self.a + self.b / (l2 - self.c) - self.d * l2
    }

    /// Principal index at `lambda_um`, rejecting wavelengths outside the
    /// validity range.
    pub fn index(&self, lambda_um: f64) -> Result<f64> {
        if !(lambda_um >= self.lambda_min_um) {
            return Err(Error::BelowValidity {
                lambda_um,
                bound_um: self.lambda_min_um,
            });
        }
        if !(lambda_um <= self.lambda_max_um) {
            return Err(Error::AboveValidity {
                lambda_um,
                bound_um: self.lambda_max_um,
            });
        }
        Ok(self.n_squared(lambda_um).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Ordinary,
    Extraordinary,
}

impl Polarization {
    pub fn orthogonal(self) -> Self {
        match self {
            Polarization::Ordinary => Polarization::Extraordinary,
            Polarization::Extraordinary => Polarization::Ordinary,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Polarization::Ordinary => "o",
            Polarization::Extraordinary => "e",
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "o" | "ordinary" => Ok(Polarization::Ordinary),
            "e" | "extraordinary" => Ok(Polarization::Extraordinary),
            other => Err(Error::invalid(format!("unknown polarization '{other}'"))),
        }
    }
}

/// A uniaxial crystal plate with faces normal to the pump beam.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalSpec {
    pub name: String,
    pub ordinary: SellmeierSet,
    pub extraordinary: SellmeierSet,
    pub length_mm: f64,
    /// Angle between the inward face normal and the optic axis.
    pub cut_angle: f64,
}

/// On-disk representation; angles are in degrees here only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrystalFile {
    pub name: String,
    pub length_mm: f64,
    pub cut_angle_deg: f64,
    pub ordinary: SellmeierSet,
    pub extraordinary: SellmeierSet,
}

impl CrystalSpec {
    pub fn new(
        name: impl Into<String>,
        ordinary: SellmeierSet,
        extraordinary: SellmeierSet,
        length_mm: f64,
        cut_angle: f64,
    ) -> Result<Self> {
        ordinary.validate()?;
        extraordinary.validate()?;
        if !(length_mm >= 0.0 && length_mm.is_finite()) {
            return Err(Error::CrystalData(format!("length {length_mm} mm must be ≥ 0")));
        }
        if !(cut_angle > 0.0 && cut_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::CrystalData(format!(
                "cut angle {}° must lie strictly between 0° and 90°",
                cut_angle.to_degrees()
            )));
        }
        Ok(Self {
            name: name.into(),
            ordinary,
            extraordinary,
            length_mm,
            cut_angle,
        })
    }

    /// The bundled BBO description (Eimerl coefficients, 2 mm, 49.7° cut).
    pub fn bbo() -> Self {
        Self::from_json(BBO_EIMERL_JSON).expect("bundled crystal file is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CrystalFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn to_file(&self) -> CrystalFile {
        CrystalFile {
            name: self.name.clone(),
            length_mm: self.length_mm,
            cut_angle_deg: self.cut_angle.to_degrees(),
            ordinary: self.ordinary.clone(),
            extraordinary: self.extraordinary.clone(),
        }
    }

    pub fn with_length(mut self, length_mm: f64) -> Self {
        self.length_mm = length_mm;
        self
    }

    fn set(&self, pol: Polarization) -> &SellmeierSet {
        match pol {
            Polarization::Ordinary => &self.ordinary,
            Polarization::Extraordinary => &self.extraordinary,
        }
    }

    /// Principal refractive index for the given polarization.
    pub fn index(&self, lambda_um: f64, pol: Polarization) -> Result<f64> {
        self.set(pol).index(lambda_um)
    }

    /// Index seen by an extraordinary wave whose wavevector makes angle
    /// `theta` with the optic axis.
    pub fn index_e_theta(&self, lambda_um: f64, theta: f64) -> Result<f64> {
        let no = self.ordinary.index(lambda_um)?;
        let ne = self.extraordinary.index(lambda_um)?;
        let (s, c) = theta.sin_cos();
        Ok(1.0 / (c * c / (no * no) + s * s / (ne * ne)).sqrt())
    }

    /// Index for a wave of polarization `pol` travelling at `theta` to the
    /// optic axis.
    pub fn index_along(&self, lambda_um: f64, pol: Polarization, theta: f64) -> Result<f64> {
        match pol {
            Polarization::Ordinary => self.ordinary.index(lambda_um),
            Polarization::Extraordinary => self.index_e_theta(lambda_um, theta),
        }
    }

    /// Magnitude of the angle between Poynting vector and wavevector of an
    /// extraordinary wave at `theta` to the optic axis.
    pub fn walkoff_angle(&self, lambda_um: f64, theta: f64) -> Result<f64> {
        let no = self.ordinary.index(lambda_um)?;
        let ne = self.extraordinary.index(lambda_um)?;
        let n = self.index_e_theta(lambda_um, theta)?;
        let tan_rho = 0.5 * n * n * (2.0 * theta).sin() * (1.0 / (ne * ne) - 1.0 / (no * no));
        Ok(tan_rho.atan().abs())
    }

    /// Transverse displacement of the extraordinary beam after one pass
    /// through the crystal, in µm.
    pub fn walkoff_displacement(&self, lambda_um: f64, theta: f64) -> Result<f64> {
        Ok(self.length_mm * 1e3 * self.walkoff_angle(lambda_um, theta)?.tan())
    }
}

impl TryFrom<CrystalFile> for CrystalSpec {
    type Error = Error;

    fn try_from(f: CrystalFile) -> Result<Self> {
        CrystalSpec::new(
            f.name,
            f.ordinary,
            f.extraordinary,
            f.length_mm,
            f.cut_angle_deg.to_radians(),
        )
    }
}

/// Snell refraction from the crystal into air at a face; both angles are
/// measured from the face normal.
pub fn refract_external(n_internal: f64, theta_int: f64) -> Result<f64> {
    let s = n_internal * theta_int.sin();
    if s.abs() > 1.0 {
        return Err(Error::TotalInternalReflection(s));
    }
    Ok(s.asin())
}

/// Inverse of [`refract_external`].
pub fn refract_internal(n_internal: f64, theta_ext: f64) -> f64 {
    (theta_ext.sin() / n_internal).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Values from an independent double-precision evaluation of the
    // Eimerl polynomials.
    const NO: [(f64, f64); 6] = [
        (0.3511, 1.7068128335923325),
        (0.5, 1.6780647109283073),
        (0.69, 1.6653160620799772),
        (0.7022, 1.6648059823944632),
        (0.71, 1.664491201067985),
        (1.0, 1.6564224590960055),
    ];
    const NE: [(f64, f64); 6] = [
        (0.3511, 1.578397300763972),
        (0.5, 1.5577251068569264),
        (0.69, 1.548774042283104),
        (0.7022, 1.5484306766910567),
        (0.71, 1.5482198232834312),
        (1.0, 1.5432442594651719),
    ];

    #[test]
    fn sellmeier_matches_oracle() {
        let bbo = CrystalSpec::bbo();
        for (l, n) in NO {
            assert_relative_eq!(bbo.index(l, Polarization::Ordinary).unwrap(), n, max_relative = 1e-9);
        }
        for (l, n) in NE {
            assert_relative_eq!(
                bbo.index(l, Polarization::Extraordinary).unwrap(),
                n,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn negative_birefringence() {
        let bbo = CrystalSpec::bbo();
        for k in 0..=100 {
            let l = 0.22 + 0.84 * k as f64 / 100.0;
            let no = bbo.index(l, Polarization::Ordinary).unwrap();
            let ne = bbo.index(l, Polarization::Extraordinary).unwrap();
            assert!(ne < no, "λ = {l}");
        }
    }

    #[test]
    fn validity_bounds() {
        let bbo = CrystalSpec::bbo();
        assert!(bbo.index(0.22 + 1e-9, Polarization::Ordinary).is_ok());
        assert!(bbo.index(0.22, Polarization::Ordinary).is_ok());
        match bbo.index(0.22 - 1e-6, Polarization::Ordinary) {
            Err(Error::BelowValidity { bound_um, .. }) => assert_eq!(bound_um, 0.22),
            other => panic!("expected lower-bound error, got {other:?}"),
        }
        match bbo.index(1.2, Polarization::Extraordinary) {
            Err(Error::AboveValidity { bound_um, .. }) => assert_eq!(bound_um, 1.06),
            other => panic!("expected upper-bound error, got {other:?}"),
        }
        assert!(bbo.index(f64::NAN, Polarization::Ordinary).is_err());
    }

    #[test]
    fn extraordinary_index_limits() {
        let bbo = CrystalSpec::bbo();
        let l = 0.3511;
        assert_relative_eq!(
            bbo.index_e_theta(l, 0.0).unwrap(),
            bbo.index(l, Polarization::Ordinary).unwrap(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            bbo.index_e_theta(l, std::f64::consts::FRAC_PI_2).unwrap(),
            bbo.index(l, Polarization::Extraordinary).unwrap(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            bbo.index_e_theta(l, 49.7_f64.to_radians()).unwrap(),
            1.6284957148835988,
            max_relative = 1e-12
        );
    }

    #[test]
    fn walkoff_basics() {
        let bbo = CrystalSpec::bbo();
        let tp = 49.7_f64.to_radians();
        assert_eq!(bbo.walkoff_angle(0.3511, 0.0).unwrap(), 0.0);
        assert!(bbo.walkoff_angle(0.3511, std::f64::consts::FRAC_PI_2).unwrap() < 1e-15);
        assert_relative_eq!(
            bbo.walkoff_angle(0.3511, tp).unwrap(),
            bbo.walkoff_angle(0.3511, std::f64::consts::PI - tp).unwrap(),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            bbo.walkoff_angle(0.3511, tp).unwrap(),
            0.07589503728762677,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            bbo.walkoff_displacement(0.3511, tp).unwrap(),
            152.0821874396341,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            bbo.walkoff_displacement(0.7022, tp).unwrap(),
            141.07061493450954,
            max_relative = 1e-10
        );

        let thin = bbo.clone().with_length(0.0);
        assert_eq!(thin.walkoff_displacement(0.3511, tp).unwrap(), 0.0);
        let thick = bbo.clone().with_length(4.0);
        assert_relative_eq!(
            thick.walkoff_displacement(0.3511, tp).unwrap(),
            2.0 * bbo.walkoff_displacement(0.3511, tp).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn refraction() {
        assert_eq!(refract_external(1.66, 0.0).unwrap(), 0.0);
        let theta_int = 3.1_f64.to_radians() / 1.66;
        let ext = refract_external(1.66, theta_int).unwrap();
        assert_relative_eq!(ext.to_degrees(), 3.100964822681316, max_relative = 1e-12);
        assert_relative_eq!(refract_internal(1.66, ext), theta_int, epsilon = 1e-15);

        let critical = (1.0_f64 / 1.66).asin();
        assert!(refract_external(1.66, critical * (1.0 - 1e-12)).is_ok());
        assert!(matches!(
            refract_external(1.66, critical * (1.0 + 1e-9)),
            Err(Error::TotalInternalReflection(_))
        ));
    }

    #[test]
    fn rejects_bad_crystal_data() {
        let mut f: CrystalFile = serde_json::from_str(BBO_EIMERL_JSON).unwrap();
        f.ordinary.lambda_min_um = 0.1; // 0.01 < c
        assert!(matches!(CrystalSpec::try_from(f.clone()), Err(Error::CrystalData(_))));
        f.ordinary.lambda_min_um = 0.22;
        f.cut_angle_deg = 95.0;
        assert!(CrystalSpec::try_from(f.clone()).is_err());
        f.cut_angle_deg = 49.7;
        f.extraordinary.a = 0.5;
        assert!(CrystalSpec::try_from(f).is_err());
    }

    #[test]
    fn alternate_set_loads() {
        let kato = CrystalSpec::from_json(BBO_KATO_JSON).unwrap();
        assert!(kato.index(0.7022, Polarization::Ordinary).unwrap() > 1.6);
    }

    #[test]
    fn polarization_parse() {
        assert_eq!("o".parse::<Polarization>().unwrap(), Polarization::Ordinary);
        assert_eq!(
            "Extraordinary".parse::<Polarization>().unwrap(),
            Polarization::Extraordinary
        );
        assert!("x".parse::<Polarization>().is_err());
        assert_eq!(Polarization::Ordinary.orthogonal(), Polarization::Extraordinary);
    }
}
