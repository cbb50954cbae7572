//! Gaussian target modes for single-mode fiber collection.
//!
//! The angular spread of the down-converted light within a chosen bandwidth
//! sets the divergence of the target mode. The pump is focused to the
//! resulting waist, which is then imaged onto the fiber mode.

use serde::{Deserialize, Serialize};

use crate::crystal::{CrystalSpec, Polarization};
use crate::error::{Error, Result};
use crate::phasematch::{cone_dispersion, PumpConfig, DEFAULT_FD_STEP_NM};

/// √(2 ln 2): ratio between the FWHM and the 1/e² half-width of a Gaussian
/// intensity profile `exp(−2θ²/θ_D²)`.
pub fn fwhm_factor() -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt()
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {v} must be positive")))
    }
}

fn require_slope(v: f64) -> Result<f64> {
    if v.is_finite() && v != 0.0 {
        Ok(v.abs())
    } else {
        Err(Error::invalid(format!("angular derivative {v} °/nm must be non-zero")))
    }
}

/// Angular width swept by a bandwidth `bandwidth_nm` at `dtheta_dlambda`
/// degrees per nm, in radians.
pub fn angular_width_from_bandwidth(bandwidth_nm: f64, dtheta_dlambda: f64) -> Result<f64> {
    if !(bandwidth_nm >= 0.0 && bandwidth_nm.is_finite()) {
        return Err(Error::invalid(format!("bandwidth {bandwidth_nm} nm must be ≥ 0")));
    }
    Ok((bandwidth_nm * require_slope(dtheta_dlambda)?).to_radians())
}

/// Target-mode divergence θ_D (radians) matched to a Gaussian spectrum of
/// the given FWHM.
pub fn divergence_from_bandwidth(bandwidth_fwhm_nm: f64, dtheta_dlambda: f64) -> Result<f64> {
    require_positive("bandwidth", bandwidth_fwhm_nm)?;
    Ok((bandwidth_fwhm_nm / fwhm_factor() * require_slope(dtheta_dlambda)?).to_radians())
}

/// Inverse of [`divergence_from_bandwidth`]: the FWHM bandwidth in nm that a
/// mode of divergence `theta_d` accepts.
pub fn bandwidth_from_divergence(theta_d: f64, dtheta_dlambda: f64) -> Result<f64> {
    require_positive("divergence", theta_d)?;
    Ok(theta_d.to_degrees() * fwhm_factor() / require_slope(dtheta_dlambda)?)
}

/// Relative far-field intensity of a Gaussian mode at angle `theta`.
pub fn gaussian_intensity(theta: f64, theta_d: f64) -> Result<f64> {
    require_positive("divergence", theta_d)?;
    Ok((-2.0 * theta * theta / (theta_d * theta_d)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetMode {
    /// 1/e² half-divergence, radians.
    pub divergence: f64,
    pub waist_um: f64,
    pub rayleigh_mm: f64,
    pub wavelength_um: f64,
}

pub fn mode_from_divergence(theta_d: f64, wavelength_um: f64) -> Result<TargetMode> {
    require_positive("divergence", theta_d)?;
    require_positive("wavelength", wavelength_um)?;
    let waist_um = wavelength_um / (std::f64::consts::PI * theta_d);
    Ok(TargetMode {
        divergence: theta_d,
        waist_um,
        rayleigh_mm: rayleigh_length_mm(waist_um, wavelength_um),
        wavelength_um,
    })
}

/// z_r = π w₀²/λ, returned in mm for a waist and wavelength in µm.
pub fn rayleigh_length_mm(waist_um: f64, wavelength_um: f64) -> f64 {
    std::f64::consts::PI * waist_um * waist_um / wavelength_um * 1e-3
}

/// Thin-lens imaging between the fiber mode (object) and the target waist
/// in the crystal (image).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberCoupler {
    pub fiber_waist_um: f64,
    pub focal_mm: f64,
    /// Target waist over fiber waist.
    pub magnification: f64,
    /// Lens to fiber end.
    pub object_distance_mm: f64,
    /// Lens to target waist in the crystal.
    pub image_distance_mm: f64,
}

pub fn fiber_conjugation(target_waist_um: f64, fiber_waist_um: f64, focal_mm: f64) -> Result<FiberCoupler> {
    require_positive("target waist", target_waist_um)?;
    require_positive("fiber waist", fiber_waist_um)?;
    require_positive("focal length", focal_mm)?;
    let m = target_waist_um / fiber_waist_um;
    Ok(FiberCoupler {
        fiber_waist_um,
        focal_mm,
        magnification: m,
        object_distance_mm: focal_mm * (1.0 + 1.0 / m),
        image_distance_mm: focal_mm * (1.0 + m),
    })
}

/// Waist and position of the Gaussian beam obtained by sending the fiber
/// mode through the coupling lens, for comparison with the ray-optics
/// conjugation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianImage {
    pub waist_um: f64,
    pub distance_mm: f64,
}

pub fn gaussian_image(coupler: &FiberCoupler, wavelength_um: f64) -> GaussianImage {
    let f = coupler.focal_mm;
    let s = coupler.object_distance_mm;
    let zr = rayleigh_length_mm(coupler.fiber_waist_um, wavelength_um);
    let den = (s - f).powi(2) + zr * zr;
    GaussianImage {
        waist_um: coupler.fiber_waist_um * f / den.sqrt(),
        distance_mm: f + f * f * (s - f) / den,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignInputs {
    pub bandwidth_fwhm_nm: f64,
    /// θ_D,chosen / θ_D,raw; leaves room for the pump's own angular spread.
    pub margin: f64,
    pub idler_pol: Polarization,
    pub fiber_waist_um: f64,
    pub focal_mm: f64,
    /// Use this angular derivative (°/nm) instead of computing it.
    pub dtheta_dlambda_override: Option<f64>,
    pub gaussian_check: bool,
}

impl Default for DesignInputs {
    fn default() -> Self {
        Self {
            bandwidth_fwhm_nm: 4.0,
            margin: 0.16 / 0.186,
            idler_pol: Polarization::Ordinary,
            fiber_waist_um: 2.3,
            focal_mm: 11.0,
            dtheta_dlambda_override: None,
            gaussian_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionDesign {
    pub bandwidth_fwhm_nm: f64,
    /// Magnitude of the angular derivative used, °/nm.
    pub dtheta_dlambda: f64,
    pub dtheta_dlambda_computed: bool,
    pub divergence_raw: f64,
    pub margin: f64,
    pub divergence_chosen: f64,
    pub mode: TargetMode,
    pub pump_waist_um: f64,
    /// Pump e-ray walk-off over the crystal, µm.
    pub walkoff_um: f64,
    /// Down-converted e-ray walk-off at the degenerate wavelength, µm.
    pub walkoff_signal_um: f64,
    pub walkoff_ratio: f64,
    pub fiber: FiberCoupler,
    pub gaussian_image: Option<GaussianImage>,
}

impl CollectionDesign {
    pub fn walkoff_exceeds_waist(&self) -> bool {
        self.walkoff_ratio > 1.0
    }
}

/// Full collection design at the degenerate wavelength of `pump`.
pub fn design_collection(crystal: &CrystalSpec, pump: &PumpConfig, inputs: &DesignInputs) -> Result<CollectionDesign> {
    if !(inputs.margin > 0.0 && inputs.margin <= 1.0) {
        return Err(Error::invalid(format!("margin {} must lie in (0, 1]", inputs.margin)));
    }
    let lambda = pump.degenerate_wavelength_um();
    let (slope, computed) = match inputs.dtheta_dlambda_override {
        Some(v) => (require_slope(v)?, false),
        None => (
            cone_dispersion(crystal, pump, lambda, inputs.idler_pol, DEFAULT_FD_STEP_NM)?.abs(),
            true,
        ),
    };
    let divergence_raw = divergence_from_bandwidth(inputs.bandwidth_fwhm_nm, slope)?;
    let divergence_chosen = inputs.margin * divergence_raw;
    let mode = mode_from_divergence(divergence_chosen, lambda)?;

    let walkoff_um = crystal.walkoff_displacement(pump.wavelength_um, pump.theta_p)?;
    let walkoff_signal_um = crystal.walkoff_displacement(lambda, pump.theta_p)?;
    let fiber = fiber_conjugation(mode.waist_um, inputs.fiber_waist_um, inputs.focal_mm)?;

    Ok(CollectionDesign {
        bandwidth_fwhm_nm: inputs.bandwidth_fwhm_nm,
        dtheta_dlambda: slope,
        dtheta_dlambda_computed: computed,
        divergence_raw,
        margin: inputs.margin,
        divergence_chosen,
        pump_waist_um: mode.waist_um,
        walkoff_um,
        walkoff_signal_um,
        walkoff_ratio: walkoff_um / mode.waist_um,
        gaussian_image: inputs.gaussian_check.then(|| gaussian_image(&fiber, lambda)),
        fiber,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn angular_width() {
        assert_relative_eq!(
            angular_width_from_bandwidth(4.0, 0.055).unwrap(),
            0.22f64.to_radians(),
            max_relative = 1e-12
        );
        assert_eq!(angular_width_from_bandwidth(0.0, 0.055).unwrap(), 0.0);
        assert_relative_eq!(
            angular_width_from_bandwidth(8.0, 0.055).unwrap(),
            2.0 * angular_width_from_bandwidth(4.0, 0.055).unwrap(),
            max_relative = 1e-15
        );
        assert!(angular_width_from_bandwidth(-1.0, 0.055).is_err());
        assert!(angular_width_from_bandwidth(1.0, 0.0).is_err());
    }

    #[test]
    fn divergence_rule() {
        let d = divergence_from_bandwidth(4.0, 0.055).unwrap().to_degrees();
        assert!((d - 0.186).abs() < 0.002, "{d}");
        assert_relative_eq!(
            divergence_from_bandwidth(4.0 * fwhm_factor(), 0.055).unwrap(),
            0.22f64.to_radians(),
            max_relative = 1e-14
        );
        // 2/√(2 ln 2) × 0.055 by hand: 1.698644 × 0.055 = 0.0934254°
        assert_relative_eq!(
            divergence_from_bandwidth(2.0, 0.055).unwrap().to_degrees(),
            0.0934254,
            max_relative = 1e-6
        );
        assert!(divergence_from_bandwidth(0.0, 0.055).is_err());
        assert!(divergence_from_bandwidth(4.0, f64::NAN).is_err());
        // sign of the derivative does not matter
        assert_eq!(
            divergence_from_bandwidth(4.0, -0.055).unwrap(),
            divergence_from_bandwidth(4.0, 0.055).unwrap()
        );
    }

    #[test]
    fn bandwidth_inverse() {
        assert_relative_eq!(
            bandwidth_from_divergence(divergence_from_bandwidth(4.0, 0.055).unwrap(), 0.055).unwrap(),
            4.0,
            max_relative = 1e-12
        );
        let raw = divergence_from_bandwidth(4.0, 0.055).unwrap();
        assert_relative_eq!(
            bandwidth_from_divergence(raw / 2.0, 0.055).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        assert!((bandwidth_from_divergence(0.186f64.to_radians(), 0.055).unwrap() - 4.0).abs() < 0.02);
        assert!(bandwidth_from_divergence(0.0, 0.055).is_err());
    }

    #[test]
    fn intensity_profile() {
        let td = 0.16f64.to_radians();
        assert_eq!(gaussian_intensity(0.0, td).unwrap(), 1.0);
        assert_relative_eq!(
            gaussian_intensity(td, td).unwrap(),
            (-2.0f64).exp(),
            max_relative = 1e-15
        );
        // half maximum at θ = θ_D √(ln 2 / 2), i.e. full width θ_D √(2 ln 2)
        let half = 0.5 * td * fwhm_factor();
        assert_relative_eq!(gaussian_intensity(half, td).unwrap(), 0.5, max_relative = 1e-14);
        assert!(gaussian_intensity(0.1, 0.0).is_err());
    }

    #[test]
    fn intensity_integral_matches_quadrature() {
        let td = 0.003;
        let (a, b) = (-8.0 * td, 8.0 * td);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let sum: f64 = (0..n)
            .map(|k| gaussian_intensity(a + (k as f64 + 0.5) * h, td).unwrap())
            .sum::<f64>()
            * h;
        let exact = td * (std::f64::consts::PI / 2.0).sqrt();
        assert_relative_eq!(sum, exact, max_relative = 1e-6);
    }

    #[test]
    fn target_mode() {
        let m = mode_from_divergence(0.16f64.to_radians(), 0.7022).unwrap();
        assert!(m.waist_um > 78.0 && m.waist_um < 84.0, "{}", m.waist_um);
        assert_relative_eq!(m.waist_um, 80.0395, max_relative = 1e-4);
        let zr = rayleigh_length_mm(82.0, 0.7022);
        assert!((zr - 30.0).abs() < 1.0 && zr > 2.0, "{zr}");

        let m2 = mode_from_divergence(0.32f64.to_radians(), 0.7022).unwrap();
        assert_relative_eq!(m2.waist_um, m.waist_um / 2.0, max_relative = 1e-14);
        assert_relative_eq!(m2.rayleigh_mm, m.rayleigh_mm / 4.0, max_relative = 1e-14);
        assert!(mode_from_divergence(0.0, 0.7).is_err());
        assert!(mode_from_divergence(0.01, -0.7).is_err());
    }

    #[test]
    fn fiber_imaging() {
        let c = fiber_conjugation(82.0, 2.3, 11.0).unwrap();
        assert_relative_eq!(c.magnification, 35.65217391304348, max_relative = 1e-12);
        assert!((c.image_distance_mm - 403.17).abs() < 0.01, "{}", c.image_distance_mm);
        assert_relative_eq!(
            1.0 / c.object_distance_mm + 1.0 / c.image_distance_mm,
            1.0 / 11.0,
            max_relative = 1e-9
        );
        let unit = fiber_conjugation(5.0, 5.0, 11.0).unwrap();
        assert_eq!(unit.magnification, 1.0);
        assert_eq!(unit.object_distance_mm, 22.0);
        assert_eq!(unit.image_distance_mm, 22.0);
        let double = fiber_conjugation(164.0, 2.3, 11.0).unwrap();
        assert_relative_eq!(double.magnification, 2.0 * c.magnification, max_relative = 1e-15);
    }

    #[test]
    fn gaussian_image_close_to_ray_optics() {
        let c = fiber_conjugation(82.0, 2.3, 11.0).unwrap();
        let g = gaussian_image(&c, 0.7022);
        assert!((g.waist_um / 82.0 - 1.0).abs() < 0.01, "{}", g.waist_um);
    }

    #[test]
    fn design_rejects_bad_margin() {
        let c = CrystalSpec::bbo();
        let p = PumpConfig::standard();
        for margin in [0.0, 1.2, f64::NAN] {
            let inputs = DesignInputs {
                margin,
                ..Default::default()
            };
            assert!(matches!(
                design_collection(&c, &p, &inputs),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn design_with_override_reproduces_chain() {
        let c = CrystalSpec::bbo();
        let p = PumpConfig::standard();
        let inputs = DesignInputs {
            dtheta_dlambda_override: Some(0.055),
            ..Default::default()
        };
        let d = design_collection(&c, &p, &inputs).unwrap();
        assert!((d.divergence_raw.to_degrees() - 0.186).abs() < 0.002);
        assert!((d.divergence_chosen.to_degrees() - 0.16).abs() < 0.002);
        assert!(d.mode.waist_um > 78.0 && d.mode.waist_um < 84.0);
        assert_eq!(d.pump_waist_um, d.mode.waist_um);
        assert!(d.divergence_chosen <= d.divergence_raw);
        assert!(!d.dtheta_dlambda_computed);
        assert!(d.walkoff_exceeds_waist());
        assert!(d.gaussian_image.is_none());

        let full = design_collection(&c, &p, &DesignInputs { margin: 1.0, ..inputs }).unwrap();
        assert_eq!(full.divergence_chosen, full.divergence_raw);
    }
}
