//! Type-II phase matching: emission directions from energy and momentum
//! conservation, and the geometry of the two degenerate emission cones.
//!
//! Frame: the pump travels along +z, normal to the crystal faces. The optic
//! axis lies in the x–z plane at angle Θ_p from z, tilted toward +x. A
//! direction is given by its polar angle θ from z and azimuth φ about z,
//! measured from +x. The pump is an extraordinary wave.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crystal::{refract_external, CrystalSpec, Polarization};
use crate::error::{Error, Result};

/// Upper end of the internal polar-angle scan used to bracket roots.
pub const SCAN_MAX_DEG: f64 = 20.0;
/// Resolution of the bracket scan.
pub const SCAN_STEP_DEG: f64 = 0.05;
/// Bisection stops once the bracket is narrower than this (radians).
pub const ANGLE_TOLERANCE: f64 = 1e-12;
/// Default finite-difference step for wavelength derivatives.
pub const DEFAULT_FD_STEP_NM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpConfig {
    pub wavelength_um: f64,
    /// Angle between the pump wavevector and the optic axis.
    pub theta_p: f64,
    pub power_mw: f64,
    pub waist_um: f64,
}

impl PumpConfig {
    pub fn new(wavelength_um: f64, theta_p: f64, power_mw: f64, waist_um: f64) -> Result<Self> {
        if !(wavelength_um > 0.0 && wavelength_um.is_finite()) {
            return Err(Error::invalid(format!(
                "pump wavelength {wavelength_um} µm must be > 0"
            )));
        }
        if !(theta_p > 0.0 && theta_p < std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid(format!(
                "pump angle {}° must lie strictly between 0° and 90°",
                theta_p.to_degrees()
            )));
        }
        if !(power_mw >= 0.0 && power_mw.is_finite()) {
            return Err(Error::invalid(format!("pump power {power_mw} mW must be ≥ 0")));
        }
        if !(waist_um > 0.0 && waist_um.is_finite()) {
            return Err(Error::invalid(format!("pump waist {waist_um} µm must be > 0")));
        }
        Ok(Self {
            wavelength_um,
            theta_p,
            power_mw,
            waist_um,
        })
    }

    /// Argon-ion line at 351.1 nm, 49.7° to the optic axis, 465 mW, 80 µm
    /// waist.
    pub fn standard() -> Self {
        Self::new(0.3511, 49.7_f64.to_radians(), 465.0, 80.0).expect("valid defaults")
    }

    pub fn with_theta_p(mut self, theta_p: f64) -> Self {
        self.theta_p = theta_p;
        self
    }

    pub fn degenerate_wavelength_um(&self) -> f64 {
        2.0 * self.wavelength_um
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionQuery {
    pub idler_wavelength_um: f64,
    pub azimuth: f64,
    pub idler_pol: Polarization,
}

impl EmissionQuery {
    pub fn new(idler_wavelength_um: f64, azimuth: f64, idler_pol: Polarization) -> Self {
        Self {
            idler_wavelength_um,
            azimuth,
            idler_pol,
        }
    }

    pub fn at_wavelength(self, idler_wavelength_um: f64) -> Self {
        Self {
            idler_wavelength_um,
            ..self
        }
    }

    pub fn at_azimuth(self, azimuth: f64) -> Self {
        Self { azimuth, ..self }
    }
}

/// One phase-matched idler direction and the implied signal photon. Polar
/// angles are measured from the pump direction; `_ext` values are after
/// refraction at the exit face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionSolution {
    pub idler_wavelength_um: f64,
    pub signal_wavelength_um: f64,
    pub idler_pol: Polarization,
    pub theta_i_int: f64,
    pub theta_i_ext: f64,
    pub phi_i: f64,
    pub theta_s_int: f64,
    pub theta_s_ext: f64,
    pub phi_s: f64,
    pub idler_index: f64,
    pub signal_index: f64,
    pub pump_index: f64,
    /// Wavenumber mismatch at the root, µm⁻¹.
    pub residual: f64,
}

impl EmissionSolution {
    /// Internal wavevectors (k_i, k_s, k_p) in µm⁻¹, rebuilt from the
    /// reported angles and indices.
    pub fn wavevectors(&self, pump_wavelength_um: f64) -> [Vector3<f64>; 3] {
        let ki = direction(self.theta_i_int, self.phi_i) * (TAU * self.idler_index / self.idler_wavelength_um);
        let ks = direction(self.theta_s_int, self.phi_s) * (TAU * self.signal_index / self.signal_wavelength_um);
        let kp = Vector3::z() * (TAU * self.pump_index / pump_wavelength_um);
        [ki, ks, kp]
    }
}

/// Signal wavelength fixed by energy conservation, 1/λ_s = 1/λ_p − 1/λ_i.
pub fn conjugate_wavelength(pump_um: f64, idler_um: f64) -> Result<f64> {
    if !(pump_um > 0.0) || !(idler_um > pump_um) {
        return Err(Error::invalid(format!(
            "idler wavelength {idler_um} µm must exceed the pump wavelength {pump_um} µm"
        )));
    }
    Ok(1.0 / (1.0 / pump_um - 1.0 / idler_um))
}

fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

fn optic_axis(theta_p: f64) -> Vector3<f64> {
    Vector3::new(theta_p.sin(), 0.0, theta_p.cos())
}

fn angle_between(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    u.dot(v).clamp(-1.0, 1.0).acos()
}

struct Kinematics {
    signal_wavelength_um: f64,
    pump_index: f64,
    idler_index: f64,
    signal_index: f64,
    ks: Vector3<f64>,
    residual: f64,
}

fn kinematics(crystal: &CrystalSpec, pump: &PumpConfig, query: &EmissionQuery, theta_int: f64) -> Result<Kinematics> {
    let lambda_s = conjugate_wavelength(pump.wavelength_um, query.idler_wavelength_um)?;
    let axis = optic_axis(pump.theta_p);

    let pump_index = crystal.index_e_theta(pump.wavelength_um, pump.theta_p)?;
    let kp = Vector3::z() * (TAU * pump_index / pump.wavelength_um);

    let ui = direction(theta_int, query.azimuth);
    let idler_index = crystal.index_along(query.idler_wavelength_um, query.idler_pol, angle_between(&ui, &axis))?;
    let ki = ui * (TAU * idler_index / query.idler_wavelength_um);

    let ks = kp - ki;
    let ks_norm = ks.norm();
    let us = ks / ks_norm;
    let signal_index = crystal.index_along(lambda_s, query.idler_pol.orthogonal(), angle_between(&us, &axis))?;

    Ok(Kinematics {
        signal_wavelength_um: lambda_s,
        pump_index,
        idler_index,
        signal_index,
        ks,
        residual: ks_norm - TAU * signal_index / lambda_s,
    })
}

/// `|k_p − k_i| − 2π n_s/λ_s` for an idler at internal polar angle
/// `theta_int`; zero exactly at phase matching.
pub fn momentum_mismatch(
    crystal: &CrystalSpec,
    pump: &PumpConfig,
    query: &EmissionQuery,
    theta_int: f64,
) -> Result<f64> {
    Ok(kinematics(crystal, pump, query, theta_int)?.residual)
}

/// First sign change of the mismatch on the internal-angle scan grid.
pub fn bracket_root(crystal: &CrystalSpec, pump: &PumpConfig, query: &EmissionQuery) -> Result<(f64, f64)> {
    let step = SCAN_STEP_DEG.to_radians();
    let n = (SCAN_MAX_DEG / SCAN_STEP_DEG).round() as usize;
    let mut prev = (0.0, momentum_mismatch(crystal, pump, query, 0.0)?);
    let (mut lo, mut hi) = (prev.1, prev.1);
    for k in 1..=n {
        let theta = k as f64 * step;
        let r = momentum_mismatch(crystal, pump, query, theta)?;
        lo = lo.min(r);
        hi = hi.max(r);
        if prev.1 == 0.0 {
            return Ok((prev.0, prev.0));
        }
        if prev.1.signum() != r.signum() {
            return Ok((prev.0, theta));
        }
        prev = (theta, r);
    }
    Err(Error::NoPhaseMatching {
        from_deg: 0.0,
        to_deg: SCAN_MAX_DEG,
        min_residual: lo,
        max_residual: hi,
    })
}

/// Solves for the phase-matched idler direction at the query's wavelength
/// and azimuth, and the conjugate signal direction.
pub fn solve_emission(crystal: &CrystalSpec, pump: &PumpConfig, query: &EmissionQuery) -> Result<EmissionSolution> {
    let (mut a, mut b) = bracket_root(crystal, pump, query)?;
    let mut fa = momentum_mismatch(crystal, pump, query, a)?;
    while b - a > ANGLE_TOLERANCE {
        let m = 0.5 * (a + b);
        let fm = momentum_mismatch(crystal, pump, query, m)?;
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let theta_i_int = 0.5 * (a + b);
    let k = kinematics(crystal, pump, query, theta_i_int)?;

    let us = k.ks.normalize();
    let theta_s_int = us.z.clamp(-1.0, 1.0).acos();
    let phi_s = us.y.atan2(us.x);

    Ok(EmissionSolution {
        idler_wavelength_um: query.idler_wavelength_um,
        signal_wavelength_um: k.signal_wavelength_um,
        idler_pol: query.idler_pol,
        theta_i_int,
        theta_i_ext: refract_external(k.idler_index, theta_i_int)?,
        phi_i: query.azimuth,
        theta_s_int,
        theta_s_ext: refract_external(k.signal_index, theta_s_int)?,
        phi_s,
        idler_index: k.idler_index,
        signal_index: k.signal_index,
        pump_index: k.pump_index,
        residual: k.residual,
    })
}

/// Central difference of the external idler angle with respect to the idler
/// wavelength at fixed azimuth, in degrees per nm.
pub fn dtheta_dlambda(crystal: &CrystalSpec, pump: &PumpConfig, query: &EmissionQuery, step_nm: f64) -> Result<f64> {
    if !(step_nm > 0.0) {
        return Err(Error::invalid(format!(
            "finite-difference step {step_nm} nm must be > 0"
        )));
    }
    let h = step_nm * 1e-3;
    let lambda = query.idler_wavelength_um;
    let up = solve_emission(crystal, pump, &query.at_wavelength(lambda + h))?;
    let down = solve_emission(crystal, pump, &query.at_wavelength(lambda - h))?;
    Ok((up.theta_i_ext - down.theta_i_ext).to_degrees() / (2.0 * step_nm))
}

/// Rate of change of the emission cone's external angular radius with
/// wavelength, in degrees per nm.
///
/// The cone is treated as rotationally symmetric about its own axis. Its
/// radius is half the sum of the polar angles on the two sides of the
/// pump–optic-axis plane (φ = 0 and φ = π), so the drift of the cone axis
/// cancels. This is the angular spread a fixed collection direction on the
/// cone sees per unit bandwidth.
pub fn cone_dispersion(
    crystal: &CrystalSpec,
    pump: &PumpConfig,
    lambda_um: f64,
    pol: Polarization,
    step_nm: f64,
) -> Result<f64> {
    let q = EmissionQuery::new(lambda_um, 0.0, pol);
    let near = dtheta_dlambda(crystal, pump, &q, step_nm)?;
    let far = dtheta_dlambda(crystal, pump, &q.at_azimuth(PI), step_nm)?;
    Ok(0.5 * (near + far))
}

/// Where the degenerate ordinary and extraordinary cones cross.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeIntersection {
    /// Azimuth of the crossing in (0, π); the mirror crossing is at −φ.
    pub azimuth: f64,
    /// External polar angle of the crossing relative to the pump.
    pub polar_angle_ext: f64,
    /// External unit directions of the two crossings (+φ, −φ).
    pub directions: [[f64; 3]; 2],
    /// Angle between the tangents of the two cone traces at the crossing,
    /// folded into [0, π/2].
    pub crossing_angle: f64,
}

fn transverse(theta_ext: f64, phi: f64) -> [f64; 2] {
    let s = theta_ext.sin();
    [s * phi.cos(), s * phi.sin()]
}

fn external_angle(
    crystal: &CrystalSpec,
    pump: &PumpConfig,
    lambda_um: f64,
    phi: f64,
    pol: Polarization,
) -> Result<f64> {
    Ok(solve_emission(crystal, pump, &EmissionQuery::new(lambda_um, phi, pol))?.theta_i_ext)
}

fn cone_tangent(
    crystal: &CrystalSpec,
    pump: &PumpConfig,
    lambda_um: f64,
    phi: f64,
    pol: Polarization,
) -> Result<[f64; 2]> {
    const DPHI: f64 = 1e-5;
    let a = transverse(external_angle(crystal, pump, lambda_um, phi + DPHI, pol)?, phi + DPHI);
    let b = transverse(external_angle(crystal, pump, lambda_um, phi - DPHI, pol)?, phi - DPHI);
    Ok([a[0] - b[0], a[1] - b[1]])
}

/// Locates the crossing of the degenerate emission cones and the angle at
/// which their traces intersect.
pub fn intersection_geometry(crystal: &CrystalSpec, pump: &PumpConfig) -> Result<ConeIntersection> {
    let lambda = pump.degenerate_wavelength_um();
    let gap = |phi: f64| -> Result<f64> {
        Ok(external_angle(crystal, pump, lambda, phi, Polarization::Extraordinary)?
            - external_angle(crystal, pump, lambda, phi, Polarization::Ordinary)?)
    };

    const STEPS: usize = 90;
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=STEPS {
        let phi = PI * k as f64 / STEPS as f64;
        let g = match gap(phi) {
            Ok(g) => g,
            Err(Error::NoPhaseMatching { .. }) => {
                prev = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some((p, gp)) = prev {
            if gp.signum() != g.signum() || g == 0.0 {
                bracket = Some((p, gp, phi));
                break;
            }
        }
        prev = Some((phi, g));
    }
    let Some((mut a, mut ga, mut b)) = bracket else {
        return Err(Error::NoConeIntersection(format!(
            "no azimuth in [0°, 180°] where the degenerate o and e cones meet at Θ_p = {:.3}°",
            pump.theta_p.to_degrees()
        )));
    };
    while b - a > ANGLE_TOLERANCE {
        let m = 0.5 * (a + b);
        let gm = gap(m)?;
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    let phi = 0.5 * (a + b);
    let theta = external_angle(crystal, pump, lambda, phi, Polarization::Ordinary)?;

    let te = cone_tangent(crystal, pump, lambda, phi, Polarization::Extraordinary)?;
    let to = cone_tangent(crystal, pump, lambda, phi, Polarization::Ordinary)?;
    let cos = (te[0] * to[0] + te[1] * to[1]).abs() / (te[0].hypot(te[1]) * to[0].hypot(to[1]));

    let dir = |p: f64| {
        let (st, ct) = theta.sin_cos();
        [st * p.cos(), st * p.sin(), ct]
    };
    Ok(ConeIntersection {
        azimuth: phi,
        polar_angle_ext: theta,
        directions: [dir(phi), dir(-phi)],
        crossing_angle: cos.clamp(0.0, 1.0).acos(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub from_um: f64,
    pub to_um: f64,
    pub step_um: f64,
    pub azimuth: f64,
    pub idler_pol: Polarization,
    pub fd_step_nm: f64,
}

impl SweepSpec {
    pub fn wavelengths(&self) -> Result<Vec<f64>> {
        if !(self.step_um > 0.0)
            || !(self.to_um >= self.from_um)
            || !self.from_um.is_finite()
            || !self.to_um.is_finite()
        {
            return Err(Error::invalid(format!(
                "empty wavelength range {}..{} µm with step {} µm",
                self.from_um, self.to_um, self.step_um
            )));
        }
        let n = ((self.to_um - self.from_um) / self.step_um + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| self.from_um + k as f64 * self.step_um).collect())
    }
}

/// One row of a wavelength sweep. Failed rows keep their wavelength and
/// carry the failure in `status`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_um: f64,
    pub theta_i_ext: Option<f64>,
    pub theta_s_ext: Option<f64>,
    pub dtheta_dlambda_deg_per_nm: Option<f64>,
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn status_code(e: &Error) -> String {
    match e {
        Error::NoPhaseMatching { .. } => "no_phase_matching".into(),
        Error::BelowValidity { .. } | Error::AboveValidity { .. } => "out_of_range".into(),
        Error::TotalInternalReflection(_) => "total_internal_reflection".into(),
        _ => "error".into(),
    }
}

/// Emission angles and derivative over a wavelength range. Rows are
/// evaluated in parallel and returned in wavelength order.
pub fn sweep_emission(crystal: &CrystalSpec, pump: &PumpConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let lambdas = spec.wavelengths()?;
    Ok(lambdas
        .par_iter()
        .map(|&lambda_um| {
            let q = EmissionQuery::new(lambda_um, spec.azimuth, spec.idler_pol);
            let solved = solve_emission(crystal, pump, &q)
                .and_then(|s| Ok((s, dtheta_dlambda(crystal, pump, &q, spec.fd_step_nm)?)));
            match solved {
                Ok((s, d)) => SweepRow {
                    lambda_um,
                    theta_i_ext: Some(s.theta_i_ext),
                    theta_s_ext: Some(s.theta_s_ext),
                    dtheta_dlambda_deg_per_nm: Some(d),
                    status: "ok".into(),
                },
                Err(e) => SweepRow {
                    lambda_um,
                    theta_i_ext: None,
                    theta_s_ext: None,
                    dtheta_dlambda_deg_per_nm: None,
                    status: status_code(&e),
                },
            }
        })
        .collect())
}
