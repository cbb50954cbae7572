//! Count-rate analysis of power sweeps, polarization-correlation curves
//! and CHSH measurements.
//!
//! Error bars assume Poisson counting statistics; a rate `r` measured over
//! `t` seconds has variance `r/t`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw tallies from one acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub singles_s: f64,
    pub singles_i: f64,
    pub coincidences: f64,
    pub window_s: f64,
    pub pump_power_mw: f64,
    pub duration_s: f64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("singles_s", self.singles_s),
            ("singles_i", self.singles_i),
            ("coincidences", self.coincidences),
            ("window", self.window_s),
            ("pump power", self.pump_power_mw),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} = {v} must be non-negative")));
            }
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid(format!(
                "duration {} s must be positive",
                self.duration_s
            )));
        }
        if self.coincidences > self.singles_s.min(self.singles_i) {
            return Err(Error::invalid(format!(
                "coincidence rate {} exceeds a singles rate ({}, {})",
                self.coincidences, self.singles_s, self.singles_i
            )));
        }
        Ok(())
    }
}

/// Rate of coincidences between uncorrelated detections,
/// `n_s n_i τ_c (1 − η)`.
pub fn accidental_rate(singles_s: f64, singles_i: f64, window_s: f64, efficiency: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::invalid(format!("efficiency {efficiency} must lie in [0, 1]")));
    }
    for (name, v) in [("singles_s", singles_s), ("singles_i", singles_i), ("window", window_s)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} = {v} must be non-negative")));
        }
    }
    Ok(singles_s * singles_i * window_s * (1.0 - efficiency))
}

/// Coincidence-to-singles ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    /// n_c / √(n_s n_i)
    pub overall: f64,
    /// n_c / n_i: probability that the signal arm fires given an idler count.
    pub arm_s: f64,
    /// n_c / n_s
    pub arm_i: f64,
}

pub fn efficiency_ratio(rec: &CountRecord) -> Result<Efficiency> {
    if !(rec.singles_s > 0.0 && rec.singles_i > 0.0) {
        return Err(Error::Undefined(format!(
            "coincidence/singles ratio with singles rates {} and {}",
            rec.singles_s, rec.singles_i
        )));
    }
    Ok(Efficiency {
        overall: rec.coincidences / (rec.singles_s * rec.singles_i).sqrt(),
        arm_s: rec.coincidences / rec.singles_i,
        arm_i: rec.coincidences / rec.singles_s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Coincidences per second and mW.
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares line through the origin of coincidence rate against pump
/// power, using only records at or below `power_cutoff_mw`.
pub fn power_slope(records: &[CountRecord], power_cutoff_mw: f64) -> Result<SlopeFit> {
    let used: Vec<_> = records.iter().filter(|r| r.pump_power_mw <= power_cutoff_mw).collect();
    if used.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 records at or below {power_cutoff_mw} mW, found {}",
            used.len()
        )));
    }
    let sxx: f64 = used.iter().map(|r| r.pump_power_mw * r.pump_power_mw).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all selected records have zero pump power".into()));
    }
    let sxy: f64 = used.iter().map(|r| r.pump_power_mw * r.coincidences).sum();
    let var: f64 = used
        .iter()
        .map(|r| r.pump_power_mw.powi(2) * r.coincidences / r.duration_s)
        .sum();
    Ok(SlopeFit {
        slope: sxy / sxx,
        stderr: var.sqrt() / sxx,
        points: used.len(),
    })
}

/// Coincidence rate for one pair of half-wave-plate settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub phi1_deg: f64,
    pub phi2_deg: f64,
    pub rate_hz: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationCurve {
    pub basis: Option<String>,
    pub points: Vec<CurvePoint>,
}

impl CorrelationCurve {
    pub fn new(points: Vec<CurvePoint>) -> Self {
        Self { basis: None, points }
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.points {
            if !(p.phi1_deg.is_finite() && p.phi2_deg.is_finite()) {
                return Err(Error::invalid("analyzer angles must be finite"));
            }
            if !(p.rate_hz >= 0.0 && p.rate_hz.is_finite()) {
                return Err(Error::invalid(format!("rate {} must be non-negative", p.rate_hz)));
            }
            if !(p.duration_s > 0.0) {
                return Err(Error::invalid(format!("duration {} s must be positive", p.duration_s)));
            }
        }
        Ok(())
    }

    /// Splits the curve into runs of fixed φ₂, in order of first appearance.
    pub fn split_by_phi2(&self) -> Vec<(f64, CorrelationCurve)> {
        let mut groups: Vec<(f64, CorrelationCurve)> = Vec::new();
        for p in &self.points {
            match groups.iter_mut().find(|(phi2, _)| (phi2 - p.phi2_deg).abs() < 1e-9) {
                Some((_, g)) => g.points.push(*p),
                None => groups.push((
                    p.phi2_deg,
                    CorrelationCurve {
                        basis: self.basis.clone(),
                        points: vec![*p],
                    },
                )),
            }
        }
        groups
    }
}

/// ψ⁻ coincidence rate for half-wave-plate angles φ₁, φ₂ (degrees):
/// `R̄ (1 − V cos 4(φ₁ − φ₂))`.
pub fn model_coincidence_rate(phi1_deg: f64, phi2_deg: f64, visibility: f64, mean_rate: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::invalid(format!("visibility {visibility} must lie in [0, 1]")));
    }
    if !(mean_rate >= 0.0) {
        return Err(Error::invalid(format!("mean rate {mean_rate} must be non-negative")));
    }
    Ok(mean_rate * (1.0 - visibility * (4.0 * (phi1_deg - phi2_deg)).to_radians().cos()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub visibility: f64,
    pub visibility_err: f64,
    pub mean_rate: f64,
    pub mean_rate_err: f64,
    /// φ₀ in degrees, reduced to [0, 90); `None` when the curve is flat.
    pub phase_deg: Option<f64>,
    pub residual_rms: f64,
}

/// Fits `R̄ (1 − V cos 4(φ₁ − φ₀))` to a curve of fixed φ₂ by linear least
/// squares in the basis {1, cos 4φ₁, sin 4φ₁}, weighting each point by its
/// Poisson variance.
pub fn sincos_fit(curve: &CorrelationCurve) -> Result<VisibilityFit> {
    curve.validate()?;
    let mut pts = curve.points.clone();
    if let Some(p) = pts.iter().find(|p| (p.phi2_deg - pts[0].phi2_deg).abs() > 1e-9) {
        return Err(Error::invalid(format!(
            "curve mixes φ₂ = {}° and {}°; fit one φ₂ at a time",
            pts[0].phi2_deg, p.phi2_deg
        )));
    }
    pts.sort_by(|a, b| a.phi1_deg.total_cmp(&b.phi1_deg));

    let mut distinct: Vec<f64> = pts.iter().map(|p| p.phi1_deg.rem_euclid(90.0)).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if distinct.len() < 4 {
        return Err(Error::invalid(format!(
            "need at least 4 distinct φ₁ settings (mod 90°), found {}",
            distinct.len()
        )));
    }

    let basis = |phi: f64| {
        let x = (4.0 * phi).to_radians();
        Vector3::new(1.0, x.cos(), x.sin())
    };
    // A zero-count point would get infinite weight; floor its variance at
    // one count.
    let weight = |p: &CurvePoint| p.duration_s / (p.rate_hz * p.duration_s).max(1.0) * p.duration_s;

    let mut gram = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    let mut plain = Matrix3::zeros();
    for p in &pts {
        let b = basis(p.phi1_deg);
        let w = weight(p);
        gram += w * b * b.transpose();
        rhs += w * p.rate_hz * b;
        plain += b * b.transpose();
    }

    let scaled = plain / pts.len() as f64;
    let eig = SymmetricEigen::new(scaled);
    let (imin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("3 eigenvalues");
    if lmin < 1e-10 {
        let v = eig.eigenvectors.column(imin);
        let names = ["constant", "cos 4φ₁", "sin 4φ₁"];
        let worst = (0..3).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
        return Err(Error::DegenerateFit(format!(
            "design matrix is rank deficient along the {} basis direction",
            names[worst]
        )));
    }

    let cov = gram
        .try_inverse()
        .ok_or_else(|| Error::DegenerateFit("weighted normal equations are singular".into()))?;
    let c = cov * rhs;
    let mean = c[0];
    if !(mean > 0.0) {
        return Err(Error::DegenerateFit(format!("fitted mean rate {mean} is not positive")));
    }
    let amp = c[1].hypot(c[2]);
    let visibility = amp / mean;

    // V = √(c1² + c2²)/c0: propagate the parameter covariance.
    let grad = if amp > 0.0 {
        Vector3::new(-visibility / mean, c[1] / (amp * mean), c[2] / (amp * mean))
    } else {
        Vector3::new(0.0, 0.0, 0.0)
    };
    let visibility_err = (grad.transpose() * cov * grad)[(0, 0)].max(0.0).sqrt();

    let phase_deg = (amp > 1e-12 * mean).then(|| ((-c[2]).atan2(-c[1]).to_degrees() / 4.0).rem_euclid(90.0));

    let ss: f64 = pts
        .iter()
        .map(|p| (p.rate_hz - basis(p.phi1_deg).dot(&c)).powi(2))
        .sum();
    Ok(VisibilityFit {
        visibility,
        visibility_err,
        mean_rate: mean,
        mean_rate_err: cov[(0, 0)].sqrt(),
        phase_deg,
        residual_rms: (ss / pts.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedVisibility {
    pub visibility: f64,
    /// The subtraction pushed the visibility above 1 and it was clamped.
    pub clamped: bool,
}

/// Visibility after removing a flat accidental floor `n_acc` from the
/// fitted curve: `V R̄ / (R̄ − n_acc)`.
pub fn corrected_visibility(fit: &VisibilityFit, accidentals: f64) -> Result<CorrectedVisibility> {
    if !(accidentals >= 0.0 && accidentals.is_finite()) {
        return Err(Error::invalid(format!(
            "accidental rate {accidentals} must be non-negative"
        )));
    }
    if fit.mean_rate <= accidentals {
        return Err(Error::AccidentalsExceedSignal {
            accidentals,
            mean: fit.mean_rate,
        });
    }
    let v = fit.visibility * fit.mean_rate / (fit.mean_rate - accidentals);
    Ok(if v > 1.0 {
        CorrectedVisibility {
            visibility: 1.0,
            clamped: true,
        }
    } else {
        CorrectedVisibility {
            visibility: v,
            clamped: false,
        }
    })
}

/// Joint outcome counts for one analyzer setting pair (α, β), indexed by
/// whether each analyzer was at its setting (+) or rotated by 90° (−).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCounts {
    pub pp: f64,
    pub pm: f64,
    pub mp: f64,
    pub mm: f64,
}

impl JointCounts {
    pub fn total(&self) -> f64 {
        self.pp + self.pm + self.mp + self.mm
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    pub stderr: f64,
}

/// Correlation `(N₊₊ + N₋₋ − N₊₋ − N₋₊)/N` with its Poisson error
/// `√((1 − E²)/N)`.
pub fn correlation_e(counts: &JointCounts) -> Result<Correlation> {
    for v in [counts.pp, counts.pm, counts.mp, counts.mm] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("count {v} must be non-negative")));
        }
    }
    let n = counts.total();
    if !(n > 0.0) {
        return Err(Error::Undefined("correlation with zero total counts".into()));
    }
    let e = (counts.pp + counts.mm - counts.pm - counts.mp) / n;
    Ok(Correlation {
        value: e,
        stderr: ((1.0 - e * e).max(0.0) / n).sqrt(),
    })
}

/// Analyzer angles (polarizer orientation, degrees) for the two settings of
/// each side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl Default for ChshSettings {
    fn default() -> Self {
        Self {
            a: 0.0,
            a_prime: 45.0,
            b: 22.5,
            b_prime: 67.5,
        }
    }
}

impl ChshSettings {
    /// Setting pairs in the order (a,b), (a,b′), (a′,b), (a′,b′).
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellResult {
    /// E(a,b), E(a,b′), E(a′,b), E(a′,b′)
    pub correlations: [Correlation; 4],
    pub s: f64,
    pub s_stderr: f64,
}

/// `S = E(a,b) − E(a,b′) + E(a′,b) + E(a′,b′)` with errors added in
/// quadrature.
pub fn chsh_s(correlations: [Correlation; 4]) -> Result<BellResult> {
    for c in &correlations {
        if !(c.value.abs() <= 1.0) || !(c.stderr >= 0.0) {
            return Err(Error::invalid(format!(
                "correlation {} ± {} is outside [−1, 1]",
                c.value, c.stderr
            )));
        }
    }
    let [ab, abp, apb, apbp] = correlations;
    Ok(BellResult {
        correlations,
        s: ab.value - abp.value + apb.value + apbp.value,
        s_stderr: correlations.iter().map(|c| c.stderr * c.stderr).sum::<f64>().sqrt(),
    })
}

/// Expected ψ⁻ joint counts at polarizer angles (α, β) for visibility `v`:
/// `N (1 − V cos 2(α − β))/4` per outcome pair.
pub fn model_joint_counts(alpha_deg: f64, beta_deg: f64, visibility: f64, total: f64) -> JointCounts {
    let p = |a: f64, b: f64| 0.25 * total * (1.0 - visibility * (2.0 * (a - b)).to_radians().cos());
    JointCounts {
        pp: p(alpha_deg, beta_deg),
        pm: p(alpha_deg, beta_deg + 90.0),
        mp: p(alpha_deg + 90.0, beta_deg),
        mm: p(alpha_deg + 90.0, beta_deg + 90.0),
    }
}
