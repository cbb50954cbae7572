use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde_json::{json, Value};
use spdc_core::io::{self, fmt6};
use spdc_core::phasematch::DEFAULT_FD_STEP_NM;
use spdc_core::sim::{scan_angles, scan_rates};
use spdc_core::stats::{ChshSettings, SlopeFit};
use spdc_core::{
    accidental_rate, chsh_s, cone_dispersion, corrected_visibility, correlation_e, design_collection, efficiency_ratio,
    intersection_geometry, power_slope, simulate_correlation_scan, simulate_power_sweep, sincos_fit, sweep_emission,
    CrystalSpec, DesignInputs, Polarization, PumpConfig, SimConfig, SweepSpec,
};

use crate::args::{AnglesArgs, BellArgs, DesignArgs, FitArgs, SimKind, SimulateArgs, StatsArgs};
use crate::report::{csv_string, opt, text_table, Report};
use crate::Usage;

const PUMP_NM: f64 = 351.1;
const PUMP_WAIST_UM: f64 = 80.0;

fn pump(crystal: &CrystalSpec, pump_nm: Option<f64>, theta_p_deg: Option<f64>) -> Result<PumpConfig> {
    let theta = theta_p_deg.map(f64::to_radians).unwrap_or(crystal.cut_angle);
    Ok(PumpConfig::new(
        pump_nm.unwrap_or(PUMP_NM) * 1e-3,
        theta,
        0.0,
        PUMP_WAIST_UM,
    )?)
}

fn input_file(path: Option<PathBuf>, command: &str) -> Result<File> {
    let path = path.ok_or_else(|| Usage(format!("{command} needs an input CSV file")))?;
    File::open(&path).with_context(|| format!("opening {}", path.display()))
}

fn with_file<T>(path: &Path, r: spdc_core::Result<T>) -> Result<T> {
    r.with_context(|| format!("reading {}", path.display()))
}

pub fn angles(crystal: &CrystalSpec, a: AnglesArgs) -> Result<Report> {
    let pump = pump(crystal, a.pump_nm, a.theta_p_deg)?;
    let fd_step_nm = a.fd_step_nm.unwrap_or(DEFAULT_FD_STEP_NM);
    if !(fd_step_nm > 0.0) {
        return Err(Usage(format!("--fd-step-nm {fd_step_nm} must be positive")).into());
    }
    let azimuth_deg = a.azimuth_deg.unwrap_or(90.0);
    let spec = SweepSpec {
        from_um: a.from_nm.unwrap_or(690.0) * 1e-3,
        to_um: a.to_nm.unwrap_or(710.0) * 1e-3,
        step_um: a.step.unwrap_or(0.5) * 1e-3,
        azimuth: azimuth_deg.to_radians(),
        idler_pol: a.idler_pol.unwrap_or(Polarization::Ordinary),
        fd_step_nm,
    };
    let rows = sweep_emission(crystal, &pump, &spec)?;

    let degenerate = pump.degenerate_wavelength_um();
    let dispersion = |pol| cone_dispersion(crystal, &pump, degenerate, pol, fd_step_nm).ok();
    let (disp_o, disp_e) = (
        dispersion(Polarization::Ordinary),
        dispersion(Polarization::Extraordinary),
    );
    let crossing = intersection_geometry(crystal, &pump).ok();

    let mut csv = Vec::new();
    io::write_sweep(&rows, &mut csv)?;

    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "lambda_nm": r.lambda_um * 1e3,
                "theta_i_ext_deg": r.theta_i_ext.map(f64::to_degrees),
                "theta_s_ext_deg": r.theta_s_ext.map(f64::to_degrees),
                "dtheta_dlambda_deg_per_nm": r.dtheta_dlambda_deg_per_nm,
                "status": r.status,
            })
        })
        .collect();
    let crossing_json = crossing.map(|x| {
        json!({
            "azimuth_deg": x.azimuth.to_degrees(),
            "polar_angle_ext_deg": x.polar_angle_ext.to_degrees(),
            "tangent_crossing_angle_deg": x.crossing_angle.to_degrees(),
        })
    });
    let json = json!({
        "crystal": crystal.name,
        "pump_nm": pump.wavelength_um * 1e3,
        "theta_p_deg": pump.theta_p.to_degrees(),
        "azimuth_deg": azimuth_deg,
        "idler_pol": spec.idler_pol,
        "rows": json_rows,
        "degenerate": {
            "wavelength_nm": degenerate * 1e3,
            "cone_dispersion_deg_per_nm": { "ordinary": disp_o, "extraordinary": disp_e },
            "crossing": crossing_json,
        },
    });

    let header = ["λ [nm]", "θ_i ext [°]", "θ_s ext [°]", "dθ/dλ [°/nm]", "status"];
    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt6(r.lambda_um * 1e3),
                opt(r.theta_i_ext.map(f64::to_degrees)),
                opt(r.theta_s_ext.map(f64::to_degrees)),
                opt(r.dtheta_dlambda_deg_per_nm),
                r.status.clone(),
            ]
        })
        .collect();
    let mut table = format!(
        "{}: pump {} nm at Θ_p = {}°, idler {} at φ = {}°\n\n",
        crystal.name,
        fmt6(pump.wavelength_um * 1e3),
        fmt6(pump.theta_p.to_degrees()),
        spec.idler_pol.short_name(),
        fmt6(azimuth_deg)
    );
    table += &text_table(&header, &table_rows);
    table += &format!(
        "\ncone radius dθ/dλ at {} nm: o {} °/nm, e {} °/nm\n",
        fmt6(degenerate * 1e3),
        opt(disp_o),
        opt(disp_e)
    );
    match crossing {
        Some(x) => {
            table += &format!(
                "cones cross at φ = ±{}°, θ_ext = {}°, tangents at {}°\n",
                fmt6(x.azimuth.to_degrees()),
                fmt6(x.polar_angle_ext.to_degrees()),
                fmt6(x.crossing_angle.to_degrees())
            )
        }
        None => table += "degenerate cones do not cross\n",
    }
    Ok(Report {
        csv: String::from_utf8(csv)?,
        json,
        table,
    })
}

pub fn design(crystal: &CrystalSpec, a: DesignArgs) -> Result<Report> {
    let pump = pump(crystal, a.pump_nm, a.theta_p_deg)?;
    let defaults = DesignInputs::default();
    let inputs = DesignInputs {
        bandwidth_fwhm_nm: a.bandwidth_nm.unwrap_or(defaults.bandwidth_fwhm_nm),
        margin: a.margin.unwrap_or(defaults.margin),
        idler_pol: a.idler_pol.unwrap_or(defaults.idler_pol),
        fiber_waist_um: a.fiber_waist_um.unwrap_or(defaults.fiber_waist_um),
        focal_mm: a.focal_mm.unwrap_or(defaults.focal_mm),
        dtheta_dlambda_override: a.dtheta_dlambda,
        gaussian_check: a.gaussian_check.unwrap_or(false),
    };
    let d = design_collection(crystal, &pump, &inputs)?;

    let warning = d.walkoff_exceeds_waist().then(|| {
        format!(
            "pump walk-off over the {} mm crystal ({} µm) exceeds the receiving waist ({} µm), ratio {}; \
             a cylindrical-lens correction is not modeled",
            fmt6(crystal.length_mm),
            fmt6(d.walkoff_um),
            fmt6(d.mode.waist_um),
            fmt6(d.walkoff_ratio)
        )
    });

    let mut quantities: Vec<(&str, f64, &str)> = vec![
        ("bandwidth_fwhm", d.bandwidth_fwhm_nm, "nm"),
        ("dtheta_dlambda", d.dtheta_dlambda, "deg/nm"),
        ("divergence_raw", d.divergence_raw.to_degrees(), "deg"),
        ("margin", d.margin, ""),
        ("divergence_chosen", d.divergence_chosen.to_degrees(), "deg"),
        ("target_waist", d.mode.waist_um, "um"),
        ("rayleigh_length", d.mode.rayleigh_mm, "mm"),
        ("pump_waist", d.pump_waist_um, "um"),
        ("walkoff_pump", d.walkoff_um, "um"),
        ("walkoff_signal", d.walkoff_signal_um, "um"),
        ("walkoff_ratio", d.walkoff_ratio, ""),
        ("fiber_waist", d.fiber.fiber_waist_um, "um"),
        ("focal_length", d.fiber.focal_mm, "mm"),
        ("magnification", d.fiber.magnification, ""),
        ("object_distance", d.fiber.object_distance_mm, "mm"),
        ("image_distance", d.fiber.image_distance_mm, "mm"),
    ];
    if let Some(g) = d.gaussian_image {
        quantities.push(("gaussian_image_waist", g.waist_um, "um"));
        quantities.push(("gaussian_image_distance", g.distance_mm, "mm"));
    }
    let rows: Vec<Vec<String>> = quantities
        .iter()
        .map(|(k, v, u)| vec![k.to_string(), fmt6(*v), u.to_string()])
        .collect();
    let csv = csv_string(&["quantity", "value", "unit"], &rows)?;
    let mut table = text_table(&["quantity", "value", "unit"], &rows);
    table += &format!(
        "\ndθ/dλ {} from the {} cone\n",
        if d.dtheta_dlambda_computed { "computed" } else { "given" },
        inputs.idler_pol.short_name()
    );
    if let Some(w) = &warning {
        table += &format!("warning: {w}\n");
    }

    let json = json!({
        "inputs": {
            "crystal": crystal.name,
            "crystal_length_mm": crystal.length_mm,
            "pump_nm": pump.wavelength_um * 1e3,
            "theta_p_deg": pump.theta_p.to_degrees(),
            "bandwidth_fwhm_nm": inputs.bandwidth_fwhm_nm,
            "margin": inputs.margin,
            "idler_pol": inputs.idler_pol,
            "dtheta_dlambda_override": inputs.dtheta_dlambda_override,
            "fiber_waist_um": inputs.fiber_waist_um,
            "focal_mm": inputs.focal_mm,
            "gaussian_check": inputs.gaussian_check,
        },
        "dtheta_dlambda_deg_per_nm": d.dtheta_dlambda,
        "dtheta_dlambda_computed": d.dtheta_dlambda_computed,
        "divergence_raw_deg": d.divergence_raw.to_degrees(),
        "divergence_chosen_deg": d.divergence_chosen.to_degrees(),
        "target_waist_um": d.mode.waist_um,
        "rayleigh_length_mm": d.mode.rayleigh_mm,
        "pump_waist_um": d.pump_waist_um,
        "walkoff_pump_um": d.walkoff_um,
        "walkoff_signal_um": d.walkoff_signal_um,
        "walkoff_ratio": d.walkoff_ratio,
        "fiber": d.fiber,
        "gaussian_image": d.gaussian_image,
        "warning": warning,
    });
    Ok(Report { csv, json, table })
}

fn slope_json(fit: &Option<SlopeFit>, cutoff: f64, note: &Option<String>) -> Value {
    json!({
        "cutoff_mw": cutoff,
        "slope_per_s_mw": fit.map(|f| f.slope),
        "stderr": fit.map(|f| f.stderr),
        "points": fit.map(|f| f.points),
        "note": note,
    })
}

pub fn stats(a: StatsArgs) -> Result<Report> {
    let window_s = a.window_ns.unwrap_or(6.8) * 1e-9;
    let eta = a.eta.unwrap_or(0.214);
    let cutoff = a.cutoff_mw.unwrap_or(50.0);
    let duration = a.duration_s.unwrap_or(1.0);
    if !(duration > 0.0) {
        return Err(Usage(format!("--duration-s {duration} must be positive")).into());
    }
    let path = a.input.clone().unwrap_or_default();
    let file = input_file(a.input, "stats")?;
    let records = with_file(&path, io::read_power_csv(file, window_s, duration))?;

    let mut rows = Vec::with_capacity(records.len());
    let mut json_rows = Vec::with_capacity(records.len());
    for (k, r) in records.iter().enumerate() {
        let e = efficiency_ratio(r).with_context(|| format!("data row {}", k + 1))?;
        let acc = accidental_rate(r.singles_s, r.singles_i, window_s, eta)?;
        let used = r.pump_power_mw <= cutoff;
        rows.push(vec![
            fmt6(r.pump_power_mw),
            fmt6(r.singles_s),
            fmt6(r.singles_i),
            fmt6(r.coincidences),
            fmt6(e.overall),
            fmt6(e.arm_s),
            fmt6(e.arm_i),
            fmt6(acc),
            used.to_string(),
        ]);
        json_rows.push(json!({
            "power_mw": r.pump_power_mw,
            "singles_s": r.singles_s,
            "singles_i": r.singles_i,
            "coincidences": r.coincidences,
            "duration_s": r.duration_s,
            "eta_overall": e.overall,
            "eta_arm_s": e.arm_s,
            "eta_arm_i": e.arm_i,
            "accidental_rate": acc,
            "in_slope_fit": used,
        }));
    }
    let (fit, note) = match power_slope(&records, cutoff) {
        Ok(f) => (Some(f), None),
        Err(spdc_core::Error::InvalidParameter(msg)) => (None, Some(format!("slope not fitted: {msg}"))),
        Err(e) => return Err(e.into()),
    };

    let header = [
        "power_mw",
        "singles_s",
        "singles_i",
        "coincidences",
        "eta_overall",
        "eta_arm_s",
        "eta_arm_i",
        "accidental_rate",
        "in_slope_fit",
    ];
    let csv = csv_string(&header, &rows)?;
    let mut table = text_table(&header, &rows);
    table += &format!("\nwindow {} ns, accidental η {}\n", fmt6(window_s * 1e9), fmt6(eta));
    match (&fit, &note) {
        (Some(f), _) => {
            table += &format!(
                "slope through origin (P ≤ {} mW, {} points): {} ± {} s⁻¹ mW⁻¹\n",
                fmt6(cutoff),
                f.points,
                fmt6(f.slope),
                fmt6(f.stderr)
            )
        }
        (None, Some(n)) => table += &format!("{n}\n"),
        (None, None) => {}
    }
    let json = json!({
        "window_ns": window_s * 1e9,
        "accidental_eta": eta,
        "rows": json_rows,
        "slope": slope_json(&fit, cutoff, &note),
    });
    Ok(Report { csv, json, table })
}

pub fn fit(a: FitArgs) -> Result<Report> {
    let path = a.input.clone().unwrap_or_default();
    let file = input_file(a.input, "fit")?;
    let curve = with_file(&path, io::read_curve_csv(file))?;
    if let Some(acc) = a.accidentals {
        if !(acc >= 0.0 && acc.is_finite()) {
            return Err(Usage(format!("--accidentals {acc} must be non-negative")).into());
        }
    }

    let header = [
        "phi2_deg",
        "points",
        "visibility",
        "visibility_err",
        "mean_rate_hz",
        "mean_rate_err_hz",
        "phase_deg",
        "residual_rms_hz",
        "corrected_visibility",
        "clamped",
    ];
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for (phi2, group) in curve.split_by_phi2() {
        let f = sincos_fit(&group).with_context(|| format!("fitting the φ₂ = {}° curve", fmt6(phi2)))?;
        let corrected = a.accidentals.map(|acc| corrected_visibility(&f, acc)).transpose()?;
        if corrected.is_some_and(|c| c.clamped) {
            eprintln!(
                "warning: accidental subtraction at φ₂ = {}° pushed the visibility above 1; clamped",
                fmt6(phi2)
            );
        }
        rows.push(vec![
            fmt6(phi2),
            group.points.len().to_string(),
            fmt6(f.visibility),
            fmt6(f.visibility_err),
            fmt6(f.mean_rate),
            fmt6(f.mean_rate_err),
            opt(f.phase_deg),
            fmt6(f.residual_rms),
            opt(corrected.map(|c| c.visibility)),
            corrected.map(|c| c.clamped.to_string()).unwrap_or_default(),
        ]);
        fits.push(json!({
            "phi2_deg": phi2,
            "points": group.points.len(),
            "visibility": f.visibility,
            "visibility_err": f.visibility_err,
            "mean_rate_hz": f.mean_rate,
            "mean_rate_err_hz": f.mean_rate_err,
            "phase_deg": f.phase_deg,
            "residual_rms_hz": f.residual_rms,
            "corrected_visibility": corrected.map(|c| c.visibility),
            "clamped": corrected.map(|c| c.clamped),
        }));
    }
    let csv = csv_string(&header, &rows)?;
    let table = text_table(&header, &rows);
    let json = json!({ "accidentals_hz": a.accidentals, "fits": fits });
    Ok(Report { csv, json, table })
}

pub fn bell(a: BellArgs) -> Result<Report> {
    let d = ChshSettings::default();
    let settings = ChshSettings {
        a: a.a.unwrap_or(d.a),
        a_prime: a.a_prime.unwrap_or(d.a_prime),
        b: a.b.unwrap_or(d.b),
        b_prime: a.b_prime.unwrap_or(d.b_prime),
    };
    let path = a.input.clone().unwrap_or_default();
    let file = input_file(a.input, "bell")?;
    let counts = with_file(&path, io::read_bell_csv(file, &settings))?;
    let mut corr = Vec::with_capacity(4);
    for (c, (x, y)) in counts.iter().zip(settings.pairs()) {
        corr.push(correlation_e(c).with_context(|| format!("setting ({}°, {}°)", fmt6(x), fmt6(y)))?);
    }
    let result = chsh_s([corr[0], corr[1], corr[2], corr[3]])?;

    let names = ["E(a,b)", "E(a,b')", "E(a',b)", "E(a',b')"];
    let mut rows: Vec<Vec<String>> = names
        .iter()
        .zip(settings.pairs())
        .zip(&result.correlations)
        .map(|((n, (x, y)), c)| vec![n.to_string(), fmt6(x), fmt6(y), fmt6(c.value), fmt6(c.stderr)])
        .collect();
    rows.push(vec![
        "S".into(),
        String::new(),
        String::new(),
        fmt6(result.s),
        fmt6(result.s_stderr),
    ]);
    let header = ["quantity", "alpha_deg", "beta_deg", "value", "stderr"];
    let csv = csv_string(&header, &rows)?;
    let mut table = text_table(&header, &rows);
    let violation = result.s.abs() > 2.0;
    table += &format!(
        "\n|S| {} 2 by {} standard errors\n",
        if violation { ">" } else { "≤" },
        fmt6(((result.s.abs() - 2.0) / result.s_stderr.max(f64::MIN_POSITIVE)).abs())
    );
    let json = json!({
        "settings": settings,
        "correlations": names.iter().zip(settings.pairs()).zip(&result.correlations).map(|((n, (x, y)), c)| json!({
            "name": n, "alpha_deg": x, "beta_deg": y, "value": c.value, "stderr": c.stderr,
        })).collect::<Vec<_>>(),
        "s": result.s,
        "s_stderr": result.s_stderr,
    });
    Ok(Report { csv, json, table })
}

pub fn simulate(a: SimulateArgs) -> Result<Report> {
    let seed = a
        .seed
        .ok_or_else(|| Usage("simulate needs an explicit --seed (or \"seed\" in the config block)".into()))?;
    let kind = a.kind.unwrap_or(SimKind::Sweep);
    let cfg = SimConfig {
        pair_rate_per_mw: a.pair_rate_per_mw.unwrap_or(900.0),
        pump_power_mw: a.power_mw.unwrap_or(100.0),
        eta_s: a.eta_s.unwrap_or(1.0),
        eta_i: a.eta_i.unwrap_or(1.0),
        background_s: a.background_s.unwrap_or(0.0),
        background_i: a.background_i.unwrap_or(0.0),
        window_s: a.window_ns.unwrap_or(6.8) * 1e-9,
        dead_time_s: a.dead_time_ns.unwrap_or(0.0) * 1e-9,
        duration_s: a.duration_s.unwrap_or(1.0),
        seed,
    };
    cfg.validate()?;
    let config_json = json!({ "kind": kind, "config": cfg });

    match kind {
        SimKind::Sweep => {
            let powers = a
                .powers_mw
                .unwrap_or_else(|| (1..=10).map(|k| 10.0 * k as f64).collect());
            let sweep = simulate_power_sweep(&cfg, &powers)?;
            let records: Vec<_> = sweep.iter().map(|(p, o)| o.to_record(cfg.window_s, *p)).collect();
            let mut csv = Vec::new();
            io::write_power_csv(&records, &mut csv)?;
            let rows: Vec<Vec<String>> = sweep
                .iter()
                .map(|(p, o)| {
                    vec![
                        fmt6(*p),
                        fmt6(o.singles_s),
                        fmt6(o.singles_i),
                        fmt6(o.coincidences),
                        fmt6(o.accidentals),
                    ]
                })
                .collect();
            let table = text_table(
                &["power_mw", "singles_s", "singles_i", "coincidences", "accidentals"],
                &rows,
            );
            let json = json!({
                "simulation": config_json,
                "rows": sweep.iter().map(|(p, o)| json!({
                    "power_mw": p,
                    "singles_s": o.singles_s,
                    "singles_i": o.singles_i,
                    "coincidences": o.coincidences,
                    "accidentals": o.accidentals,
                    "duration_s": o.duration_s,
                    "counts": o.counts,
                })).collect::<Vec<_>>(),
            });
            Ok(Report {
                csv: String::from_utf8(csv)?,
                json,
                table,
            })
        }
        SimKind::Scan => {
            let visibility = a.visibility.unwrap_or(0.96);
            let step = a.scan_step_deg.unwrap_or(5.0);
            let mut angles = Vec::new();
            for phi2 in a.phi2_deg.unwrap_or_else(|| vec![0.0]) {
                angles.extend(scan_angles(phi2, step)?);
            }
            let curve = simulate_correlation_scan(&cfg, visibility, &angles)?;
            let rates = scan_rates(&cfg)?;
            let mut csv = Vec::new();
            io::write_curve_csv(&curve, &mut csv)?;
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .map(|p| vec![fmt6(p.phi1_deg), fmt6(p.phi2_deg), fmt6(p.rate_hz), fmt6(p.duration_s)])
                .collect();
            let mut table = text_table(&io::CURVE_HEADER, &rows);
            table += &format!(
                "\nmodel mean rate {} s⁻¹, accidental floor {} s⁻¹\n",
                fmt6(rates.mean_rate),
                fmt6(rates.accidentals)
            );
            let json = json!({
                "simulation": config_json,
                "visibility": visibility,
                "mean_rate_hz": rates.mean_rate,
                "accidentals_hz": rates.accidentals,
                "points": curve.points,
            });
            Ok(Report {
                csv: String::from_utf8(csv)?,
                json,
                table,
            })
        }
    }
}

pub fn load_crystal(path: Option<&Path>) -> Result<CrystalSpec> {
    match path {
        None => Ok(CrystalSpec::bbo()),
        Some(p) => CrystalSpec::load(p).map_err(|e| anyhow!(e).context(format!("loading crystal {}", p.display()))),
    }
}
