use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use spdc_core::Polarization;

#[derive(Debug, Parser)]
#[command(
    name = "spdc",
    version,
    about = "Type-II down-conversion source design and count analysis"
)]
pub struct Cli {
    /// Crystal description (JSON); the bundled BBO data is used otherwise.
    #[arg(long, global = true, value_name = "FILE")]
    pub crystal: Option<PathBuf>,

    /// JSON run configuration with one block per command.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Write the result here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emission angles and their wavelength derivative over a sweep.
    Angles(AnglesArgs),
    /// Collection mode and fiber coupling for a bandwidth.
    Design(DesignArgs),
    /// Efficiency ratios and the low-power slope of a power sweep.
    Stats(StatsArgs),
    /// Visibility fits of polarization-correlation curves.
    Fit(FitArgs),
    /// CHSH parameter from joint-outcome counts.
    Bell(BellArgs),
    /// Seeded Monte-Carlo power sweeps and correlation scans.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnglesArgs {
    /// Pump wavelength [default: 351.1]
    #[arg(long, value_name = "NM")]
    pub pump_nm: Option<f64>,
    /// Pump angle to the optic axis [default: crystal cut angle]
    #[arg(long, value_name = "DEG")]
    pub theta_p_deg: Option<f64>,
    /// First idler wavelength [default: 690]
    #[arg(long, value_name = "NM")]
    pub from_nm: Option<f64>,
    /// Last idler wavelength [default: 710]
    #[arg(long, value_name = "NM")]
    pub to_nm: Option<f64>,
    /// Sweep step [default: 0.5]
    #[arg(long, value_name = "NM")]
    pub step: Option<f64>,
    /// Idler azimuth about the pump, from the optic-axis side [default: 90]
    #[arg(long, value_name = "DEG")]
    pub azimuth_deg: Option<f64>,
    /// Idler polarization, o or e [default: o]
    #[arg(long, value_name = "POL")]
    pub idler_pol: Option<Polarization>,
    /// Finite-difference step for dθ/dλ [default: 0.1]
    #[arg(long, value_name = "NM")]
    pub fd_step_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignArgs {
    /// Pump wavelength [default: 351.1]
    #[arg(long, value_name = "NM")]
    pub pump_nm: Option<f64>,
    /// Pump angle to the optic axis [default: crystal cut angle]
    #[arg(long, value_name = "DEG")]
    pub theta_p_deg: Option<f64>,
    /// Spectral FWHM to collect [default: 4]
    #[arg(long, value_name = "NM")]
    pub bandwidth_nm: Option<f64>,
    /// Chosen over raw divergence, in (0, 1] [default: 0.16/0.186]
    #[arg(long)]
    pub margin: Option<f64>,
    /// Photon whose cone sets dθ/dλ, o or e [default: o]
    #[arg(long, value_name = "POL")]
    pub idler_pol: Option<Polarization>,
    /// Use this dθ/dλ instead of computing it
    #[arg(long, value_name = "DEG_PER_NM")]
    pub dtheta_dlambda: Option<f64>,
    /// Fiber mode field radius [default: 2.3]
    #[arg(long, value_name = "UM")]
    pub fiber_waist_um: Option<f64>,
    /// Coupling lens focal length [default: 11]
    #[arg(long, value_name = "MM")]
    pub focal_mm: Option<f64>,
    /// Also propagate the fiber mode as a Gaussian beam
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub gaussian_check: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsArgs {
    /// Power-sweep CSV: power_mw,singles_s,singles_i,coincidences[,duration_s]
    #[arg(value_name = "CSV")]
    pub input: Option<PathBuf>,
    /// Coincidence window [default: 6.8]
    #[arg(long, value_name = "NS")]
    pub window_ns: Option<f64>,
    /// Detection efficiency in the accidental-rate formula [default: 0.214]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Highest pump power used for the slope fit [default: 50]
    #[arg(long, value_name = "MW")]
    pub cutoff_mw: Option<f64>,
    /// Acquisition time for rows without duration_s [default: 1]
    #[arg(long, value_name = "S")]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    /// Curve CSV: phi1_deg,phi2_deg,rate_hz,duration_s
    #[arg(value_name = "CSV")]
    pub input: Option<PathBuf>,
    /// Flat accidental rate to subtract
    #[arg(long, value_name = "HZ")]
    pub accidentals: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BellArgs {
    /// Counts CSV: alpha_deg,beta_deg,counts (16 rows)
    #[arg(value_name = "CSV")]
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "DEG")]
    pub a: Option<f64>,
    #[arg(long, value_name = "DEG")]
    pub a_prime: Option<f64>,
    #[arg(long, value_name = "DEG")]
    pub b: Option<f64>,
    #[arg(long, value_name = "DEG")]
    pub b_prime: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimKind {
    Sweep,
    Scan,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Random seed (required)
    #[arg(long)]
    pub seed: Option<u64>,
    /// sweep: power sweep CSV; scan: correlation curve CSV [default: sweep]
    #[arg(long, value_enum)]
    pub kind: Option<SimKind>,
    /// Pairs per second and mW [default: 900]
    #[arg(long)]
    pub pair_rate_per_mw: Option<f64>,
    /// Pump power for a scan [default: 100]
    #[arg(long, value_name = "MW")]
    pub power_mw: Option<f64>,
    /// Pump powers for a sweep [default: 10,20,...,100]
    #[arg(long, value_name = "MW,...", value_delimiter = ',')]
    pub powers_mw: Option<Vec<f64>>,
    /// [default: 1]
    #[arg(long)]
    pub eta_s: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub eta_i: Option<f64>,
    /// Uncorrelated signal-arm rate [default: 0]
    #[arg(long, value_name = "HZ")]
    pub background_s: Option<f64>,
    /// Uncorrelated idler-arm rate [default: 0]
    #[arg(long, value_name = "HZ")]
    pub background_i: Option<f64>,
    /// [default: 6.8]
    #[arg(long, value_name = "NS")]
    pub window_ns: Option<f64>,
    /// Non-paralyzable detector dead time, 0 for none [default: 0]
    #[arg(long, value_name = "NS")]
    pub dead_time_ns: Option<f64>,
    /// Acquisition time per point [default: 1]
    #[arg(long, value_name = "S")]
    pub duration_s: Option<f64>,
    /// Visibility of the scanned fringe [default: 0.96]
    #[arg(long)]
    pub visibility: Option<f64>,
    /// Fixed second-analyzer angles for a scan [default: 0]
    #[arg(long, value_name = "DEG,...", value_delimiter = ',')]
    pub phi2_deg: Option<Vec<f64>>,
    /// First-analyzer step over 0..180° for a scan [default: 5]
    #[arg(long, value_name = "DEG")]
    pub scan_step_deg: Option<f64>,
}
