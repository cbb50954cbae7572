//! Shared setups for the criterion benches.

use spdc_core::{CrystalSpec, Polarization, PumpConfig, SimConfig, SweepSpec};

/// BBO with the bundled Sellmeier data and the 351.1 nm pump at the cut angle.
pub fn bbo_setup() -> (CrystalSpec, PumpConfig) {
    (CrystalSpec::bbo(), PumpConfig::standard())
}

/// 690 to 710 nm in 0.5 nm steps, ordinary idler at 90° azimuth.
pub fn idler_sweep() -> SweepSpec {
    SweepSpec {
        from_um: 0.690,
        to_um: 0.710,
        step_um: 0.0005,
        azimuth: 90f64.to_radians(),
        idler_pol: Polarization::Ordinary,
        fd_step_nm: 0.1,
    }
}

/// Lossy detectors with background and dead time at the given pump power.
pub fn detector_config(pump_power_mw: f64, duration_s: f64) -> SimConfig {
    SimConfig {
        pair_rate_per_mw: 900.0,
        pump_power_mw,
        eta_s: 0.286,
        eta_i: 0.286,
        background_s: 2e4,
        background_i: 2e4,
        window_s: 6.8e-9,
        dead_time_s: 50e-9,
        duration_s,
        seed: 1,
    }
}
