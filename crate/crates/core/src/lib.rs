//! Design and analysis tools for type-II down-conversion photon-pair
//! sources.
//!
//! - [`crystal`]: uniaxial crystal data and refractive indices.
//! - [`phasematch`]: phase-matched emission angles and cone geometry.
//! - [`design`]: target collection mode and fiber-coupling optics.
//! - [`stats`]: count-rate statistics and visibility fits.
//! - [`sim`]: seeded event-level counting simulator.
//! - [`io`]: CSV formats shared by the analysis and simulator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crystal;
pub mod design;
pub mod error;
pub mod io;
pub mod phasematch;
pub mod sim;
pub mod stats;

pub use crystal::{refract_external, refract_internal, CrystalSpec, Polarization, SellmeierSet};
pub use design::{design_collection, CollectionDesign, DesignInputs, FiberCoupler, TargetMode};
pub use error::{Error, Result};
pub use phasematch::{
    cone_dispersion, dtheta_dlambda, intersection_geometry, solve_emission, sweep_emission, ConeIntersection,
    EmissionQuery, EmissionSolution, PumpConfig, SweepRow, SweepSpec,
};
pub use sim::{simulate_correlation_scan, simulate_counts, simulate_power_sweep, SimConfig, SimOutput};
pub use stats::{
    accidental_rate, chsh_s, corrected_visibility, correlation_e, efficiency_ratio, model_coincidence_rate,
    power_slope, sincos_fit, BellResult, CorrelationCurve, CountRecord, CurvePoint, VisibilityFit,
};
