use proptest::prelude::*;
use spdc_core::design::{
    bandwidth_from_divergence, divergence_from_bandwidth, fiber_conjugation, mode_from_divergence, rayleigh_length_mm,
};
use spdc_core::{design_collection, CrystalSpec, DesignInputs, PumpConfig};

proptest! {
    #[test]
    fn target_mode_invariants(theta_d in 1e-5f64..0.05, lambda in 0.3f64..1.5) {
        let m = mode_from_divergence(theta_d, lambda).unwrap();
        let pi = std::f64::consts::PI;
        prop_assert!((m.waist_um * pi * m.divergence / lambda - 1.0).abs() < 1e-12);
        prop_assert!((m.rayleigh_mm * 1e3 / (pi * m.waist_um.powi(2) / lambda) - 1.0).abs() < 1e-12);
        let half = mode_from_divergence(2.0 * theta_d, lambda).unwrap();
        prop_assert!((half.waist_um * 2.0 / m.waist_um - 1.0).abs() < 1e-12);
        prop_assert!((half.rayleigh_mm * 4.0 / m.rayleigh_mm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bandwidth_divergence_round_trip(bw in 0.01f64..50.0, slope in prop_oneof![-1.0f64..-1e-3, 1e-3f64..1.0]) {
        let td = divergence_from_bandwidth(bw, slope).unwrap();
        let back = bandwidth_from_divergence(td, slope).unwrap();
        prop_assert!((back / bw - 1.0).abs() < 1e-12);
    }

    #[test]
    fn magnification_is_linear(w in 1.0f64..500.0, wf in 0.5f64..10.0) {
        let a = fiber_conjugation(w, wf, 11.0).unwrap();
        let b = fiber_conjugation(2.0 * w, wf, 11.0).unwrap();
        prop_assert!((b.magnification / a.magnification - 2.0).abs() < 1e-12);
        // thin-lens equation
        let lhs = 1.0 / a.object_distance_mm + 1.0 / a.image_distance_mm;
        prop_assert!((lhs * 11.0 - 1.0).abs() < 1e-12);
    }
}

#[test]
fn equal_waists_image_two_f_to_two_f() {
    let c = fiber_conjugation(5.0, 5.0, 11.0).unwrap();
    assert_eq!(c.magnification, 1.0);
    assert_eq!((c.object_distance_mm, c.image_distance_mm), (22.0, 22.0));
}

#[test]
fn fixed_derivative_chain_in_one_call() {
    let inputs = DesignInputs {
        dtheta_dlambda_override: Some(0.055),
        ..DesignInputs::default()
    };
    let d = design_collection(&CrystalSpec::bbo(), &PumpConfig::standard(), &inputs).unwrap();
    assert!((d.divergence_raw.to_degrees() - 0.186).abs() < 0.002);
    assert!((d.divergence_chosen.to_degrees() - 0.16).abs() < 0.002);
    assert!((78.0..=84.0).contains(&d.mode.waist_um), "{}", d.mode.waist_um);
    assert_eq!(d.pump_waist_um, d.mode.waist_um);
    assert!(d.walkoff_exceeds_waist());
    assert!((d.walkoff_ratio - 1.9).abs() < 0.1, "{}", d.walkoff_ratio);
}

#[test]
fn computed_derivative_chain() {
    // The cone-radius rate of the ordinary photon is 0.0574 °/nm, within
    // 10 % of 0.055; the chain downstream scales with it.
    let d = design_collection(&CrystalSpec::bbo(), &PumpConfig::standard(), &DesignInputs::default()).unwrap();
    assert!(d.dtheta_dlambda_computed);
    assert!((d.dtheta_dlambda / 0.055 - 1.0).abs() < 0.1);
    assert!((d.divergence_chosen.to_degrees() / 0.16 - 1.0).abs() < 0.1);
    assert!((d.mode.waist_um / 80.0 - 1.0).abs() < 0.1);
}

#[test]
fn halving_bandwidth_doubles_waist() {
    let bbo = CrystalSpec::bbo();
    let p = PumpConfig::standard();
    let four = design_collection(&bbo, &p, &DesignInputs::default()).unwrap();
    let two = design_collection(
        &bbo,
        &p,
        &DesignInputs {
            bandwidth_fwhm_nm: 2.0,
            ..DesignInputs::default()
        },
    )
    .unwrap();
    assert!((two.mode.waist_um / four.mode.waist_um - 2.0).abs() < 1e-12);
}

#[test]
fn rayleigh_length_exceeds_crystal() {
    let zr = rayleigh_length_mm(82.0, 0.7022);
    assert!((zr - 30.0).abs() < 1.0, "{zr}");
    assert!(zr > 2.0);
}
