use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use spdc_core::{refract_external, refract_internal, CrystalSpec, Polarization};

proptest! {
    #[test]
    fn extraordinary_index_between_principal_values(lambda in 0.23f64..1.05, theta in 1e-3f64..(FRAC_PI_2 - 1e-3)) {
        let c = CrystalSpec::bbo();
        let ne = c.index(lambda, Polarization::Extraordinary).unwrap();
        let no = c.index(lambda, Polarization::Ordinary).unwrap();
        let n = c.index_e_theta(lambda, theta).unwrap();
        prop_assert!(ne < n && n < no, "{ne} {n} {no}");
    }

    #[test]
    fn refraction_round_trip(n in 1.0f64..2.5, theta_ext in -1.5f64..1.5) {
        let back = refract_external(n, refract_internal(n, theta_ext)).unwrap();
        prop_assert!((back - theta_ext).abs() < 1e-12);
    }

    #[test]
    fn walkoff_is_continuous(lambda in 0.25f64..1.0, theta in 0.01f64..1.56) {
        let c = CrystalSpec::bbo();
        let a = c.walkoff_angle(lambda, theta).unwrap();
        let b = c.walkoff_angle(lambda, theta + 1e-7).unwrap();
        prop_assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn walkoff_peaks_inside_the_quadrant() {
    let c = CrystalSpec::bbo();
    let rho = |t: f64| c.walkoff_angle(0.3511, t).unwrap();
    let grid: Vec<f64> = (0..=1000).map(|k| FRAC_PI_2 * k as f64 / 1000.0).collect();
    let (arg, max) = grid
        .iter()
        .map(|&t| (t, rho(t)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert!(arg > 0.1 && arg < FRAC_PI_2 - 0.1, "{arg}");
    assert!(max > rho(0.0) && max > rho(FRAC_PI_2));
}
