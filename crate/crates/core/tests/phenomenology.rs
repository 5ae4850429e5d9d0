use std::f64::consts::PI;

use collapse_kinetics::phenomenology::{
    dm_derived, dm_reduction_exponent, dm_required_density, fifth_force_bound, make_tables,
    round_one_sig_fig, scenario_from_lab_units, DarkMatterScenario, MASSES_KEV,
};
use collapse_kinetics::rates::{gamma_pair, ParticleGroup};
use collapse_kinetics::units::{
    density_to_natural, natural_to_cm, natural_to_seconds, EV, HBAR_C_GEV_CM, KEV, NUCLEON_MASS,
    TEV,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn halo(mass_kev: f64, density_gev_cm3: f64) -> DarkMatterScenario {
    scenario_from_lab_units(
        mass_kev * KEV,
        220.0,
        density_gev_cm3,
        TEV.powi(-2),
        1e11,
        1.0,
        1.4e-3 * EV,
    )
    .unwrap()
}

#[test]
fn table_examples() {
    let [t1, t2, t3, t4] = make_tables();
    assert_eq!(t1.display_value("v_h", 1e6), Some(3e-11));
    assert_eq!(t2.display_value("v_e", 1.0), Some(3e-9));
    assert_eq!(t3.display_value("1e8", 1e4), Some(2e1));
    assert_eq!(t3.display_value("1e22", 1.0), Some(2e-21));
    assert_eq!(t4.display_value("1e22", 1.0), Some(3.0));
    for t in [&t1, &t2, &t3, &t4] {
        assert_eq!(t.masses_kev, MASSES_KEV.to_vec());
        assert!(t.rows.iter().all(|r| r.values.iter().all(|v| *v > 0.0)));
    }
}

#[test]
fn scenario_examples() {
    let d = dm_derived(&halo(1.0, 0.3));
    assert_eq!(round_one_sig_fig(natural_to_cm(d.correlation_length)), 3e-5);
    assert_eq!(
        round_one_sig_fig(natural_to_seconds(d.reduction_time)),
        4e-12
    );
    // Number density in cm⁻³ times 8π^{3/2}r_C³.
    let rc_cm = natural_to_cm(d.correlation_length);
    let chem = |rc: f64| 0.3 / KEV * 8.0 * PI.powf(1.5) * rc.powi(3);
    assert!(rel(d.chem_factor, chem(rc_cm)) < 1e-12);
    // With r_C rounded to 3e-5 cm the factor is 3.6e-7.
    assert!((chem(3e-5) - 3.6e-7).abs() < 0.05e-7);
    assert!(!d.non_dilute);
    assert_eq!(d.reduction_time * d.temperature, 1.0);
}

#[test]
fn required_density_examples() {
    let gamma = TEV.powi(-2);
    let a = dm_required_density(KEV, 1e22, gamma).unwrap();
    assert_eq!(round_one_sig_fig(a.gamma_rho_m_reference), 2e-21);
    assert_eq!(round_one_sig_fig(a.rho_m), 3.0);
    let b = dm_required_density(10.0 * KEV, 1e22, gamma).unwrap();
    assert!(rel(b.gamma_rho_m_reference, 100.0 * a.gamma_rho_m_reference) < 1e-12);
    assert!(dm_required_density(0.0, 1e22, gamma).is_err());
}

/// The reference coupling-density formula grows as μ² while the exponent
/// falls as μ⁻⁴; the two meet at μ = 1 GeV, where the tabulated value gives
/// a unit exponent. The ħc-consistent value gives exactly one everywhere.
#[test]
fn required_density_closes_the_exponent() {
    let gamma = TEV.powi(-2);
    for n_out in [1e22, 1e8] {
        let consistent = |mass_kev: f64| {
            let r = dm_required_density(mass_kev * KEV, n_out, gamma).unwrap();
            let mut s = halo(mass_kev, r.rho_m_consistent);
            s.nucleons_per_bunch = n_out.sqrt();
            (r, s)
        };
        for mass_kev in MASSES_KEV {
            let (_, s) = consistent(mass_kev);
            assert!(rel(dm_reduction_exponent(&s), 1.0) < 1e-12);
        }
        let (r, mut s) = consistent(1e6);
        let reference_density = r.gamma_rho_m_reference / gamma / HBAR_C_GEV_CM.powi(2);
        s.density = density_to_natural(reference_density);
        assert_eq!(round_one_sig_fig(dm_reduction_exponent(&s)), 1.0);
    }
}

/// 2Γ(∞) summed over well-separated bunches of coincident nucleons matches
/// the closed exponent up to the dilute expansion.
#[test]
fn exponent_matches_pair_rate() {
    let mut s = halo(1.0, 0.3);
    s.nucleons_per_bunch = 1e11;
    s.bunches = 3.0;
    let model = s.noise_model().unwrap();
    let rc = dm_derived(&s).correlation_length;
    let bunch_coupling = s.nucleons_per_bunch * NUCLEON_MASS;
    let home: Vec<[f64; 3]> = (0..3).map(|i| [1e6 * rc * i as f64, 0.0, 0.0]).collect();
    let moved: Vec<[f64; 3]> = home.iter().map(|p| [p[0], 1e3 * rc, 0.0]).collect();
    let a = ParticleGroup::new(home, vec![bunch_coupling; 3]).unwrap();
    let b = ParticleGroup::new(moved, vec![bunch_coupling; 3]).unwrap();
    let gamma = gamma_pair(&model, &a, &b, f64::INFINITY).unwrap().gamma;
    let exponent = dm_reduction_exponent(&s);
    assert!(
        rel(2.0 * gamma, exponent) < 0.01,
        "{} vs {exponent}",
        2.0 * gamma
    );
}

#[test]
fn fifth_force_examples() {
    let mu5 = 1.4e-3 * EV;
    assert_eq!(fifth_force_bound(0.0, mu5).unwrap().min_scale, 1e19);
    let b = fifth_force_bound(KEV, mu5).unwrap();
    assert!((b.log10_min_scale_gev - (19.0 - 0.22e6 / 1.4)).abs() < 1e-6);
    assert!((b.log10_min_scale_gev + 1.6e5).abs() < 0.05e5);
    assert_eq!(b.min_scale, 0.0);
    let crossing = fifth_force_bound(mu5 * 19.0 / 0.22, mu5).unwrap();
    assert!(crossing.log10_min_scale_gev.abs() < 1e-12);
    assert!(rel(crossing.min_scale, 1.0) < 1e-11);
    assert!(fifth_force_bound(KEV, 0.0).is_err());
}

#[test]
fn invalid_scenarios_are_rejected() {
    assert!(scenario_from_lab_units(KEV, 3e5, 0.3, 1e-6, 1.0, 1.0, 1e-12).is_err());
    assert!(scenario_from_lab_units(KEV, 220.0, -0.3, 1e-6, 1.0, 1.0, 1e-12).is_err());
    assert!(scenario_from_lab_units(0.0, 220.0, 0.3, 1e-6, 1.0, 1.0, 1e-12).is_err());
}

#[test]
fn table_scaling_laws() {
    let [t1, t2, t3, _] = make_tables();
    let pairs = MASSES_KEV.iter().zip(MASSES_KEV.iter().skip(1));
    for (&m1, &m2) in pairs {
        for v in ["v_h", "v_s", "v_e"] {
            let r = t1.value(v, m1).unwrap() / t1.value(v, m2).unwrap();
            assert!(rel(r, m2 / m1) < 1e-12);
            let r = t2.value(v, m1).unwrap() / t2.value(v, m2).unwrap();
            assert!(rel(r, m2 / m1) < 1e-12);
        }
        let r = t3.value("1e8", m2).unwrap() / t3.value("1e8", m1).unwrap();
        assert!(rel(r, (m2 / m1).powi(2)) < 1e-12);
    }
    for m in MASSES_KEV {
        let (h, e) = (t1.value("v_h", m).unwrap(), t1.value("v_e", m).unwrap());
        assert!(rel(e / h, 220.0 / 8.0) < 1e-12);
        let (h, e) = (t2.value("v_h", m).unwrap(), t2.value("v_e", m).unwrap());
        assert!(rel(e / h, (220.0f64 / 8.0).powi(2)) < 1e-12);
        let r = t3.value("1e8", m).unwrap() / t3.value("1e22", m).unwrap();
        assert!(rel(r, 1e14) < 1e-12);
    }
}

#[test]
fn reduction_times_are_short() {
    let [_, t2, _, _] = make_tables();
    for row in &t2.rows {
        assert!(row.values.iter().all(|v| *v < 3e-9), "{}", row.label);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn halo_scenarios_are_dilute(mass_index in 0usize..6, density in 0.01f64..1.0) {
        let d = dm_derived(&halo(MASSES_KEV[mass_index], density));
        prop_assert!(d.chem_factor < 1e-3);
        prop_assert!(!d.non_dilute);
    }

    #[test]
    fn exponent_scales_as_count_squared(n in 1.0f64..1e12, k in 1.0f64..10.0, bunches in 1.0f64..100.0) {
        let mut s = halo(10.0, 0.3);
        s.nucleons_per_bunch = n;
        s.bunches = bunches;
        let base = dm_reduction_exponent(&s);
        s.nucleons_per_bunch = k * n;
        prop_assert!(rel(dm_reduction_exponent(&s), k * k * base) < 1e-12);
        s.bunches = k * bunches;
        prop_assert!(rel(dm_reduction_exponent(&s), k * k * k * base) < 1e-12);
    }

    #[test]
    fn fifth_force_bound_decreases(m in 0.0f64..1e-5, dm in 1e-9f64..1e-5, mu5 in 1e-13f64..1e-9) {
        let a = fifth_force_bound(m, mu5).unwrap().log10_min_scale_gev;
        let b = fifth_force_bound(m + dm, mu5).unwrap().log10_min_scale_gev;
        prop_assert!(b < a);
    }
}
