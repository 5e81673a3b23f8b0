use proptest::prelude::*;

use rfpc_core::control::{integral_step, pid_step, ControllerState};
use rfpc_core::evm::{compute_evm_rms, generate_qam};
use rfpc_core::fuzzy::{defuzzify_centroid, FuzzyOutputSet};
use rfpc_core::plant::pa_amam;
use rfpc_core::sensing::{calibrate, detector_voltage, measure_power};
use rfpc_core::{
    quantize_command, ActuatorModel, AdcModel, CalibrationResult, DetectorModel, FuzzyEngine,
    PaParams, PidGains, PlantConfig, RuleTable, Term,
};

fn engine() -> FuzzyEngine {
    FuzzyEngine::default()
}

fn activations() -> impl Strategy<Value = [f64; 7]> {
    prop::array::uniform7(prop_oneof![Just(0.0), 0.0..=1.0f64])
        .prop_filter("at least one rule fires", |a| a.iter().any(|&x| x > 0.0))
}

proptest! {
    #[test]
    fn centroid_stays_in_universe(act in activations()) {
        let e = engine();
        let out = e.output_set();
        let c = defuzzify_centroid(&FuzzyOutputSet::new(act).unwrap(), out).unwrap();
        prop_assert!(c >= out.min() && c <= out.max());
    }

    #[test]
    fn fuzzy_step_is_odd(e in -4.0..4.0f64, de in -600.0..600.0f64) {
        let f = engine();
        let a = f.fuzzy_step(e, de).unwrap();
        let b = f.fuzzy_step(-e, -de).unwrap();
        prop_assert!((a + b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn fuzzy_step_sign_follows_quadrant(e in 0.0..4.0f64, de in 0.0..600.0f64) {
        let f = engine();
        prop_assert!(f.fuzzy_step(e, de).unwrap() >= -1e-12);
        prop_assert!(f.fuzzy_step(-e, -de).unwrap() <= 1e-12);
    }

    #[test]
    fn fuzzy_step_monotone_along_axes(a in -4.0..4.0f64, b in -4.0..4.0f64, r in -600.0..600.0f64, s in -600.0..600.0f64) {
        let f = engine();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(f.fuzzy_step(hi, 0.0).unwrap() >= f.fuzzy_step(lo, 0.0).unwrap() - 1e-12);
        let (lo, hi) = if r <= s { (r, s) } else { (s, r) };
        prop_assert!(f.fuzzy_step(0.0, hi).unwrap() >= f.fuzzy_step(0.0, lo).unwrap() - 1e-12);
    }

    // Memberships have slope at most 1/spacing, so every activation moves by at
    // most eps/spacing; the centroid of sets on a universe of width W then moves
    // by at most a few W per unit of activation change.
    #[test]
    fn fuzzy_step_is_continuous(e in -3.0..3.0f64, de in -500.0..500.0f64) {
        let f = engine();
        let eps = 1e-6;
        let spacing_e = f.error_set().span() / 6.0;
        let spacing_de = f.rate_set().span() / 6.0;
        let w = f.output_set().span();
        let base = f.fuzzy_step(e, de).unwrap();
        let de_step = (f.fuzzy_step(e, de + eps).unwrap() - base).abs();
        let e_step = (f.fuzzy_step(e + eps, de).unwrap() - base).abs();
        prop_assert!(e_step <= 4.0 * w * eps / spacing_e, "{e_step}");
        prop_assert!(de_step <= 4.0 * w * eps / spacing_de, "{de_step}");
    }

    #[test]
    fn fuzzify_partitions_unity(x in -10.0..10.0f64) {
        let deg = engine().error_set().fuzzify(x);
        prop_assert!(deg.iter().all(|&d| (0.0..=1.0).contains(&d)));
        prop_assert!((deg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integral_law_is_pid_without_p_and_d(errors in prop::collection::vec(-5.0..5.0f64, 1..200), ki in 0.1..5.0f64) {
        let ts = 0.01;
        let bounds = (0.0, 31.5);
        let gains = PidGains::new(0.0, ki, 0.0, ts).unwrap();
        let mut a = ControllerState::with_command(10.0);
        let mut b = ControllerState::with_command(10.0);
        for &e in &errors {
            let ua = integral_step(&mut a, ki, ts, bounds, e).unwrap();
            let ub = pid_step(&mut b, &gains, bounds, e).unwrap();
            prop_assert_eq!(ua, ub);
        }
    }

    #[test]
    fn anti_windup_keeps_integral_bounded(errors in prop::collection::vec(-50.0..50.0f64, 1..300)) {
        let mut s = ControllerState::with_command(10.0);
        for &e in &errors {
            let before = s.integral;
            let u = integral_step(&mut s, 5.0, 0.01, (0.0, 31.5), e).unwrap();
            prop_assert!(u >= 0.0 - 2.5 && u <= 31.5 + 2.5);
            if (before >= 31.5 && e > 0.0) || (before <= 0.0 && e < 0.0) {
                prop_assert_eq!(s.integral, before);
            }
        }
    }

    #[test]
    fn quantized_command_is_a_grid_level(u in -100.0..100.0f64, prev in 0.0..31.5f64, slew in prop::option::of(0.5..4.0f64)) {
        let act = ActuatorModel { slew_db: slew, ..ActuatorModel::default() };
        let prev = quantize_command(prev, &ActuatorModel::default(), None);
        let q = quantize_command(u, &act, Some(prev));
        prop_assert!((0.0..=31.5).contains(&q));
        prop_assert!(((q / 0.5).round() * 0.5 - q).abs() < 1e-12);
        if let Some(s) = slew {
            prop_assert!((q - prev).abs() <= s + 1e-9);
        }
    }

    #[test]
    fn output_falls_as_attenuation_rises(u in 0.0..31.0f64, du in 0.0..10.0f64, link in 0.0..20.0f64) {
        let cfg = PlantConfig::default();
        let a = cfg.static_output_dbm(u, link, 0.0);
        let b = cfg.static_output_dbm(u + du, link, 0.0);
        prop_assert!(b <= a + 1e-12);
        prop_assert!(a <= cfg.pa.psat_dbm + 1e-9);
    }

    #[test]
    fn rapp_curve_is_monotone_and_bounded(v in 0.0..10.0f64, dv in 0.0..1.0f64, p in 1.0..6.0f64) {
        let pa = PaParams { smoothness: p, ..PaParams::default() };
        let a = pa_amam(v, &pa);
        prop_assert!(pa_amam(v + dv, &pa) >= a);
        prop_assert!(a <= pa.v_sat() * (1.0 + 1e-12));
        prop_assert!(a <= pa.gain_lin() * v * (1.0 + 1e-12));
    }

    #[test]
    fn noiseless_calibration_recovers_the_law(s in 0.01..0.05f64, p0 in -60.0..-45.0f64, n in 3usize..30) {
        let det = DetectorModel { slope_v_per_db: s, intercept_dbm: p0, clamp_max_v: 10.0, ..DetectorModel::default() };
        let sweep: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let p = -40.0 + 40.0 * i as f64 / (n - 1) as f64;
                (p, detector_voltage(p, &det))
            })
            .collect();
        let cal = calibrate(&sweep).unwrap();
        prop_assert!((cal.slope_v_per_db - s).abs() < 1e-9);
        prop_assert!((cal.intercept_dbm - p0).abs() < 1e-6);
        prop_assert!(cal.r_squared > 1.0 - 1e-9);
    }

    #[test]
    fn adc_error_is_within_half_an_lsb(p in -40.0..0.0f64) {
        let det = DetectorModel::default();
        let adc = AdcModel::default();
        let m = measure_power(p, &det, Some(&adc), &CalibrationResult::exact(&det));
        let bound = adc.lsb_v() / (2.0 * det.slope_v_per_db) + 1e-9;
        prop_assert!((m.p_est_dbm - p).abs() <= bound);
    }

    #[test]
    fn evm_ignores_complex_gain(mag in 0.01..100.0f64, phase in -3.0..3.0f64, seed in 0u64..50) {
        let r = generate_qam(16, 256, seed).unwrap().symbols;
        let g = num_complex::Complex64::from_polar(mag, phase);
        let noisy: Vec<_> = r.iter().enumerate().map(|(i, s)| s + 0.01 * (i % 3) as f64).collect();
        let scaled: Vec<_> = noisy.iter().map(|s| s * g).collect();
        let a = compute_evm_rms(&r, &noisy).unwrap();
        let b = compute_evm_rms(&r, &scaled).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }
}

#[test]
fn default_rules_are_antisymmetric_and_monotone() {
    let rules = RuleTable::default();
    assert!(rules.is_antisymmetric());
    assert!(rules.is_monotone());
    assert_eq!(rules.cell(Term::NB, Term::PB), Term::Z);
    assert_eq!(rules.cell(Term::Z, Term::Z), Term::Z);
}
