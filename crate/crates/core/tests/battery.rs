use approx::assert_relative_eq;
use powertrain_sizing::battery::*;
use powertrain_sizing::oracle::linspace;
use powertrain_sizing::Error;
use proptest::prelude::*;

const KWH: f64 = 3.6e6;

fn identity_battery() -> BatteryModel {
    BatteryModel::new(
        BatteryCoefficients {
            b0: 0.0,
            b1: 1.0,
            b2: 0.0,
        },
        58.0 * KWH,
        (0.2, 0.8),
        (-200e3, 200e3),
    )
    .unwrap()
}

fn default_fit() -> BatteryFit {
    let samples = CellStack::default().samples(-150e3, 150e3, 200);
    fit_battery(&samples, true).unwrap()
}

#[test]
fn cell_stack_fit_quality() {
    let fit = default_fit();
    assert!(fit.nrmse <= 0.02, "{}", fit.nrmse);
    assert!(!fit.convexified);
    assert!(fit.coefficients.b2 > 0.0);
    // standstill costs almost nothing
    assert!(
        fit.coefficients.b0.abs() < 0.01 * 150e3,
        "{}",
        fit.coefficients.b0
    );
}

#[test]
fn exact_quadratic_is_recovered() {
    let c = BatteryCoefficients {
        b0: 120.0,
        b1: 1.01,
        b2: 2.5e-7,
    };
    let samples: Vec<(f64, f64)> = linspace(-100e3, 120e3, 40)
        .into_iter()
        .map(|p| (p, c.eval(p)))
        .collect();
    let fit = fit_battery(&samples, true).unwrap();
    assert_relative_eq!(fit.coefficients.b0, c.b0, max_relative = 1e-9);
    assert_relative_eq!(fit.coefficients.b1, c.b1, max_relative = 1e-9);
    assert_relative_eq!(fit.coefficients.b2, c.b2, max_relative = 1e-9);
}

#[test]
fn concave_data_is_convexified() {
    let samples: Vec<(f64, f64)> = linspace(-1e3, 1e3, 21)
        .into_iter()
        .map(|p| (p, p - 1e-4 * p * p))
        .collect();
    let fit = fit_battery(&samples, true).unwrap();
    assert!(fit.convexified);
    assert_eq!(fit.coefficients.b2, 0.0);
    let raw = fit_battery(&samples, false).unwrap();
    assert!(raw.coefficients.b2 < 0.0);
}

#[test]
fn collinear_samples_rejected() {
    let samples = vec![(-1.0, 1.0), (1.0, 2.0), (1.0, 2.0), (-1.0, 1.0)];
    assert!(matches!(
        fit_battery(&samples, true),
        Err(Error::CollinearSamples)
    ));
    assert!(fit_battery(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)], true).is_err());
}

#[test]
fn internal_power_basics() {
    let bm = identity_battery();
    assert_eq!(bm.internal_power(0.0).unwrap(), 0.0);
    assert_eq!(bm.internal_power(1234.5).unwrap(), 1234.5);
    assert!(matches!(
        bm.internal_power(1e6),
        Err(Error::BatteryRange { .. })
    ));
    let fit = default_fit();
    let fitted = BatteryModel::new(
        fit.coefficients,
        58.0 * KWH,
        (0.2, 0.8),
        (fit.p_b_min, fit.p_b_max),
    )
    .unwrap();
    assert!(fitted.internal_power(100e3).unwrap() > 100e3);
}

#[test]
fn constant_kilowatt_for_100_seconds() {
    let bm = BatteryModel::new(
        BatteryCoefficients {
            b0: 1e3,
            b1: 1.0,
            b2: 0.0,
        },
        58.0 * KWH,
        (0.2, 0.8),
        (-1e5, 1e5),
    )
    .unwrap();
    let soe = integrate_soe(&bm, &[0.0; 100], 0.0, 1.0);
    assert_relative_eq!(soe.delta_e, 100e3, max_relative = 1e-12);
    assert_eq!(soe.e_b.len(), 101);
}

#[test]
fn idle_battery_stays_flat() {
    let bm = identity_battery();
    let soe = integrate_soe(&bm, &[0.0; 50], 0.0, 1.0);
    assert!(soe.e_b.iter().all(|&e| e == bm.initial_energy()));
    assert_eq!(soe.delta_e, 0.0);
}

#[test]
fn auxiliary_load_over_half_an_hour() {
    let soe = integrate_soe(&identity_battery(), &vec![0.0; 1800], 2000.0, 1.0);
    assert_relative_eq!(soe.delta_e, 3.6e6, max_relative = 1e-12);
    assert!(!soe.window_violated);
}

#[test]
fn deep_discharge_is_flagged() {
    let bm = identity_battery();
    let soe = integrate_soe(&bm, &vec![150e3; 1000], 0.0, 1.0);
    assert!(soe.window_violated);
    assert_eq!(soe.out_of_range, 0);
}

proptest! {
    #[test]
    fn telescoping_and_chaining(p in prop::collection::vec(-80e3f64..120e3, 2..300), split in 0usize..300) {
        let fit = default_fit();
        let bm = BatteryModel::new(fit.coefficients, 58.0 * KWH, (0.2, 0.8), (fit.p_b_min, fit.p_b_max)).unwrap();
        let soe = integrate_soe(&bm, &p, 2e3, 1.0);
        let sum: f64 = soe.p_i.iter().sum::<f64>() * soe.dt;
        prop_assert!((soe.delta_e - sum).abs() <= 1e-12 * bm.initial_energy() * p.len() as f64);
        prop_assert_eq!(soe.delta_e, soe.e_b[0] - soe.e_b[p.len()]);

        let k = split.min(p.len());
        let first = integrate_soe(&bm, &p[..k], 2e3, 1.0);
        let second = integrate_soe_from(&bm, *first.e_b.last().unwrap(), &p[k..], 2e3, 1.0);
        prop_assert_eq!(second.e_b.last(), soe.e_b.last());
    }

    #[test]
    fn fitted_model_is_convex_and_increasing(a in -150e3f64..150e3, b in -150e3f64..150e3) {
        let fit = default_fit();
        let c = fit.coefficients;
        prop_assert!(c.b2 >= 0.0);
        if a < b {
            prop_assert!(c.eval(a) < c.eval(b));
        }
        let mid = c.eval(0.5 * (a + b));
        prop_assert!(mid <= 0.5 * (c.eval(a) + c.eval(b)) + 1e-9 * (a.abs() + b.abs()));
    }
}
