use approx::assert_relative_eq;
use powertrain_sizing::oracle::*;
use powertrain_sizing::Error;
use proptest::prelude::*;

fn design() -> MotorDesign {
    MotorDesign::new(100e3, 3.0)
}

#[test]
fn standstill_zero_torque_is_constant_term() {
    let l = oracle_loss(&MotorTechSpec::default(), &design(), 0.0, 0.0).unwrap();
    assert_relative_eq!(l, 200.0, max_relative = 1e-12);
}

#[test]
fn rated_point() {
    let s = MotorTechSpec::default();
    let l = oracle_loss(&s, &design(), s.omega_rated, s.rated_torque(100e3)).unwrap();
    // copper 2875 + iron 1380 + windage 17.15 + constant 200
    assert_relative_eq!(l, 4472.15, max_relative = 1e-9);
    let eta = 100e3 / (100e3 + l);
    assert_relative_eq!(eta, 0.95719, max_relative = 1e-4);
}

#[test]
fn half_rated_torque_quarters_copper() {
    let s = MotorTechSpec::default();
    let l = oracle_loss(&s, &design(), s.omega_rated, 0.5 * s.rated_torque(100e3)).unwrap();
    assert_relative_eq!(l, 2315.9, max_relative = 1e-9);
}

#[test]
fn outside_envelope_is_an_error() {
    let s = MotorTechSpec::default();
    let t = 1.01 * s.rated_torque(100e3);
    assert!(matches!(
        oracle_loss(&s, &design(), 100.0, t),
        Err(Error::OutsideEnvelope { .. })
    ));
    assert!(oracle_loss(&s, &design(), 1.1 * s.omega_max, 0.0).is_err());
}

#[test]
fn two_by_two_map_is_envelope_corners() {
    let o = SyntheticPmsm::default();
    let m = generate_map(&o, &design(), 2, 2).unwrap();
    assert_eq!(m.loss.len(), 4);
    assert_eq!(m.omega_grid, vec![o.spec.omega_eps(), o.spec.omega_max]);
    assert_eq!(m.torque_grid[1], o.spec.rated_torque(100e3));
    // rated torque at top speed is beyond the constant-power hyperbola
    assert!(m.get(0, 1).is_some());
    assert!(m.get(1, 1).is_none());
    assert!(generate_map(&o, &design(), 1, 5).is_err());
}

#[test]
fn constant_power_hyperbola() {
    let s = MotorTechSpec::default();
    let t_r = s.rated_torque(100e3);
    assert_relative_eq!(
        s.torque_limit(100e3, 2.0 * s.omega_rated),
        0.5 * t_r,
        max_relative = 1e-12
    );
}

#[test]
fn optimum_design_map_efficiency_band() {
    let o = SyntheticPmsm::default();
    let m = generate_map(&o, &MotorDesign::new(145e3, 3.49), 60, 60).unwrap();
    let best = m.max_efficiency().unwrap();
    assert!((0.90..=0.98).contains(&best), "{best}");
}

#[test]
fn trajectory_idle_motor() {
    let o = SyntheticPmsm::default();
    let tl = evaluate_trajectory(&o, &design(), &[0.0; 5], &[0.0; 5]).unwrap();
    assert!(tl.loss.iter().all(|&l| (l - 200.0).abs() < 1e-9));
    assert_eq!(tl.clamped_count(), 0);
}

#[test]
fn trajectory_matches_pointwise_oracle() {
    let o = SyntheticPmsm::default();
    let w = o.spec.omega_rated;
    let tl = evaluate_trajectory(&o, &design(), &[w], &[100e3]).unwrap();
    let direct = o.loss(&design(), w, o.spec.rated_torque(100e3)).unwrap();
    assert_relative_eq!(tl.loss[0], direct, max_relative = 1e-12);
    assert!(!tl.clamped[0]);
}

#[test]
fn trajectory_at_standstill_with_power_is_clamped() {
    let o = SyntheticPmsm::default();
    let (w, t, c) = envelope_point(&o.spec, 100e3, 0.0, 1e3);
    assert_eq!(w, 0.0);
    assert_relative_eq!(t, 1e3 / o.spec.omega_eps(), max_relative = 1e-12);
    assert!(c);
    let tl = evaluate_trajectory(&o, &design(), &[0.0], &[1e3]).unwrap();
    assert_eq!(tl.clamped_count(), 1);
}

#[test]
fn csv_header() {
    let o = SyntheticPmsm::default();
    let m = generate_map(&o, &design(), 3, 3).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("omega_radps,torque_Nm,loss_W,feasible\n"));
    assert_eq!(text.lines().count(), 10);
}

proptest! {
    #[test]
    fn monotone_and_symmetric(
        p in 70e3f64..150e3, lambda in 1.0f64..4.0,
        wf in 0.0f64..1.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
    ) {
        let o = SyntheticPmsm::default();
        let d = MotorDesign::new(p, lambda);
        let w = wf * o.spec.omega_max;
        let lim = o.spec.torque_limit(p, w);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        let a = o.loss(&d, w, lo * lim).unwrap();
        let b = o.loss(&d, w, hi * lim).unwrap();
        if hi > lo { prop_assert!(b > a); }
        prop_assert_eq!(o.loss(&d, w, -hi * lim).unwrap(), b);
        // increasing in speed at fixed torque
        let w2 = (w + 10.0).min(o.spec.omega_max);
        let t = lo * o.spec.torque_limit(p, w2);
        prop_assert!(o.loss(&d, w2, t).unwrap() >= o.loss(&d, w, t).unwrap());
    }

    #[test]
    fn homogeneous_in_rated_power(p in 70e3f64..150e3, s in 0.5f64..2.0, lambda in 1.0f64..4.0, tau in 0.0f64..1.0, w in 0.0f64..1.0) {
        let o = SyntheticPmsm::default();
        let omega = w * o.spec.omega_max;
        let base = o.loss_unchecked(&MotorDesign::new(p, lambda), omega, tau * o.spec.rated_torque(p));
        let scaled = o.loss_unchecked(&MotorDesign::new(s * p, lambda), omega, tau * o.spec.rated_torque(s * p));
        prop_assert!((scaled - s * base).abs() <= 1e-9 * scaled);
    }
}
