use approx::assert_abs_diff_eq;
use powertrain_sizing::cycle::*;
use powertrain_sizing::{Error, Result};

fn read(s: &str) -> Result<DriveCycle> {
    read_cycle(s.as_bytes(), &CycleSchema::default())
}

#[test]
fn linear_ramp_derives_forward_difference() {
    let c = read("t,v\n0,0\n1,1\n2,2\n").unwrap();
    assert_eq!(c.dt(), 1.0);
    assert_eq!(c.v(), &[0.0, 1.0, 2.0]);
    assert_eq!(c.a(), &[1.0, 1.0, 0.0]);
    assert_eq!(c.alpha(), &[0.0, 0.0, 0.0]);
}

#[test]
fn negative_velocity_rejected() {
    let err = read("t,v\n0,0\n1,-0.1\n2,2\n").unwrap_err();
    assert!(
        matches!(err, Error::NegativeVelocity { row: 1, .. }),
        "{err}"
    );
}

#[test]
fn non_uniform_grid_rejected() {
    let err = read("t,v\n0,0\n1,1\n2.5,2\n").unwrap_err();
    assert!(matches!(err, Error::NonUniformGrid { row: 2, .. }), "{err}");
}

#[test]
fn missing_column_rejected() {
    let err = read("time,v\n0,0\n1,1\n").unwrap_err();
    assert!(matches!(err, Error::MissingColumn(ref c) if c == "t"));
}

#[test]
fn optional_columns_are_read() {
    let c = read("t,v,a,alpha\n0,0,0.5,0.01\n0.5,0.25,0.5,0.02\n").unwrap();
    assert_eq!(c.dt(), 0.5);
    assert_eq!(c.a(), &[0.5, 0.5]);
    assert_eq!(c.alpha(), &[0.01, 0.02]);
}

#[test]
fn single_segment_trapezoid() {
    let c = synthesize_cycle(&[Segment::new(10.0, 10.0, 20.0)], 1.0).unwrap();
    assert_eq!(c.len(), 41);
    assert_eq!(c.v()[0], 0.0);
    assert_eq!(c.v()[10], 10.0);
    assert_eq!(c.v()[30], 10.0);
    assert_eq!(c.v()[40], 0.0);
    assert_abs_diff_eq!(c.a()[0], 1.0);
    assert_abs_diff_eq!(c.a()[35], -1.0);
}

#[test]
fn empty_segment_list_rejected() {
    assert!(matches!(synthesize_cycle(&[], 1.0), Err(Error::EmptyCycle)));
}

#[test]
fn two_segment_trapezoid() {
    let c = synthesize_cycle(
        &[Segment::new(5.0, 5.0, 5.0), Segment::new(15.0, 10.0, 10.0)],
        1.0,
    )
    .unwrap();
    assert_eq!(c.max_speed(), 15.0);
    assert_eq!(c.v()[0], 0.0);
    assert_eq!(*c.v().last().unwrap(), 0.0);
    assert_eq!(c.len(), 1 + 5 + 5 + 10 + 10 + 10);
}

#[test]
fn reference_cycle_is_about_half_an_hour() {
    let c = reference_cycle();
    assert!(
        (1700.0..=1900.0).contains(&c.duration()),
        "{}",
        c.duration()
    );
    assert_abs_diff_eq!(c.max_speed(), 131.0 / 3.6, epsilon = 1e-12);
    assert!(c.a().iter().all(|a| a.abs() < 2.0));
}
