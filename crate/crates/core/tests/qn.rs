use powertrain_sizing::designopt::*;

#[test]
fn convex_bowl_interior_minimum() {
    let c = [0.3, -1.2, 4.5];
    let f = |x: &[f64]| {
        1.0 + (x[0] - c[0]).powi(2)
            + 3.0 * (x[1] - c[1]).powi(2)
            + 0.5 * (x[2] - c[2]).powi(2)
            + 0.4 * (x[0] - c[0]) * (x[2] - c[2])
    };
    let lo = [-1.0, -3.0, 0.0];
    let hi = [1.0, 2.0, 10.0];
    let r = minimize_box(&f, &lo, &hi, &[0.9, 1.5, 0.5], &QnOptions::default());
    assert!(r.converged);
    for i in 0..3 {
        assert!((r.x[i] - c[i]).abs() <= 1e-5 * (hi[i] - lo[i]), "{:?}", r.x);
    }
}

#[test]
fn minimum_on_a_face() {
    let f = |x: &[f64]| 10.0 + (x[0] - 2.0).powi(2) + (x[1] - 0.5).powi(2);
    let r = minimize_box(
        &f,
        &[0.0, 0.0],
        &[1.0, 1.0],
        &[0.2, 0.9],
        &QnOptions::default(),
    );
    assert_eq!(r.x[0], 1.0);
    assert!((r.x[1] - 0.5).abs() < 1e-5);
}

#[test]
fn start_on_bound_moves_inside() {
    let f = |x: &[f64]| 1.0 + (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
    let r = minimize_box(
        &f,
        &[0.0, 0.0],
        &[1.0, 1.0],
        &[0.0, 1.0],
        &QnOptions::default(),
    );
    let first = &r.path[1];
    assert!(first[0] > 0.0 && first[0] < 1.0, "{first:?}");
    assert!(first[1] > 0.0 && first[1] < 1.0, "{first:?}");
}

#[test]
fn objective_never_increases_along_path() {
    let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2) + 1.0;
    let r = minimize_box(
        &f,
        &[-2.0, -1.0],
        &[2.0, 3.0],
        &[-1.5, 2.5],
        &QnOptions::default(),
    );
    let vals: Vec<f64> = r.path.iter().map(|x| f(x)).collect();
    assert!(vals.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.f < f(&[-1.5, 2.5]));
}
