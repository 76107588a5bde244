//! Projected quasi-Newton (BFGS) minimization over a box with
//! finite-difference gradients.
//!
//! The problem is solved in unit coordinates `u = (x − lo) / (hi − lo)`.
//! Central differences may evaluate `f` up to one step outside the box, so
//! `f` must be defined in a small neighbourhood of it.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnOptions {
    /// Finite-difference step as a fraction of each axis's box width.
    pub fd_step: f64,
    pub armijo: f64,
    /// Stop when the infinity norm of the projected gradient step of the
    /// scaled objective falls below this.
    pub pg_tol: f64,
    pub max_iter: usize,
}

impl Default for QnOptions {
    fn default() -> Self {
        Self {
            fd_step: 1e-4,
            armijo: 1e-4,
            pg_tol: 1e-6,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QnResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Iterates after each accepted step, starting with the projected start.
    pub path: Vec<Vec<f64>>,
}

struct Scaled<'a, F> {
    f: &'a F,
    lo: &'a [f64],
    width: Vec<f64>,
    evals: usize,
}

impl<F: Fn(&[f64]) -> f64> Scaled<'_, F> {
    fn to_x(&self, u: &DVector<f64>) -> Vec<f64> {
        u.iter()
            .zip(self.lo)
            .zip(&self.width)
            .map(|((u, lo), w)| lo + u * w)
            .collect()
    }

    fn eval(&mut self, u: &DVector<f64>) -> f64 {
        self.evals += 1;
        (self.f)(&self.to_x(u))
    }

    fn gradient(&mut self, u: &DVector<f64>, h: f64) -> DVector<f64> {
        let mut g = DVector::zeros(u.len());
        for i in 0..u.len() {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[i] += h;
            dn[i] -= h;
            g[i] = (self.eval(&up) - self.eval(&dn)) / (2.0 * h);
        }
        g
    }
}

fn project(u: &DVector<f64>) -> DVector<f64> {
    u.map(|v| v.clamp(0.0, 1.0))
}

/// Minimizes `f` over `[lo, hi]` starting from `x0` (projected into the box).
pub fn minimize_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    lo: &[f64],
    hi: &[f64],
    x0: &[f64],
    opts: &QnOptions,
) -> QnResult {
    let n = lo.len();
    assert!(hi.len() == n && x0.len() == n, "dimension mismatch");
    let width: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
    let mut s = Scaled {
        f,
        lo,
        width,
        evals: 0,
    };
    let mut u = project(&DVector::from_iterator(
        n,
        x0.iter()
            .zip(lo)
            .zip(&s.width)
            .map(|((x, l), w)| if *w > 0.0 { (x - l) / w } else { 0.0 }),
    ));
    let mut fu = s.eval(&u);
    let f_scale = fu.abs().max(f64::MIN_POSITIVE);
    let mut g = s.gradient(&u, opts.fd_step) / f_scale;
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut path = vec![s.to_x(&u)];
    let mut iterations = 0;
    let mut converged = false;

    let pg_norm = |u: &DVector<f64>, g: &DVector<f64>| (project(&(u - g)) - u).amax();

    while iterations < opts.max_iter {
        if pg_norm(&u, &g) < opts.pg_tol {
            converged = true;
            break;
        }
        iterations += 1;
        // variables held at a bound by the gradient are fixed this iteration
        let free: Vec<bool> = (0..n)
            .map(|i| !((u[i] <= 0.0 && g[i] > 0.0) || (u[i] >= 1.0 && g[i] < 0.0)))
            .collect();
        let mut d = DVector::zeros(n);
        for i in (0..n).filter(|&i| free[i]) {
            d[i] = -(0..n)
                .filter(|&j| free[j])
                .map(|j| hinv[(i, j)] * g[j])
                .sum::<f64>();
        }
        if g.dot(&d) >= 0.0 {
            hinv = DMatrix::identity(n, n);
            fresh = true;
            d = DVector::from_iterator(n, (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }));
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial = project(&(&u + &d * t));
            let ft = s.eval(&trial);
            let decrease = g.dot(&(&trial - &u)) * f_scale;
            if ft <= fu + opts.armijo * decrease && (&trial - &u).amax() > 0.0 {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((u_new, f_new)) = accepted else {
            if fresh {
                break;
            }
            hinv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };

        let g_new = s.gradient(&u_new, opts.fd_step) / f_scale;
        let step = &u_new - &u;
        let y = &g_new - &g;
        let sy = step.dot(&y);
        if sy > 1e-12 * step.norm() * y.norm() {
            if fresh {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - &step * y.transpose() * rho;
            let right = &eye - &y * step.transpose() * rho;
            hinv = &left * &hinv * &right + &step * step.transpose() * rho;
            fresh = false;
        }
        u = u_new;
        fu = f_new;
        g = g_new;
        path.push(s.to_x(&u));
    }
    if !converged && pg_norm(&u, &g) < opts.pg_tol {
        converged = true;
    }
    QnResult {
        x: s.to_x(&u),
        f: fu,
        iterations,
        evaluations: s.evals,
        converged,
        path,
    }
}
