//! Least squares over the PSD cone for a single power level.
//!
//! Minimizes `Σ (xᵀ Q x − y)²` subject to `Q ⪰ 0` by writing `Q = L Lᵀ` with
//! lower-triangular `L` and running Levenberg–Marquardt damped Gauss–Newton
//! on the 55 entries of `L`. The start is the PSD projection of the
//! minimum-norm unconstrained solution.

use nalgebra::{DMatrix, DVector};

use super::psd::{lower_factor, project_psd, Mat10};
use super::{features, quadratic_form as quad, FeatureScaling, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::oracle::MotorDesign;

/// Number of free entries of a symmetric (or lower-triangular) 10×10 matrix.
pub const N_PARAMS: usize = FEATURE_DIM * (FEATURE_DIM + 1) / 2;

pub const MAX_ITERATIONS: usize = 500;
pub const REL_COST_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-10;
/// Relative ridge added before factoring the start point so that no column
/// of `L` starts identically zero (a zero column has zero Jacobian).
const START_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub omega: f64,
    pub design: MotorDesign,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelFit {
    pub q: Mat10,
    /// Cost after every accepted step, starting with the initial point.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Index pairs `(a, b)` with `a >= b`, row by row.
fn lower_pairs() -> impl Iterator<Item = (usize, usize)> {
    (0..FEATURE_DIM).flat_map(|a| (0..=a).map(move |b| (a, b)))
}

fn check_design(
    samples: &[LossSample],
    scaling: &FeatureScaling,
) -> Result<Vec<[f64; FEATURE_DIM]>> {
    if samples.len() < N_PARAMS {
        return Err(Error::RankDeficient(format!(
            "{} samples, need at least {N_PARAMS}",
            samples.len()
        )));
    }
    let axes = [
        ("omega", distinct(samples.iter().map(|s| s.omega))),
        (
            "P_rated",
            distinct(samples.iter().map(|s| s.design.p_rated)),
        ),
        ("lambda", distinct(samples.iter().map(|s| s.design.lambda))),
    ];
    for (name, n) in axes {
        if n < 2 {
            return Err(Error::RankDeficient(format!(
                "only {n} distinct value(s) of {name}"
            )));
        }
    }
    let xs: Vec<[f64; FEATURE_DIM]> = samples
        .iter()
        .map(|s| features(s.omega, &s.design, scaling))
        .collect();
    let x = DMatrix::from_fn(xs.len(), FEATURE_DIM, |i, j| xs[i][j]);
    let sv = x.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if !(lo > PIVOT_TOL * hi) {
        return Err(Error::RankDeficient(format!(
            "feature matrix condition {:.3e} below pivot tolerance",
            lo / hi
        )));
    }
    Ok(xs)
}

fn cost_of(q: &Mat10, xs: &[[f64; FEATURE_DIM]], y: &[f64]) -> f64 {
    xs.iter()
        .zip(y)
        .map(|(x, &t)| (quad(q, x) - t).powi(2))
        .sum()
}

/// Minimum-norm least squares over the symmetric parameterization.
fn unconstrained_start(xs: &[[f64; FEATURE_DIM]], y: &[f64]) -> Result<Mat10> {
    let pairs: Vec<(usize, usize)> = lower_pairs().collect();
    let a = DMatrix::from_fn(xs.len(), N_PARAMS, |i, k| {
        let (p, r) = pairs[k];
        let f = if p == r { 1.0 } else { 2.0 };
        f * xs[i][p] * xs[i][r]
    });
    let svd = a.svd(true, true);
    let tol = PIVOT_TOL * svd.singular_values.max();
    let sol = svd
        .solve(&DVector::from_column_slice(y), tol)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    let mut q = Mat10::zeros();
    for (k, &(p, r)) in pairs.iter().enumerate() {
        q[(p, r)] = sol[k];
        q[(r, p)] = sol[k];
    }
    Ok(q)
}

struct GaussNewton<'a> {
    xs: &'a [[f64; FEATURE_DIM]],
    y: &'a [f64],
}

impl GaussNewton<'_> {
    fn unpack(theta: &DVector<f64>) -> Mat10 {
        let mut l = Mat10::zeros();
        for (k, (a, b)) in lower_pairs().enumerate() {
            l[(a, b)] = theta[k];
        }
        l
    }

    fn cost(&self, l: &Mat10) -> f64 {
        cost_of(&(l * l.transpose()), self.xs, self.y)
    }

    /// Residuals and Jacobian with respect to the packed entries of `L`.
    fn linearize(&self, l: &Mat10) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.xs.len();
        let mut r = DVector::zeros(n);
        let mut j = DMatrix::zeros(n, N_PARAMS);
        for (i, x) in self.xs.iter().enumerate() {
            // z = Lᵀ x
            let mut z = [0.0; FEATURE_DIM];
            for (b, zb) in z.iter_mut().enumerate() {
                *zb = (b..FEATURE_DIM).map(|a| l[(a, b)] * x[a]).sum();
            }
            r[i] = z.iter().map(|v| v * v).sum::<f64>() - self.y[i];
            for (k, (a, b)) in lower_pairs().enumerate() {
                j[(i, k)] = 2.0 * x[a] * z[b];
            }
        }
        (r, j)
    }

    fn run(&self, start: &Mat10) -> (Mat10, Vec<f64>, usize) {
        let mut theta = DVector::from_iterator(N_PARAMS, lower_pairs().map(|(a, b)| start[(a, b)]));
        let mut l = Self::unpack(&theta);
        let mut cost = self.cost(&l);
        let mut history = vec![cost];
        let mut mu: Option<f64> = None;
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS && cost > 0.0 {
            iterations += 1;
            let (r, j) = self.linearize(&l);
            let jtj = j.transpose() * &j;
            let g = j.transpose() * r;
            let damping =
                mu.get_or_insert_with(|| 1e-3 * jtj.diagonal().max().max(f64::MIN_POSITIVE));
            let mut accepted = None;
            for _ in 0..40 {
                let mut h = jtj.clone();
                for d in 0..N_PARAMS {
                    h[(d, d)] += *damping;
                }
                let step = match h.cholesky() {
                    Some(ch) => ch.solve(&g),
                    None => {
                        *damping *= 4.0;
                        continue;
                    }
                };
                let trial = &theta - step;
                let tl = Self::unpack(&trial);
                let tc = self.cost(&tl);
                if tc < cost {
                    *damping = (*damping / 3.0).max(1e-15);
                    accepted = Some((trial, tl, tc));
                    break;
                }
                *damping *= 4.0;
            }
            let Some((t, tl, tc)) = accepted else { break };
            let rel = (cost - tc) / cost;
            theta = t;
            l = tl;
            cost = tc;
            history.push(cost);
            if rel < REL_COST_TOL {
                break;
            }
        }
        (l, history, iterations)
    }
}

/// Fits one PSD coefficient matrix to loss samples.
pub fn fit_level(samples: &[LossSample], scaling: &FeatureScaling) -> Result<LevelFit> {
    let xs = check_design(samples, scaling)?;
    let y_scale = samples.iter().map(|s| s.loss.abs()).fold(0.0, f64::max);
    if y_scale == 0.0 {
        return Ok(LevelFit {
            q: Mat10::zeros(),
            cost_history: vec![0.0],
            iterations: 0,
        });
    }
    let y: Vec<f64> = samples.iter().map(|s| s.loss / y_scale).collect();

    let q_ls = unconstrained_start(&xs, &y)?;
    let q0 = project_psd(&q_ls)?;
    let ridge = START_RIDGE * (q0.trace() / FEATURE_DIM as f64).max(1.0);
    let l0 = lower_factor(&(q0 + Mat10::identity() * ridge))?;
    let gn = GaussNewton { xs: &xs, y: &y };
    let (l, mut history, iterations) = gn.run(&l0);

    let q0_cost = cost_of(&q0, &xs, &y);
    let q_gn = project_psd(&(l * l.transpose()))?;
    let gn_cost = cost_of(&q_gn, &xs, &y);
    let q = if gn_cost <= q0_cost { q_gn } else { q0 };
    for c in &mut history {
        *c *= y_scale * y_scale;
    }
    Ok(LevelFit {
        q: q * y_scale,
        cost_history: history,
        iterations,
    })
}
