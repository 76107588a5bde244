//! Convex quadratic motor-loss surrogate.
//!
//! Losses are modeled per mechanical-power level as `xᵀ Q_i x` with `Q_i ⪰ 0`
//! and a feature vector of constant, main, interaction and square terms in
//! (speed, rated power, relative length). Between levels the matrices are
//! interpolated linearly, which keeps every interpolated matrix PSD.

mod fit;
mod psd;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use fit::{fit_level, LevelFit, LossSample, MAX_ITERATIONS, N_PARAMS, REL_COST_TOL};
pub use psd::{lower_factor, min_eigenvalue, project_psd, Mat10};

use crate::doe::{DesignSpace, SamplePlan};
use crate::error::{Error, Result};
use crate::oracle::{envelope_point, linspace, MotorDesign, MotorLossOracle, MotorTechSpec};

pub const FEATURE_DIM: usize = 10;

pub type FeatureVector = [f64; FEATURE_DIM];

/// Reference magnitudes dividing speed, rated power and relative length
/// before forming features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub omega: f64,
    pub p_rated: f64,
    pub lambda: f64,
}

impl FeatureScaling {
    pub fn new(spec: &MotorTechSpec, space: &DesignSpace) -> Self {
        Self {
            omega: spec.omega_max,
            p_rated: space.p_rated_max,
            lambda: space.lambda_max,
        }
    }
}

/// `[1, w, p, l, wp, wl, pl, w², p², l²]` with scaled `w, p, l`.
pub fn features(omega: f64, d: &MotorDesign, s: &FeatureScaling) -> FeatureVector {
    let w = omega / s.omega;
    let p = d.p_rated / s.p_rated;
    let l = d.lambda / s.lambda;
    [1.0, w, p, l, w * p, w * l, p * l, w * w, p * p, l * l]
}

#[inline]
pub fn quadratic_form(q: &Mat10, x: &FeatureVector) -> f64 {
    let mut acc = 0.0;
    for a in 0..FEATURE_DIM {
        let mut row = 0.0;
        for b in 0..FEATURE_DIM {
            row += q[(a, b)] * x[b];
        }
        acc += x[a] * row;
    }
    acc
}

fn ser_matrices<S: Serializer>(qs: &[Mat10], s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<[[f64; FEATURE_DIM]; FEATURE_DIM]> = qs
        .iter()
        .map(|q| std::array::from_fn(|i| std::array::from_fn(|j| q[(i, j)])))
        .collect();
    rows.serialize(s)
}

fn de_matrices<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Mat10>, D::Error> {
    let rows: Vec<[[f64; FEATURE_DIM]; FEATURE_DIM]> = Deserialize::deserialize(d)?;
    Ok(rows
        .iter()
        .map(|r| Mat10::from_fn(|i, j| r[i][j]))
        .collect())
}

/// Fitted per-power-level PSD loss model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSurrogate {
    pub spec: MotorTechSpec,
    pub space: DesignSpace,
    pub scaling: FeatureScaling,
    /// Mechanical power levels [W], strictly increasing from zero.
    pub p_levels: Vec<f64>,
    /// One symmetric 10×10 matrix per level, row-major.
    #[serde(serialize_with = "ser_matrices", deserialize_with = "de_matrices")]
    pub q: Vec<Mat10>,
}

impl LossSurrogate {
    pub fn validate(&self) -> Result<()> {
        if self.p_levels.len() < 2 || self.p_levels.len() != self.q.len() {
            return Err(Error::param(
                "p_levels",
                "need at least 2 levels and one matrix per level",
            ));
        }
        if self.p_levels[0] != 0.0 || self.p_levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "p_levels",
                "must start at 0 and increase strictly",
            ));
        }
        for (i, q) in self.q.iter().enumerate() {
            if (q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
                return Err(Error::param("q", format!("level {i} is not symmetric")));
            }
            if min_eigenvalue(q) < -1e-9 * q.amax().max(1.0) {
                return Err(Error::param("q", format!("level {i} is not PSD")));
            }
        }
        Ok(())
    }

    /// Bracketing level index and weight on the upper level for |p_m|.
    fn bracket(&self, p_m: f64) -> (usize, f64) {
        let top = *self.p_levels.last().unwrap();
        let p = p_m.abs().min(top);
        let n = self.p_levels.len();
        let i = match self.p_levels.partition_point(|&l| l <= p) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (lo, hi) = (self.p_levels[i], self.p_levels[i + 1]);
        (i, ((p - lo) / (hi - lo)).clamp(0.0, 1.0))
    }

    /// Element-wise interpolated coefficient matrix at mechanical power `p_m`.
    pub fn interpolated_q(&self, p_m: f64) -> Mat10 {
        let (i, w) = self.bracket(p_m);
        self.q[i] * (1.0 - w) + self.q[i + 1] * w
    }

    pub fn features(&self, omega: f64, d: &MotorDesign) -> FeatureVector {
        features(omega, d, &self.scaling)
    }

    /// Predicted loss [W]; regeneration uses `|p_m|`.
    pub fn predict_loss(&self, omega: f64, d: &MotorDesign, p_m: f64) -> f64 {
        self.predict_with_features(&self.features(omega, d), p_m)
    }

    #[inline]
    pub fn predict_with_features(&self, x: &FeatureVector, p_m: f64) -> f64 {
        let (i, w) = self.bracket(p_m);
        let lo = quadratic_form(&self.q[i], x);
        if w == 0.0 {
            return lo;
        }
        let hi = quadratic_form(&self.q[i + 1], x);
        (1.0 - w) * lo + w * hi
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

/// Root-mean-square error normalized by the range of the reference.
pub fn nrmse(pred: &[f64], reference: &[f64]) -> Result<f64> {
    if pred.len() != reference.len() || pred.is_empty() {
        return Err(Error::LengthMismatch {
            what: "prediction vs reference",
            left: pred.len(),
            right: reference.len(),
        });
    }
    let (lo, hi) = reference
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(r), hi.max(r))
        });
    if !(hi > lo) {
        return Err(Error::ConstantReference);
    }
    let mse = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r).powi(2))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt() / (hi - lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateSettings {
    /// Number of mechanical-power levels.
    pub levels: usize,
    /// Training speeds per design.
    pub n_speed: usize,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        Self {
            levels: 8,
            n_speed: 25,
        }
    }
}

/// Oracle samples for one power level: every plan design at `n_speed`
/// speeds, torque clamped into the envelope.
pub fn level_samples<O: MotorLossOracle + ?Sized>(
    oracle: &O,
    plan: &SamplePlan,
    p_level: f64,
    n_speed: usize,
) -> Result<(Vec<LossSample>, usize)> {
    let spec = oracle.spec();
    let speeds = linspace(spec.omega_eps(), spec.omega_max, n_speed);
    let mut samples = Vec::with_capacity(plan.len() * n_speed);
    let mut clamped = 0;
    for d in &plan.points {
        for &w in &speeds {
            let (w, t, c) = envelope_point(spec, d.p_rated, w, p_level);
            clamped += usize::from(c);
            samples.push(LossSample {
                omega: w,
                design: *d,
                loss: oracle.loss(d, w, t)?,
            });
        }
    }
    Ok((samples, clamped))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub p_level: f64,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub clamped_samples: usize,
}

/// Trains one matrix per power level on oracle samples drawn over the plan.
pub fn fit_surrogate<O: MotorLossOracle + ?Sized>(
    oracle: &O,
    space: &DesignSpace,
    plan: &SamplePlan,
    settings: &SurrogateSettings,
) -> Result<(LossSurrogate, Vec<LevelDiagnostics>)> {
    if settings.levels < 2 {
        return Err(Error::param("levels", "need at least 2 power levels"));
    }
    if settings.n_speed < 10 {
        return Err(Error::param("n_speed", "need at least 10 training speeds"));
    }
    space.validate()?;
    let spec = *oracle.spec();
    let scaling = FeatureScaling::new(&spec, space);
    let p_levels = linspace(0.0, space.p_rated_min, settings.levels);

    let fits: Vec<Result<(Mat10, LevelDiagnostics)>> = p_levels
        .par_iter()
        .enumerate()
        .map(|(level, &p)| {
            let wrap = |e: Error| Error::LevelFit {
                level,
                source: Box::new(e),
            };
            let (samples, clamped) =
                level_samples(oracle, plan, p, settings.n_speed).map_err(wrap)?;
            let fit = fit_level(&samples, &scaling).map_err(wrap)?;
            let diag = LevelDiagnostics {
                p_level: p,
                iterations: fit.iterations,
                initial_cost: fit.cost_history[0],
                final_cost: *fit.cost_history.last().unwrap(),
                clamped_samples: clamped,
            };
            Ok((fit.q, diag))
        })
        .collect();
    let mut q = Vec::with_capacity(fits.len());
    let mut diags = Vec::with_capacity(fits.len());
    for f in fits {
        let (m, d) = f?;
        q.push(m);
        diags.push(d);
    }
    Ok((
        LossSurrogate {
            spec,
            space: *space,
            scaling,
            p_levels,
            q,
        },
        diags,
    ))
}

/// Per-design fit quality of electrical power `P_dc = P_m + P_loss`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFitQuality {
    pub design: MotorDesign,
    pub nrmse_p_dc: f64,
    pub nrmse_loss: f64,
    pub points: usize,
}

/// Compares surrogate and oracle over the envelope of each design: speeds in
/// `[omega_from, omega_max]`, mechanical power in `[0, max(p_levels)]`,
/// operating points above the torque limit skipped.
pub fn fit_quality<O: MotorLossOracle + ?Sized>(
    surrogate: &LossSurrogate,
    oracle: &O,
    designs: &[MotorDesign],
    omega_from: f64,
    n_speed: usize,
    n_power: usize,
) -> Result<Vec<DesignFitQuality>> {
    let spec = oracle.spec();
    let speeds = linspace(omega_from, spec.omega_max, n_speed);
    let powers = linspace(0.0, *surrogate.p_levels.last().unwrap(), n_power);
    designs
        .iter()
        .map(|d| {
            let mut pred = Vec::new();
            let mut reference = Vec::new();
            let mut pred_loss = Vec::new();
            let mut ref_loss = Vec::new();
            for &w in &speeds {
                for &p in &powers {
                    let (w_env, t, clamped) = envelope_point(spec, d.p_rated, w, p);
                    if clamped {
                        continue;
                    }
                    let truth = oracle.loss(d, w_env, t)?;
                    let est = surrogate.predict_loss(w, d, p);
                    pred.push(p + est);
                    reference.push(p + truth);
                    pred_loss.push(est);
                    ref_loss.push(truth);
                }
            }
            Ok(DesignFitQuality {
                design: *d,
                nrmse_p_dc: nrmse(&pred, &reference)?,
                nrmse_loss: nrmse(&pred_loss, &ref_loss)?,
                points: pred.len(),
            })
        })
        .collect()
}
