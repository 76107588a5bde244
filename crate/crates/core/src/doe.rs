//! Sampling plans over the (rated power, relative length) design space.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{linspace, MotorDesign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSpace {
    /// Rated power bounds [W].
    pub p_rated_min: f64,
    pub p_rated_max: f64,
    /// Relative length bounds [-].
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Default for DesignSpace {
    fn default() -> Self {
        Self {
            p_rated_min: 70e3,
            p_rated_max: 150e3,
            lambda_min: 1.0,
            lambda_max: 4.0,
        }
    }
}

impl DesignSpace {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_rated_min > 0.0 && self.p_rated_min < self.p_rated_max) {
            return Err(Error::param(
                "p_rated_min",
                format!(
                    "need 0 < min < max, got [{}, {}]",
                    self.p_rated_min, self.p_rated_max
                ),
            ));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max) {
            return Err(Error::param(
                "lambda_min",
                format!(
                    "need 0 < min < max, got [{}, {}]",
                    self.lambda_min, self.lambda_max
                ),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, d: &MotorDesign) -> bool {
        (self.p_rated_min..=self.p_rated_max).contains(&d.p_rated)
            && (self.lambda_min..=self.lambda_max).contains(&d.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    FullFactorial,
    LatinHypercube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub kind: PlanKind,
    pub seed: Option<u64>,
    pub points: Vec<MotorDesign>,
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV `P_rated_W,lambda`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["P_rated_W", "lambda"])?;
        for d in &self.points {
            w.write_record(&[d.p_rated.to_string(), d.lambda.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<plan csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(
        reader: R,
        kind: PlanKind,
        seed: Option<u64>,
    ) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let points = rdr
            .deserialize::<(f64, f64)>()
            .map(|r| r.map(|(p_rated, lambda)| MotorDesign { p_rated, lambda }))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { kind, seed, points })
    }
}

/// Tensor grid with `levels` equally spaced values per axis, power-major.
pub fn full_factorial(space: &DesignSpace, levels: usize) -> Result<SamplePlan> {
    if levels < 2 {
        return Err(Error::param(
            "levels",
            format!("need at least 2, got {levels}"),
        ));
    }
    space.validate()?;
    let powers = linspace(space.p_rated_min, space.p_rated_max, levels);
    let lambdas = linspace(space.lambda_min, space.lambda_max, levels);
    let points = powers
        .iter()
        .flat_map(|&p| lambdas.iter().map(move |&l| MotorDesign::new(p, l)))
        .collect();
    Ok(SamplePlan {
        kind: PlanKind::FullFactorial,
        seed: None,
        points,
    })
}

/// Stratum-midpoint Latin hypercube: each axis is cut into `n` equal strata
/// and a seeded permutation pairs them up.
pub fn latin_hypercube(space: &DesignSpace, n: usize, seed: u64) -> Result<SamplePlan> {
    if n < 2 {
        return Err(Error::param(
            "n",
            format!("need at least 2 points, got {n}"),
        ));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid = |k: usize, lo: f64, hi: f64| lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
    let mut p_strata: Vec<usize> = (0..n).collect();
    let mut l_strata: Vec<usize> = (0..n).collect();
    p_strata.shuffle(&mut rng);
    l_strata.shuffle(&mut rng);
    let points = p_strata
        .iter()
        .zip(&l_strata)
        .map(|(&i, &j)| {
            MotorDesign::new(
                mid(i, space.p_rated_min, space.p_rated_max),
                mid(j, space.lambda_min, space.lambda_max),
            )
        })
        .collect();
    Ok(SamplePlan {
        kind: PlanKind::LatinHypercube,
        seed: Some(seed),
        points,
    })
}
