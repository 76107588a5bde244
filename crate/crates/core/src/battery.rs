//! Quadratic internal-power battery model and state-of-energy integration.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::linspace;
use crate::surrogate::nrmse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryCoefficients {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

impl BatteryCoefficients {
    #[inline]
    pub fn eval(&self, p_b: f64) -> f64 {
        self.b0 + self.b1 * p_b + self.b2 * p_b * p_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryModel {
    pub coefficients: BatteryCoefficients,
    /// Capacity [J].
    pub e_max: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    /// Battery output power range the fit is valid on [W].
    pub p_b_min: f64,
    pub p_b_max: f64,
}

impl BatteryModel {
    pub fn new(
        coefficients: BatteryCoefficients,
        e_max: f64,
        (zeta_min, zeta_max): (f64, f64),
        (p_b_min, p_b_max): (f64, f64),
    ) -> Result<Self> {
        let m = Self {
            coefficients,
            e_max,
            zeta_min,
            zeta_max,
            p_b_min,
            p_b_max,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.coefficients;
        if c.b2 < 0.0 {
            return Err(Error::param("b2", format!("must be >= 0, got {}", c.b2)));
        }
        if !(self.p_b_min < self.p_b_max) {
            return Err(Error::param("p_b_min", "valid power range is empty"));
        }
        // derivative is affine, so checking both ends covers the range
        let slope = |p: f64| c.b1 + 2.0 * c.b2 * p;
        if !(slope(self.p_b_min) > 0.0 && slope(self.p_b_max) > 0.0) {
            return Err(Error::param(
                "b1",
                "internal power must increase over the valid range",
            ));
        }
        if !(self.e_max > 0.0) {
            return Err(Error::param("e_max", "capacity must be positive"));
        }
        if !(0.0 <= self.zeta_min && self.zeta_min < self.zeta_max && self.zeta_max <= 1.0) {
            return Err(Error::param(
                "zeta_min",
                format!(
                    "need 0 <= zeta_min < zeta_max <= 1, got {} and {}",
                    self.zeta_min, self.zeta_max
                ),
            ));
        }
        Ok(())
    }

    pub fn in_range(&self, p_b: f64) -> bool {
        (self.p_b_min..=self.p_b_max).contains(&p_b)
    }

    /// Internal power [W] for battery output power `p_b`.
    pub fn internal_power(&self, p_b: f64) -> Result<f64> {
        if !self.in_range(p_b) {
            return Err(Error::BatteryRange {
                p_b,
                lo: self.p_b_min,
                hi: self.p_b_max,
            });
        }
        Ok(self.coefficients.eval(p_b))
    }

    pub fn initial_energy(&self) -> f64 {
        self.zeta_max * self.e_max
    }

    pub fn min_energy(&self) -> f64 {
        self.zeta_min * self.e_max
    }
}

/// Result of an ordinary least-squares quadratic fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryFit {
    pub coefficients: BatteryCoefficients,
    pub nrmse: f64,
    pub convexified: bool,
    pub p_b_min: f64,
    pub p_b_max: f64,
}

fn lstsq(cols: usize, samples: &[(f64, f64)]) -> Result<Vec<f64>> {
    let a = DMatrix::from_fn(samples.len(), cols, |i, j| samples[i].0.powi(j as i32));
    let y = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    // column scaling keeps the Vandermonde matrix well conditioned for W-scale inputs
    let scale: Vec<f64> = (0..cols)
        .map(|j| a.column(j).amax().max(f64::MIN_POSITIVE))
        .collect();
    let a_s = DMatrix::from_fn(a.nrows(), cols, |i, j| a[(i, j)] / scale[j]);
    let svd = a_s.svd(true, true);
    let sv = &svd.singular_values;
    if !(sv.min() > 1e-10 * sv.max()) {
        return Err(Error::CollinearSamples);
    }
    let x = svd.solve(&y, 0.0).map_err(|_| Error::CollinearSamples)?;
    Ok((0..cols).map(|j| x[j] / scale[j]).collect())
}

/// Quadratic fit `P_i ≈ b0 + b1 P_b + b2 P_b²`. With `enforce_convex` a
/// negative curvature is replaced by a linear refit.
pub fn fit_battery(samples: &[(f64, f64)], enforce_convex: bool) -> Result<BatteryFit> {
    if samples.len() < 3 {
        return Err(Error::param("samples", "need at least 3 battery samples"));
    }
    let has_charge = samples.iter().any(|s| s.0 < 0.0);
    let has_discharge = samples.iter().any(|s| s.0 > 0.0);
    if !(has_charge && has_discharge) {
        return Err(Error::param(
            "samples",
            "samples must span charge and discharge",
        ));
    }
    let mut b = lstsq(3, samples)?;
    let mut convexified = false;
    if b[2] < 0.0 && enforce_convex {
        b = lstsq(2, samples)?;
        b.push(0.0);
        convexified = true;
    }
    let coefficients = BatteryCoefficients {
        b0: b[0],
        b1: b[1],
        b2: b[2],
    };
    let pred: Vec<f64> = samples.iter().map(|s| coefficients.eval(s.0)).collect();
    let reference: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (p_b_min, p_b_max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.0), hi.max(s.0))
        });
    Ok(BatteryFit {
        coefficients,
        nrmse: nrmse(&pred, &reference)?,
        convexified,
        p_b_min,
        p_b_max,
    })
}

/// Open-circuit voltage and lumped resistance of a cell stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellStack {
    /// Open-circuit voltage [V].
    pub u_oc: f64,
    /// Total internal resistance [Ω].
    pub r_tot: f64,
}

impl Default for CellStack {
    fn default() -> Self {
        Self {
            u_oc: 700.0,
            r_tot: 0.08,
        }
    }
}

impl CellStack {
    /// Internal power `U_oc·I` with `I` solving `U_oc·I − R·I² = P_b`.
    pub fn internal_power(&self, p_b: f64) -> f64 {
        let (u, r) = (self.u_oc, self.r_tot);
        let disc = u * u - 4.0 * r * p_b;
        let current = (u - disc.sqrt()) / (2.0 * r);
        u * current
    }

    pub fn samples(&self, p_min: f64, p_max: f64, n: usize) -> Vec<(f64, f64)> {
        linspace(p_min, p_max, n)
            .into_iter()
            .map(|p| (p, self.internal_power(p)))
            .collect()
    }
}

pub fn write_samples_csv<W: Write>(samples: &[(f64, f64)], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["P_b_W", "P_i_W"])?;
    for (p_b, p_i) in samples {
        w.write_record(&[p_b.to_string(), p_i.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<battery csv>", e))?;
    Ok(())
}

pub fn read_samples_csv<R: std::io::Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr
        .deserialize::<(f64, f64)>()
        .collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoeTrajectory {
    /// State of energy [J], one entry longer than the power sequence.
    pub e_b: Vec<f64>,
    /// Internal power per step [W].
    pub p_i: Vec<f64>,
    pub dt: f64,
    /// `E_b(0) − E_b(T)` [J].
    pub delta_e: f64,
    /// Lowest SOE dropped below `zeta_min · E_max`.
    pub window_violated: bool,
    /// Steps whose battery power fell outside the fitted range.
    pub out_of_range: usize,
}

/// Forward-Euler SOE from a fully charged battery.
pub fn integrate_soe(bm: &BatteryModel, p_dc: &[f64], p_aux: f64, dt: f64) -> SoeTrajectory {
    integrate_soe_from(bm, bm.initial_energy(), p_dc, p_aux, dt)
}

/// Forward-Euler SOE starting at `e0`.
pub fn integrate_soe_from(
    bm: &BatteryModel,
    e0: f64,
    p_dc: &[f64],
    p_aux: f64,
    dt: f64,
) -> SoeTrajectory {
    let mut e_b = Vec::with_capacity(p_dc.len() + 1);
    let mut p_i = Vec::with_capacity(p_dc.len());
    let mut out_of_range = 0;
    let mut e = e0;
    e_b.push(e);
    for &p in p_dc {
        let p_b = p + p_aux;
        out_of_range += usize::from(!bm.in_range(p_b));
        let pi = bm.coefficients.eval(p_b);
        e -= pi * dt;
        p_i.push(pi);
        e_b.push(e);
    }
    let floor = bm.min_energy();
    SoeTrajectory {
        window_violated: e_b.iter().any(|&x| x < floor),
        delta_e: e0 - e,
        e_b,
        p_i,
        dt,
        out_of_range,
    }
}
