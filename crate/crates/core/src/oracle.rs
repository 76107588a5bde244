//! High-fidelity motor loss oracle.
//!
//! [`SyntheticPmsm`] is a closed-form surface-mounted PMSM loss model with
//! copper, iron, windage and constant terms. Everything downstream only talks
//! to the [`MotorLossOracle`] trait, so an analytical or FE tool can be dropped
//! in without touching the surrogate or optimizer.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the maximum speed below which torque is computed at the
/// floor speed instead of dividing by a vanishing omega.
pub const OMEGA_EPS_FRACTION: f64 = 0.02;

pub fn rpm_to_radps(rpm: f64) -> f64 {
    rpm * 2.0 * PI / 60.0
}

/// Fixed motor technology: everything except the design variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotorTechSpec {
    /// Rated voltage [V].
    pub voltage: f64,
    /// Rated speed [rad/s].
    pub omega_rated: f64,
    /// Maximum speed [rad/s].
    pub omega_max: f64,
    pub pole_pairs: u32,
}

impl Default for MotorTechSpec {
    fn default() -> Self {
        Self {
            voltage: 700.0,
            omega_rated: rpm_to_radps(3500.0),
            omega_max: rpm_to_radps(10_000.0),
            pole_pairs: 3,
        }
    }
}

impl MotorTechSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.voltage > 0.0) {
            return Err(Error::param("voltage", "must be positive"));
        }
        if !(self.omega_rated > 0.0 && self.omega_rated < self.omega_max) {
            return Err(Error::param(
                "omega_rated",
                format!(
                    "need 0 < omega_rated < omega_max, got {} and {}",
                    self.omega_rated, self.omega_max
                ),
            ));
        }
        if self.pole_pairs < 1 {
            return Err(Error::param("pole_pairs", "must be at least 1"));
        }
        Ok(())
    }

    pub fn omega_eps(&self) -> f64 {
        OMEGA_EPS_FRACTION * self.omega_max
    }

    /// Rated torque [Nm].
    pub fn rated_torque(&self, p_rated: f64) -> f64 {
        p_rated / self.omega_rated
    }

    /// Constant-torque region up to rated speed, constant power above.
    pub fn torque_limit(&self, p_rated: f64, omega: f64) -> f64 {
        let t_r = self.rated_torque(p_rated);
        if omega > self.omega_rated {
            p_rated / omega
        } else {
            t_r
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorDesign {
    /// Rated power [W].
    pub p_rated: f64,
    /// Relative length [-].
    pub lambda: f64,
}

impl MotorDesign {
    pub fn new(p_rated: f64, lambda: f64) -> Self {
        Self { p_rated, lambda }
    }
}

/// Design + operating point → loss. The single operation a high-fidelity
/// motor tool has to provide.
pub trait MotorLossOracle: Sync {
    fn spec(&self) -> &MotorTechSpec;

    /// Loss [W] at speed `omega` [rad/s] and shaft torque `torque` [Nm].
    fn loss(&self, design: &MotorDesign, omega: f64, torque: f64) -> Result<f64>;
}

/// Closed-form PMSM loss surface.
///
/// With `T_r = P_rated/omega_rated`, `w = omega/omega_rated`, `tau = |T|/T_r`:
///
/// ```text
/// P_loss = 0.025 (1 + 0.45/lambda) P_rated tau^2      copper
///        + 0.012 (1 + 0.05 lambda) P_rated w^1.6      iron
///        + 0.004 P_rated (omega/omega_max)^3          windage
///        + 0.002 P_rated                              constant
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntheticPmsm {
    pub spec: MotorTechSpec,
}

impl SyntheticPmsm {
    pub fn new(spec: MotorTechSpec) -> Self {
        Self { spec }
    }

    /// Loss formula without envelope checks.
    pub fn loss_unchecked(&self, d: &MotorDesign, omega: f64, torque: f64) -> f64 {
        let s = &self.spec;
        let tau = torque.abs() / s.rated_torque(d.p_rated);
        let w = omega / s.omega_rated;
        let copper = 0.025 * (1.0 + 0.45 / d.lambda) * d.p_rated * tau * tau;
        let iron = 0.012 * (1.0 + 0.05 * d.lambda) * d.p_rated * w.powf(1.6);
        let windage = 0.004 * d.p_rated * (omega / s.omega_max).powi(3);
        let constant = 0.002 * d.p_rated;
        copper + iron + windage + constant
    }
}

const ENVELOPE_RTOL: f64 = 1e-12;

impl MotorLossOracle for SyntheticPmsm {
    fn spec(&self) -> &MotorTechSpec {
        &self.spec
    }

    fn loss(&self, d: &MotorDesign, omega: f64, torque: f64) -> Result<f64> {
        let limit = self.spec.torque_limit(d.p_rated, omega);
        let inside = omega >= 0.0
            && omega <= self.spec.omega_max * (1.0 + ENVELOPE_RTOL)
            && torque.abs() <= limit * (1.0 + ENVELOPE_RTOL);
        if !inside {
            return Err(Error::OutsideEnvelope {
                omega,
                torque,
                limit,
            });
        }
        Ok(self.loss_unchecked(d, omega, torque))
    }
}

/// Convenience wrapper over [`SyntheticPmsm`].
pub fn oracle_loss(spec: &MotorTechSpec, d: &MotorDesign, omega: f64, torque: f64) -> Result<f64> {
    SyntheticPmsm::new(*spec).loss(d, omega, torque)
}

/// Torque at an operating point given mechanical power, clamped into the
/// envelope. Returns `(omega, torque, clamped)` where `omega` is limited to
/// `[0, omega_max]`.
pub fn envelope_point(
    spec: &MotorTechSpec,
    p_rated: f64,
    omega: f64,
    p_m: f64,
) -> (f64, f64, bool) {
    let mut clamped = false;
    let mut w = omega;
    if w > spec.omega_max {
        w = spec.omega_max;
        clamped = true;
    }
    if w < 0.0 {
        w = 0.0;
        clamped = true;
    }
    let w_eff = w.max(spec.omega_eps());
    if w < spec.omega_eps() && p_m != 0.0 {
        clamped = true;
    }
    let mut torque = p_m / w_eff;
    let limit = spec.torque_limit(p_rated, w);
    if torque.abs() > limit {
        torque = limit.copysign(torque);
        clamped = true;
    }
    (w, torque, clamped)
}

/// Oracle losses along a speed / mechanical-power trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLoss {
    pub loss: Vec<f64>,
    pub clamped: Vec<bool>,
}

impl TrajectoryLoss {
    pub fn clamped_count(&self) -> usize {
        self.clamped.iter().filter(|&&c| c).count()
    }
}

pub fn evaluate_trajectory<O: MotorLossOracle + ?Sized>(
    oracle: &O,
    d: &MotorDesign,
    omega: &[f64],
    p_m: &[f64],
) -> Result<TrajectoryLoss> {
    if omega.len() != p_m.len() {
        return Err(Error::LengthMismatch {
            what: "speed vs mechanical power",
            left: omega.len(),
            right: p_m.len(),
        });
    }
    let spec = oracle.spec();
    let mut loss = Vec::with_capacity(omega.len());
    let mut clamped = Vec::with_capacity(omega.len());
    for (&w, &p) in omega.iter().zip(p_m) {
        let (w, t, c) = envelope_point(spec, d.p_rated, w, p);
        loss.push(oracle.loss(d, w, t)?);
        clamped.push(c);
    }
    Ok(TrajectoryLoss { loss, clamped })
}

/// Loss over a speed × torque grid. Cells above the torque limit are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMap {
    pub design: MotorDesign,
    pub omega_grid: Vec<f64>,
    pub torque_grid: Vec<f64>,
    /// Row-major: `loss[i * torque_grid.len() + j]` at `(omega_grid[i], torque_grid[j])`.
    #[serde(skip)]
    pub loss: Vec<Option<f64>>,
    pub torque_limit: Vec<f64>,
}

impl EfficiencyMap {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.loss[i * self.torque_grid.len() + j]
    }

    /// `P_m / (P_m + P_loss)` for motoring cells with positive output.
    pub fn efficiency(&self, i: usize, j: usize) -> Option<f64> {
        let p_m = self.omega_grid[i] * self.torque_grid[j];
        match self.get(i, j) {
            Some(loss) if p_m > 0.0 => Some(p_m / (p_m + loss)),
            _ => None,
        }
    }

    pub fn max_efficiency(&self) -> Option<f64> {
        (0..self.omega_grid.len())
            .flat_map(|i| (0..self.torque_grid.len()).map(move |j| (i, j)))
            .filter_map(|(i, j)| self.efficiency(i, j))
            .reduce(f64::max)
    }

    /// CSV with header `omega_radps,torque_Nm,loss_W,feasible`; masked cells
    /// have an empty loss field.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["omega_radps", "torque_Nm", "loss_W", "feasible"])?;
        for (i, omega) in self.omega_grid.iter().enumerate() {
            for (j, torque) in self.torque_grid.iter().enumerate() {
                let cell = self.get(i, j);
                w.write_record(&[
                    omega.to_string(),
                    torque.to_string(),
                    cell.map(|x| x.to_string()).unwrap_or_default(),
                    u8::from(cell.is_some()).to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<map csv>", e))?;
        Ok(())
    }
}

/// JSON sidecar written next to a map CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSidecar {
    pub spec: MotorTechSpec,
    pub design: MotorDesign,
    pub omega_grid: Vec<f64>,
    pub torque_grid: Vec<f64>,
    pub torque_limit: Vec<f64>,
}

impl MapSidecar {
    pub fn new(spec: &MotorTechSpec, map: &EfficiencyMap) -> Self {
        Self {
            spec: *spec,
            design: map.design,
            omega_grid: map.omega_grid.clone(),
            torque_grid: map.torque_grid.clone(),
            torque_limit: map.torque_limit.clone(),
        }
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Loss map over `[omega_eps, omega_max] × [0, T_rated]`.
pub fn generate_map<O: MotorLossOracle + ?Sized>(
    oracle: &O,
    d: &MotorDesign,
    n_omega: usize,
    n_torque: usize,
) -> Result<EfficiencyMap> {
    if n_omega < 2 || n_torque < 2 {
        return Err(Error::param(
            "n_omega/n_torque",
            "map needs at least 2 points per axis",
        ));
    }
    let spec = oracle.spec();
    let omega_grid = linspace(spec.omega_eps(), spec.omega_max, n_omega);
    let torque_grid = linspace(0.0, spec.rated_torque(d.p_rated), n_torque);
    let torque_limit: Vec<f64> = omega_grid
        .iter()
        .map(|&w| spec.torque_limit(d.p_rated, w))
        .collect();
    let mut loss = Vec::with_capacity(n_omega * n_torque);
    for (i, &w) in omega_grid.iter().enumerate() {
        for &t in &torque_grid {
            if t <= torque_limit[i] * (1.0 + ENVELOPE_RTOL) {
                loss.push(Some(oracle.loss(d, w, t)?));
            } else {
                loss.push(None);
            }
        }
    }
    Ok(EfficiencyMap {
        design: *d,
        omega_grid,
        torque_grid,
        loss,
        torque_limit,
    })
}
