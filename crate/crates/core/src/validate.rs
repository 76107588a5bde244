//! Re-simulation of an optimized design through a reference loss model and
//! side-by-side efficiency maps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::battery::{integrate_soe_from, BatteryModel};
use crate::designopt::{DesignVector, SolveResult};
use crate::error::{Error, Result};
use crate::oracle::{evaluate_trajectory, linspace, MotorDesign, MotorLossOracle};
use crate::surrogate::{nrmse, LossSurrogate};

/// Loss along a mechanical-power trajectory.
pub trait TrajectoryLossModel {
    /// Per-step loss and the number of steps clamped into the envelope.
    fn trajectory_loss(
        &self,
        d: &MotorDesign,
        omega: &[f64],
        p_m: &[f64],
    ) -> Result<(Vec<f64>, usize)>;
}

impl<O: MotorLossOracle> TrajectoryLossModel for O {
    fn trajectory_loss(
        &self,
        d: &MotorDesign,
        omega: &[f64],
        p_m: &[f64],
    ) -> Result<(Vec<f64>, usize)> {
        let t = evaluate_trajectory(self, d, omega, p_m)?;
        let clamped = t.clamped_count();
        Ok((t.loss, clamped))
    }
}

impl TrajectoryLossModel for LossSurrogate {
    fn trajectory_loss(
        &self,
        d: &MotorDesign,
        omega: &[f64],
        p_m: &[f64],
    ) -> Result<(Vec<f64>, usize)> {
        if omega.len() != p_m.len() {
            return Err(Error::LengthMismatch {
                what: "speed vs mechanical power",
                left: omega.len(),
                right: p_m.len(),
            });
        }
        Ok((
            omega
                .iter()
                .zip(p_m)
                .map(|(&w, &p)| self.predict_loss(w, d, p))
                .collect(),
            0,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub design: DesignVector,
    /// Surrogate-predicted `ΔE_b` [J].
    pub delta_e: f64,
    /// Re-simulated `ΔE_b` [J].
    pub delta_e_val: f64,
    /// `E_b,val(T) − E_b(T)` [J].
    pub final_drift: f64,
    /// `|final_drift| / (E_b(0) − E_b,val(T))`.
    pub final_relative_drift: f64,
    pub max_abs_drift: f64,
    pub clamped_steps: usize,
    /// NRMSE of predicted against re-simulated loss; absent when the
    /// re-simulated loss is constant.
    pub loss_nrmse: Option<f64>,
    pub window_violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub summary: ValidationSummary,
    pub p_loss_val: Vec<f64>,
    pub e_b_val: Vec<f64>,
    /// `E_b,val − E_b` per SOE sample, one longer than the step sequences.
    pub drift: Vec<f64>,
}

impl ValidationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }
}

/// Re-evaluates the solved trajectory with `reference` losses and integrates
/// the battery again.
pub fn validate_design<M: TrajectoryLossModel + ?Sized>(
    result: &SolveResult,
    battery: &BatteryModel,
    p_aux: f64,
    reference: &M,
) -> Result<ValidationReport> {
    let t = &result.trajectory;
    if t.is_empty() {
        return Err(Error::param("result", "solve result carries no trajectory"));
    }
    if t.omega.len() != t.len() || t.p_m.len() != t.len() || t.e_b.len() != t.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "trajectory sequences",
            left: t.len(),
            right: t.omega.len().min(t.p_m.len()),
        });
    }
    let d = result.design.motor();
    let (p_loss_val, clamped) = reference.trajectory_loss(&d, &t.omega, &t.p_m)?;
    let p_dc: Vec<f64> = t.p_m.iter().zip(&p_loss_val).map(|(a, b)| a + b).collect();
    let soe = integrate_soe_from(battery, t.e_b[0], &p_dc, p_aux, t.dt).e_b;
    let drift: Vec<f64> = soe.iter().zip(&t.e_b).map(|(v, e)| v - e).collect();
    let final_drift = *drift.last().unwrap();
    let consumed = t.e_b[0] - soe.last().unwrap();
    let loss_nrmse = match nrmse(&t.p_loss, &p_loss_val) {
        Ok(x) => Some(x),
        Err(Error::ConstantReference) => None,
        Err(e) => return Err(e),
    };
    let summary = ValidationSummary {
        design: result.design,
        delta_e: t.delta_e(),
        delta_e_val: consumed,
        final_drift,
        final_relative_drift: final_drift.abs() / consumed.abs(),
        max_abs_drift: drift.iter().fold(0.0, |m, x| m.max(x.abs())),
        clamped_steps: clamped,
        loss_nrmse,
        window_violated: soe.iter().any(|&e| e < battery.min_energy()),
    };
    Ok(ValidationReport {
        summary,
        p_loss_val,
        e_b_val: soe,
        drift,
    })
}

pub const VALIDATION_EXTRA_HEADER: [&str; 3] = ["P_loss_val_W", "E_b_val_J", "drift_J"];

/// Trajectory CSV extended with the re-simulated loss, SOE and drift.
pub fn write_validation_csv<W: Write>(
    result: &SolveResult,
    report: &ValidationReport,
    writer: W,
) -> Result<()> {
    result
        .trajectory
        .write_csv_with(writer, &VALIDATION_EXTRA_HEADER, |k| {
            vec![report.p_loss_val[k], report.e_b_val[k], report.drift[k]]
        })
}

/// Surrogate and reference loss over a torque–speed grid of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct MapComparison {
    pub design: MotorDesign,
    pub omega_grid: Vec<f64>,
    pub torque_grid: Vec<f64>,
    /// Row-major over (omega, torque); `None` above the torque limit.
    pub surrogate_loss: Vec<Option<f64>>,
    pub reference_loss: Vec<Option<f64>>,
}

pub const MAP_COMPARISON_HEADER: [&str; 8] = [
    "omega_radps",
    "torque_Nm",
    "loss_surrogate_W",
    "loss_reference_W",
    "loss_diff_W",
    "eff_surrogate",
    "eff_reference",
    "eff_diff",
];

fn efficiency(p_m: f64, loss: f64) -> f64 {
    if p_m + loss > 0.0 {
        p_m / (p_m + loss)
    } else {
        0.0
    }
}

pub fn map_comparison<O: MotorLossOracle + ?Sized>(
    surrogate: &LossSurrogate,
    oracle: &O,
    design: &MotorDesign,
    n_omega: usize,
    n_torque: usize,
) -> Result<MapComparison> {
    if n_omega < 2 || n_torque < 2 {
        return Err(Error::param(
            "n_omega",
            "map needs at least 2 points per axis",
        ));
    }
    let spec = oracle.spec();
    let omega_grid = linspace(spec.omega_eps(), spec.omega_max, n_omega);
    let torque_grid = linspace(0.0, spec.rated_torque(design.p_rated), n_torque);
    let mut surrogate_loss = Vec::with_capacity(n_omega * n_torque);
    let mut reference_loss = Vec::with_capacity(n_omega * n_torque);
    for &w in &omega_grid {
        let limit = spec.torque_limit(design.p_rated, w);
        for &t in &torque_grid {
            if t > limit * (1.0 + 1e-12) {
                surrogate_loss.push(None);
                reference_loss.push(None);
                continue;
            }
            surrogate_loss.push(Some(surrogate.predict_loss(w, design, w * t)));
            reference_loss.push(Some(oracle.loss(design, w, t)?));
        }
    }
    Ok(MapComparison {
        design: *design,
        omega_grid,
        torque_grid,
        surrogate_loss,
        reference_loss,
    })
}

impl MapComparison {
    /// Long-format CSV; points above the torque limit are left empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(MAP_COMPARISON_HEADER)?;
        let nt = self.torque_grid.len();
        for (i, &om) in self.omega_grid.iter().enumerate() {
            for (j, &t) in self.torque_grid.iter().enumerate() {
                let k = i * nt + j;
                let mut row = vec![om.to_string(), t.to_string()];
                match (self.surrogate_loss[k], self.reference_loss[k]) {
                    (Some(s), Some(r)) => {
                        let p = om * t;
                        let (es, er) = (efficiency(p, s), efficiency(p, r));
                        row.extend([s, r, s - r, es, er, es - er].iter().map(|x| x.to_string()));
                    }
                    _ => row.extend(std::iter::repeat_n(String::new(), 6)),
                }
                w.write_record(&row)?;
            }
        }
        w.flush().map_err(|e| Error::io("<map csv>", e))?;
        Ok(())
    }

    /// Largest absolute efficiency difference over the envelope.
    pub fn max_efficiency_diff(&self) -> f64 {
        let nt = self.torque_grid.len();
        let mut worst: f64 = 0.0;
        for (k, (s, r)) in self
            .surrogate_loss
            .iter()
            .zip(&self.reference_loss)
            .enumerate()
        {
            if let (Some(s), Some(r)) = (s, r) {
                let p = self.omega_grid[k / nt] * self.torque_grid[k % nt];
                worst = worst.max((efficiency(p, *s) - efficiency(p, *r)).abs());
            }
        }
        worst
    }
}
