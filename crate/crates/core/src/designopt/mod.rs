//! Minimum battery-energy design of motor rating, relative length and
//! fixed gear ratio over a drive cycle.
//!
//! The loss and battery relaxations are tight at the optimum, so they are
//! evaluated at equality and the state trajectory is eliminated: a design
//! maps deterministically to `ΔE_b` through
//! `P_m → P_loss → P_dc → P_b → P_i → E_b`.

mod qn;
mod search;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use qn::{minimize_box, QnOptions, QnResult};
pub use search::{
    grid_search, local_solve, local_solve_with, solve, Diagnostics, GridDiagnostics,
    GridResolution, LocalDiagnostics, SolveResult, SolverConfig,
};

use crate::battery::{integrate_soe, BatteryModel, SoeTrajectory};
use crate::cycle::DriveCycle;
use crate::error::{Error, Result};
use crate::oracle::{MotorDesign, MotorTechSpec};
use crate::surrogate::LossSurrogate;
use crate::vehicle::{motor_mech_power, wheel_power, VehicleParams};

/// Samples slower than this skip the per-sample torque constraints, whose
/// right-hand side `P_req·r_w/v` is singular at standstill.
pub const TORQUE_CHECK_MIN_SPEED: f64 = 0.5;

/// Margins within this distance of zero are reported as active.
const ACTIVE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignVector {
    pub p_rated: f64,
    pub lambda: f64,
    pub gamma_fgt: f64,
}

impl DesignVector {
    pub fn new(p_rated: f64, lambda: f64, gamma_fgt: f64) -> Self {
        Self {
            p_rated,
            lambda,
            gamma_fgt,
        }
    }

    pub fn motor(&self) -> MotorDesign {
        MotorDesign::new(self.p_rated, self.lambda)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.p_rated, self.lambda, self.gamma_fgt]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self::new(x[0], x[1], x[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignBox {
    pub p_rated_min: f64,
    pub p_rated_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl Default for DesignBox {
    fn default() -> Self {
        Self {
            p_rated_min: 70e3,
            p_rated_max: 150e3,
            lambda_min: 1.0,
            lambda_max: 4.0,
            gamma_min: 1.0,
            gamma_max: 10.0,
        }
    }
}

impl DesignBox {
    pub fn lo(&self) -> [f64; 3] {
        [self.p_rated_min, self.lambda_min, self.gamma_min]
    }

    pub fn hi(&self) -> [f64; 3] {
        [self.p_rated_max, self.lambda_max, self.gamma_max]
    }

    pub fn width(&self) -> [f64; 3] {
        let (lo, hi) = (self.lo(), self.hi());
        [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]]
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.lo(), self.hi());
        for (k, name) in ["p_rated_min", "lambda_min", "gamma_min"]
            .into_iter()
            .enumerate()
        {
            if !(lo[k] > 0.0 && lo[k] < hi[k]) {
                return Err(Error::param(
                    name,
                    format!("need 0 < min < max, got [{}, {}]", lo[k], hi[k]),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &DesignVector) -> bool {
        let (lo, hi) = (self.lo(), self.hi());
        p.to_array()
            .iter()
            .enumerate()
            .all(|(k, x)| (lo[k]..=hi[k]).contains(x))
    }
}

/// Performance requirements enforced as design constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Requirements {
    /// Top speed [m/s].
    pub v_max: f64,
    /// Steepest grade to launch on [rad].
    pub alpha_max: f64,
}

impl Default for Requirements {
    fn default() -> Self {
        Self {
            v_max: 160.0 / 3.6,
            alpha_max: 20f64.to_radians(),
        }
    }
}

/// Motor speed along the cycle for one gear ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedTrace {
    pub omega: Vec<f64>,
    /// First sample above the motor's maximum speed.
    pub overspeed_at: Option<usize>,
}

pub fn motor_speed(
    cycle: &DriveCycle,
    vp: &VehicleParams,
    gamma_fgt: f64,
    omega_max: f64,
) -> SpeedTrace {
    let k = gamma_fgt * vp.gamma_fd / vp.r_w;
    let omega: Vec<f64> = cycle.v().iter().map(|v| k * v).collect();
    let overspeed_at = omega.iter().position(|&w| w > omega_max);
    SpeedTrace {
        omega,
        overspeed_at,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMargin {
    pub name: String,
    /// Relative slack; negative means violated.
    pub margin: f64,
    pub active: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub constraints: Vec<ConstraintMargin>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.constraints.iter().all(|c| c.margin >= 0.0)
    }

    /// Feasible up to `tol` in relative units.
    pub fn feasible_within(&self, tol: f64) -> bool {
        self.constraints.iter().all(|c| c.margin >= -tol)
    }

    pub fn first_violation(&self) -> Option<&ConstraintMargin> {
        self.constraints.iter().find(|c| c.margin < 0.0)
    }

    pub fn get(&self, name: &str) -> Option<&ConstraintMargin> {
        self.constraints.iter().find(|c| c.name == name)
    }

    pub fn active(&self) -> Vec<String> {
        self.constraints
            .iter()
            .filter(|c| c.active)
            .map(|c| c.name.clone())
            .collect()
    }

    fn push(&mut self, name: &str, margin: f64, detail: String) {
        self.constraints.push(ConstraintMargin {
            name: name.to_string(),
            margin,
            active: margin.abs() <= ACTIVE_TOL,
            detail,
        });
    }
}

/// Design-independent limits derived from the cycle, vehicle and motor
/// technology. Every structural constraint is either a bound on one design
/// variable or of the form `gamma_fgt · P_rated >= c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralLimits {
    /// Gear ratio at which the motor reaches its maximum speed at `v_max`.
    pub gamma_top_speed: f64,
    /// Same for the fastest cycle sample.
    pub gamma_cycle_overspeed: f64,
    /// Largest positive mechanical motor power on the cycle [W].
    pub p_m_peak: f64,
    /// `gamma · P_rated` needed to launch on the steepest grade [W].
    pub launch_product: f64,
    /// `gamma · P_rated` needed for the worst motoring torque sample [W].
    pub motoring_product: f64,
    /// `gamma · P_rated` needed for the strongest braking sample [W].
    pub regen_product: f64,
}

impl StructuralLimits {
    fn required_product(&self) -> f64 {
        self.launch_product
            .max(self.motoring_product)
            .max(self.regen_product)
    }
}

#[derive(Debug, Clone)]
pub struct DesignProblem {
    cycle: DriveCycle,
    vehicle: VehicleParams,
    spec: MotorTechSpec,
    surrogate: LossSurrogate,
    battery: BatteryModel,
    requirements: Requirements,
    bounds: DesignBox,
    p_req: Vec<f64>,
    limits: StructuralLimits,
}

impl DesignProblem {
    pub fn new(
        cycle: DriveCycle,
        vehicle: VehicleParams,
        surrogate: LossSurrogate,
        battery: BatteryModel,
        requirements: Requirements,
        bounds: DesignBox,
    ) -> Result<Self> {
        vehicle.validate()?;
        bounds.validate()?;
        surrogate.validate()?;
        battery.validate()?;
        let spec = surrogate.spec;
        spec.validate()?;
        let space = &surrogate.space;
        if bounds.p_rated_min < space.p_rated_min
            || bounds.p_rated_max > space.p_rated_max
            || bounds.lambda_min < space.lambda_min
            || bounds.lambda_max > space.lambda_max
        {
            return Err(Error::param(
                "bounds",
                "design box must lie inside the surrogate's design space",
            ));
        }
        if !(requirements.v_max > 0.0)
            || !(requirements.alpha_max >= 0.0
                && requirements.alpha_max < std::f64::consts::FRAC_PI_2)
        {
            return Err(Error::param(
                "requirements",
                "need v_max > 0 and 0 <= alpha_max < pi/2",
            ));
        }

        let p_req = wheel_power(&cycle, &vehicle);
        let eta = vehicle.eta_t;
        let wheel_to_motor = vehicle.r_w / vehicle.gamma_fd;
        let (torque_rhs_min, torque_rhs_max) = cycle
            .v()
            .iter()
            .zip(&p_req)
            .filter(|(v, _)| **v >= TORQUE_CHECK_MIN_SPEED)
            .map(|(v, p)| p * vehicle.r_w / v)
            .fold((0.0f64, 0.0f64), |(lo, hi), t| (lo.min(t), hi.max(t)));
        let limits = StructuralLimits {
            gamma_top_speed: spec.omega_max * wheel_to_motor / requirements.v_max,
            gamma_cycle_overspeed: if cycle.max_speed() > 0.0 {
                spec.omega_max * wheel_to_motor / cycle.max_speed()
            } else {
                f64::INFINITY
            },
            p_m_peak: p_req.iter().copied().fold(0.0, f64::max) / eta,
            launch_product: vehicle.m_v
                * vehicle.g
                * vehicle.r_w
                * requirements.alpha_max.sin()
                * spec.omega_rated
                / (eta * vehicle.gamma_fd),
            motoring_product: torque_rhs_max * spec.omega_rated / (eta * vehicle.gamma_fd),
            regen_product: -torque_rhs_min * spec.omega_rated * eta / vehicle.gamma_fd,
        };
        Ok(Self {
            cycle,
            vehicle,
            spec,
            surrogate,
            battery,
            requirements,
            bounds,
            p_req,
            limits,
        })
    }

    pub fn cycle(&self) -> &DriveCycle {
        &self.cycle
    }

    pub fn vehicle(&self) -> &VehicleParams {
        &self.vehicle
    }

    pub fn spec(&self) -> &MotorTechSpec {
        &self.spec
    }

    pub fn surrogate(&self) -> &LossSurrogate {
        &self.surrogate
    }

    pub fn battery(&self) -> &BatteryModel {
        &self.battery
    }

    pub fn requirements(&self) -> &Requirements {
        &self.requirements
    }

    pub fn bounds(&self) -> &DesignBox {
        &self.bounds
    }

    pub fn wheel_power(&self) -> &[f64] {
        &self.p_req
    }

    pub fn limits(&self) -> &StructuralLimits {
        &self.limits
    }

    /// Same problem with a different design box.
    pub fn with_bounds(&self, bounds: DesignBox) -> Result<Self> {
        Self::new(
            self.cycle.clone(),
            self.vehicle,
            self.surrogate.clone(),
            self.battery,
            self.requirements,
            bounds,
        )
    }

    /// Gradeability requirement on the gear ratio for a given rating.
    pub fn gamma_launch_min(&self, p_rated: f64) -> f64 {
        self.limits.launch_product / p_rated
    }

    /// Highest admissible gear ratio.
    pub fn gamma_upper(&self) -> f64 {
        self.bounds
            .gamma_max
            .min(self.limits.gamma_top_speed)
            .min(self.limits.gamma_cycle_overspeed)
    }

    /// Lowest admissible gear ratio for rating `p_rated`.
    pub fn gamma_lower(&self, p_rated: f64) -> f64 {
        self.bounds
            .gamma_min
            .max(self.limits.required_product() / p_rated)
    }

    /// Lowest admissible rating.
    pub fn p_rated_lower(&self) -> f64 {
        self.bounds
            .p_rated_min
            .max(self.limits.p_m_peak)
            .max(self.limits.required_product() / self.gamma_upper())
    }

    /// Errors with the first structural constraint that empties the feasible
    /// set, if any.
    pub fn check_structure(&self) -> Result<()> {
        let l = &self.limits;
        let b = &self.bounds;
        let empty = |c: &str| {
            Err(Error::EmptyFeasibleSet {
                constraint: c.to_string(),
            })
        };
        if l.gamma_top_speed < b.gamma_min {
            return empty("top_speed");
        }
        if l.gamma_cycle_overspeed < b.gamma_min {
            return empty("cycle_overspeed");
        }
        if l.p_m_peak > b.p_rated_max {
            return empty("power_adequacy");
        }
        let g_hi = self.gamma_upper();
        let worst = [
            ("gradeability", l.launch_product),
            ("torque_motoring", l.motoring_product),
            ("torque_regenerating", l.regen_product),
        ];
        if let Some((name, _)) = worst.iter().find(|(_, c)| c / g_hi > b.p_rated_max) {
            return empty(name);
        }
        Ok(())
    }

    /// Constraint margins that do not need the battery simulation.
    pub fn structural_report(&self, p: &DesignVector) -> FeasibilityReport {
        let l = &self.limits;
        let b = &self.bounds;
        let mut r = FeasibilityReport {
            constraints: Vec::with_capacity(8),
        };
        let (lo, hi, w) = (b.lo(), b.hi(), b.width());
        let x = p.to_array();
        let box_margin = (0..3)
            .map(|k| ((x[k] - lo[k]) / w[k]).min((hi[k] - x[k]) / w[k]))
            .fold(f64::INFINITY, f64::min);
        r.push("box", box_margin, format!("{x:?} in [{lo:?}, {hi:?}]"));
        r.push(
            "top_speed",
            (l.gamma_top_speed - p.gamma_fgt) / l.gamma_top_speed,
            format!("gamma_fgt <= {:.4}", l.gamma_top_speed),
        );
        if l.gamma_cycle_overspeed.is_finite() {
            r.push(
                "cycle_overspeed",
                (l.gamma_cycle_overspeed - p.gamma_fgt) / l.gamma_cycle_overspeed,
                format!("gamma_fgt <= {:.4}", l.gamma_cycle_overspeed),
            );
        }
        let launch = self.gamma_launch_min(p.p_rated);
        r.push(
            "gradeability",
            (p.gamma_fgt - launch) / launch,
            format!("gamma_fgt >= {launch:.4}"),
        );
        r.push(
            "power_adequacy",
            (p.p_rated - l.p_m_peak) / p.p_rated,
            format!("P_rated >= {:.1} W", l.p_m_peak),
        );
        let product = p.gamma_fgt * p.p_rated;
        for (name, need) in [
            ("torque_motoring", l.motoring_product),
            ("torque_regenerating", l.regen_product),
        ] {
            let margin = if need > 0.0 {
                (product - need) / need
            } else {
                1.0
            };
            r.push(name, margin, format!("gamma_fgt * P_rated >= {need:.1} W"));
        }
        r
    }

    /// Full constraint report including the state-of-charge window.
    pub fn check_feasible(&self, p: &DesignVector) -> FeasibilityReport {
        let eval = self.evaluate(p);
        eval.feasibility
    }

    fn soc_margin(&self, e_lowest: f64) -> f64 {
        (e_lowest - self.battery.min_energy()) / self.battery.e_max
    }

    /// `ΔE_b` and the lowest SOE without storing trajectories. Performs the
    /// same floating-point operations as [`DesignProblem::evaluate`].
    pub fn energy(&self, p: &DesignVector) -> (f64, f64) {
        let d = p.motor();
        let k = p.gamma_fgt * self.vehicle.gamma_fd / self.vehicle.r_w;
        let coeffs = &self.battery.coefficients;
        let dt = self.cycle.dt();
        let e0 = self.battery.initial_energy();
        let mut e = e0;
        let mut lowest = e;
        for (v, &preq) in self.cycle.v().iter().zip(&self.p_req) {
            let omega = k * v;
            let p_m = self.vehicle.motor_power_at(preq, p.p_rated);
            let loss = self.surrogate.predict_loss(omega, &d, p_m);
            let p_dc = p_m + loss;
            e -= coeffs.eval(p_dc + self.vehicle.p_aux) * dt;
            lowest = lowest.min(e);
        }
        (e0 - e, lowest)
    }

    /// Objective with all intermediate trajectories.
    pub fn evaluate(&self, p: &DesignVector) -> Evaluation {
        let d = p.motor();
        let p_m = motor_mech_power(&self.p_req, &self.vehicle, p.p_rated);
        let speed = motor_speed(&self.cycle, &self.vehicle, p.gamma_fgt, self.spec.omega_max);
        let p_loss: Vec<f64> = speed
            .omega
            .iter()
            .zip(&p_m)
            .map(|(&w, &pm)| self.surrogate.predict_loss(w, &d, pm))
            .collect();
        let p_dc: Vec<f64> = p_m.iter().zip(&p_loss).map(|(a, b)| a + b).collect();
        let soe = integrate_soe(&self.battery, &p_dc, self.vehicle.p_aux, self.cycle.dt());
        let mut feasibility = self.structural_report(p);
        let lowest = soe.e_b.iter().copied().fold(f64::INFINITY, f64::min);
        feasibility.push(
            "soc_window",
            self.soc_margin(lowest),
            format!("E_b >= {:.0} J", self.battery.min_energy()),
        );
        Evaluation {
            design: *p,
            delta_e: soe.delta_e,
            omega: speed.omega,
            p_m,
            p_loss,
            p_dc,
            soe,
            feasibility,
        }
    }
}

/// Objective value added to infeasible designs by [`Evaluation::penalized`].
pub const INFEASIBLE_PENALTY: f64 = 1e15;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub design: DesignVector,
    /// `E_b(0) − E_b(T)` [J].
    pub delta_e: f64,
    pub omega: Vec<f64>,
    pub p_m: Vec<f64>,
    pub p_loss: Vec<f64>,
    pub p_dc: Vec<f64>,
    pub soe: SoeTrajectory,
    pub feasibility: FeasibilityReport,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.feasibility.feasible()
    }

    /// `delta_e` for feasible designs, a large penalty otherwise.
    pub fn penalized(&self) -> f64 {
        if self.feasible() {
            self.delta_e
        } else {
            INFEASIBLE_PENALTY + self.delta_e.abs()
        }
    }
}

/// Battery-energy objective for design `p`.
pub fn objective(p: &DesignVector, prob: &DesignProblem) -> Evaluation {
    prob.evaluate(p)
}

pub fn check_feasible(p: &DesignVector, prob: &DesignProblem) -> FeasibilityReport {
    prob.check_feasible(p)
}

/// Per-step trajectories of a solved design.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub dt: f64,
    pub v: Vec<f64>,
    pub omega: Vec<f64>,
    pub p_m: Vec<f64>,
    pub p_loss: Vec<f64>,
    pub p_dc: Vec<f64>,
    pub p_i: Vec<f64>,
    /// State of energy, one entry longer than the per-step sequences.
    pub e_b: Vec<f64>,
}

pub const TRAJECTORY_HEADER: [&str; 8] = [
    "t_s",
    "v_mps",
    "omega_radps",
    "P_m_W",
    "P_loss_W",
    "P_dc_W",
    "P_i_W",
    "E_b_J",
];

impl Trajectory {
    pub fn from_evaluation(cycle: &DriveCycle, e: &Evaluation) -> Self {
        Self {
            dt: cycle.dt(),
            v: cycle.v().to_vec(),
            omega: e.omega.clone(),
            p_m: e.p_m.clone(),
            p_loss: e.p_loss.clone(),
            p_dc: e.p_dc.clone(),
            p_i: e.soe.p_i.clone(),
            e_b: e.soe.e_b.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn delta_e(&self) -> f64 {
        self.e_b[0] - self.e_b[self.e_b.len() - 1]
    }

    /// One row per step; `E_b_J` is the state at the start of the step.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.write_csv_with(writer, &[], |_| Vec::new())
    }

    pub(crate) fn write_csv_with<W: Write>(
        &self,
        writer: W,
        extra_header: &[&str],
        extra: impl Fn(usize) -> Vec<f64>,
    ) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<&str> = TRAJECTORY_HEADER
            .iter()
            .chain(extra_header)
            .copied()
            .collect();
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![
                k as f64 * self.dt,
                self.v[k],
                self.omega[k],
                self.p_m[k],
                self.p_loss[k],
                self.p_dc[k],
                self.p_i[k],
                self.e_b[k],
            ];
            row.extend(extra(k));
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<trajectory csv>", e))?;
        Ok(())
    }

    /// Reads the CSV written by [`Trajectory::write_csv`]; the final SOE is
    /// rebuilt from the last internal-power sample.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        for (i, h) in TRAJECTORY_HEADER.iter().enumerate() {
            if headers.get(i) != Some(*h) {
                return Err(Error::MissingColumn(h.to_string()));
            }
        }
        let mut t = Trajectory::default();
        let mut times = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .take(TRAJECTORY_HEADER.len())
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidCycle(format!("trajectory csv: {e}")))?;
            times.push(vals[0]);
            t.v.push(vals[1]);
            t.omega.push(vals[2]);
            t.p_m.push(vals[3]);
            t.p_loss.push(vals[4]);
            t.p_dc.push(vals[5]);
            t.p_i.push(vals[6]);
            t.e_b.push(vals[7]);
        }
        if times.len() < 2 {
            return Err(Error::InvalidCycle(
                "trajectory needs at least 2 rows".into(),
            ));
        }
        t.dt = times[1] - times[0];
        let last = *t.e_b.last().unwrap() - t.p_i.last().unwrap() * t.dt;
        t.e_b.push(last);
        Ok(t)
    }
}
