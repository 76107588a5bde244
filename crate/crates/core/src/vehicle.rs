//! Quasi-static longitudinal vehicle dynamics.

use serde::{Deserialize, Serialize};

use crate::cycle::DriveCycle;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleParams {
    /// Air density [kg/m³].
    pub rho_a: f64,
    /// Drag coefficient [-].
    pub c_d: f64,
    /// Frontal area [m²].
    pub a_f: f64,
    /// Vehicle mass [kg].
    pub m_v: f64,
    /// Gravitational acceleration [m/s²].
    pub g: f64,
    /// Rolling resistance coefficient [-].
    pub c_r: f64,
    /// Wheel radius [m].
    pub r_w: f64,
    /// Fraction of braking power recovered through the motor [-].
    pub r_b: f64,
    /// Combined transmission and final-drive efficiency [-].
    pub eta_t: f64,
    /// Final drive ratio [-].
    pub gamma_fd: f64,
    /// Auxiliary electrical load [W].
    pub p_aux: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            rho_a: 1.2041,
            c_d: 0.29,
            a_f: 2.38,
            m_v: 1850.0,
            g: 9.81,
            c_r: 0.0174,
            r_w: 0.35,
            r_b: 0.6,
            eta_t: 0.96,
            gamma_fd: 1.0,
            p_aux: 2000.0,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_a", self.rho_a),
            ("c_d", self.c_d),
            ("a_f", self.a_f),
            ("m_v", self.m_v),
            ("g", self.g),
            ("c_r", self.c_r),
            ("r_w", self.r_w),
            ("gamma_fd", self.gamma_fd),
            ("p_aux", self.p_aux),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.r_b) {
            return Err(Error::param(
                "r_b",
                format!("must lie in [0, 1], got {}", self.r_b),
            ));
        }
        if !(self.eta_t > 0.0 && self.eta_t <= 1.0) {
            return Err(Error::param(
                "eta_t",
                format!("must lie in (0, 1], got {}", self.eta_t),
            ));
        }
        Ok(())
    }

    /// Tractive power at the wheels for one sample [W].
    pub fn wheel_power_at(&self, v: f64, a: f64, alpha: f64) -> f64 {
        let aero = 0.5 * self.rho_a * self.c_d * self.a_f * v * v;
        let rolling = if v > 0.0 {
            self.g * self.c_r * alpha.cos()
        } else {
            0.0
        };
        v * (aero + self.m_v * (rolling + self.g * alpha.sin() + a))
    }

    /// Mechanical motor power for one wheel-power sample [W].
    pub fn motor_power_at(&self, p_req: f64, p_rated: f64) -> f64 {
        if p_req >= 0.0 {
            p_req / self.eta_t
        } else {
            (self.eta_t * self.r_b * p_req).max(-p_rated)
        }
    }
}

/// Power requested at the wheels over the cycle [W].
pub fn wheel_power(cycle: &DriveCycle, vp: &VehicleParams) -> Vec<f64> {
    cycle
        .v()
        .iter()
        .zip(cycle.a())
        .zip(cycle.alpha())
        .map(|((&v, &a), &alpha)| vp.wheel_power_at(v, a, alpha))
        .collect()
}

/// Mechanical motor power: traction divided by driveline efficiency, braking
/// scaled by driveline efficiency and regen fraction and clipped at the
/// motor's rated power.
pub fn motor_mech_power(p_req: &[f64], vp: &VehicleParams, p_rated: f64) -> Vec<f64> {
    p_req
        .iter()
        .map(|&p| vp.motor_power_at(p, p_rated))
        .collect()
}
