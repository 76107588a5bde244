//! TOML configuration for the command-line pipeline. Every key is optional;
//! omitted keys take the case-study defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::battery::{fit_battery, BatteryFit, BatteryModel, CellStack};
use crate::cycle::{load_cycle, reference_cycle, CycleSchema, DriveCycle};
use crate::designopt::{DesignBox, Requirements, SolverConfig};
use crate::doe::{full_factorial, latin_hypercube, DesignSpace, PlanKind, SamplePlan};
use crate::error::{Error, Result};
use crate::oracle::MotorTechSpec;
use crate::surrogate::SurrogateSettings;
use crate::vehicle::VehicleParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryConfig {
    /// Capacity [J].
    pub e_max: f64,
    pub zeta_min: f64,
    pub zeta_max: f64,
    /// Battery power range sampled for the fit [W].
    pub p_b_min: f64,
    pub p_b_max: f64,
    pub samples: usize,
    pub enforce_convex: bool,
    pub cell: CellStack,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            e_max: 58.0 * 3.6e6,
            zeta_min: 0.2,
            zeta_max: 0.8,
            p_b_min: -150e3,
            p_b_max: 150e3,
            samples: 200,
            enforce_convex: true,
            cell: CellStack::default(),
        }
    }
}

impl BatteryConfig {
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.cell.samples(self.p_b_min, self.p_b_max, self.samples)
    }

    pub fn model(&self, fit: &BatteryFit) -> Result<BatteryModel> {
        BatteryModel::new(
            fit.coefficients,
            self.e_max,
            (self.zeta_min, self.zeta_max),
            (fit.p_b_min, fit.p_b_max),
        )
    }

    /// Fits the cell-stack samples and builds the model.
    pub fn fit(&self, samples: &[(f64, f64)]) -> Result<(BatteryModel, BatteryFit)> {
        let fit = fit_battery(samples, self.enforce_convex)?;
        Ok((self.model(&fit)?, fit))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoeConfig {
    pub kind: PlanKind,
    /// Levels per axis of a full factorial plan.
    pub levels: usize,
    /// Points of a Latin hypercube plan.
    pub n: usize,
    pub seed: u64,
}

impl Default for DoeConfig {
    fn default() -> Self {
        Self {
            kind: PlanKind::FullFactorial,
            levels: 3,
            n: 9,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    /// Speed points of the efficiency maps.
    pub map_omega: usize,
    /// Torque points of the efficiency maps.
    pub map_torque: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            map_omega: 60,
            map_torque: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// Drive cycle CSV; the built-in reference cycle when absent.
    pub cycle: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            cycle: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ToolkitConfig {
    pub vehicle: VehicleParams,
    pub motor: MotorTechSpec,
    /// Design box; its (P_rated, lambda) face is also the sampled space.
    pub design: DesignBox,
    pub requirements: Requirements,
    pub battery: BatteryConfig,
    pub doe: DoeConfig,
    pub surrogate: SurrogateSettings,
    pub solver: SolverConfig,
    pub report: ReportConfig,
    pub paths: PathsConfig,
}

fn config_err(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Re-labels a parameter error with its section.
fn in_section(section: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidParameter { name, reason } => config_err(format!("{section}.{name}"), reason),
        other => other,
    }
}

fn ordered(key: &str, lo: f64, hi: f64) -> Result<()> {
    if lo < hi {
        Ok(())
    } else {
        Err(config_err(key, format!("min {lo} must be below max {hi}")))
    }
}

fn at_least(key: &str, value: usize, min: usize) -> Result<()> {
    if value >= min {
        Ok(())
    } else {
        Err(config_err(
            key,
            format!("must be at least {min}, got {value}"),
        ))
    }
}

impl ToolkitConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let de =
            toml::Deserializer::parse(s).map_err(|e| config_err("<document>", e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            config_err(key, e.into_inner().message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; a relative cycle path is resolved against the file's
    /// directory. `None` gives the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { key, reason } => {
                config_err(key, format!("{reason} (in {})", path.display()))
            }
            other => other,
        })?;
        if let Some(c) = &cfg.paths.cycle {
            if c.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.paths.cycle = Some(base.join(c));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("<document>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate().map_err(in_section("vehicle"))?;
        self.motor.validate().map_err(in_section("motor"))?;
        let d = &self.design;
        ordered("design.p_rated_min", d.p_rated_min, d.p_rated_max)?;
        ordered("design.lambda_min", d.lambda_min, d.lambda_max)?;
        ordered("design.gamma_min", d.gamma_min, d.gamma_max)?;
        d.validate().map_err(in_section("design"))?;
        let r = &self.requirements;
        if !(r.v_max > 0.0) {
            return Err(config_err("requirements.v_max", "must be positive"));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&r.alpha_max) {
            return Err(config_err(
                "requirements.alpha_max",
                "must lie in [0, pi/2) rad",
            ));
        }
        let b = &self.battery;
        ordered("battery.zeta_min", b.zeta_min, b.zeta_max)?;
        ordered("battery.p_b_min", b.p_b_min, b.p_b_max)?;
        if !(b.zeta_min >= 0.0 && b.zeta_max <= 1.0) {
            return Err(config_err(
                "battery.zeta_max",
                "SOC window must lie in [0, 1]",
            ));
        }
        if !(b.e_max > 0.0) {
            return Err(config_err("battery.e_max", "must be positive"));
        }
        at_least("battery.samples", b.samples, 3)?;
        if !(b.cell.u_oc > 0.0 && b.cell.r_tot > 0.0) {
            return Err(config_err(
                "battery.cell",
                "u_oc and r_tot must be positive",
            ));
        }
        if b.p_b_max > b.cell.u_oc * b.cell.u_oc / (4.0 * b.cell.r_tot) {
            return Err(config_err(
                "battery.p_b_max",
                "exceeds the cell stack's maximum power",
            ));
        }
        match self.doe.kind {
            PlanKind::FullFactorial => at_least("doe.levels", self.doe.levels, 2)?,
            PlanKind::LatinHypercube => at_least("doe.n", self.doe.n, 1)?,
        }
        at_least("surrogate.levels", self.surrogate.levels, 2)?;
        at_least("surrogate.n_speed", self.surrogate.n_speed, 10)?;
        at_least("solver.starts", self.solver.starts, 1)?;
        at_least("solver.grid", self.solver.grid, 5)?;
        at_least("report.map_omega", self.report.map_omega, 2)?;
        at_least("report.map_torque", self.report.map_torque, 2)?;
        Ok(())
    }

    /// The sampled design space: the (P_rated, lambda) face of the box.
    pub fn space(&self) -> DesignSpace {
        DesignSpace {
            p_rated_min: self.design.p_rated_min,
            p_rated_max: self.design.p_rated_max,
            lambda_min: self.design.lambda_min,
            lambda_max: self.design.lambda_max,
        }
    }

    pub fn plan(&self) -> Result<SamplePlan> {
        match self.doe.kind {
            PlanKind::FullFactorial => full_factorial(&self.space(), self.doe.levels),
            PlanKind::LatinHypercube => latin_hypercube(&self.space(), self.doe.n, self.doe.seed),
        }
    }

    pub fn cycle(&self) -> Result<DriveCycle> {
        match &self.paths.cycle {
            Some(p) => load_cycle(p, &CycleSchema::default()),
            None => Ok(reference_cycle()),
        }
    }
}
