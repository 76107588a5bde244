//! File-based pipeline behind the command-line tool:
//! `sample → fit → optimize → validate → report`.
//!
//! Every command reads its inputs from and writes its outputs to one output
//! directory. Outputs contain no timestamps, so re-running a command with
//! the same configuration rewrites identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::battery::{read_samples_csv, write_samples_csv, BatteryFit, BatteryModel};
use crate::config::ToolkitConfig;
use crate::designopt::{solve, DesignProblem, SolveResult, Trajectory};
use crate::doe::{PlanKind, SamplePlan};
use crate::error::{Error, Result};
use crate::oracle::{generate_map, MapSidecar, SyntheticPmsm};
use crate::surrogate::{
    fit_quality, fit_surrogate, DesignFitQuality, LevelDiagnostics, LossSurrogate,
};
use crate::validate::{map_comparison, validate_design, write_validation_csv, ValidationSummary};

pub const PLAN_FILE: &str = "plan.csv";
pub const MAPS_DIR: &str = "maps";
pub const BATTERY_SAMPLES_FILE: &str = "battery_samples.csv";
pub const BUNDLE_FILE: &str = "bundle.json";
pub const FIT_REPORT_FILE: &str = "fit_report.json";
pub const FIT_QUALITY_FILE: &str = "fit_quality.csv";
pub const RESULT_FILE: &str = "result.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const VALIDATION_FILE: &str = "validation.json";
pub const VALIDATION_TRAJECTORY_FILE: &str = "validation_trajectory.csv";
pub const REPORT_DIR: &str = "report";

/// Speeds below this fraction of the maximum are excluded from fit-quality
/// statistics.
pub const FIT_QUALITY_OMEGA_FRACTION: f64 = 0.1;
const FIT_QUALITY_POWERS: usize = 15;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

fn write_csv_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_file(path, &buf)
}

fn read_input(path: &Path, producer: &str) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingInput {
            path: path.to_path_buf(),
            hint: format!("run `ptsize {producer}` first"),
        });
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn parse_with<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Fitted models carried from `fit` to the later commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub surrogate: LossSurrogate,
    pub battery: BatteryModel,
    pub battery_fit: BatteryFit,
}

impl Bundle {
    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join(BUNDLE_FILE);
        let b: Bundle = parse_json(&path, &read_input(&path, "fit")?)?;
        parse_with(&path, b.surrogate.validate())?;
        parse_with(&path, b.battery.validate())?;
        Ok(b)
    }

    fn check_matches(&self, cfg: &ToolkitConfig) -> Result<()> {
        if self.surrogate.spec != cfg.motor || self.surrogate.space != cfg.space() {
            return Err(Error::Config {
                key: "motor".into(),
                reason: "bundle was fitted for different motor settings; rerun `ptsize fit`".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub levels: Vec<LevelDiagnostics>,
    pub designs: Vec<DesignFitQuality>,
    pub mean_nrmse_p_dc: f64,
    pub max_nrmse_p_dc: f64,
    pub battery_nrmse: f64,
    pub battery_convexified: bool,
}

/// Human-readable result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl CommandOutput {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            files: Vec::new(),
        }
    }
}

fn map_name(i: usize) -> String {
    format!("map_{i:02}")
}

/// Writes the sample plan, one oracle efficiency map per plan point and the
/// battery fit samples.
pub fn cmd_sample(cfg: &ToolkitConfig, out: &Path) -> Result<CommandOutput> {
    let mut o = CommandOutput::new();
    let plan = cfg.plan()?;
    let oracle = SyntheticPmsm::new(cfg.motor);
    let path = out.join(PLAN_FILE);
    write_csv_with(&path, |b| plan.write_csv(b))?;
    o.files.push(path);
    for (i, d) in plan.points.iter().enumerate() {
        let map = generate_map(&oracle, d, cfg.report.map_omega, cfg.report.map_torque)?;
        let base = out.join(MAPS_DIR).join(map_name(i));
        let csv = base.with_extension("csv");
        write_csv_with(&csv, |b| map.write_csv(b))?;
        let json = base.with_extension("json");
        write_json(&json, &MapSidecar::new(&cfg.motor, &map))?;
        o.files.extend([csv, json]);
    }
    let path = out.join(BATTERY_SAMPLES_FILE);
    let samples = cfg.battery.samples();
    write_csv_with(&path, |b| write_samples_csv(&samples, b))?;
    o.files.push(path);
    o.lines
        .push(format!("plan_points={} maps={}", plan.len(), plan.len()));
    Ok(o)
}

fn load_plan(cfg: &ToolkitConfig, out: &Path) -> Result<SamplePlan> {
    let path = out.join(PLAN_FILE);
    let text = read_input(&path, "sample")?;
    let seed = (cfg.doe.kind == PlanKind::LatinHypercube).then_some(cfg.doe.seed);
    let plan = parse_with(
        &path,
        SamplePlan::read_csv(text.as_bytes(), cfg.doe.kind, seed),
    )?;
    if plan.points.iter().any(|d| !cfg.space().contains(d)) {
        return Err(Error::Parse {
            path,
            reason: "plan point outside the configured design space".into(),
        });
    }
    Ok(plan)
}

/// Fits the loss surrogate and the battery model and writes the bundle and
/// fit report.
pub fn cmd_fit(cfg: &ToolkitConfig, out: &Path) -> Result<CommandOutput> {
    let mut o = CommandOutput::new();
    let plan = load_plan(cfg, out)?;
    let path = out.join(BATTERY_SAMPLES_FILE);
    let text = read_input(&path, "sample")?;
    let samples = parse_with(&path, read_samples_csv(text.as_bytes()))?;

    let oracle = SyntheticPmsm::new(cfg.motor);
    let (surrogate, levels) = fit_surrogate(&oracle, &cfg.space(), &plan, &cfg.surrogate)?;
    let (battery, battery_fit) = cfg.battery.fit(&samples)?;
    let designs = fit_quality(
        &surrogate,
        &oracle,
        &plan.points,
        FIT_QUALITY_OMEGA_FRACTION * cfg.motor.omega_max,
        cfg.surrogate.n_speed,
        FIT_QUALITY_POWERS,
    )?;
    let mean = designs.iter().map(|d| d.nrmse_p_dc).sum::<f64>() / designs.len() as f64;
    let max = designs.iter().map(|d| d.nrmse_p_dc).fold(0.0, f64::max);
    let report = FitReport {
        levels,
        designs,
        mean_nrmse_p_dc: mean,
        max_nrmse_p_dc: max,
        battery_nrmse: battery_fit.nrmse,
        battery_convexified: battery_fit.convexified,
    };
    let bundle = Bundle {
        surrogate,
        battery,
        battery_fit,
    };
    let path = out.join(BUNDLE_FILE);
    write_json(&path, &bundle)?;
    o.files.push(path);
    let path = out.join(FIT_REPORT_FILE);
    write_json(&path, &report)?;
    o.files.push(path);
    let path = out.join(FIT_QUALITY_FILE);
    write_csv_with(&path, |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["P_rated_W", "lambda", "nrmse_P_dc", "nrmse_loss", "points"])?;
        for d in &report.designs {
            w.write_record([
                d.design.p_rated.to_string(),
                d.design.lambda.to_string(),
                d.nrmse_p_dc.to_string(),
                d.nrmse_loss.to_string(),
                d.points.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(FIT_QUALITY_FILE, e))
    })?;
    o.files.push(path);
    o.lines.push(format!(
        "mean_nrmse_P_dc={:.4}% max_nrmse_P_dc={:.4}% battery_nrmse={:.4}%",
        100.0 * mean,
        100.0 * max,
        100.0 * report.battery_nrmse
    ));
    Ok(o)
}

/// Builds the design problem from the configuration and a fitted bundle.
pub fn build_problem(cfg: &ToolkitConfig, bundle: &Bundle) -> Result<DesignProblem> {
    bundle.check_matches(cfg)?;
    DesignProblem::new(
        cfg.cycle()?,
        cfg.vehicle,
        bundle.surrogate.clone(),
        bundle.battery,
        cfg.requirements,
        cfg.design,
    )
}

pub fn summary_line(r: &SolveResult) -> String {
    format!(
        "P_rated_kW={:.3} lambda={:.4} gamma_fgt={:.4} deltaE_MJ={:.4}",
        r.design.p_rated / 1e3,
        r.design.lambda,
        r.design.gamma_fgt,
        r.delta_e / 1e6
    )
}

/// Solves the design problem and writes the result and its trajectories.
pub fn cmd_optimize(cfg: &ToolkitConfig, out: &Path) -> Result<CommandOutput> {
    let mut o = CommandOutput::new();
    let bundle = Bundle::load(out)?;
    let prob = build_problem(cfg, &bundle)?;
    let r = solve(&prob, &cfg.solver)?;
    let path = out.join(RESULT_FILE);
    write_json(&path, &r)?;
    o.files.push(path);
    let path = out.join(TRAJECTORY_FILE);
    write_csv_with(&path, |b| r.trajectory.write_csv(b))?;
    o.files.push(path);
    o.lines.push(summary_line(&r));
    o.lines.push(format!(
        "status={} active=[{}]",
        r.diagnostics.status,
        r.active_constraints.join(",")
    ));
    Ok(o)
}

/// Reads a solve result with its trajectory.
pub fn load_result(out: &Path) -> Result<SolveResult> {
    let path = out.join(RESULT_FILE);
    let mut r: SolveResult = parse_json(&path, &read_input(&path, "optimize")?)?;
    let path = out.join(TRAJECTORY_FILE);
    let text = read_input(&path, "optimize")?;
    r.trajectory = parse_with(&path, Trajectory::read_csv(text.as_bytes()))?;
    let stored = r.trajectory.delta_e();
    if (stored - r.delta_e).abs() > 1e-6 * r.delta_e.abs() {
        return Err(Error::Parse {
            path,
            reason: format!(
                "trajectory energy {stored} J disagrees with result {} J",
                r.delta_e
            ),
        });
    }
    Ok(r)
}

fn validation(
    cfg: &ToolkitConfig,
    out: &Path,
) -> Result<(SolveResult, Bundle, crate::validate::ValidationReport)> {
    let bundle = Bundle::load(out)?;
    bundle.check_matches(cfg)?;
    let r = load_result(out)?;
    let oracle = SyntheticPmsm::new(cfg.motor);
    let v = validate_design(&r, &bundle.battery, cfg.vehicle.p_aux, &oracle)?;
    Ok((r, bundle, v))
}

fn drift_line(s: &ValidationSummary) -> String {
    format!(
        "final_drift_kJ={:.3} relative_drift={:.4}% clamped_steps={}",
        s.final_drift / 1e3,
        100.0 * s.final_relative_drift,
        s.clamped_steps
    )
}

/// Re-simulates the optimum through the oracle.
pub fn cmd_validate(cfg: &ToolkitConfig, out: &Path) -> Result<CommandOutput> {
    let mut o = CommandOutput::new();
    let (r, _, v) = validation(cfg, out)?;
    let path = out.join(VALIDATION_FILE);
    write_json(&path, &v.summary)?;
    o.files.push(path);
    let path = out.join(VALIDATION_TRAJECTORY_FILE);
    write_csv_with(&path, |b| write_validation_csv(&r, &v, b))?;
    o.files.push(path);
    o.lines.push(drift_line(&v.summary));
    Ok(o)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub result: SolveResult,
    pub validation: ValidationSummary,
    pub max_efficiency_diff: f64,
}

/// Plot-ready files: efficiency maps of the optimum (surrogate, oracle,
/// difference) and the validated trajectories.
pub fn cmd_report(cfg: &ToolkitConfig, out: &Path) -> Result<CommandOutput> {
    let mut o = CommandOutput::new();
    let (r, bundle, v) = validation(cfg, out)?;
    let oracle = SyntheticPmsm::new(cfg.motor);
    let maps = map_comparison(
        &bundle.surrogate,
        &oracle,
        &r.design.motor(),
        cfg.report.map_omega,
        cfg.report.map_torque,
    )?;
    let dir = out.join(REPORT_DIR);
    let path = dir.join("efficiency_maps.csv");
    write_csv_with(&path, |b| maps.write_csv(b))?;
    o.files.push(path);
    let path = dir.join("trajectories.csv");
    write_csv_with(&path, |b| write_validation_csv(&r, &v, b))?;
    o.files.push(path);
    let summary = ReportSummary {
        max_efficiency_diff: maps.max_efficiency_diff(),
        result: r,
        validation: v.summary,
    };
    let path = dir.join("summary.json");
    write_json(&path, &summary)?;
    o.files.push(path);
    o.lines.push(summary_line(&summary.result));
    o.lines.push(drift_line(&summary.validation));
    Ok(o)
}

/// All five commands in order.
pub fn run_all(cfg: &ToolkitConfig, out: &Path) -> Result<Vec<CommandOutput>> {
    Ok(vec![
        cmd_sample(cfg, out)?,
        cmd_fit(cfg, out)?,
        cmd_optimize(cfg, out)?,
        cmd_validate(cfg, out)?,
        cmd_report(cfg, out)?,
    ])
}
