//! Drive cycles: uniformly sampled speed, acceleration and grade traces.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_RTOL: f64 = 1e-6;

/// A mission profile sampled on a uniform time grid.
///
/// Immutable after construction; all sequences have the same length (at least
/// two samples) and velocity is never negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveCycle {
    dt: f64,
    v: Vec<f64>,
    a: Vec<f64>,
    alpha: Vec<f64>,
}

/// Column names used when reading a cycle CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleSchema {
    pub t: String,
    pub v: String,
    pub a: Option<String>,
    pub alpha: Option<String>,
}

impl Default for CycleSchema {
    fn default() -> Self {
        Self {
            t: "t".into(),
            v: "v".into(),
            a: Some("a".into()),
            alpha: Some("alpha".into()),
        }
    }
}

/// One trapezoid leg of a synthetic cycle: ramp from the current speed to
/// `target_speed` over `ramp_time`, then hold for `hold_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub target_speed: f64,
    pub ramp_time: f64,
    pub hold_time: f64,
}

impl Segment {
    pub fn new(target_speed: f64, ramp_time: f64, hold_time: f64) -> Self {
        Self {
            target_speed,
            ramp_time,
            hold_time,
        }
    }
}

/// Forward-difference acceleration with a zero final sample.
pub fn forward_difference(v: &[f64], dt: f64) -> Vec<f64> {
    let mut a: Vec<f64> = v.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    a.push(0.0);
    a
}

impl DriveCycle {
    /// Builds a cycle, deriving acceleration by forward difference when `a`
    /// is `None` and defaulting grade to zero when `alpha` is `None`.
    pub fn new(dt: f64, v: Vec<f64>, a: Option<Vec<f64>>, alpha: Option<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidCycle(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if v.len() < 2 {
            return Err(Error::InvalidCycle(format!(
                "need at least 2 samples, got {}",
                v.len()
            )));
        }
        if let Some((row, &value)) = v.iter().enumerate().find(|(_, x)| !(**x >= 0.0)) {
            return Err(Error::NegativeVelocity { row, value });
        }
        let a = a.unwrap_or_else(|| forward_difference(&v, dt));
        let alpha = alpha.unwrap_or_else(|| vec![0.0; v.len()]);
        if a.len() != v.len() {
            return Err(Error::LengthMismatch {
                what: "acceleration vs velocity",
                left: a.len(),
                right: v.len(),
            });
        }
        if alpha.len() != v.len() {
            return Err(Error::LengthMismatch {
                what: "grade vs velocity",
                left: alpha.len(),
                right: v.len(),
            });
        }
        Ok(Self { dt, v, a, alpha })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Integration horizon: every sample is held for one step.
    pub fn duration(&self) -> f64 {
        self.dt * self.v.len() as f64
    }

    pub fn time(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |k| k as f64 * self.dt)
    }

    pub fn max_speed(&self) -> f64 {
        self.v.iter().copied().fold(0.0, f64::max)
    }

    /// Sub-cycle of samples `range`; used to chain SOE integration.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Self::new(
            self.dt,
            self.v[range.clone()].to_vec(),
            Some(self.a[range.clone()].to_vec()),
            Some(self.alpha[range].to_vec()),
        )
    }
}

/// Reads a cycle CSV with a header row. `t` and `v` are required, `a` and
/// `alpha` are optional.
pub fn load_cycle(path: impl AsRef<Path>, schema: &CycleSchema) -> Result<DriveCycle> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_cycle(file, schema)
}

pub fn read_cycle<R: std::io::Read>(reader: R, schema: &CycleSchema) -> Result<DriveCycle> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_col = find(&schema.t).ok_or_else(|| Error::MissingColumn(schema.t.clone()))?;
    let v_col = find(&schema.v).ok_or_else(|| Error::MissingColumn(schema.v.clone()))?;
    let a_col = schema.a.as_deref().and_then(find);
    let alpha_col = schema.alpha.as_deref().and_then(find);

    let mut t = Vec::new();
    let mut v = Vec::new();
    let mut a = Vec::new();
    let mut alpha = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let field = |col: usize, name: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                Error::InvalidCycle(format!(
                    "row {row}: cannot parse `{raw}` in column `{name}`"
                ))
            })
        };
        t.push(field(t_col, &schema.t)?);
        let vk = field(v_col, &schema.v)?;
        if vk < 0.0 {
            return Err(Error::NegativeVelocity { row, value: vk });
        }
        v.push(vk);
        if let Some(c) = a_col {
            a.push(field(c, "a")?);
        }
        if let Some(c) = alpha_col {
            alpha.push(field(c, "alpha")?);
        }
    }
    if t.len() < 2 {
        return Err(Error::InvalidCycle(format!(
            "need at least 2 rows, got {}",
            t.len()
        )));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(Error::NonUniformGrid {
            row: 1,
            step: dt,
            expected: dt,
        });
    }
    for (k, w) in t.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > GRID_RTOL * dt {
            return Err(Error::NonUniformGrid {
                row: k + 1,
                step,
                expected: dt,
            });
        }
    }
    DriveCycle::new(dt, v, a_col.map(|_| a), alpha_col.map(|_| alpha))
}

/// Writes `t,v,a,alpha`.
pub fn write_cycle<W: std::io::Write>(cycle: &DriveCycle, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "v", "a", "alpha"])?;
    for (k, t) in cycle.time().enumerate() {
        w.write_record(&[
            t.to_string(),
            cycle.v[k].to_string(),
            cycle.a[k].to_string(),
            cycle.alpha[k].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<cycle csv>", e))?;
    Ok(())
}

fn steps(duration: f64, dt: f64) -> usize {
    ((duration / dt).round() as usize).max(1)
}

/// Builds a flat trapezoidal speed profile starting and ending at standstill.
///
/// Each segment ramps linearly from the previous speed to its target and then
/// holds it; after the last segment the profile ramps back to zero over that
/// segment's ramp time.
pub fn synthesize_cycle(segments: &[Segment], dt: f64) -> Result<DriveCycle> {
    let last = segments.last().ok_or(Error::EmptyCycle)?;
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    for s in segments {
        if !(s.target_speed >= 0.0) {
            return Err(Error::param(
                "target_speed",
                format!("must be >= 0, got {}", s.target_speed),
            ));
        }
        if s.ramp_time < dt || s.hold_time < dt {
            return Err(Error::param(
                "segment",
                "ramp and hold times must be at least dt",
            ));
        }
    }

    let mut v = vec![0.0];
    let ramp = |v: &mut Vec<f64>, target: f64, n: usize| {
        let v0 = *v.last().unwrap();
        for k in 1..=n {
            v.push(v0 + (target - v0) * k as f64 / n as f64);
        }
    };
    for s in segments {
        ramp(&mut v, s.target_speed, steps(s.ramp_time, dt));
        let n_hold = steps(s.hold_time, dt);
        v.extend(std::iter::repeat_n(s.target_speed, n_hold));
    }
    ramp(&mut v, 0.0, steps(last.ramp_time, dt));
    // ramp endpoints are exact, but clean any -0.0 / rounding residue
    for x in &mut v {
        if x.abs() < 1e-12 {
            *x = 0.0;
        }
    }
    DriveCycle::new(dt, v, None, None)
}

/// A roughly 1800 s, four-phase urban-to-motorway profile used as the default
/// mission when no cycle file is configured. Peak speed 36.4 m/s (131 km/h).
pub fn reference_cycle() -> DriveCycle {
    let kmh = |x: f64| x / 3.6;
    // decelerate to standstill at about 1.2 m/s²
    let stop = |from_kmh: f64, hold: f64| Segment::new(0.0, (kmh(from_kmh) / 1.2).ceil(), hold);
    let mut segs = Vec::new();
    // low
    for &(s, r, h) in &[
        (20.0, 8.0, 35.0),
        (35.0, 12.0, 55.0),
        (25.0, 8.0, 40.0),
        (45.0, 15.0, 70.0),
        (30.0, 10.0, 40.0),
    ] {
        segs.push(Segment::new(kmh(s), r, h));
        segs.push(stop(s, 30.0));
    }
    // medium
    for &(s, r, h) in &[
        (50.0, 15.0, 90.0),
        (70.0, 20.0, 70.0),
        (40.0, 10.0, 60.0),
        (60.0, 15.0, 90.0),
    ] {
        segs.push(Segment::new(kmh(s), r, h));
        segs.push(stop(s, 15.0));
    }
    // high
    for &(s, r, h) in &[
        (80.0, 20.0, 100.0),
        (95.0, 12.0, 80.0),
        (70.0, 10.0, 50.0),
        (90.0, 12.0, 90.0),
    ] {
        segs.push(Segment::new(kmh(s), r, h));
    }
    segs.push(stop(90.0, 15.0));
    // extra high
    for &(s, r, h) in &[
        (100.0, 25.0, 70.0),
        (120.0, 20.0, 100.0),
        (131.0, 15.0, 50.0),
        (110.0, 10.0, 70.0),
    ] {
        segs.push(Segment::new(kmh(s), r, h));
    }
    segs.push(Segment::new(kmh(60.0), 25.0, 30.0));
    synthesize_cycle(&segs, 1.0).expect("reference cycle segments are valid")
}
