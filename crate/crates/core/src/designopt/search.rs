//! Dense-grid global search, multi-start local search and their
//! cross-check.
//!
//! The local solver works in a transformed unit box in which every
//! structural constraint is a bound:
//!
//! ```text
//! P     = P_lo + u0 (P_hi − P_lo)
//! λ     = λ_lo + u1 (λ_hi − λ_lo)
//! γ     = g_lo(P) + u2 (g_hi − g_lo(P)),   g_lo(P) = max(γ_min, c / P)
//! ```
//!
//! where `c` is the largest required `γ · P` product (gradeability and
//! torque adequacy), `g_hi` the smallest gear-ratio upper bound (box, top
//! speed, cycle overspeed) and `P_lo` the smallest rating that admits a
//! ratio. Only the SOC window remains, handled by an exact penalty.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::qn::{minimize_box, QnOptions, QnResult};
use super::{DesignProblem, DesignVector, FeasibilityReport, Trajectory};
use crate::error::{Error, Result};

/// Grid points per axis, in (P_rated, lambda, gamma_fgt) order.
pub type GridResolution = [usize; 3];

/// Penalty weight on SOE below the window floor, in J of objective per J
/// of violation.
const SOC_PENALTY: f64 = 10.0;

/// Distance in unit coordinates stepped off a collapsed vertex.
const VERTEX_PROBE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub starts: usize,
    pub seed: u64,
    /// Points per axis of the cross-check grid.
    pub grid: usize,
    pub crosscheck: bool,
    pub refine: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 42,
            grid: 21,
            crosscheck: true,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalDiagnostics {
    pub starts: usize,
    /// Random draws needed to find `starts` feasible start points.
    pub draws: usize,
    pub start_points: Vec<DesignVector>,
    pub final_points: Vec<DesignVector>,
    pub objectives: Vec<f64>,
    pub iterations: Vec<usize>,
    pub evaluations: usize,
    pub converged: Vec<bool>,
    /// `(max − min) / min` over converged runs (all runs if none converged).
    pub spread: f64,
    pub best_start: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDiagnostics {
    pub resolution: GridResolution,
    /// Grid spacing per axis.
    pub cell: [f64; 3],
    pub evaluated: usize,
    pub feasible: usize,
    pub coarse_design: DesignVector,
    pub coarse_delta_e: f64,
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `"crosschecked"` or `"uncrosschecked"`.
    pub status: String,
    /// Which search produced the returned design.
    pub source: String,
    pub local: Option<LocalDiagnostics>,
    pub grid: Option<GridDiagnostics>,
    /// `|ΔE_local − ΔE_grid| / min(ΔE_local, ΔE_grid)`.
    pub objective_gap: Option<f64>,
    /// Per-axis distance between local and grid designs in grid cells.
    pub cell_offset: Option<[f64; 3]>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub design: DesignVector,
    pub delta_e: f64,
    pub active_constraints: Vec<String>,
    pub feasibility: FeasibilityReport,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

impl SolveResult {
    fn at(prob: &DesignProblem, design: DesignVector, diagnostics: Diagnostics) -> Self {
        let eval = prob.evaluate(&design);
        Self {
            design,
            delta_e: eval.delta_e,
            active_constraints: eval.feasibility.active(),
            trajectory: Trajectory::from_evaluation(prob.cycle(), &eval),
            feasibility: eval.feasibility,
            diagnostics,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Reads a result; the trajectory is left empty.
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn soc_floor_violation(prob: &DesignProblem, lowest: f64) -> f64 {
    (prob.battery().min_energy() - lowest).max(0.0)
}

/// Penalized objective used by both searches; `None` when the design
/// violates a structural constraint.
fn grid_value(prob: &DesignProblem, p: &DesignVector) -> Option<f64> {
    if !prob.structural_report(p).feasible() {
        return None;
    }
    let (delta_e, lowest) = prob.energy(p);
    (soc_floor_violation(prob, lowest) == 0.0).then_some(delta_e)
}

struct Transform {
    p_lo: f64,
    p_hi: f64,
    l_lo: f64,
    l_hi: f64,
    g_hi: f64,
}

impl Transform {
    fn new(prob: &DesignProblem) -> Self {
        let b = prob.bounds();
        Self {
            p_lo: prob.p_rated_lower(),
            p_hi: b.p_rated_max,
            l_lo: b.lambda_min,
            l_hi: b.lambda_max,
            g_hi: prob.gamma_upper(),
        }
    }

    /// The gear-ratio interval has zero width at the lowest rating.
    fn collapsed(&self, prob: &DesignProblem) -> bool {
        self.g_hi - prob.gamma_lower(self.p_lo) <= 1e-9 * self.g_hi
    }

    fn design(&self, prob: &DesignProblem, u: &[f64]) -> DesignVector {
        let p = self.p_lo + u[0] * (self.p_hi - self.p_lo);
        let l = self.l_lo + u[1] * (self.l_hi - self.l_lo);
        let g_lo = prob.gamma_lower(p);
        let g = g_lo + u[2] * (self.g_hi - g_lo);
        DesignVector::new(p, l, g)
    }
}

/// Multi-start projected quasi-Newton search.
pub fn local_solve(prob: &DesignProblem, starts: usize, seed: u64) -> Result<SolveResult> {
    local_solve_with(prob, starts, seed, &QnOptions::default())
}

pub fn local_solve_with(
    prob: &DesignProblem,
    starts: usize,
    seed: u64,
    opts: &QnOptions,
) -> Result<SolveResult> {
    if starts == 0 {
        return Err(Error::param("starts", "need at least one start"));
    }
    let clock = Instant::now();
    prob.check_structure()?;
    let tr = Transform::new(prob);
    let f = |u: &[f64]| {
        let (delta_e, lowest) = prob.energy(&tr.design(prob, u));
        delta_e + SOC_PENALTY * soc_floor_violation(prob, lowest)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start_u = Vec::with_capacity(starts);
    let max_draws = 100 * starts;
    let mut draws = 0;
    while start_u.len() < starts && draws < max_draws {
        draws += 1;
        let u: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
        let (_, lowest) = prob.energy(&tr.design(prob, &u));
        if soc_floor_violation(prob, lowest) == 0.0 {
            start_u.push(u);
        }
    }
    if start_u.len() < starts {
        return Err(Error::NoFeasibleStart { draws });
    }

    let unit = [0.0; 3];
    let ones = [1.0; 3];
    let collapsed = tr.collapsed(prob);
    let runs: Vec<_> = start_u
        .par_iter()
        .map(|u0| {
            let mut r = minimize_box(&f, &unit, &ones, u0, opts);
            // the vertex where the gear-ratio interval collapses is a spurious
            // stationary point of the transformed problem; step off along
            // either edge and continue if that descends
            for _ in 0..3 {
                if !(collapsed && r.x[0] == 0.0) {
                    break;
                }
                let probe = [[VERTEX_PROBE, r.x[1], 0.0], [VERTEX_PROBE, r.x[1], 1.0]]
                    .into_iter()
                    .map(|u| (f(&u), u))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .unwrap();
                if probe.0 >= r.f {
                    break;
                }
                let next = minimize_box(&f, &unit, &ones, &probe.1, opts);
                r = QnResult {
                    iterations: r.iterations + next.iterations,
                    evaluations: r.evaluations + next.evaluations + 2,
                    path: r.path.into_iter().chain(next.path).collect(),
                    ..next
                };
            }
            r
        })
        .collect();

    let objectives: Vec<f64> = runs.iter().map(|r| r.f).collect();
    let converged: Vec<bool> = runs.iter().map(|r| r.converged).collect();
    let pool: Vec<f64> = if converged.iter().any(|&c| c) {
        objectives
            .iter()
            .zip(&converged)
            .filter(|(_, c)| **c)
            .map(|(f, _)| *f)
            .collect()
    } else {
        objectives.clone()
    };
    let lo = pool.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = pool.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_start = (0..runs.len())
        .min_by(|&a, &b| objectives[a].total_cmp(&objectives[b]))
        .unwrap();
    let design = tr.design(prob, &runs[best_start].x);
    let local = LocalDiagnostics {
        starts,
        draws,
        start_points: start_u.iter().map(|u| tr.design(prob, u)).collect(),
        final_points: runs.iter().map(|r| tr.design(prob, &r.x)).collect(),
        objectives,
        iterations: runs.iter().map(|r| r.iterations).collect(),
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        converged,
        spread: (hi - lo) / lo.abs(),
        best_start,
    };
    let diag = Diagnostics {
        status: "uncrosschecked".into(),
        source: "local".into(),
        local: Some(local),
        grid: None,
        objective_gap: None,
        cell_offset: None,
        wall_time_s: clock.elapsed().as_secs_f64(),
    };
    Ok(SolveResult::at(prob, design, diag))
}

/// Argmin over `values` in index order, keeping the first of equal values.
fn first_min(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Exhaustive search over a tensor grid of the design box, optionally
/// followed by one 3× finer pass over the incumbent's neighbouring cells.
pub fn grid_search(
    prob: &DesignProblem,
    resolution: GridResolution,
    refine: bool,
) -> Result<SolveResult> {
    if resolution.iter().any(|&r| r < 5) {
        return Err(Error::param("grid", "need at least 5 points per axis"));
    }
    let clock = Instant::now();
    prob.check_structure()?;
    let (lo, hi, w) = (
        prob.bounds().lo(),
        prob.bounds().hi(),
        prob.bounds().width(),
    );
    let cell: [f64; 3] = std::array::from_fn(|a| w[a] / (resolution[a] - 1) as f64);
    let axis = |a: usize, i: usize| {
        if i + 1 == resolution[a] {
            hi[a]
        } else {
            lo[a] + i as f64 * cell[a]
        }
    };
    let [nr_p, nr_l, nr_g] = resolution;
    let n = nr_p * nr_l * nr_g;
    let point = |idx: usize| {
        let (i, rest) = (idx / (nr_l * nr_g), idx % (nr_l * nr_g));
        let (j, k) = (rest / nr_g, rest % nr_g);
        DesignVector::new(axis(0, i), axis(1, j), axis(2, k))
    };
    let values: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|idx| grid_value(prob, &point(idx)))
        .collect();
    let feasible = values.iter().filter(|v| v.is_some()).count();
    let Some(best) = first_min(&values) else {
        return Err(Error::EmptyFeasibleSet {
            constraint: "grid".into(),
        });
    };
    let coarse = point(best);
    let coarse_value = values[best].unwrap();
    let mut evaluated = n;

    let mut design = coarse;
    if refine {
        let c = coarse.to_array();
        let offsets: Vec<[i32; 3]> = (-3..=3)
            .flat_map(|a| (-3..=3).flat_map(move |b| (-3..=3).map(move |g| [a, b, g])))
            .collect();
        let candidates: Vec<Option<DesignVector>> = offsets
            .iter()
            .map(|o| {
                let x: [f64; 3] = std::array::from_fn(|a| c[a] + o[a] as f64 * cell[a] / 3.0);
                let inside = (0..3).all(|a| x[a] >= lo[a] && x[a] <= hi[a]);
                inside.then(|| DesignVector::from_slice(&x))
            })
            .collect();
        let fine: Vec<Option<f64>> = candidates
            .par_iter()
            .map(|p| p.as_ref().and_then(|p| grid_value(prob, p)))
            .collect();
        evaluated += candidates.iter().filter(|p| p.is_some()).count();
        if let Some(i) = first_min(&fine) {
            if fine[i].unwrap() < coarse_value {
                design = candidates[i].unwrap();
            }
        }
    }
    let grid = GridDiagnostics {
        resolution,
        cell,
        evaluated,
        feasible,
        coarse_design: coarse,
        coarse_delta_e: coarse_value,
        refined: refine,
    };
    let diag = Diagnostics {
        status: "uncrosschecked".into(),
        source: "grid".into(),
        local: None,
        grid: Some(grid),
        objective_gap: None,
        cell_offset: None,
        wall_time_s: clock.elapsed().as_secs_f64(),
    };
    Ok(SolveResult::at(prob, design, diag))
}

/// Local search, cross-checked against the grid when enabled; returns the
/// better design with diagnostics of both.
pub fn solve(prob: &DesignProblem, config: &SolverConfig) -> Result<SolveResult> {
    let clock = Instant::now();
    let local = local_solve(prob, config.starts, config.seed)?;
    if !config.crosscheck {
        return Ok(local);
    }
    let grid = grid_search(prob, [config.grid; 3], config.refine)?;
    let gd = grid.diagnostics.grid.clone().unwrap();
    let gap = (local.delta_e - grid.delta_e).abs() / local.delta_e.min(grid.delta_e).abs();
    let (l, g) = (local.design.to_array(), grid.design.to_array());
    let offset: [f64; 3] = std::array::from_fn(|a| (l[a] - g[a]).abs() / gd.cell[a]);
    let use_grid = grid.delta_e < local.delta_e;
    let diagnostics = Diagnostics {
        status: "crosschecked".into(),
        source: if use_grid { "grid" } else { "local" }.into(),
        local: local.diagnostics.local.clone(),
        grid: Some(gd),
        objective_gap: Some(gap),
        cell_offset: Some(offset),
        wall_time_s: clock.elapsed().as_secs_f64(),
    };
    let mut best = if use_grid { grid } else { local };
    best.diagnostics = diagnostics;
    Ok(best)
}
