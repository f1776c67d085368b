//! Gradient descent restricted to the feasible set, using an Armijo
//! backtracking line search that rejects infeasible trial points.
//!
//! Trial points outside the feasible set shrink the step exactly like a
//! failed sufficient-decrease test. The outer loop keeps iterating while
//! either the gradient norm is at least `eps` or the last cost change is at
//! least `eps1`; the previous cost starts at `-1`.

use std::fmt;

use crate::discretization::{assemble, closed_loop_matrix, GridConfig, X0Mode};
use crate::error::{CcdError, Result};
use crate::lyapunov::{cost_jf, SchurFactor};
use crate::model::{theorem1_margins, DesignPoint, FeasibilityReport, Weights};
use crate::sensitivity::{gradient_jf, Gradient};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub sigma: f64,
    pub beta: f64,
    pub eps: f64,
    pub eps1: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    pub s0: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            sigma: 0.3,
            beta: 0.3,
            eps: 1e-3,
            eps1: 1e-6,
            max_iters: 10_000,
            max_backtracks: 60,
            s0: 1.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.sigma) {
            return Err(CcdError::InvalidArgument(format!("sigma must lie in (0, 1), got {}", self.sigma)));
        }
        if !open_unit(self.beta) {
            return Err(CcdError::InvalidArgument(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.eps > 0.0) || !(self.eps1 > 0.0) {
            return Err(CcdError::InvalidArgument("eps and eps1 must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(CcdError::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            return Err(CcdError::InvalidArgument(format!("s0 must be > 0, got {}", self.s0)));
        }
        Ok(())
    }
}

/// Cost oracle driven by the line search and the outer loop.
pub trait Objective {
    /// Cost at a trial point, or `None` when the point is outside the
    /// feasible set. Feasibility is decided before any cost is computed.
    fn trial_cost(&mut self, p: &DesignPoint) -> Result<Option<f64>>;

    fn cost_and_gradient(&mut self, p: &DesignPoint) -> Result<(f64, Gradient)>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    pub lyapunov_solves: usize,
    pub rejected_by_margins: usize,
    pub rejected_by_hurwitz: usize,
}

/// The discretized co-design problem as an [`Objective`].
#[derive(Debug, Clone)]
pub struct CcdObjective {
    pub weights: Weights,
    pub grid: GridConfig,
    pub x0_mode: X0Mode,
    pub stats: EvalStats,
}

impl CcdObjective {
    pub fn new(weights: Weights, grid: GridConfig, x0_mode: X0Mode) -> Self {
        Self {
            weights,
            grid,
            x0_mode,
            stats: EvalStats::default(),
        }
    }

    /// Margins plus the Hurwitz test on the closed loop.
    pub fn feasibility(&self, p: &DesignPoint) -> Result<(FeasibilityReport, f64)> {
        let report = theorem1_margins(p);
        let max_re = SchurFactor::new(&closed_loop_matrix(p, &self.grid))?.max_real_eig();
        Ok((report.with_hurwitz(max_re < crate::lyapunov::HURWITZ_THRESHOLD), max_re))
    }
}

impl Objective for CcdObjective {
    fn trial_cost(&mut self, p: &DesignPoint) -> Result<Option<f64>> {
        if !p.is_finite() || !theorem1_margins(p).theorem_ok {
            self.stats.rejected_by_margins += 1;
            return Ok(None);
        }
        let sys = assemble(p, &self.weights, &self.grid, self.x0_mode)?;
        let factor = SchurFactor::new(&sys.a)?;
        if !factor.is_hurwitz() {
            self.stats.rejected_by_hurwitz += 1;
            return Ok(None);
        }
        self.stats.lyapunov_solves += 1;
        let sol = factor.solve(&sys.a, &sys.qtilde())?;
        Ok(Some(self.weights.fd.value(p) + sol.p.dot(&sys.x0)))
    }

    fn cost_and_gradient(&mut self, p: &DesignPoint) -> Result<(f64, Gradient)> {
        let sys = assemble(p, &self.weights, &self.grid, self.x0_mode)?;
        let eval = cost_jf(&sys, p, &self.weights)?;
        self.stats.lyapunov_solves += 1;
        let g = gradient_jf(p, &self.weights, &sys, &eval)?;
        Ok((eval.jf, g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoStep {
    pub point: DesignPoint,
    pub jf: f64,
    pub step: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArmijoOutcome {
    Accepted(ArmijoStep),
    Stalled { backtracks: usize },
}

fn descend(p: &DesignPoint, g: &Gradient, s: f64) -> DesignPoint {
    let mut v = p.to_array();
    for (i, vi) in v.iter_mut().enumerate() {
        if p.free_mask[i] {
            *vi -= s * g.g[i];
        }
    }
    p.from_array(v)
}

/// Backtracks from `s0` by `beta` until a feasible trial point satisfies
/// `J(p − s g) ≤ J − σ s ‖g‖²`.
pub fn armijo_step<O: Objective + ?Sized>(
    p: &DesignPoint,
    jf: f64,
    g: &Gradient,
    cfg: &OptimizerConfig,
    obj: &mut O,
) -> Result<ArmijoOutcome> {
    let g2 = g.norm * g.norm;
    let mut s = cfg.s0;
    for backtracks in 0..=cfg.max_backtracks {
        let trial = descend(p, g, s);
        if let Some(jn) = obj.trial_cost(&trial)? {
            if jn <= jf - cfg.sigma * s * g2 {
                return Ok(ArmijoOutcome::Accepted(ArmijoStep {
                    point: trial,
                    jf: jn,
                    step: s,
                    backtracks,
                }));
            }
        }
        s *= cfg.beta;
    }
    Ok(ArmijoOutcome::Stalled { backtracks: cfg.max_backtracks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalStatus {
    GradToleranceMet,
    CostChangeToleranceMet,
    MaxIters,
    LineSearchStalled,
}

impl fmt::Display for TerminalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TerminalStatus::GradToleranceMet => "GradToleranceMet",
            TerminalStatus::CostChangeToleranceMet => "CostChangeToleranceMet",
            TerminalStatus::MaxIters => "MaxIters",
            TerminalStatus::LineSearchStalled => "LineSearchStalled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub a: f64,
    pub b: f64,
    pub k1: f64,
    pub k2: f64,
    pub jf: f64,
    pub grad_norm: f64,
    /// Step that produced this row from the previous one (0 for the start).
    pub step: f64,
    pub backtracks: usize,
}

impl TraceRow {
    fn new(iter: usize, p: &DesignPoint, jf: f64, grad_norm: f64, step: f64, backtracks: usize) -> Self {
        Self {
            iter,
            a: p.a,
            b: p.b,
            k1: p.k1,
            k2: p.k2,
            jf,
            grad_norm,
            step,
            backtracks,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    pub rows: Vec<TraceRow>,
    pub status: TerminalStatus,
}

impl IterateTrace {
    /// Number of accepted steps.
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace always holds the starting row")
    }
}

#[derive(Debug, Clone)]
pub struct CcdOutcome {
    pub p_star: DesignPoint,
    pub jf_star: f64,
    pub trace: IterateTrace,
}

/// Gradient descent with Armijo steps on any objective, starting from a
/// point the caller has already checked to be feasible.
///
/// An accepted step whose cost does not actually drop below the current
/// value means the iterate has reached floating-point resolution; the loop
/// stops there since every further iteration would repeat it exactly.
pub fn minimize<O: Objective + ?Sized>(
    obj: &mut O,
    p0: &DesignPoint,
    cfg: &OptimizerConfig,
) -> Result<CcdOutcome> {
    cfg.validate()?;
    if !p0.free_mask.iter().any(|f| *f) {
        return Err(CcdError::InvalidArgument("free_mask has no free variable".into()));
    }

    let mut p = *p0;
    let (mut jf, mut g) = obj.cost_and_gradient(&p)?;
    let mut rows = vec![TraceRow::new(0, &p, jf, g.norm, 0.0, 0)];
    let mut jf_prev = -1.0;
    let mut grad_was_small = false;

    let status = loop {
        let grad_small = g.norm < cfg.eps;
        let change_small = (jf - jf_prev).abs() < cfg.eps1;
        if grad_small && change_small {
            break if grad_was_small {
                TerminalStatus::CostChangeToleranceMet
            } else {
                TerminalStatus::GradToleranceMet
            };
        }
        grad_was_small = grad_small;
        if rows.len() > cfg.max_iters {
            break TerminalStatus::MaxIters;
        }

        let step = match armijo_step(&p, jf, &g, cfg, obj)? {
            ArmijoOutcome::Stalled { .. } => break TerminalStatus::LineSearchStalled,
            ArmijoOutcome::Accepted(step) => step,
        };
        if !(step.jf < jf) {
            break if grad_small {
                TerminalStatus::GradToleranceMet
            } else {
                TerminalStatus::LineSearchStalled
            };
        }

        p = step.point;
        jf_prev = jf;
        jf = step.jf;
        g = obj.cost_and_gradient(&p)?.1;
        rows.push(TraceRow::new(rows.len(), &p, jf, g.norm, step.step, step.backtracks));
    };

    Ok(CcdOutcome {
        p_star: p,
        jf_star: jf,
        trace: IterateTrace { rows, status },
    })
}

/// Runs the co-design descent on the discretized problem. `p0` must be in
/// the feasible set; the result is re-checked before returning.
pub fn run_ccd(
    p0: &DesignPoint,
    w: &Weights,
    grid: &GridConfig,
    x0_mode: X0Mode,
    cfg: &OptimizerConfig,
) -> Result<(CcdOutcome, EvalStats)> {
    p0.validate()?;
    w.validate()?;
    grid.validate()?;
    let mut obj = CcdObjective::new(*w, *grid, x0_mode);
    let (report, _) = obj.feasibility(p0)?;
    if !report.in_d {
        return Err(CcdError::Infeasible(report.violations().join("; ")));
    }
    let outcome = minimize(&mut obj, p0, cfg)?;
    let (report, _) = obj.feasibility(&outcome.p_star)?;
    if !report.in_d {
        return Err(CcdError::Infeasible(format!(
            "descent left the feasible set: {}",
            report.violations().join("; ")
        )));
    }
    Ok((outcome, obj.stats))
}

/// Result of sweeping the grid size to match a reference initial cost.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCalibration {
    pub n: usize,
    pub jf0: f64,
    pub table: Vec<(usize, f64)>,
}

impl GridCalibration {
    pub fn relative_gap(&self, target: f64) -> f64 {
        (self.jf0 - target).abs() / target.abs()
    }
}

/// Picks the `N` in `range` whose initial cost is closest to `target`.
pub fn calibrate_grid(
    p0: &DesignPoint,
    w: &Weights,
    x0_mode: X0Mode,
    range: std::ops::RangeInclusive<usize>,
    target: f64,
) -> Result<GridCalibration> {
    let mut table = Vec::new();
    for n in range {
        let grid = GridConfig::new(n)?;
        let sys = assemble(p0, w, &grid, x0_mode)?;
        table.push((n, cost_jf(&sys, p0, w)?.jf));
    }
    let &(n, jf0) = table
        .iter()
        .min_by(|x, y| (x.1 - target).abs().total_cmp(&(y.1 - target).abs()))
        .ok_or_else(|| CcdError::InvalidArgument("empty calibration range".into()))?;
    Ok(GridCalibration { n, jf0, table })
}
