//! Brute-force routing sweeps, drop/occupancy trade-off curves and
//! performance regions.
//!
//! Every grid point is an independent [`evaluate`] call, run in parallel and
//! collected in grid order.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{ParamError, SystemMetrics, SystemParams, NUM_FINITE};
use crate::pipeline::{evaluate, AnalysisError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("grid step must lie in (0, 0.5], got {0}")]
    Step(f64),
    #[error("weight must lie in [0, 1], got {0}")]
    Weight(f64),
    #[error("grid must not be empty")]
    EmptyGrid,
    #[error("every grid point is unstable; the objective needs a finite mean queue length")]
    AllUnstable,
    #[error(transparent)]
    Invalid(#[from] ParamError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// System drop rate.
    Drop,
    /// Mean number of tasks in the system.
    Tasks,
    /// `w * drop + (1 - w) * tasks`.
    Weighted(f64),
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Drop => "drop",
            Objective::Tasks => "tasks",
            Objective::Weighted(_) => "weighted",
        }
    }

    /// `None` when the objective needs `Q6` and `Q6` is unstable.
    pub fn value(&self, metrics: &SystemMetrics) -> Option<f64> {
        match *self {
            Objective::Drop => Some(metrics.drop_total),
            Objective::Tasks => metrics.mean_total,
            Objective::Weighted(w) => metrics.mean_total.map(|q| w * metrics.drop_total + (1.0 - w) * q),
        }
    }

    fn validate(&self) -> Result<(), OptimizeError> {
        match *self {
            Objective::Weighted(w) if !(0.0..=1.0).contains(&w) => Err(OptimizeError::Weight(w)),
            _ => Ok(()),
        }
    }
}

/// `{0, step, ..., 1}`. When `1 / step` is (numerically) an integer `n`
/// the points are `k / n`, so halving the step gives an exact superset.
pub fn alpha_grid(step: f64) -> Result<Vec<f64>, OptimizeError> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(OptimizeError::Step(step));
    }
    let n = (1.0 / step).round();
    if ((1.0 / step) - n).abs() < 1e-9 {
        let n = n as usize;
        return Ok((0..=n).map(|k| k as f64 / n as f64).collect());
    }
    let mut grid: Vec<f64> = (0..).map(|k| k as f64 * step).take_while(|&a| a < 1.0).collect();
    grid.push(1.0);
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub alpha: f64,
    pub metrics: SystemMetrics,
    pub stable: bool,
    /// `None` for points excluded by instability.
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub objective: Objective,
    pub points: Vec<SweepPoint>,
    /// Index into `points` of the minimizer. Ties go to the smaller alpha.
    pub best: usize,
}

impl SweepResult {
    pub fn best_alpha(&self) -> f64 {
        self.points[self.best].alpha
    }

    pub fn best_value(&self) -> f64 {
        self.points[self.best].objective.expect("minimizer has a value")
    }

    pub fn excluded(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.objective.is_none())
    }
}

fn evaluate_alphas(base: &SystemParams, alphas: &[f64]) -> Result<Vec<(f64, SystemMetrics, bool)>, OptimizeError> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let a = evaluate(&base.with_alpha(alpha))?;
            Ok((alpha, a.metrics, a.is_stable()))
        })
        .collect()
}

/// Minimize `objective` over [`alpha_grid`]`(step)`.
pub fn sweep_alpha(base: &SystemParams, step: f64, objective: Objective) -> Result<SweepResult, OptimizeError> {
    sweep_alpha_over(base, &alpha_grid(step)?, objective)
}

/// Minimize `objective` over an explicit list of alphas.
pub fn sweep_alpha_over(
    base: &SystemParams,
    alphas: &[f64],
    objective: Objective,
) -> Result<SweepResult, OptimizeError> {
    objective.validate()?;
    if alphas.is_empty() {
        return Err(OptimizeError::EmptyGrid);
    }
    base.validate()?;
    let points: Vec<SweepPoint> = evaluate_alphas(base, alphas)?
        .into_iter()
        .map(|(alpha, metrics, stable)| SweepPoint {
            alpha,
            objective: objective.value(&metrics),
            metrics,
            stable,
        })
        .collect();
    let mut best: Option<usize> = None;
    for (i, p) in points.iter().enumerate() {
        let Some(v) = p.objective else { continue };
        let better = match best {
            None => true,
            Some(b) => v < points[b].objective.unwrap() || (v == points[b].objective.unwrap() && p.alpha < points[b].alpha),
        };
        if better {
            best = Some(i);
        }
    }
    let best = best.ok_or(OptimizeError::AllUnstable)?;
    Ok(SweepResult { objective, points, best })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub alpha: f64,
    pub drop_total: f64,
    /// `None` when `Q6` is unstable.
    pub mean_total: Option<f64>,
    /// Not dominated in the (drop, mean) plane. Unstable points never are.
    pub pareto: bool,
}

/// `(alpha, P_D, Qbar)` over [`alpha_grid`]`(step)` with Pareto flags.
pub fn tradeoff_curve(base: &SystemParams, step: f64) -> Result<Vec<TradeoffPoint>, OptimizeError> {
    base.validate()?;
    let evaluated = evaluate_alphas(base, &alpha_grid(step)?)?;
    let mut points: Vec<TradeoffPoint> = evaluated
        .into_iter()
        .map(|(alpha, m, _)| TradeoffPoint { alpha, drop_total: m.drop_total, mean_total: m.mean_total, pareto: false })
        .collect();
    let flags = pareto_flags(&points.iter().map(|p| p.mean_total.map(|q| (p.drop_total, q))).collect::<Vec<_>>());
    for (p, f) in points.iter_mut().zip(flags) {
        p.pareto = f;
    }
    Ok(points)
}

/// Pareto-efficient points for minimization of both coordinates. `None`
/// entries are never efficient and dominate nothing.
pub fn pareto_flags(points: &[Option<(f64, f64)>]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| points[i].is_some()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (points[i].unwrap(), points[j].unwrap());
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
    });
    let mut flags = vec![false; points.len()];
    // Sweep by increasing first coordinate; a point is efficient iff its
    // second coordinate beats every point with a smaller first coordinate.
    let mut best_second = f64::INFINITY;
    let mut k = 0;
    while k < order.len() {
        let first = points[order[k]].unwrap().0;
        let mut end = k;
        while end < order.len() && points[order[end]].unwrap().0 == first {
            end += 1;
        }
        // Within an equal-first group only the smallest second survives.
        let group_min = points[order[k]].unwrap().1;
        if group_min < best_second {
            for &i in &order[k..end] {
                flags[i] = points[i].unwrap().1 == group_min;
            }
            best_second = group_min;
        }
        k = end;
    }
    flags
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPoint {
    /// Common service probability of `Q1..Q5`.
    pub mu: f64,
    /// Common buffer capacity of `Q1..Q5`.
    pub buffer: usize,
    pub throughput: f64,
    /// `None` when unstable.
    pub delay: Option<f64>,
    pub drop_total: f64,
    pub stable: bool,
}

/// The parameter set used for one region cell: `mu` on `Q1..Q5`, `buffer`
/// on every finite queue, everything else from `base`.
pub fn region_params(base: &SystemParams, mu: f64, buffer: usize) -> SystemParams {
    let mut params = *base;
    params.mu[..NUM_FINITE].fill(mu);
    params.buffer = [buffer; NUM_FINITE];
    params
}

/// Every `(mu, M)` combination, `mu`-major. Unstable cells are kept with
/// `stable = false`.
pub fn performance_region(
    mu_list: &[f64],
    buffer_list: &[usize],
    base: &SystemParams,
) -> Result<Vec<RegionPoint>, OptimizeError> {
    let cells: Vec<(f64, usize)> =
        mu_list.iter().flat_map(|&mu| buffer_list.iter().map(move |&m| (mu, m))).collect();
    if cells.is_empty() {
        return Err(OptimizeError::EmptyGrid);
    }
    cells
        .par_iter()
        .map(|&(mu, buffer)| {
            let a = evaluate(&region_params(base, mu, buffer))?;
            Ok(RegionPoint {
                mu,
                buffer,
                throughput: a.metrics.throughput,
                delay: a.metrics.delay,
                drop_total: a.metrics.drop_total,
                stable: a.is_stable(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub mu1: f64,
    pub mu2: f64,
    pub best_alpha: f64,
    pub best_value: f64,
}

/// Default step of the `(mu1, mu2)` surface.
pub const SURFACE_STEP: f64 = 0.05;

/// Optimal alpha over a `(mu1, mu2)` grid `{step, 2 step, ..., 1}^2`.
/// Cells where every alpha is unstable are skipped.
pub fn optimal_alpha_surface(
    base: &SystemParams,
    mu_step: f64,
    alpha_step: f64,
    objective: Objective,
) -> Result<Vec<SurfacePoint>, OptimizeError> {
    let mus: Vec<f64> = alpha_grid(mu_step)?.into_iter().filter(|&m| m > 0.0).collect();
    let mut out = Vec::with_capacity(mus.len() * mus.len());
    for &mu1 in &mus {
        for &mu2 in &mus {
            let mut params = *base;
            params.mu[0] = mu1;
            params.mu[1] = mu2;
            match sweep_alpha(&params, alpha_step, objective) {
                Ok(s) => out.push(SurfacePoint { mu1, mu2, best_alpha: s.best_alpha(), best_value: s.best_value() }),
                Err(OptimizeError::AllUnstable) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
