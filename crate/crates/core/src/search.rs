//! One-dimensional search over the CU SINR split `gamma`, shared by the pipelines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{Settings, Status};
use crate::encoding::ObjectiveForm;
use crate::error::{Error, Result};
use crate::linalg::{CVector, HermitianMatrix};
use crate::model::{rank_one_construct, Design, GammaInterval};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone)]
pub struct SearchSettings {
    /// Uniform grid points over the admissible interval.
    pub grid_points: usize,
    /// Golden-section iterations around the best grid point (0 disables).
    pub refine_iters: usize,
    pub solver: Settings,
    pub objective_form: ObjectiveForm,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            grid_points: 100,
            refine_iters: 12,
            solver: Settings::default(),
            objective_form: ObjectiveForm::Compressed,
        }
    }
}

impl SearchSettings {
    pub fn with_grid(points: usize) -> Self {
        Self { grid_points: points, ..Self::default() }
    }
}

/// Outcome of one conic solve at a fixed `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub gamma: f64,
    /// Objective value, `None` when the solve did not certify optimality.
    pub value: Option<f64>,
    pub status: Status,
}

/// Best point found together with the caller's payload at that point.
#[derive(Debug, Clone)]
pub struct SearchResult<T> {
    pub gamma: f64,
    pub value: f64,
    pub payload: T,
    pub evaluations: Vec<GridPoint>,
}

/// Evaluation at one `gamma`: status, and on success the value plus a payload.
pub type Evaluation<T> = (Status, Option<(f64, T)>);

/// Grid search over `interval`, then golden-section refinement inside the
/// bracket of the best grid point. Failed solves count as `+inf` and are never
/// re-evaluated.
pub fn search_gamma<T, F>(interval: GammaInterval, settings: &SearchSettings, eval: F) -> Result<SearchResult<T>>
where
    T: Send,
    F: Fn(f64) -> Result<Evaluation<T>> + Sync,
{
    if settings.grid_points == 0 {
        return Err(Error::InvalidInput("gamma grid needs at least one point".into()));
    }
    let grid = interval.grid(settings.grid_points);
    let results: Vec<(f64, Evaluation<T>)> = grid
        .par_iter()
        .map(|&g| eval(g).map(|e| (g, e)))
        .collect::<Result<_>>()?;

    let mut evaluations: Vec<GridPoint> = Vec::with_capacity(results.len());
    let mut best: Option<(usize, f64, f64, T)> = None;
    for (i, (gamma, (status, out))) in results.into_iter().enumerate() {
        evaluations.push(GridPoint { gamma, value: out.as_ref().map(|o| o.0), status });
        if let Some((v, payload)) = out {
            if best.as_ref().is_none_or(|b| v < b.2) {
                best = Some((i, gamma, v, payload));
            }
        }
    }
    let Some((idx, mut g_best, mut v_best, mut p_best)) = best else {
        return Err(Error::Infeasible(format!(
            "no feasible point on the {}-point gamma grid over [{:.4}, {:.4}]",
            grid.len(),
            interval.lo,
            interval.hi
        )));
    };

    if settings.refine_iters > 0 && grid.len() >= 3 {
        let mut lo = grid[idx.saturating_sub(1)];
        let mut hi = grid[(idx + 1).min(grid.len() - 1)];
        // neighbours that failed bound the bracket but are not re-solved
        let mut f = |g: f64, evaluations: &mut Vec<GridPoint>| -> Result<f64> {
            let (status, out) = eval(g)?;
            evaluations.push(GridPoint { gamma: g, value: out.as_ref().map(|o| o.0), status });
            Ok(match out {
                Some((v, p)) => {
                    if v < v_best {
                        v_best = v;
                        g_best = g;
                        p_best = p;
                    }
                    v
                }
                None => f64::INFINITY,
            })
        };
        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let mut f1 = f(x1, &mut evaluations)?;
        let mut f2 = f(x2, &mut evaluations)?;
        for _ in 2..settings.refine_iters {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INV_PHI * (hi - lo);
                f1 = f(x1, &mut evaluations)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INV_PHI * (hi - lo);
                f2 = f(x2, &mut evaluations)?;
            }
        }
    }
    Ok(SearchResult { gamma: g_best, value: v_best, payload: p_best, evaluations })
}

/// Pipeline output: the rank-one design, the relaxed solver point it came
/// from, and the search trace.
#[derive(Debug, Clone)]
pub struct Solved {
    pub design: Design,
    pub relaxed: Design,
    /// Beampattern objective of `design` (equal to that of `relaxed`).
    pub objective: f64,
    pub evaluations: Vec<GridPoint>,
}

/// Rank-one finish of a relaxed point. When the relaxed information
/// covariance carries no power towards the user (possible only at
/// `gamma = 0`), all power moves into `S` and `W* = 0`.
pub fn finish_rank_one(relaxed: &Design, g: &CVector) -> Result<Design> {
    let (w, s) = match rank_one_construct(&relaxed.w, &relaxed.s, g) {
        Ok(pair) => pair,
        Err(Error::Construction(_)) if relaxed.gamma <= 0.0 => {
            (HermitianMatrix::zeros(relaxed.w.n()), relaxed.w.add(&relaxed.s))
        }
        Err(e) => return Err(e),
    };
    Ok(Design { w, s, eta: relaxed.eta, gamma: relaxed.gamma, rank_one: true })
}
