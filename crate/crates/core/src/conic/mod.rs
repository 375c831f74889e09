//! Standard-form cone programs
//!
//! ```text
//! minimize c'x  subject to  A x + s = b,  s in K
//! ```
//!
//! with `K` a product of zero, nonnegative, second-order and PSD cones. The
//! dual is `maximize -b'y` subject to `A'y + c = 0`, `y in K*`. PSD blocks are
//! stored as scaled lower-triangular vectors (see [`cones::svec`]).
//!
//! Two algorithms are provided: a homogeneous self-dual interior-point method
//! (the default) and an operator-splitting method.

pub mod cones;
mod equilibrate;
mod ipm;
mod splitting;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use cones::{project_cone, project_dual_cone, smat, svec, svec_index, svec_len};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    Zero(usize),
    NonNeg(usize),
    Soc(usize),
    /// Side length of the symmetric matrix.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::NonNeg(d) | Cone::Soc(d) => d,
            Cone::Psd(side) => svec_len(side),
        }
    }
}

/// Ordered list of cone blocks; rows of `A` follow the same order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec(pub Vec<Cone>);

impl ConeSpec {
    pub fn dim(&self) -> usize {
        self.0.iter().map(Cone::dim).sum()
    }

    /// `(offset, cone)` pairs.
    pub fn blocks(&self) -> Vec<(usize, Cone)> {
        let mut off = 0;
        self.0
            .iter()
            .map(|c| {
                let o = off;
                off += c.dim();
                (o, *c)
            })
            .collect()
    }

    /// Total dimension per cone family: (zero, nonneg, soc dims, psd sides).
    pub fn tally(&self) -> ConeTally {
        let mut t = ConeTally::default();
        for c in &self.0 {
            match *c {
                Cone::Zero(d) => t.zero += d,
                Cone::NonNeg(d) => t.nonneg += d,
                Cone::Soc(d) => t.soc.push(d),
                Cone::Psd(s) => t.psd.push(s),
            }
        }
        t
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConeTally {
    pub zero: usize,
    pub nonneg: usize,
    pub soc: Vec<usize>,
    pub psd: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub val: f64,
}

#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    pub a: Vec<Triplet>,
    pub b: Vec<f64>,
    pub cones: ConeSpec,
}

impl ConicProblem {
    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_rows();
        let n = self.n_vars();
        if self.cones.dim() != m {
            return Err(Error::InvalidInput(format!(
                "cone dimension {} differs from row count {m}",
                self.cones.dim()
            )));
        }
        if self.cones.0.iter().any(|c| matches!(c, Cone::Psd(0) | Cone::Soc(0))) {
            return Err(Error::InvalidInput("empty cone block".into()));
        }
        for t in &self.a {
            if t.row >= m || t.col >= n {
                return Err(Error::InvalidInput(format!(
                    "entry ({}, {}) outside a {m}x{n} operator",
                    t.row, t.col
                )));
            }
            if !t.val.is_finite() {
                return Err(Error::InvalidInput("non-finite operator entry".into()));
            }
        }
        if self.b.iter().chain(&self.c).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite problem data".into()));
        }
        Ok(())
    }

    pub fn dense_a(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_rows(), self.n_vars());
        for t in &self.a {
            a[(t.row, t.col)] += t.val;
        }
        a
    }

    /// Plain-text dump: header "n m", triplets "i j value", then b, c and cones.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n_vars(), self.n_rows());
        for t in &self.a {
            let _ = writeln!(s, "{} {} {:.17e}", t.row, t.col, t.val);
        }
        let _ = writeln!(s, "b");
        for v in &self.b {
            let _ = writeln!(s, "{v:.17e}");
        }
        let _ = writeln!(s, "c");
        for v in &self.c {
            let _ = writeln!(s, "{v:.17e}");
        }
        let _ = writeln!(s, "cones");
        for c in &self.cones.0 {
            let _ = match c {
                Cone::Zero(d) => writeln!(s, "zero {d}"),
                Cone::NonNeg(d) => writeln!(s, "nonneg {d}"),
                Cone::Soc(d) => writeln!(s, "soc {d}"),
                Cone::Psd(d) => writeln!(s, "psd {d}"),
            };
        }
        s
    }

    pub fn dump_to_file(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.dump().as_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIters,
    NumericalError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    InteriorPoint,
    Splitting,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub algorithm: Algorithm,
    /// Acceptance tolerance on the relative residuals and gap.
    pub tol: f64,
    /// Interior point keeps iterating towards this tighter tolerance while it makes progress.
    pub target_tol: f64,
    pub max_iters: usize,
    pub equilibrate: bool,
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::InteriorPoint,
            tol: 1e-6,
            target_tol: 1e-9,
            max_iters: 100,
            equilibrate: true,
            verbose: false,
        }
    }
}

impl Settings {
    pub fn splitting() -> Self {
        Self {
            algorithm: Algorithm::Splitting,
            tol: 1e-6,
            target_tol: 1e-7,
            max_iters: 100_000,
            equilibrate: true,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// `c'x` for optimal solutions.
    pub objective: f64,
    pub residuals: Residuals,
    /// Residual of the certificate's defining equations for infeasible statuses.
    pub certificate_residual: f64,
    pub iterations: usize,
}

/// Result of an inner algorithm on the (possibly equilibrated) problem.
pub(crate) struct RawSolution {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub iterations: usize,
}

pub fn solve(problem: &ConicProblem, settings: &Settings) -> Result<ConicSolution> {
    problem.validate()?;
    let eq = equilibrate::Equilibration::new(problem, settings.equilibrate);
    let scaled = eq.scaled_problem(problem);
    let raw = match settings.algorithm {
        Algorithm::InteriorPoint => ipm::solve(&scaled, settings),
        Algorithm::Splitting => splitting::solve(&scaled, settings),
    };
    let (x, y, s) = eq.unscale(&raw.x, &raw.y, &raw.s);
    Ok(classify(problem, settings, raw.status, x, y, s, raw.iterations))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(p: &ConicProblem, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.n_rows()];
    for t in &p.a {
        out[t.row] += t.val * x[t.col];
    }
    out
}

fn matvec_t(p: &ConicProblem, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.n_vars()];
    for t in &p.a {
        out[t.col] += t.val * y[t.row];
    }
    out
}

/// Relative residuals of a candidate primal-dual point.
pub fn residuals(p: &ConicProblem, x: &[f64], y: &[f64], s: &[f64]) -> Residuals {
    let ax = matvec(p, x);
    let pr: Vec<f64> = ax.iter().zip(s).zip(&p.b).map(|((a, s), b)| a + s - b).collect();
    let aty = matvec_t(p, y);
    let dr: Vec<f64> = aty.iter().zip(&p.c).map(|(a, c)| a + c).collect();
    let cx = dot(&p.c, x);
    let by = dot(&p.b, y);
    Residuals {
        primal: norm(&pr) / (1.0 + norm(&p.b)),
        dual: norm(&dr) / (1.0 + norm(&p.c)),
        gap: (cx + by).abs() / (1.0 + cx.abs() + by.abs()),
    }
}

/// Distance of `s` from `K` and of `y` from `K*`, relative to their norms.
pub fn cone_violation(p: &ConicProblem, y: &[f64], s: &[f64]) -> (f64, f64) {
    let mut ds = 0.0;
    let mut dy = 0.0;
    for (off, cone) in p.cones.blocks() {
        let d = cone.dim();
        let sb = &s[off..off + d];
        let yb = &y[off..off + d];
        let ps = project_cone(sb, &cone);
        let py = project_dual_cone(yb, &cone);
        ds += sb.iter().zip(&ps).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        dy += yb.iter().zip(&py).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    (ds.sqrt() / (1.0 + norm(s)), dy.sqrt() / (1.0 + norm(y)))
}

fn classify(
    p: &ConicProblem,
    settings: &Settings,
    raw_status: Status,
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    iterations: usize,
) -> ConicSolution {
    let res = residuals(p, &x, &y, &s);
    let finite = x.iter().chain(&y).chain(&s).all(|v| v.is_finite());
    let mut sol = ConicSolution {
        status: raw_status,
        objective: dot(&p.c, &x),
        x,
        y,
        s,
        residuals: res,
        certificate_residual: 0.0,
        iterations,
    };
    if !finite {
        sol.status = Status::NumericalError;
        return sol;
    }
    match raw_status {
        Status::PrimalInfeasible => {
            // normalize so that b'y = -1
            let by = dot(&p.b, &sol.y);
            if by < 0.0 {
                sol.y.iter_mut().for_each(|v| *v /= -by);
                let aty = matvec_t(p, &sol.y);
                sol.certificate_residual = norm(&aty) / (1.0 + norm(&p.c));
            } else {
                sol.status = Status::NumericalError;
            }
            sol.objective = f64::INFINITY;
        }
        Status::DualInfeasible => {
            let cx = dot(&p.c, &sol.x);
            if cx < 0.0 {
                sol.x.iter_mut().for_each(|v| *v /= -cx);
                sol.s.iter_mut().for_each(|v| *v /= -cx);
                let ax = matvec(p, &sol.x);
                let r: Vec<f64> = ax.iter().zip(&sol.s).map(|(a, s)| a + s).collect();
                sol.certificate_residual = norm(&r) / (1.0 + norm(&p.b));
            } else {
                sol.status = Status::NumericalError;
            }
            sol.objective = f64::NEG_INFINITY;
        }
        _ => {
            sol.status = if res.max() <= settings.tol {
                Status::Optimal
            } else if raw_status == Status::Optimal {
                Status::MaxIters
            } else {
                raw_status
            };
        }
    }
    sol
}

/// Dense column-major helpers shared by the algorithms.
pub(crate) fn dense_parts(p: &ConicProblem) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    (
        p.dense_a(),
        DVector::from_column_slice(&p.b),
        DVector::from_column_slice(&p.c),
    )
}

#[cfg(test)]
mod tests;
