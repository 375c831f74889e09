//! Operator splitting (ADMM) on the homogeneous self-dual embedding:
//! one cached factorization of `I + A'A` plus cone projections per iteration.

use nalgebra::{Cholesky, DVector, Dyn};

use super::{dense_parts, project_dual_cone, residuals, ConicProblem, RawSolution, Settings, Status};

const RELAXATION: f64 = 1.5;
const CHECK_EVERY: usize = 10;

struct Factor {
    a: nalgebra::DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl Factor {
    /// Solves `[[I, A'], [-A, I]] (x, y) = (r1, r2)`.
    fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let x = self.chol.solve(&(r1 - self.a.transpose() * r2));
        let y = r2 + &self.a * &x;
        (x, y)
    }
}

pub(crate) fn solve(p: &ConicProblem, settings: &Settings) -> RawSolution {
    let tol = settings.target_tol.min(settings.tol);
    let (a, b, c) = dense_parts(p);
    let n = p.n_vars();
    let m = p.n_rows();
    let mut mm = a.transpose() * &a;
    for i in 0..n {
        mm[(i, i)] += 1.0;
    }
    let chol = Cholesky::new(mm).expect("I + A'A is positive definite");
    let f = Factor { a, chol };
    let (gx, gy) = f.solve(&c, &b);
    let hg = c.dot(&gx) + b.dot(&gy);
    let blocks = p.cones.blocks();

    let mut ux = DVector::zeros(n);
    let mut uy = DVector::zeros(m);
    let mut ut = 1.0f64;
    let mut vy = DVector::zeros(m);
    let mut vt = 1.0f64;
    let mut last = (ux.clone(), uy.clone(), vy.clone(), ut);

    for iter in 1..=settings.max_iters {
        // linear step (the x-part of v stays zero)
        let rx = ux.clone();
        let ry = &uy + &vy;
        let rt = ut + vt;
        let (px, py) = f.solve(&rx, &ry);
        let tt = (rt + c.dot(&px) + b.dot(&py)) / (1.0 + hg);
        let tx = &px - &gx * tt;
        let ty = &py - &gy * tt;
        // relaxation
        let rx = &tx * RELAXATION + &ux * (1.0 - RELAXATION);
        let ry = &ty * RELAXATION + &uy * (1.0 - RELAXATION);
        let rt = tt * RELAXATION + ut * (1.0 - RELAXATION);
        // projection step
        let wy = &ry - &vy;
        let mut ny = DVector::zeros(m);
        for (off, cone) in &blocks {
            let d = cone.dim();
            let pr = project_dual_cone(&wy.as_slice()[*off..off + d], cone);
            ny.as_mut_slice()[*off..off + d].copy_from_slice(&pr);
        }
        let nt = (rt - vt).max(0.0);
        ux = rx;
        vy = &vy - &ry + &ny;
        vt = vt - rt + nt;
        uy = ny;
        ut = nt;

        if iter % CHECK_EVERY != 0 && iter != settings.max_iters {
            continue;
        }
        if !ut.is_finite() || ux.iter().any(|v| !v.is_finite()) {
            let (x, y, s, t) = &last;
            return raw(x, y, s, *t, Status::NumericalError, iter);
        }
        last = (ux.clone(), uy.clone(), vy.clone(), ut);
        if settings.verbose && iter % 1000 == 0 {
            eprintln!("split {iter:6} tau {ut:.3e} kappa {vt:.3e}");
        }
        if ut > 1e-12 {
            let x: Vec<f64> = ux.iter().map(|v| v / ut).collect();
            let y: Vec<f64> = uy.iter().map(|v| v / ut).collect();
            let s: Vec<f64> = vy.iter().map(|v| v / ut).collect();
            if residuals(p, &x, &y, &s).max() <= tol {
                return raw(&ux, &uy, &vy, ut, Status::Optimal, iter);
            }
        }
        let by = b.dot(&uy);
        if by < 0.0 {
            let aty = f.a.transpose() * &uy;
            if aty.norm() / c.norm().max(1.0) / (-by) <= tol {
                return raw(&ux, &uy, &vy, 1.0, Status::PrimalInfeasible, iter);
            }
        }
        let cx = c.dot(&ux);
        if cx < 0.0 {
            let r = &f.a * &ux + &vy;
            if r.norm() / b.norm().max(1.0) / (-cx) <= tol {
                return raw(&ux, &uy, &vy, 1.0, Status::DualInfeasible, iter);
            }
        }
    }
    let t = if ut > 1e-12 { ut } else { 1.0 };
    raw(&ux, &uy, &vy, t, Status::MaxIters, settings.max_iters)
}

fn raw(x: &DVector<f64>, y: &DVector<f64>, s: &DVector<f64>, t: f64, status: Status, iters: usize) -> RawSolution {
    RawSolution {
        status,
        x: x.iter().map(|v| v / t).collect(),
        y: y.iter().map(|v| v / t).collect(),
        s: s.iter().map(|v| v / t).collect(),
        iterations: iters,
    }
}
