//! Homogeneous self-dual primal-dual interior-point method with
//! Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
//!
//! Internally the problem is split into equality rows `A x = b` (zero cones)
//! and conic rows `G x + s = h`, `s in K`, with dual multipliers `y`, `z`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::cones::{Block, Kind, Op, Scaling};
use super::{Cone, ConicProblem, RawSolution, Settings, Status};

const STEP_FRACTION: f64 = 0.99;
const STALL_LIMIT: usize = 5;

struct Data {
    n: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
    g: DMatrix<f64>,
    h: DVector<f64>,
    c: DVector<f64>,
    blocks: Vec<Block>,
    /// Active columns of `G` per block and the corresponding dense slice.
    block_cols: Vec<Vec<usize>>,
    block_g: Vec<DMatrix<f64>>,
    ata: DMatrix<f64>,
    eq_rows: Vec<usize>,
    cone_rows: Vec<usize>,
    degree: usize,
}

impl Data {
    fn new(p: &ConicProblem) -> Self {
        let n = p.n_vars();
        let mut eq_rows = Vec::new();
        let mut cone_rows = Vec::new();
        let mut blocks = Vec::new();
        for (off, cone) in p.cones.blocks() {
            let d = cone.dim();
            let kind = match cone {
                Cone::Zero(_) => {
                    eq_rows.extend(off..off + d);
                    continue;
                }
                Cone::NonNeg(_) => Kind::NonNeg,
                Cone::Soc(_) => Kind::Soc,
                Cone::Psd(side) => Kind::Psd(side),
            };
            blocks.push(Block { kind, off: cone_rows.len(), dim: d });
            cone_rows.extend(off..off + d);
        }
        let mut row_map = vec![(false, 0usize); p.n_rows()];
        for (k, &r) in eq_rows.iter().enumerate() {
            row_map[r] = (true, k);
        }
        for (k, &r) in cone_rows.iter().enumerate() {
            row_map[r] = (false, k);
        }
        let mut a = DMatrix::zeros(eq_rows.len(), n);
        let mut g = DMatrix::zeros(cone_rows.len(), n);
        for t in &p.a {
            let (is_eq, k) = row_map[t.row];
            if is_eq {
                a[(k, t.col)] += t.val;
            } else {
                g[(k, t.col)] += t.val;
            }
        }
        let b = DVector::from_iterator(eq_rows.len(), eq_rows.iter().map(|&r| p.b[r]));
        let h = DVector::from_iterator(cone_rows.len(), cone_rows.iter().map(|&r| p.b[r]));
        let c = DVector::from_column_slice(&p.c);
        let mut block_cols = Vec::with_capacity(blocks.len());
        let mut block_g = Vec::with_capacity(blocks.len());
        for bl in &blocks {
            let cols: Vec<usize> = (0..n)
                .filter(|&j| bl.range().any(|i| g[(i, j)] != 0.0))
                .collect();
            let gb = DMatrix::from_fn(bl.dim, cols.len(), |i, k| g[(bl.off + i, cols[k])]);
            block_cols.push(cols);
            block_g.push(gb);
        }
        let ata = a.transpose() * &a;
        let degree = blocks.iter().map(Block::degree).sum();
        Self {
            n,
            a,
            b,
            g,
            h,
            c,
            blocks,
            block_cols,
            block_g,
            ata,
            eq_rows,
            cone_rows,
            degree,
        }
    }

    fn m_cone(&self) -> usize {
        self.h.len()
    }
}

fn slice(v: &DVector<f64>, bl: &Block) -> Vec<f64> {
    v.as_slice()[bl.range()].to_vec()
}

fn put(v: &mut DVector<f64>, bl: &Block, x: &[f64]) {
    v.as_mut_slice()[bl.range()].copy_from_slice(x);
}

/// Applies a per-block map to a cone-space vector.
fn blockwise(
    d: &Data,
    v: &DVector<f64>,
    mut f: impl FnMut(usize, &Block, &[f64]) -> Vec<f64>,
) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for (k, bl) in d.blocks.iter().enumerate() {
        let r = f(k, bl, &v.as_slice()[bl.range()]);
        put(&mut out, bl, &r);
    }
    out
}

fn identity_scalings(d: &Data) -> Vec<Scaling> {
    d.blocks
        .iter()
        .map(|bl| match bl.kind {
            Kind::NonNeg => Scaling::NonNeg { w: vec![1.0; bl.dim] },
            Kind::Soc => {
                let mut wbar = vec![0.0; bl.dim];
                wbar[0] = 1.0;
                Scaling::Soc { beta: 1.0, wbar }
            }
            Kind::Psd(side) => Scaling::Psd {
                side,
                r: DMatrix::identity(side, side),
                rinv: DMatrix::identity(side, side),
            },
        })
        .collect()
}

/// Factored reduced KKT system for a fixed scaling.
struct Kkt<'a> {
    d: &'a Data,
    w: &'a [Scaling],
    chol: Cholesky<f64, Dyn>,
    x_at: DMatrix<f64>,
    schur: Option<Cholesky<f64, Dyn>>,
}

impl<'a> Kkt<'a> {
    fn factor(d: &'a Data, w: &'a [Scaling]) -> Option<Self> {
        let n = d.n;
        let mut hm = d.ata.clone();
        for (k, sc) in w.iter().enumerate() {
            let cols = &d.block_cols[k];
            if cols.is_empty() {
                continue;
            }
            let bmat = sc.apply_columns(&d.block_g[k], Op::WInvT);
            let gram = bmat.transpose() * &bmat;
            for (i, &ci) in cols.iter().enumerate() {
                for (j, &cj) in cols.iter().enumerate() {
                    hm[(ci, cj)] += gram[(i, j)];
                }
            }
        }
        let scale = (0..n).map(|i| hm[(i, i)]).fold(1e-300f64, f64::max);
        let mut reg = 1e-13 * scale.max(1.0);
        let chol = loop {
            let mut hr = hm.clone();
            for i in 0..n {
                hr[(i, i)] += reg;
            }
            if let Some(ch) = Cholesky::new(hr) {
                break ch;
            }
            reg *= 100.0;
            if reg > 1e-2 * scale.max(1.0) {
                return None;
            }
        };
        let p = d.a.nrows();
        let (x_at, schur) = if p > 0 {
            let x_at = chol.solve(&d.a.transpose());
            let s = &d.a * &x_at;
            let sscale = (0..p).map(|i| s[(i, i)]).fold(1e-300f64, f64::max);
            let mut sreg = 1e-14 * sscale;
            let sch = loop {
                let mut sr = s.clone();
                for i in 0..p {
                    sr[(i, i)] += sreg;
                }
                if let Some(ch) = Cholesky::new(sr) {
                    break ch;
                }
                sreg *= 100.0;
                if sreg > 1e-2 * sscale {
                    return None;
                }
            };
            (x_at, Some(sch))
        } else {
            (DMatrix::zeros(n, 0), None)
        };
        Some(Self { d, w, chol, x_at, schur })
    }

    /// `W^{-1} W^{-T} v` blockwise.
    fn inv_wtw(&self, v: &DVector<f64>) -> DVector<f64> {
        blockwise(self.d, v, |k, _, x| {
            let t = self.w[k].apply(x, Op::WInvT);
            self.w[k].apply(&t, Op::WInv)
        })
    }

    fn wtw(&self, v: &DVector<f64>) -> DVector<f64> {
        blockwise(self.d, v, |k, _, x| {
            let t = self.w[k].apply(x, Op::W);
            self.w[k].apply(&t, Op::WT)
        })
    }

    fn solve_once(
        &self,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let d = self.d;
        let t3 = self.inv_wtw(r3);
        let mut rhs = r1 + d.g.transpose() * t3;
        if d.a.nrows() > 0 {
            rhs += d.a.transpose() * r2;
        }
        let u = self.chol.solve(&rhs);
        let (dx, dy) = match &self.schur {
            Some(s) => {
                let dy = s.solve(&(&d.a * &u - r2));
                (u - &self.x_at * &dy, dy)
            }
            None => (u, DVector::zeros(0)),
        };
        let dz = self.inv_wtw(&(&d.g * &dx - r3));
        (dx, dy, dz)
    }

    /// Solves `[[0, A', G'], [A, 0, 0], [G, 0, -W'W]] [x; y; z] = [r1; r2; r3]`
    /// with a few steps of iterative refinement.
    fn solve(
        &self,
        r1: &DVector<f64>,
        r2: &DVector<f64>,
        r3: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let d = self.d;
        let (mut x, mut y, mut z) = self.solve_once(r1, r2, r3);
        let rnorm = (r1.norm_squared() + r2.norm_squared() + r3.norm_squared()).sqrt();
        let mut prev = f64::INFINITY;
        for _ in 0..3 {
            let mut e1 = r1 - d.g.transpose() * &z;
            if d.a.nrows() > 0 {
                e1 -= d.a.transpose() * &y;
            }
            let e2 = if d.a.nrows() > 0 { r2 - &d.a * &x } else { DVector::zeros(0) };
            let e3 = r3 - (&d.g * &x - self.wtw(&z));
            let en = (e1.norm_squared() + e2.norm_squared() + e3.norm_squared()).sqrt();
            if en <= 1e-15 * rnorm.max(1e-300) || en >= prev {
                break;
            }
            prev = en;
            let (cx, cy, cz) = self.solve_once(&e1, &e2, &e3);
            x += cx;
            y += cy;
            z += cz;
        }
        (x, y, z)
    }
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

struct Metrics {
    pres: f64,
    dres: f64,
    gap: f64,
    pinf: Option<f64>,
    dinf: Option<f64>,
}

impl Metrics {
    fn opt(&self) -> f64 {
        self.pres.max(self.dres).max(self.gap)
    }
}

fn metrics(d: &Data, it: &Iterate) -> Metrics {
    let ax = &d.a * &it.x;
    let gx = &d.g * &it.x;
    let aty = d.a.transpose() * &it.y;
    let gtz = d.g.transpose() * &it.z;
    let ry = &ax - &d.b * it.tau;
    let rz = &gx + &it.s - &d.h * it.tau;
    let rx = &aty + &gtz + &d.c * it.tau;
    let bh = (d.b.norm_squared() + d.h.norm_squared()).sqrt();
    let cn = d.c.norm();
    let cx = d.c.dot(&it.x);
    let by = d.b.dot(&it.y) + d.h.dot(&it.z);
    let pres = (ry.norm_squared() + rz.norm_squared()).sqrt() / it.tau / (1.0 + bh);
    let dres = rx.norm() / it.tau / (1.0 + cn);
    let gap = (cx + by).abs() / it.tau / (1.0 + cx.abs() / it.tau + by.abs() / it.tau);
    let pinf = (by < 0.0).then(|| (&aty + &gtz).norm() / cn.max(1.0) / (-by));
    let dinf = (cx < 0.0).then(|| {
        let r = (ax.norm_squared() + (&gx + &it.s).norm_squared()).sqrt();
        r / bh.max(1.0) / (-cx)
    });
    Metrics { pres, dres, gap, pinf, dinf }
}

fn initial_point(d: &Data) -> Option<Iterate> {
    let w = identity_scalings(d);
    let kkt = Kkt::factor(d, &w)?;
    let n = d.n;
    let p = d.a.nrows();
    let m = d.m_cone();
    let (x, _, zp) = kkt.solve(&DVector::zeros(n), &d.b, &d.h);
    let mut s = -zp;
    let (_, y, mut z) = kkt.solve(&(-&d.c), &DVector::zeros(p), &DVector::zeros(m));
    for v in [&mut s, &mut z] {
        let nrm = v.norm();
        let t = d
            .blocks
            .iter()
            .map(|bl| bl.max_violation(&slice(v, bl)))
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = if t >= -1e-8 * nrm.max(1.0) { 1.0 + t } else { 0.0 };
        if shift != 0.0 {
            for bl in &d.blocks {
                let mut e = vec![0.0; bl.dim];
                bl.identity(&mut e);
                for (i, ei) in e.iter().enumerate() {
                    v[bl.off + i] += shift * ei;
                }
            }
        }
    }
    Some(Iterate { x, y, z, s, tau: 1.0, kappa: 1.0 })
}

fn to_raw(d: &Data, p: &ConicProblem, it: &Iterate, status: Status, iters: usize, normalize: bool) -> RawSolution {
    let f = if normalize { 1.0 / it.tau } else { 1.0 };
    let mut y = vec![0.0; p.n_rows()];
    let mut s = vec![0.0; p.n_rows()];
    for (k, &r) in d.eq_rows.iter().enumerate() {
        y[r] = it.y[k] * f;
    }
    for (k, &r) in d.cone_rows.iter().enumerate() {
        y[r] = it.z[k] * f;
        s[r] = it.s[k] * f;
    }
    RawSolution {
        status,
        x: it.x.iter().map(|v| v * f).collect(),
        y,
        s,
        iterations: iters,
    }
}

pub(crate) fn solve(p: &ConicProblem, settings: &Settings) -> RawSolution {
    let d = Data::new(p);
    let Some(mut it) = initial_point(&d) else {
        let zero = Iterate {
            x: DVector::zeros(d.n),
            y: DVector::zeros(d.a.nrows()),
            z: DVector::zeros(d.m_cone()),
            s: DVector::zeros(d.m_cone()),
            tau: 1.0,
            kappa: 1.0,
        };
        return to_raw(&d, p, &zero, Status::NumericalError, 0, true);
    };
    let target = settings.target_tol.min(settings.tol);
    let mut best: Option<(f64, Iterate)> = None;
    let mut stall = 0usize;

    for iter in 0..=settings.max_iters {
        let m = metrics(&d, &it);
        if settings.verbose {
            eprintln!(
                "ipm {iter:3} pres {:.2e} dres {:.2e} gap {:.2e} tau {:.2e} kappa {:.2e}",
                m.pres, m.dres, m.gap, it.tau, it.kappa
            );
        }
        if m.opt() <= target {
            return to_raw(&d, p, &it, Status::Optimal, iter, true);
        }
        if m.pinf.is_some_and(|v| v <= target) {
            return to_raw(&d, p, &it, Status::PrimalInfeasible, iter, false);
        }
        if m.dinf.is_some_and(|v| v <= target) {
            return to_raw(&d, p, &it, Status::DualInfeasible, iter, false);
        }
        let score = m.opt();
        match &best {
            Some((b, _)) if score >= 0.5 * b => stall += 1,
            _ => stall = 0,
        }
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((
                score,
                Iterate {
                    x: it.x.clone(),
                    y: it.y.clone(),
                    z: it.z.clone(),
                    s: it.s.clone(),
                    tau: it.tau,
                    kappa: it.kappa,
                },
            ));
        }
        if iter == settings.max_iters
            || (stall >= STALL_LIMIT && score <= settings.tol)
            || stall >= 3 * STALL_LIMIT
        {
            break;
        }
        match step(&d, &mut it) {
            Ok(alpha) if alpha > 1e-12 => {}
            _ => {
                // no further progress possible; fall through to the loose checks
                let m = metrics(&d, &it);
                if m.pinf.is_some_and(|v| v <= settings.tol) {
                    return to_raw(&d, p, &it, Status::PrimalInfeasible, iter, false);
                }
                if m.dinf.is_some_and(|v| v <= settings.tol) {
                    return to_raw(&d, p, &it, Status::DualInfeasible, iter, false);
                }
                break;
            }
        }
    }
    let m = metrics(&d, &it);
    if m.pinf.is_some_and(|v| v <= settings.tol) && it.tau < 1e-3 * it.kappa {
        return to_raw(&d, p, &it, Status::PrimalInfeasible, settings.max_iters, false);
    }
    if m.dinf.is_some_and(|v| v <= settings.tol) && it.tau < 1e-3 * it.kappa {
        return to_raw(&d, p, &it, Status::DualInfeasible, settings.max_iters, false);
    }
    let (_, b) = best.expect("at least one iterate");
    to_raw(&d, p, &b, Status::MaxIters, settings.max_iters, true)
}

/// One predictor-corrector step; returns the step length taken.
fn step(d: &Data, it: &mut Iterate) -> Result<f64, ()> {
    let mut w = Vec::with_capacity(d.blocks.len());
    let mut lambda = DVector::zeros(d.m_cone());
    for bl in &d.blocks {
        let (sc, l) = Scaling::compute(bl, &slice(&it.s, bl), &slice(&it.z, bl)).ok_or(())?;
        put(&mut lambda, bl, &l);
        w.push(sc);
    }
    let kkt = Kkt::factor(d, &w).ok_or(())?;

    let rx = d.a.transpose() * &it.y + d.g.transpose() * &it.z + &d.c * it.tau;
    let ry = &d.a * &it.x - &d.b * it.tau;
    let rz = &d.g * &it.x + &it.s - &d.h * it.tau;
    let rt = it.kappa + d.c.dot(&it.x) + d.b.dot(&it.y) + d.h.dot(&it.z);
    let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (d.degree as f64 + 1.0);

    let (x1, y1, z1) = kkt.solve(&(-&d.c), &d.b, &d.h);
    let denom1 = d.c.dot(&x1) + d.b.dot(&y1) + d.h.dot(&z1);

    let lam_sq = blockwise(d, &lambda, |_, bl, l| bl.product(l, l));
    let mut e = DVector::zeros(d.m_cone());
    for bl in &d.blocks {
        let mut v = vec![0.0; bl.dim];
        bl.identity(&mut v);
        put(&mut e, bl, &v);
    }

    let mut sigma = 0.0;
    let mut affine: Option<(DVector<f64>, DVector<f64>, f64, f64)> = None;
    for pass in 0..2 {
        let eta = if pass == 0 { 1.0 } else { 1.0 - sigma };
        let mut ds_rhs = -&lam_sq;
        let mut dk_rhs = -it.tau * it.kappa;
        if let Some((su, zu, dta, dka)) = &affine {
            let corr = blockwise(d, su, |_, bl, s| bl.product(s, &zu.as_slice()[bl.range()]));
            ds_rhs -= corr;
            ds_rhs += &e * (sigma * mu);
            dk_rhs += -dta * dka + sigma * mu;
        }
        // u = lambda \ ds_rhs
        let u = blockwise(d, &ds_rhs, |_, bl, v| bl.divide(&lambda.as_slice()[bl.range()], v));
        let wtu = blockwise(d, &u, |k, _, v| w[k].apply(v, Op::WT));
        let r3 = -&rz * eta - &wtu;
        let (x2, y2, z2) = kkt.solve(&(-&rx * eta), &(-&ry * eta), &r3);
        let dtau = (-eta * rt - dk_rhs / it.tau - (d.c.dot(&x2) + d.b.dot(&y2) + d.h.dot(&z2)))
            / (denom1 - it.kappa / it.tau);
        let dx = &x2 + &x1 * dtau;
        let dy = &y2 + &y1 * dtau;
        let dz = &z2 + &z1 * dtau;
        let wdz = blockwise(d, &dz, |k, _, v| w[k].apply(v, Op::W));
        // scaled slack direction W^{-T} ds = u - W dz
        let su = &u - &wdz;
        let ds = blockwise(d, &su, |k, _, v| w[k].apply(v, Op::WT));
        let dkappa = (dk_rhs - it.kappa * dtau) / it.tau;
        if !(dtau.is_finite() && dkappa.is_finite()) {
            return Err(());
        }

        let mut amax = f64::INFINITY;
        for bl in &d.blocks {
            let l = &lambda.as_slice()[bl.range()];
            amax = amax.min(bl.max_step_scaled(l, &su.as_slice()[bl.range()]));
            amax = amax.min(bl.max_step_scaled(l, &wdz.as_slice()[bl.range()]));
        }
        if dtau < 0.0 {
            amax = amax.min(-it.tau / dtau);
        }
        if dkappa < 0.0 {
            amax = amax.min(-it.kappa / dkappa);
        }

        if pass == 0 {
            let alpha = amax.min(1.0);
            sigma = (1.0 - alpha).powi(3).clamp(0.0, 1.0);
            affine = Some((su, wdz, dtau, dkappa));
        } else {
            let alpha = (STEP_FRACTION * amax).min(1.0);
            if !alpha.is_finite() || alpha <= 0.0 {
                return Err(());
            }
            it.x += &dx * alpha;
            it.y += &dy * alpha;
            it.z += &dz * alpha;
            it.s += &ds * alpha;
            it.tau += alpha * dtau;
            it.kappa += alpha * dkappa;
            return Ok(alpha);
        }
    }
    unreachable!()
}
