//! Cone kernels: projections, Jordan algebra, Nesterov-Todd scalings and step
//! lengths for the nonnegative orthant, second-order cones and PSD cones.

use nalgebra::DMatrix;

use super::Cone;

const SQRT2: f64 = std::f64::consts::SQRT_2;

pub fn svec_len(side: usize) -> usize {
    side * (side + 1) / 2
}

/// Lower triangle, column by column, off-diagonals scaled by sqrt(2).
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        v.push(m[(j, j)]);
        for i in j + 1..n {
            v.push(SQRT2 * 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    v
}

pub fn smat(v: &[f64], side: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(side, side);
    let mut k = 0;
    for j in 0..side {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..side {
            let x = v[k] / SQRT2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// Position of entry (i, j) inside an svec vector.
pub fn svec_index(i: usize, j: usize, side: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    j * side - j * j.saturating_sub(1) / 2 + (i - j)
}

fn sym_eig(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = m.clone().symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean projection onto a cone block.
pub fn project_cone(v: &[f64], cone: &Cone) -> Vec<f64> {
    match *cone {
        Cone::Zero(_) => vec![0.0; v.len()],
        Cone::NonNeg(_) => v.iter().map(|x| x.max(0.0)).collect(),
        Cone::Soc(_) => project_soc(v),
        Cone::Psd(side) => {
            let (vals, vecs) = sym_eig(&smat(v, side));
            let mut out = DMatrix::zeros(side, side);
            for (k, &l) in vals.iter().enumerate() {
                if l > 0.0 {
                    let col = vecs.column(k);
                    out += col * col.transpose() * l;
                }
            }
            svec(&out)
        }
    }
}

/// Projection onto the dual cone; only the zero cone differs (its dual is free).
pub fn project_dual_cone(v: &[f64], cone: &Cone) -> Vec<f64> {
    match cone {
        Cone::Zero(_) => v.to_vec(),
        _ => project_cone(v, cone),
    }
}

fn project_soc(v: &[f64]) -> Vec<f64> {
    let t = v[0];
    let nz = norm(&v[1..]);
    if nz <= t {
        v.to_vec()
    } else if nz <= -t {
        vec![0.0; v.len()]
    } else {
        let a = 0.5 * (t + nz);
        let mut out = Vec::with_capacity(v.len());
        out.push(a);
        out.extend(v[1..].iter().map(|x| a * x / nz));
        out
    }
}

/// Interior-point view of a non-zero cone block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Kind {
    NonNeg,
    Soc,
    Psd(usize),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub kind: Kind,
    pub off: usize,
    pub dim: usize,
}

impl Block {
    pub fn degree(&self) -> usize {
        match self.kind {
            Kind::NonNeg => self.dim,
            Kind::Soc => 1,
            Kind::Psd(side) => side,
        }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.off..self.off + self.dim
    }

    pub fn identity(&self, out: &mut [f64]) {
        match self.kind {
            Kind::NonNeg => out.iter_mut().for_each(|x| *x = 1.0),
            Kind::Soc => {
                out.iter_mut().for_each(|x| *x = 0.0);
                out[0] = 1.0;
            }
            Kind::Psd(side) => {
                out.iter_mut().for_each(|x| *x = 0.0);
                let mut k = 0;
                for j in 0..side {
                    out[k] = 1.0;
                    k += side - j;
                }
            }
        }
    }

    /// Smallest `t` with `x + t e` on the boundary, i.e. minus the minimum eigenvalue.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        match self.kind {
            Kind::NonNeg => x.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max),
            Kind::Soc => norm(&x[1..]) - x[0],
            Kind::Psd(side) => -min_eig(&smat(x, side)),
        }
    }

    /// Jordan product `u o v`.
    pub fn product(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        match self.kind {
            Kind::NonNeg => u.iter().zip(v).map(|(a, b)| a * b).collect(),
            Kind::Soc => {
                let mut out = Vec::with_capacity(u.len());
                out.push(dot(u, v));
                for i in 1..u.len() {
                    out.push(u[0] * v[i] + v[0] * u[i]);
                }
                out
            }
            Kind::Psd(side) => {
                let a = smat(u, side);
                let b = smat(v, side);
                svec(&((&a * &b + &b * &a) * 0.5))
            }
        }
    }

    /// Solves `lambda o x = d` for the scaled point `lambda` (diagonal for PSD).
    pub fn divide(&self, lambda: &[f64], d: &[f64]) -> Vec<f64> {
        match self.kind {
            Kind::NonNeg => d.iter().zip(lambda).map(|(a, l)| a / l).collect(),
            Kind::Soc => {
                let l0 = lambda[0];
                let l1 = &lambda[1..];
                let det = l0 * l0 - dot(l1, l1);
                let x0 = (l0 * d[0] - dot(l1, &d[1..])) / det;
                let mut out = Vec::with_capacity(d.len());
                out.push(x0);
                for i in 1..d.len() {
                    out.push((d[i] - x0 * lambda[i]) / l0);
                }
                out
            }
            Kind::Psd(side) => {
                let ev = psd_diag(lambda, side);
                let mut out = d.to_vec();
                let mut k = 0;
                for j in 0..side {
                    for i in j..side {
                        out[k] = 2.0 * d[k] / (ev[i] + ev[j]);
                        k += 1;
                    }
                }
                out
            }
        }
    }

    /// Largest step `alpha` keeping `lambda + alpha u` in the cone (infinite if unbounded).
    pub fn max_step_scaled(&self, lambda: &[f64], u: &[f64]) -> f64 {
        match self.kind {
            Kind::NonNeg => lambda
                .iter()
                .zip(u)
                .filter(|(_, d)| **d < 0.0)
                .map(|(l, d)| -l / d)
                .fold(f64::INFINITY, f64::min),
            Kind::Soc => soc_max_step(lambda, u),
            Kind::Psd(side) => {
                let ev = psd_diag(lambda, side);
                let mut m = smat(u, side);
                for i in 0..side {
                    for j in 0..side {
                        m[(i, j)] /= (ev[i] * ev[j]).sqrt();
                    }
                }
                let t = -min_eig(&m);
                if t > 0.0 {
                    1.0 / t
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

fn psd_diag(v: &[f64], side: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(side);
    let mut k = 0;
    for j in 0..side {
        out.push(v[k]);
        k += side - j;
    }
    out
}

/// Maximum step for an interior SOC point `x` along `d`.
pub(crate) fn soc_max_step(x: &[f64], d: &[f64]) -> f64 {
    let res = x[0] * x[0] - dot(&x[1..], &x[1..]);
    let xn = res.max(0.0).sqrt();
    if xn <= 0.0 {
        return 0.0;
    }
    let xb0 = x[0] / xn;
    let rho0 = (xb0 * d[0] - x[1..].iter().zip(&d[1..]).map(|(a, b)| a / xn * b).sum::<f64>()) / xn;
    let factor = (rho0 + d[0] / xn) / (xb0 + 1.0);
    let mut s2 = 0.0;
    for i in 1..x.len() {
        let v = d[i] / xn - factor * x[i] / xn;
        s2 += v * v;
    }
    let t = s2.sqrt() - rho0;
    if t > 0.0 {
        1.0 / t
    } else {
        f64::INFINITY
    }
}

/// Nesterov-Todd scaling of one block: `W z = W^{-T} s = lambda`.
#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    NonNeg {
        w: Vec<f64>,
    },
    Soc {
        beta: f64,
        wbar: Vec<f64>,
    },
    Psd {
        side: usize,
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Op {
    W,
    WT,
    WInv,
    WInvT,
}

/// Factor `X = L L^T` of a positive definite matrix, Cholesky first then eigen.
fn psd_factor(x: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = x.clone().cholesky() {
        return Some(ch.l());
    }
    let (vals, vecs) = sym_eig(x);
    let top = vals.iter().copied().fold(0.0f64, f64::max);
    if !(top > 0.0) {
        return None;
    }
    let mut l = vecs;
    for (k, v) in vals.iter().enumerate() {
        let r = v.max(top * 1e-30).sqrt();
        l.column_mut(k).scale_mut(r);
    }
    Some(l)
}

impl Scaling {
    /// Computes the scaling and `lambda` for interior `s`, `z`.
    pub fn compute(block: &Block, s: &[f64], z: &[f64]) -> Option<(Scaling, Vec<f64>)> {
        match block.kind {
            Kind::NonNeg => {
                if s.iter().chain(z).any(|v| !(*v > 0.0)) {
                    return None;
                }
                let w: Vec<f64> = s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect();
                let lambda = s.iter().zip(z).map(|(a, b)| (a * b).sqrt()).collect();
                Some((Scaling::NonNeg { w }, lambda))
            }
            Kind::Soc => {
                let sres = s[0] * s[0] - dot(&s[1..], &s[1..]);
                let zres = z[0] * z[0] - dot(&z[1..], &z[1..]);
                if !(sres > 0.0 && zres > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
                    return None;
                }
                let sn = sres.sqrt();
                let zn = zres.sqrt();
                let sb: Vec<f64> = s.iter().map(|v| v / sn).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / zn).collect();
                let gamma = ((1.0 + dot(&sb, &zb)) / 2.0).sqrt();
                let mut wbar = Vec::with_capacity(s.len());
                wbar.push((sb[0] + zb[0]) / (2.0 * gamma));
                for i in 1..s.len() {
                    wbar.push((sb[i] - zb[i]) / (2.0 * gamma));
                }
                let beta = (sn / zn).sqrt();
                let sc = Scaling::Soc { beta, wbar };
                let lambda = sc.apply(z, Op::W);
                Some((sc, lambda))
            }
            Kind::Psd(side) => {
                let ls = psd_factor(&smat(s, side))?;
                let lz = psd_factor(&smat(z, side))?;
                let svd = (lz.transpose() * &ls).svd(true, true);
                let v = svd.v_t?.transpose();
                let sv = svd.singular_values;
                if sv.iter().any(|x| !(*x > 0.0)) {
                    return None;
                }
                let mut r = &ls * &v;
                for k in 0..side {
                    r.column_mut(k).scale_mut(1.0 / sv[k].sqrt());
                }
                let rinv = r.clone().try_inverse()?;
                let mut lam = DMatrix::zeros(side, side);
                for k in 0..side {
                    lam[(k, k)] = sv[k];
                }
                Some((Scaling::Psd { side, r, rinv }, svec(&lam)))
            }
        }
    }

    pub fn apply(&self, v: &[f64], op: Op) -> Vec<f64> {
        match self {
            Scaling::NonNeg { w } => match op {
                Op::W | Op::WT => v.iter().zip(w).map(|(a, b)| a * b).collect(),
                Op::WInv | Op::WInvT => v.iter().zip(w).map(|(a, b)| a / b).collect(),
            },
            Scaling::Soc { beta, wbar } => {
                let sign = if matches!(op, Op::W | Op::WT) { 1.0 } else { -1.0 };
                let scale = if sign > 0.0 { *beta } else { 1.0 / beta };
                let w1 = &wbar[1..];
                let d = dot(w1, &v[1..]);
                let mut out = Vec::with_capacity(v.len());
                out.push(scale * (wbar[0] * v[0] + sign * d));
                let f = sign * v[0] + d / (1.0 + wbar[0]);
                for i in 1..v.len() {
                    out.push(scale * (v[i] + f * wbar[i]));
                }
                out
            }
            Scaling::Psd { side, r, rinv } => {
                let u = smat(v, *side);
                let m = match op {
                    Op::W => r.transpose() * u * r,
                    Op::WT => r * u * r.transpose(),
                    Op::WInv => rinv.transpose() * u * rinv,
                    Op::WInvT => rinv * u * rinv.transpose(),
                };
                svec(&m)
            }
        }
    }

    /// Applies `op` to every column of a dense `dim x k` matrix.
    pub fn apply_columns(&self, g: &DMatrix<f64>, op: Op) -> DMatrix<f64> {
        match self {
            Scaling::NonNeg { w } => {
                let mut out = g.clone();
                for (i, wi) in w.iter().enumerate() {
                    let f = if matches!(op, Op::W | Op::WT) { *wi } else { 1.0 / wi };
                    out.row_mut(i).scale_mut(f);
                }
                out
            }
            _ => {
                let mut out = DMatrix::zeros(g.nrows(), g.ncols());
                for j in 0..g.ncols() {
                    let col: Vec<f64> = g.column(j).iter().copied().collect();
                    let r = self.apply(&col, op);
                    for (i, v) in r.into_iter().enumerate() {
                        out[(i, j)] = v;
                    }
                }
                out
            }
        }
    }
}
