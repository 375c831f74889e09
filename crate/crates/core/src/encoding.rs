//! Affine-expression builder that lowers Hermitian matrix programs onto the
//! real standard-form cone solver, plus the beampattern objective model.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::conic::{svec_len, Cone, ConeSpec, ConicProblem, Triplet};
use crate::linalg::{c, CVector, HermitianMatrix, C64};
use crate::model::{desired_beampattern, steering, SensingSpec, SystemConfig};

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Real affine function of the program variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub terms: BTreeMap<usize, f64>,
    pub constant: f64,
}

impl Affine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(v: f64) -> Self {
        Self { terms: BTreeMap::new(), constant: v }
    }

    pub fn var(j: usize) -> Self {
        Self::term(j, 1.0)
    }

    pub fn term(j: usize, coef: f64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(j, coef);
        Self { terms, constant: 0.0 }
    }

    pub fn add_scaled(&mut self, other: &Affine, f: f64) {
        if f == 0.0 {
            return;
        }
        for (&j, &v) in &other.terms {
            *self.terms.entry(j).or_insert(0.0) += f * v;
        }
        self.constant += f * other.constant;
    }

    pub fn scaled(&self, f: f64) -> Self {
        let mut out = Self::zero();
        out.add_scaled(self, f);
        out
    }

    pub fn plus(&self, other: &Affine) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&j, &v)| v * x[j]).sum::<f64>()
    }
}

/// Complex affine function, stored as real and imaginary parts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CAffine {
    pub re: Affine,
    pub im: Affine,
}

impl CAffine {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn real(a: Affine) -> Self {
        Self { re: a, im: Affine::zero() }
    }

    /// `self += z * other`.
    pub fn add_scaled(&mut self, other: &CAffine, z: C64) {
        self.re.add_scaled(&other.re, z.re);
        self.re.add_scaled(&other.im, -z.im);
        self.im.add_scaled(&other.re, z.im);
        self.im.add_scaled(&other.im, z.re);
    }

    pub fn conj(&self) -> Self {
        Self { re: self.re.clone(), im: self.im.scaled(-1.0) }
    }

    pub fn add_constant(&mut self, z: C64) {
        self.re.constant += z.re;
        self.im.constant += z.im;
    }
}

/// Hermitian matrix variable parameterized by `n^2` reals: the diagonal, then
/// `(re, im)` pairs of the strict upper triangle in row order.
#[derive(Debug, Clone, Copy)]
pub struct HermVar {
    pub n: usize,
    pub offset: usize,
}

impl HermVar {
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Index of the real part of entry (i, j), i < j; the imaginary part follows.
    fn pair(&self, i: usize, j: usize) -> usize {
        let n = self.n;
        // pairs before row i: sum_{r < i} (n - 1 - r)
        let before = i * (2 * n - i - 1) / 2;
        self.offset + n + 2 * (before + (j - i - 1))
    }

    pub fn entry(&self, i: usize, j: usize) -> CAffine {
        if i == j {
            CAffine::real(Affine::var(self.offset + i))
        } else if i < j {
            let p = self.pair(i, j);
            CAffine { re: Affine::var(p), im: Affine::var(p + 1) }
        } else {
            self.entry(j, i).conj()
        }
    }

    pub fn expr(&self) -> HermExpr {
        let n = self.n;
        HermExpr {
            n,
            entries: (0..n * n).map(|k| self.entry(k / n, k % n)).collect(),
        }
    }

    pub fn value(&self, x: &[f64]) -> HermitianMatrix {
        let n = self.n;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let e = self.entry(i, j);
            c(e.re.eval(x), e.im.eval(x))
        });
        HermitianMatrix::new(m).expect("Hermitian by construction")
    }

    /// Parameter vector of a given Hermitian matrix, in variable order.
    pub fn params_of(h: &HermitianMatrix) -> Vec<f64> {
        let n = h.n();
        let m = h.as_matrix();
        let mut v: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
        for i in 0..n {
            for j in i + 1..n {
                v.push(m[(i, j)].re);
                v.push(m[(i, j)].im);
            }
        }
        v
    }
}

/// Hermitian-valued affine expression, entries row-major.
#[derive(Debug, Clone)]
pub struct HermExpr {
    pub n: usize,
    pub entries: Vec<CAffine>,
}

impl HermExpr {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![CAffine::zero(); n * n] }
    }

    pub fn at(&self, i: usize, j: usize) -> &CAffine {
        &self.entries[i * self.n + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut CAffine {
        &mut self.entries[i * self.n + j]
    }

    /// `self + f * other`.
    pub fn combine(&self, other: &HermExpr, f: f64) -> Self {
        let mut out = self.clone();
        for (a, b) in out.entries.iter_mut().zip(&other.entries) {
            a.add_scaled(b, c(f, 0.0));
        }
        out
    }

    pub fn scaled(&self, f: f64) -> Self {
        HermExpr::zeros(self.n).combine(self, f)
    }

    pub fn constant(h: &HermitianMatrix) -> Self {
        let n = h.n();
        let m = h.as_matrix();
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.at_mut(i, j).add_constant(m[(i, j)]);
            }
        }
        out
    }

    /// Parameter vector in [`HermVar`] order (diagonal, then upper `(re, im)`).
    pub fn params(&self) -> Vec<Affine> {
        let n = self.n;
        let mut v: Vec<Affine> = (0..n).map(|i| self.at(i, i).re.clone()).collect();
        for i in 0..n {
            for j in i + 1..n {
                v.push(self.at(i, j).re.clone());
                v.push(self.at(i, j).im.clone());
            }
        }
        v
    }

    /// `u^H X v`.
    pub fn bilinear(&self, u: &CVector, v: &CVector) -> CAffine {
        let mut out = CAffine::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                let z = u[i].conj() * v[j];
                if z != c(0.0, 0.0) {
                    out.add_scaled(self.at(i, j), z);
                }
            }
        }
        out
    }

    /// `v^H X v`, real.
    pub fn quad(&self, v: &CVector) -> Affine {
        self.bilinear(v, v).re
    }

    /// `R X R^H`.
    pub fn congruence(&self, r: &DMatrix<C64>) -> HermExpr {
        let n = self.n;
        let zero = c(0.0, 0.0);
        let mut tmp = HermExpr::zeros(n);
        for i in 0..n {
            for k in 0..n {
                if r[(i, k)] == zero {
                    continue;
                }
                for l in 0..n {
                    tmp.at_mut(i, l).add_scaled(self.at(k, l), r[(i, k)]);
                }
            }
        }
        let mut out = HermExpr::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let z = r[(j, l)].conj();
                    if z != zero {
                        let t = tmp.at(i, l).clone();
                        out.at_mut(i, j).add_scaled(&t, z);
                    }
                }
            }
        }
        out
    }

    /// `X v`.
    pub fn mul_vec(&self, v: &CVector) -> Vec<CAffine> {
        (0..self.n)
            .map(|i| {
                let mut out = CAffine::zero();
                for j in 0..self.n {
                    out.add_scaled(self.at(i, j), v[j]);
                }
                out
            })
            .collect()
    }
}

/// Accumulates variables, a linear objective and cone constraints.
#[derive(Debug, Clone, Default)]
pub struct Program {
    n_vars: usize,
    objective: BTreeMap<usize, f64>,
    blocks: Vec<(Cone, Vec<Affine>)>,
}

impl Program {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn var(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    pub fn herm_var(&mut self, n: usize) -> HermVar {
        let v = HermVar { n, offset: self.n_vars };
        self.n_vars += n * n;
        v
    }

    pub fn minimize(&mut self, j: usize, coef: f64) {
        *self.objective.entry(j).or_insert(0.0) += coef;
    }

    /// Each expression equals zero.
    pub fn eq(&mut self, rows: Vec<Affine>) {
        if !rows.is_empty() {
            self.blocks.push((Cone::Zero(rows.len()), rows));
        }
    }

    /// Each expression is nonnegative.
    pub fn nonneg(&mut self, rows: Vec<Affine>) {
        if !rows.is_empty() {
            self.blocks.push((Cone::NonNeg(rows.len()), rows));
        }
    }

    /// `rows[0] >= || rows[1..] ||`.
    pub fn soc(&mut self, rows: Vec<Affine>) {
        self.blocks.push((Cone::Soc(rows.len()), rows));
    }

    /// Real symmetric matrix with entries `f(i, j)` (read for i >= j) is PSD.
    pub fn psd_real(&mut self, side: usize, f: impl Fn(usize, usize) -> Affine) {
        let mut rows = Vec::with_capacity(svec_len(side));
        for j in 0..side {
            for i in j..side {
                let e = f(i, j);
                rows.push(if i == j { e } else { e.scaled(SQRT2) });
            }
        }
        self.blocks.push((Cone::Psd(side), rows));
    }

    /// Hermitian expression is PSD, through its real embedding `[[Re, -Im], [Im, Re]]`.
    pub fn psd_herm(&mut self, x: &HermExpr) {
        let n = x.n;
        self.psd_real(2 * n, |i, j| {
            let (bi, ri) = (i / n, i % n);
            let (bj, rj) = (j / n, j % n);
            let e = x.at(ri, rj);
            match (bi, bj) {
                (0, 0) | (1, 1) => e.re.clone(),
                (1, 0) => e.im.clone(),
                _ => e.im.scaled(-1.0),
            }
        });
    }

    pub fn cones(&self) -> ConeSpec {
        ConeSpec(self.blocks.iter().map(|(c, _)| *c).collect())
    }

    /// Lowers to `A x + s = b`: each cone slack is the expression, so `A = -coef`, `b = const`.
    pub fn build(&self) -> ConicProblem {
        let mut c = vec![0.0; self.n_vars];
        for (&j, &v) in &self.objective {
            c[j] = v;
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (_, rows) in &self.blocks {
            for e in rows {
                let row = b.len();
                for (&j, &v) in &e.terms {
                    if v != 0.0 {
                        a.push(Triplet { row, col: j, val: -v });
                    }
                }
                b.push(e.constant);
            }
        }
        ConicProblem { c, a, b, cones: self.cones() }
    }
}

/// Linear map from `(T parameters, eta)` to the residual vector whose squared
/// norm is the beampattern objective.
#[derive(Debug, Clone)]
pub struct ObjectiveModel {
    pub n: usize,
    /// Rows act on `[params(T); eta]`, `n^2 + 1` columns.
    pub rows: DMatrix<f64>,
}

impl ObjectiveModel {
    /// One residual per sample angle and `(re, im)` per target pair.
    pub fn stacked(config: &SystemConfig, spec: &SensingSpec) -> Self {
        let n = config.n;
        let np = n * n;
        let t = HermVar { n, offset: 0 }.expr();
        let k = config.k();
        let pairs = if k >= 2 { k * (k - 1) / 2 } else { 0 };
        let cross = spec.omega_c > 0.0 && pairs > 0;
        let m = spec.m();
        let n_rows = m + if cross { 2 * pairs } else { 0 };
        let mut rows = DMatrix::zeros(n_rows, np + 1);
        let w = (1.0 / m as f64).sqrt();
        for (r, &th) in spec.sample_angles.iter().enumerate() {
            let a = steering(th, n, config.spacing_ratio);
            let gain = t.quad(&a);
            for (&j, &v) in &gain.terms {
                rows[(r, j)] = -w * v;
            }
            rows[(r, np)] = w * desired_beampattern(th, &config.target_angles, spec.delta_theta);
        }
        if cross {
            let wc = (2.0 * spec.omega_c / (k * k - k) as f64).sqrt();
            let a: Vec<CVector> = config
                .target_angles
                .iter()
                .map(|&th| steering(th, n, config.spacing_ratio))
                .collect();
            let mut r = m;
            for p in 0..k {
                for q in p + 1..k {
                    let e = t.bilinear(&a[p], &a[q]);
                    for (&j, &v) in &e.re.terms {
                        rows[(r, j)] = wc * v;
                    }
                    for (&j, &v) in &e.im.terms {
                        rows[(r + 1, j)] = wc * v;
                    }
                    r += 2;
                }
            }
        }
        Self { n, rows }
    }

    /// Square-root factor of the Gram matrix of the stacked map: same norm,
    /// at most `n^2 + 1` rows.
    pub fn compressed(config: &SystemConfig, spec: &SensingSpec) -> Self {
        let full = Self::stacked(config, spec);
        let gram = full.rows.transpose() * &full.rows;
        let eig = gram.symmetric_eigen();
        let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&i| eig.eigenvalues[i] > 1e-13 * top)
            .collect();
        let cols = full.rows.ncols();
        let rows = DMatrix::from_fn(keep.len(), cols, |r, j| {
            let i = keep[r];
            eig.eigenvalues[i].sqrt() * eig.eigenvectors[(j, i)]
        });
        Self { n: full.n, rows }
    }

    /// `||R [params(T); eta]||^2`.
    pub fn value(&self, t: &HermitianMatrix, eta: f64) -> f64 {
        let mut p = HermVar::params_of(t);
        p.push(eta);
        let v = &self.rows * nalgebra::DVector::from_vec(p);
        v.norm_squared()
    }

    /// Adds `epi >= ||R [params; eta]||`, `params` being the parameter
    /// vector of `T` as affine expressions.
    pub fn add_epigraph(&self, prog: &mut Program, params: &[Affine], eta: usize, epi: usize) {
        let np = self.n * self.n;
        assert_eq!(params.len(), np, "parameter vector of an n x n Hermitian matrix");
        let mut rows = vec![Affine::var(epi)];
        for r in 0..self.rows.nrows() {
            let mut e = Affine::zero();
            for (j, p) in params.iter().enumerate() {
                e.add_scaled(p, self.rows[(r, j)]);
            }
            e.add_scaled(&Affine::var(eta), self.rows[(r, np)]);
            rows.push(e);
        }
        prog.soc(rows);
    }
}

/// How the beampattern objective enters the cone program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveForm {
    /// Square-root Gram factor (small SOC, same value).
    #[default]
    Compressed,
    /// One SOC coordinate per residual.
    Stacked,
}

impl ObjectiveForm {
    pub fn model(&self, config: &SystemConfig, spec: &SensingSpec) -> ObjectiveModel {
        match self {
            ObjectiveForm::Compressed => ObjectiveModel::compressed(config, spec),
            ObjectiveForm::Stacked => ObjectiveModel::stacked(config, spec),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{solve, Settings, Status};
    use crate::linalg::testutil::*;
    use crate::model::sensing_objective_total;

    fn config() -> SystemConfig {
        crate::model::tests::default_config(0.0)
    }

    #[test]
    fn herm_var_round_trip() {
        let mut r = rng(1);
        let h = random_hermitian(&mut r, 5);
        let v = HermVar { n: 5, offset: 0 };
        let x = HermVar::params_of(&h);
        assert_eq!(x.len(), 25);
        let back = v.value(&x);
        assert!((back.as_matrix() - h.as_matrix()).norm() < 1e-14);
    }

    #[test]
    fn herm_expr_forms_match_direct_evaluation() {
        let mut r = rng(2);
        let h = random_hermitian(&mut r, 4);
        let u = random_vector(&mut r, 4);
        let v = random_vector(&mut r, 4);
        let var = HermVar { n: 4, offset: 0 };
        let x = HermVar::params_of(&h);
        let e = var.expr();
        let bl = e.bilinear(&u, &v);
        let want = h.bilinear(&u, &v);
        assert!((bl.re.eval(&x) - want.re).abs() < 1e-12);
        assert!((bl.im.eval(&x) - want.im).abs() < 1e-12);
        assert!((e.quad(&u).eval(&x) - h.quad_form(&u)).abs() < 1e-12);
        let r = random_complex(&mut r, 4, 4);
        let cg = e.congruence(&r);
        let want = h.congruence(&r);
        for i in 0..4 {
            for j in 0..4 {
                assert!((cg.at(i, j).re.eval(&x) - want.as_matrix()[(i, j)].re).abs() < 1e-12);
                assert!((cg.at(i, j).im.eval(&x) - want.as_matrix()[(i, j)].im).abs() < 1e-12);
            }
        }
        let hv = h.as_matrix() * &v;
        for (i, z) in e.mul_vec(&v).iter().enumerate() {
            assert!((z.re.eval(&x) - hv[i].re).abs() < 1e-12);
            assert!((z.im.eval(&x) - hv[i].im).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_models_match_direct_objective() {
        let cfg = config();
        let spec = SensingSpec::uniform(500, 10f64.to_radians(), 1.0).unwrap();
        let stacked = ObjectiveModel::stacked(&cfg, &spec);
        let comp = ObjectiveModel::compressed(&cfg, &spec);
        assert_eq!(stacked.rows.nrows(), 512);
        assert!(comp.rows.nrows() <= 65);
        let mut r = rng(3);
        for _ in 0..10 {
            let t = random_psd(&mut r, 8, 3).scale(0.05);
            let eta = 0.7;
            let d = sensing_objective_total(&t, eta, &cfg, &spec).unwrap();
            let a = stacked.value(&t, eta);
            let b = comp.value(&t, eta);
            assert!((a - d).abs() <= 1e-12 * d.max(1e-300), "{a} vs {d}");
            assert!((b - d).abs() <= 1e-9 * d.max(1e-300), "{b} vs {d}");
        }
    }

    #[test]
    fn herm_psd_embedding_solves_small_sdp() {
        // minimize Re X_{01} subject to X psd, diag(X) = 1 (2x2): optimum -1
        let mut p = Program::new();
        let x = p.herm_var(2);
        let e = x.expr();
        p.eq(vec![
            e.at(0, 0).re.plus(&Affine::constant(-1.0)),
            e.at(1, 1).re.plus(&Affine::constant(-1.0)),
        ]);
        p.psd_herm(&e);
        for (&j, &v) in &e.at(0, 1).re.terms {
            p.minimize(j, v);
        }
        let sol = solve(&p.build(), &Settings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-7);
        let xv = x.value(&sol.x);
        assert!(xv.min_eigenvalue() > -1e-7);
    }
}
