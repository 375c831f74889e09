//! Dense complex and Hermitian linear algebra.
//!
//! Thin newtypes over `nalgebra` dense matrices that carry the invariants the
//! rest of the crate relies on (Hermitian symmetry, finite entries, ascending
//! eigenvalues) plus the real embedding used to feed complex LMIs into the
//! real-valued cone solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;

/// Relative tolerance for the Hermitian check on construction.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues of a PSD input above `-PSD_CLIP` are treated as numerical zero.
pub const PSD_CLIP: f64 = 1e-9;
/// Relative negativity beyond which a matrix is considered materially indefinite.
pub const INDEFINITE_TOL: f64 = 1e-6;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dense complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self(m))
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }
}

/// Dense Hermitian matrix. Construction symmetrizes the input, so the stored
/// value is exactly Hermitian with a real diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<C64>);

impl HermitianMatrix {
    /// Validates `max|H - H^H| <= 1e-10 (1 + max|H|)` and symmetrizes.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        let n = m.nrows();
        let mut asym = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if asym > HERMITIAN_TOL * (1.0 + scale) {
            return Err(Error::InvalidInput(format!(
                "matrix is not Hermitian (asymmetry {asym:.3e})"
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without checking; for values that are Hermitian by construction.
    pub(crate) fn symmetrized(m: DMatrix<C64>) -> Self {
        let h = (&m + m.adjoint()) * cr(0.5);
        let mut h = h;
        for i in 0..h.nrows() {
            h[(i, i)].im = 0.0;
        }
        Self(h)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = cr(*v);
        }
        Self(m)
    }

    /// `v v^H`.
    pub fn outer(v: &CVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.0[(i, i)].re).collect()
    }

    /// `v^H H v`, real up to rounding.
    pub fn quad_form(&self, v: &CVector) -> f64 {
        (v.adjoint() * &self.0 * v)[(0, 0)].re
    }

    /// `u^H H v`.
    pub fn bilinear(&self, u: &CVector, v: &CVector) -> C64 {
        (u.adjoint() * &self.0 * v)[(0, 0)]
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::symmetrized(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::symmetrized(&self.0 - &other.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(&self.0 * cr(a))
    }

    /// `C H C^H` for a square complex `C`.
    pub fn congruence(&self, c: &DMatrix<C64>) -> Self {
        Self::symmetrized(c * &self.0 * c.adjoint())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eig(self).eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let e = hermitian_eig(self);
        e.eigenvalues[e.eigenvalues.len() - 1]
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<C64>,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&v| cr(v)),
        ));
        &self.eigenvectors * d * self.eigenvectors.adjoint()
    }
}

pub fn hermitian_eig(h: &HermitianMatrix) -> EigenDecomposition {
    let n = h.n();
    let eig = h.0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Principal square root of a PSD matrix. Eigenvalues in `[-1e-9, 0)` are
/// clipped to zero; anything below `-1e-6 * ||H||` is rejected.
pub fn matrix_sqrt_psd(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let e = hermitian_eig(h);
    let scale = e.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = e.eigenvalues[0];
    if min < -PSD_CLIP && min < -INDEFINITE_TOL * scale {
        return Err(Error::Domain(format!(
            "matrix square root of an indefinite matrix (min eigenvalue {min:.3e})"
        )));
    }
    let n = h.n();
    let mut scaled = e.eigenvectors.clone();
    for k in 0..n {
        let r = e.eigenvalues[k].max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, k)] *= r;
        }
    }
    Ok(HermitianMatrix::symmetrized(&scaled * e.eigenvectors.adjoint()))
}

/// Real symmetric embedding `[[Re H, -Im H], [Im H, Re H]]`.
pub fn complex_to_real_embed(h: &HermitianMatrix) -> DMatrix<f64> {
    let n = h.n();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h.0[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn vector_norm_sq(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn identity_eigenvalues() {
        let e = hermitian_eig(&HermitianMatrix::identity(3));
        for v in e.eigenvalues {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let e = hermitian_eig(&HermitianMatrix::from_real_diagonal(&[1.0, -1.0]));
        assert!((e.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        let mut r = rng(7);
        for _ in 0..20 {
            let h = random_hermitian(&mut r, 8);
            let e = hermitian_eig(&h);
            let err = (e.reconstruct() - h.as_matrix()).norm();
            assert!(err <= 1e-8, "reconstruction {err}");
            let gram = e.eigenvectors.adjoint() * &e.eigenvectors;
            let ortho = (gram - DMatrix::<C64>::identity(8, 8)).norm();
            assert!(ortho <= 1e-10, "orthonormality {ortho}");
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let sum: f64 = e.eigenvalues.iter().sum();
            assert!((sum - h.trace()).abs() <= 1e-9 * (1.0 + h.trace().abs()));
        }
    }

    #[test]
    fn rejects_non_hermitian_and_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[cr(1.0), c(0.0, 1.0), c(0.0, 1.0), cr(1.0)]);
        assert!(HermitianMatrix::new(m).is_err());
        let m = DMatrix::from_row_slice(1, 1, &[cr(f64::NAN)]);
        assert!(HermitianMatrix::new(m).is_err());
        assert!(ComplexMatrix::from_row_major(2, 2, &[cr(1.0); 3]).is_err());
    }

    #[test]
    fn sqrt_identity_and_diagonal() {
        let r = matrix_sqrt_psd(&HermitianMatrix::identity(4)).unwrap();
        assert!((r.as_matrix() - DMatrix::<C64>::identity(4, 4)).norm() < 1e-14);
        let r = matrix_sqrt_psd(&HermitianMatrix::from_real_diagonal(&[4.0, 9.0])).unwrap();
        assert!((r.as_matrix()[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!((r.as_matrix()[(1, 1)].re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn sqrt_multiplies_back() {
        let mut r = rng(11);
        for rank in [1, 3, 8] {
            let h = random_psd(&mut r, 8, rank);
            let s = matrix_sqrt_psd(&h).unwrap();
            assert!(s.min_eigenvalue() >= -1e-9);
            let err = (s.as_matrix() * s.as_matrix() - h.as_matrix()).norm();
            assert!(err <= 1e-7 * (1.0 + h.frobenius_norm()), "rank {rank}: {err}");
        }
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let h = HermitianMatrix::from_real_diagonal(&[1.0, -0.5]);
        assert!(matches!(matrix_sqrt_psd(&h), Err(Error::Domain(_))));
        // tiny negative eigenvalues are clipped
        let h = HermitianMatrix::from_real_diagonal(&[1.0, -1e-12]);
        assert!(matrix_sqrt_psd(&h).is_ok());
    }

    #[test]
    fn sqrt_of_projector_is_projector() {
        let mut r = rng(3);
        let f = random_complex(&mut r, 8, 3);
        let q = f.clone().qr().q();
        let p = HermitianMatrix::symmetrized(&q * q.adjoint());
        let s = matrix_sqrt_psd(&p).unwrap();
        let err = (s.as_matrix() * s.as_matrix() - p.as_matrix()).norm();
        assert!(err < 1e-8);
        // zero eigenvalues at rounding level become O(1e-8) after the square root
        assert!((s.as_matrix() - p.as_matrix()).norm() < 1e-6);
    }

    #[test]
    fn embedding_examples() {
        let e = complex_to_real_embed(&HermitianMatrix::identity(1));
        assert_eq!(e, DMatrix::identity(2, 2));
        let h = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[cr(0.0), c(0.0, 1.0), c(0.0, -1.0), cr(0.0)],
        ))
        .unwrap();
        let ev = symmetric_eigenvalues(&complex_to_real_embed(&h));
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_doubles_spectrum_and_trace() {
        let mut r = rng(5);
        for _ in 0..10 {
            let h = random_hermitian(&mut r, 6);
            let emb = complex_to_real_embed(&h);
            assert!((emb.trace() - 2.0 * h.trace()).abs() < 1e-12);
            let ev_h = hermitian_eig(&h).eigenvalues;
            let ev_e = symmetric_eigenvalues(&emb);
            for (k, v) in ev_h.iter().enumerate() {
                assert!((ev_e[2 * k] - v).abs() < 1e-9);
                assert!((ev_e[2 * k + 1] - v).abs() < 1e-9);
            }
            // PSD iff embedding PSD
            let p = random_psd(&mut r, 6, 2);
            assert!(symmetric_eigenvalues(&complex_to_real_embed(&p))[0] >= -1e-10);
        }
    }
}
