//! Signal-level echo simulation and Capon angle estimation.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cr, hermitian_eig, matrix_sqrt_psd, CVector, HermitianMatrix, C64};
use crate::model::steering;
use crate::random::{complex_normal, stream_rng};

const TRANSMIT_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const PHASE_STREAM: u64 = 2;

/// Second eigenvalue of `W` allowed relative to the first.
pub const RANK_ONE_TOL: f64 = 1e-6;
/// Diagonal loading of `R_yy`, relative to `trace(R_yy) / N`.
pub const RYY_LOADING: f64 = 1e-10;

/// Point targets seen by the sensing receiver. Angles in radians.
#[derive(Debug, Clone)]
pub struct TargetScene {
    pub angles: Vec<f64>,
    pub betas: Vec<C64>,
    pub noise_power: f64,
    pub spacing_ratio: f64,
}

impl TargetScene {
    pub fn new(angles: Vec<f64>, betas: Vec<C64>, noise_power: f64, spacing_ratio: f64) -> Result<Self> {
        if angles.len() != betas.len() {
            return Err(Error::InvalidInput(format!(
                "{} angles but {} reflection coefficients",
                angles.len(),
                betas.len()
            )));
        }
        if betas.iter().any(|b| !(b.norm() > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidInput("reflection coefficients must be nonzero and finite".into()));
        }
        if !(noise_power >= 0.0) || !noise_power.is_finite() {
            return Err(Error::InvalidInput(format!("noise power {noise_power} must be nonnegative")));
        }
        Ok(Self { angles, betas, noise_power, spacing_ratio })
    }

    /// Common `|beta|` back-solved from the received sensing SNR
    /// `|beta|^2 N P / sigma_z^2` (`P` the total transmit power), with
    /// phases drawn uniformly from `seed`.
    pub fn with_snr(
        angles: Vec<f64>,
        snr_db: f64,
        n: usize,
        total_power: f64,
        noise_power: f64,
        spacing_ratio: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(total_power > 0.0) || !(noise_power > 0.0) {
            return Err(Error::InvalidInput("SNR scaling needs positive transmit and noise powers".into()));
        }
        let mag = (10f64.powf(snr_db / 10.0) * noise_power / (n as f64 * total_power)).sqrt();
        let mut rng = stream_rng(seed, PHASE_STREAM);
        let betas = angles
            .iter()
            .map(|_| C64::from_polar(mag, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        Self::new(angles, betas, noise_power, spacing_ratio)
    }
}

/// Transmit samples `X` (N x L) and, after [`simulate_echo`], the received `Y`.
#[derive(Debug, Clone)]
pub struct SignalBlock {
    pub l: usize,
    pub x: DMatrix<C64>,
    pub y: Option<DMatrix<C64>>,
}

impl SignalBlock {
    pub fn new(x: DMatrix<C64>, y: Option<DMatrix<C64>>) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("transmit samples must be finite".into()));
        }
        if let Some(y) = &y {
            if y.shape() != x.shape() {
                return Err(Error::InvalidInput(format!(
                    "received block {:?} does not match transmit block {:?}",
                    y.shape(),
                    x.shape()
                )));
            }
        }
        Ok(Self { l: x.ncols(), x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// `(1/L) X X^H`.
    pub fn r_xx(&self) -> DMatrix<C64> {
        sample_correlation(&self.x, &self.x)
    }
}

fn sample_correlation(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    (a * b.adjoint()).unscale(a.ncols() as f64)
}

/// `x(n) = w0 s0(n) + S^{1/2} u(n)` with `w0` the principal eigenvector of
/// `W` scaled by the square root of its eigenvalue.
pub fn generate_transmit(w: &HermitianMatrix, s: &HermitianMatrix, l: usize, seed: u64) -> Result<SignalBlock> {
    let n = w.n();
    if s.n() != n {
        return Err(Error::InvalidInput(format!("W is {n}x{n} but S is {}x{}", s.n(), s.n())));
    }
    if l == 0 {
        return Err(Error::InvalidInput("block length must be positive".into()));
    }
    let e = hermitian_eig(w);
    let top = e.eigenvalues[n - 1];
    let second = if n > 1 { e.eigenvalues[n - 2] } else { 0.0 };
    if e.eigenvalues[0] < -RANK_ONE_TOL * top.abs().max(f64::MIN_POSITIVE) || second > RANK_ONE_TOL * top.max(0.0) {
        return Err(Error::Domain(format!(
            "information covariance is not rank-one PSD (eigenvalues {:.3e}, {:.3e}, min {:.3e})",
            top, second, e.eigenvalues[0]
        )));
    }
    let w0: CVector = e.eigenvectors.column(n - 1).scale(top.max(0.0).sqrt());
    let s_half = matrix_sqrt_psd(s)?;

    let mut rng = stream_rng(seed, TRANSMIT_STREAM);
    let mut x = DMatrix::<C64>::zeros(n, l);
    for col in 0..l {
        let s0 = complex_normal(&mut rng, 1)[0];
        let u = complex_normal(&mut rng, n);
        let v = &w0 * s0 + s_half.as_matrix() * u;
        x.set_column(col, &v);
    }
    SignalBlock::new(x, None)
}

/// Echo `y(n) = sum_k beta_k a^c(theta_k) a^H(theta_k) x(n) + z(n)`,
/// `z(n) ~ CN(0, sigma_z^2 I)`.
pub fn simulate_echo(block: &SignalBlock, scene: &TargetScene, seed: u64) -> SignalBlock {
    let n = block.n();
    let mut h = DMatrix::<C64>::zeros(n, n);
    for (&theta, &beta) in scene.angles.iter().zip(&scene.betas) {
        let a = steering(theta, n, scene.spacing_ratio);
        h += (a.conjugate() * a.adjoint()) * beta;
    }
    let mut y = &h * &block.x;
    if scene.noise_power > 0.0 {
        let sd = scene.noise_power.sqrt();
        let mut rng = stream_rng(seed, NOISE_STREAM);
        for col in 0..block.l {
            let z = complex_normal(&mut rng, n);
            for i in 0..n {
                y[(i, col)] += z[i] * sd;
            }
        }
    }
    SignalBlock { l: block.l, x: block.x.clone(), y: Some(y) }
}

/// Steering pairing used in the Capon spectrum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaponForm {
    /// Receive steering `a^c(theta)` and transmit steering `a(theta)`,
    /// matching the echo model:
    /// `|a^T R_yy^-1 R_yx a| / ((a^T R_yy^-1 a^c)(a^H R_xx a))`.
    #[default]
    Matched,
    /// `|a^H R_yy^-1 R_yx a| / ((a^H R_yy^-1 a)(a^T R_xx a^c))`.
    Conventional,
}

/// Spectrum samples over a uniform angle grid covering `[-pi/2, pi/2]`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
}

/// `grid_size` equally spaced angles over `[-pi/2, pi/2]`, endpoints included.
pub fn angle_grid(grid_size: usize) -> Vec<f64> {
    let h = std::f64::consts::FRAC_PI_2;
    if grid_size == 1 {
        return vec![0.0];
    }
    (0..grid_size).map(|i| -h + 2.0 * h * i as f64 / (grid_size - 1) as f64).collect()
}

pub fn capon_spectrum(block: &SignalBlock, grid_size: usize, spacing_ratio: f64) -> Result<Spectrum> {
    capon_spectrum_with(block, grid_size, spacing_ratio, CaponForm::Matched)
}

pub fn capon_spectrum_with(
    block: &SignalBlock,
    grid_size: usize,
    spacing_ratio: f64,
    form: CaponForm,
) -> Result<Spectrum> {
    let y = block.y.as_ref().ok_or_else(|| Error::InvalidInput("Capon spectrum needs a received block".into()))?;
    if grid_size < 2 {
        return Err(Error::InvalidInput("Capon grid needs at least two points".into()));
    }
    let n = block.n();
    let mut r_yy = sample_correlation(y, y);
    let r_yx = sample_correlation(y, &block.x);
    let r_xx = block.r_xx();
    let trace: f64 = (0..n).map(|i| r_yy[(i, i)].re).sum();
    let delta = RYY_LOADING * trace / n as f64;
    for i in 0..n {
        r_yy[(i, i)] += cr(delta);
    }
    let chol = r_yy
        .cholesky()
        .ok_or_else(|| Error::Numerical("received correlation is singular after loading".into()))?;
    let r_inv = chol.inverse();
    let b = &r_inv * &r_yx;

    let angles = angle_grid(grid_size);
    let mut values = Vec::with_capacity(grid_size);
    for &theta in &angles {
        let a = steering(theta, n, spacing_ratio);
        let ac = a.conjugate();
        let (num, d_rx, d_tx) = match form {
            CaponForm::Matched => (
                a.transpose() * &b * &a,
                a.transpose() * &r_inv * &ac,
                a.adjoint() * &r_xx * &a,
            ),
            CaponForm::Conventional => (
                a.adjoint() * &b * &a,
                a.adjoint() * &r_inv * &a,
                a.transpose() * &r_xx * &ac,
            ),
        };
        let den = d_rx[(0, 0)].re * d_tx[(0, 0)].re;
        if !(den > 0.0) || !den.is_finite() {
            return Err(Error::Numerical(format!(
                "Capon denominator {den:.3e} at {:.2} deg is not positive",
                theta.to_degrees()
            )));
        }
        values.push(num[(0, 0)].norm() / den);
    }
    Ok(Spectrum { angles, values })
}

/// Angles of the `k` largest local maxima, ascending. When the spectrum has
/// fewer than `k` local maxima the remainder is filled with the largest
/// remaining samples.
pub fn estimate_angles(spectrum: &Spectrum, k: usize) -> Vec<f64> {
    let v = &spectrum.values;
    let len = v.len();
    let is_peak = |i: usize| {
        let left = i == 0 || v[i] >= v[i - 1];
        let right = i + 1 == len || v[i] > v[i + 1];
        left && right && len > 1
    };
    let by_value = |a: &usize, b: &usize| v[*b].total_cmp(&v[*a]).then(a.cmp(b));
    let mut peaks: Vec<usize> = (0..len).filter(|&i| is_peak(i)).collect();
    peaks.sort_by(by_value);
    peaks.truncate(k);
    if peaks.len() < k {
        let mut rest: Vec<usize> = (0..len).filter(|i| !peaks.contains(i)).collect();
        rest.sort_by(by_value);
        peaks.extend(rest.into_iter().take(k - peaks.len()));
    }
    let mut out: Vec<f64> = peaks.into_iter().map(|i| spectrum.angles[i]).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Root mean squared angle error in degrees. Estimates are taken in
/// ascending order, each paired with the closest true angle not yet claimed.
pub fn rmse(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() || truth.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} estimates for {} true angles",
            estimates.len(),
            truth.len()
        )));
    }
    let mut est = estimates.to_vec();
    est.sort_by(f64::total_cmp);
    let mut claimed = vec![false; truth.len()];
    let mut sum = 0.0;
    for e in est {
        let (j, d) = truth
            .iter()
            .enumerate()
            .filter(|(j, _)| !claimed[*j])
            .map(|(j, t)| (j, (e - t).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("an unclaimed truth remains");
        claimed[j] = true;
        sum += d.to_degrees().powi(2);
    }
    Ok((sum / truth.len() as f64).sqrt())
}

/// Monte Carlo Capon evaluation of a transmit design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaponTrial {
    /// Target angles (rad).
    pub angles: Vec<f64>,
    pub snr_db: f64,
    pub noise_power: f64,
    pub spacing_ratio: f64,
    pub l: usize,
    pub grid_size: usize,
    #[serde(default)]
    pub form: CaponForm,
}

impl CaponTrial {
    /// Angle RMSE (degrees) for one seed. The seed fixes the transmit
    /// symbols, the noise and the reflection phases, so trials at different
    /// SNRs share their random numbers.
    pub fn run(&self, w: &HermitianMatrix, s: &HermitianMatrix, seed: u64) -> Result<f64> {
        let n = w.n();
        let total = w.trace() + s.trace();
        let scene = TargetScene::with_snr(
            self.angles.clone(),
            self.snr_db,
            n,
            total,
            self.noise_power,
            self.spacing_ratio,
            seed,
        )?;
        let block = generate_transmit(w, s, self.l, seed)?;
        let echo = simulate_echo(&block, &scene, seed);
        let spectrum = capon_spectrum_with(&echo, self.grid_size, self.spacing_ratio, self.form)?;
        rmse(&estimate_angles(&spectrum, self.angles.len()), &self.angles)
    }

    /// Mean RMSE over `seeds`, evaluated in parallel.
    pub fn mean_rmse(&self, w: &HermitianMatrix, s: &HermitianMatrix, seeds: std::ops::Range<u64>) -> Result<f64> {
        let count = seeds.end.saturating_sub(seeds.start);
        if count == 0 {
            return Err(Error::InvalidInput("no seeds".into()));
        }
        let per: Vec<f64> = seeds.into_par_iter().map(|sd| self.run(w, s, sd)).collect::<Result<_>>()?;
        Ok(per.iter().sum::<f64>() / count as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::{random_complex, random_psd, rng};
    use proptest::prelude::*;

    fn deg(v: f64) -> f64 {
        v.to_radians()
    }

    #[test]
    fn sample_covariance_converges() {
        let w = HermitianMatrix::zeros(4);
        let s = HermitianMatrix::identity(4);
        let b = generate_transmit(&w, &s, 100_000, 7).unwrap();
        let diff = HermitianMatrix::new(b.r_xx()).unwrap().sub(&s).frobenius_norm();
        assert!(diff < 0.05, "{diff}");
    }

    #[test]
    fn short_block_covariance_is_close() {
        let mut r = rng(3);
        let v = crate::linalg::testutil::random_vector(&mut r, 8);
        let w = HermitianMatrix::outer(&v);
        let s = random_psd(&mut r, 8, 8);
        let t = w.add(&s);
        let b = generate_transmit(&w, &s, 256, 11).unwrap();
        let rel = HermitianMatrix::new(b.r_xx()).unwrap().sub(&t).frobenius_norm() / t.frobenius_norm();
        assert!(rel <= 0.35, "{rel}");
    }

    #[test]
    fn transmit_is_deterministic_and_checks_rank() {
        let mut r = rng(5);
        let w = HermitianMatrix::outer(&crate::linalg::testutil::random_vector(&mut r, 4));
        let s = random_psd(&mut r, 4, 2);
        let a = generate_transmit(&w, &s, 64, 9).unwrap();
        let b = generate_transmit(&w, &s, 64, 9).unwrap();
        assert_eq!(a.x, b.x);
        assert_ne!(a.x, generate_transmit(&w, &s, 64, 10).unwrap().x);
        let w2 = random_psd(&mut r, 4, 2);
        assert!(matches!(generate_transmit(&w2, &s, 8, 1), Err(Error::Domain(_))));
        let bad = HermitianMatrix::identity(4).scale(-1.0);
        assert!(matches!(generate_transmit(&w, &bad, 8, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn echo_examples() {
        let n = 6;
        let theta = deg(20.0);
        let a = steering(theta, n, 0.5);
        let x = DMatrix::from_columns(&[a.clone()]);
        let block = SignalBlock::new(x, None).unwrap();
        let scene = TargetScene::new(vec![theta], vec![cr(1.0)], 0.0, 0.5).unwrap();
        let y = simulate_echo(&block, &scene, 0).y.unwrap();
        let expect = a.conjugate() * cr(n as f64);
        assert!((y.column(0) - expect).norm() < 1e-12);

        let zero = SignalBlock::new(DMatrix::zeros(n, 3), None).unwrap();
        assert_eq!(simulate_echo(&zero, &scene, 0).y.unwrap().norm(), 0.0);
    }

    #[test]
    fn echo_superposition() {
        let mut r = rng(8);
        let block = SignalBlock::new(random_complex(&mut r, 5, 7), None).unwrap();
        let b = c64(0.3, -0.2);
        let one = TargetScene::new(vec![deg(-30.0)], vec![b], 0.0, 0.5).unwrap();
        let two = TargetScene::new(vec![deg(40.0)], vec![b], 0.0, 0.5).unwrap();
        let both = TargetScene::new(vec![deg(-30.0), deg(40.0)], vec![b, b], 0.0, 0.5).unwrap();
        let sum = simulate_echo(&block, &one, 0).y.unwrap() + simulate_echo(&block, &two, 0).y.unwrap();
        assert!((simulate_echo(&block, &both, 0).y.unwrap() - sum).norm() < 1e-12);
    }

    fn c64(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn echo_block(seed: u64, snr_db: f64, angles: &[f64]) -> SignalBlock {
        let n = 8;
        let w = HermitianMatrix::zeros(n);
        let s = HermitianMatrix::identity(n).scale(1.0 / n as f64);
        let scene = TargetScene::with_snr(angles.to_vec(), snr_db, n, 1.0, 1.0, 0.5, seed).unwrap();
        simulate_echo(&generate_transmit(&w, &s, 256, seed).unwrap(), &scene, seed)
    }

    #[test]
    fn single_target_peak() {
        let theta = deg(23.0);
        let step = std::f64::consts::PI / 999.0;
        for seed in 0..5 {
            let sp = capon_spectrum(&echo_block(seed, 30.0, &[theta]), 1000, 0.5).unwrap();
            assert!(sp.values.iter().all(|v| v.is_finite() && *v >= 0.0));
            let i = (0..sp.values.len()).max_by(|&a, &b| sp.values[a].total_cmp(&sp.values[b])).unwrap();
            assert!((sp.angles[i] - theta).abs() <= step, "{}", sp.angles[i].to_degrees());
        }
    }

    #[test]
    fn matched_form_resolves_an_off_broadside_target() {
        // the conventional pairing looks for the receive response at the mirrored angle
        let theta = deg(23.0);
        let sp = capon_spectrum_with(&echo_block(1, 30.0, &[theta]), 1000, 0.5, CaponForm::Conventional).unwrap();
        let est = estimate_angles(&sp, 1)[0];
        let matched = estimate_angles(&capon_spectrum(&echo_block(1, 30.0, &[theta]), 1000, 0.5).unwrap(), 1)[0];
        assert!((matched - theta).abs() < (est - theta).abs());
    }

    #[test]
    fn missing_echo_is_rejected() {
        let block = SignalBlock::new(DMatrix::zeros(2, 2), None).unwrap();
        assert!(matches!(capon_spectrum(&block, 10, 0.5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn estimate_and_rmse_examples() {
        let truth = [deg(-45.0), deg(-15.0), deg(15.0), deg(45.0)];
        assert_eq!(rmse(&truth, &truth).unwrap(), 0.0);
        let shifted: Vec<f64> = truth.iter().map(|t| t + deg(1.0)).collect();
        assert!((rmse(&shifted, &truth).unwrap() - 1.0).abs() < 1e-12);
        assert!(rmse(&truth[..2], &truth).is_err());

        let sp = Spectrum { angles: vec![0.0, 1.0, 2.0, 3.0, 4.0], values: vec![0.0, 5.0, 1.0, 3.0, 2.0] };
        assert_eq!(estimate_angles(&sp, 2), vec![1.0, 3.0]);
        // only two local maxima: the third estimate is the largest remaining sample
        assert_eq!(estimate_angles(&sp, 3), vec![1.0, 3.0, 4.0]);
    }

    #[test]
    fn angle_grid_spans_half_circle() {
        let g = angle_grid(1000);
        assert_eq!(g.len(), 1000);
        assert_eq!(g[0], -std::f64::consts::FRAC_PI_2);
        assert!((g[999] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn echo_is_linear_in_x(seed in 0u64..1000, alpha in -3.0f64..3.0, t1 in -80.0f64..80.0) {
            let mut r = rng(seed);
            let x1 = random_complex(&mut r, 4, 5);
            let x2 = random_complex(&mut r, 4, 5);
            let scene = TargetScene::new(vec![deg(t1)], vec![c64(0.7, 0.1)], 0.2, 0.5).unwrap();
            let y = |x: DMatrix<C64>| simulate_echo(&SignalBlock::new(x, None).unwrap(), &scene, seed).y.unwrap();
            let noise = y(DMatrix::zeros(4, 5));
            let lhs = y(&x1 + &x2 * cr(alpha)) - &noise;
            let rhs = (y(x1) - &noise) + (y(x2) - &noise) * cr(alpha);
            prop_assert!((lhs - rhs).norm() < 1e-10);
        }

        #[test]
        fn capon_scales_with_echo_amplitude(seed in 0u64..1000, k in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0]) {
            let block = echo_block(seed, 10.0, &[deg(-20.0), deg(35.0)]);
            let mut scaled = block.clone();
            scaled.y = Some(block.y.as_ref().unwrap() * cr(k));
            // the spectrum estimates |beta|, so it scales by |k| and its peaks stay put
            for form in [CaponForm::Matched, CaponForm::Conventional] {
                let a = capon_spectrum_with(&block, 200, 0.5, form).unwrap();
                let b = capon_spectrum_with(&scaled, 200, 0.5, form).unwrap();
                for (u, v) in a.values.iter().zip(&b.values) {
                    prop_assert!((k.abs() * u - v).abs() <= 1e-9 * v.abs().max(f64::MIN_POSITIVE));
                }
            }
        }
    }
}
