//! System model: steering vectors, SINRs, secrecy rate, beampattern objective
//! and the rank-one construction shared by both robust pipelines.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, vector_norm_sq, CVector, HermitianMatrix, C64};

/// Array, channel and geometry parameters. Angles in radians.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub n: usize,
    /// Per-antenna transmit power (W).
    pub q: f64,
    /// Element spacing over wavelength.
    pub spacing_ratio: f64,
    pub sigma0_sq: f64,
    /// Eavesdropper noise powers, one per untrusted target.
    pub sigma_k_sq: Vec<f64>,
    pub theta0: f64,
    pub target_angles: Vec<f64>,
    /// The first `k_e` targets are untrusted.
    pub k_e: usize,
    pub g: CVector,
    pub h_hat: Vec<CVector>,
}

impl SystemConfig {
    /// Line-of-sight channels: `g = sqrt(10^(-alpha/10)) a(theta0)` and
    /// `h_k = sqrt(10^(-phi/10)) a(theta_k)` for the untrusted targets.
    #[allow(clippy::too_many_arguments)]
    pub fn line_of_sight(
        n: usize,
        q: f64,
        spacing_ratio: f64,
        sigma0_sq: f64,
        sigma_eve_sq: f64,
        theta0: f64,
        target_angles: Vec<f64>,
        k_e: usize,
        cu_attenuation_db: f64,
        eve_attenuation_db: f64,
    ) -> Result<Self> {
        let g = steering(theta0, n, spacing_ratio) * c(db_to_linear(-cu_attenuation_db).sqrt(), 0.0);
        let eve_gain = db_to_linear(-eve_attenuation_db).sqrt();
        let h_hat = target_angles
            .iter()
            .take(k_e)
            .map(|&t| steering(t, n, spacing_ratio) * c(eve_gain, 0.0))
            .collect();
        let cfg = Self {
            n,
            q,
            spacing_ratio,
            sigma0_sq,
            sigma_k_sq: vec![sigma_eve_sq; k_e],
            theta0,
            target_angles,
            k_e,
            g,
            h_hat,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn k(&self) -> usize {
        self.target_angles.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n < 2 {
            return bad("antenna count must exceed 1");
        }
        if !(self.q > 0.0) || !self.q.is_finite() {
            return bad("per-antenna power must be positive");
        }
        if !(self.spacing_ratio > 0.0) {
            return bad("spacing ratio must be positive");
        }
        if self.k_e == 0 && !self.h_hat.is_empty() {
            return bad("eavesdropper channels given without untrusted targets");
        }
        if self.k_e > self.k() {
            return bad("more untrusted targets than targets");
        }
        if !(self.sigma0_sq > 0.0) || self.sigma_k_sq.iter().any(|s| !(*s > 0.0)) {
            return bad("noise powers must be positive");
        }
        if self.sigma_k_sq.len() != self.k_e || self.h_hat.len() != self.k_e {
            return bad("one noise power and one channel estimate per untrusted target");
        }
        let half = PI / 2.0 + 1e-12;
        if self.theta0.abs() > half || self.target_angles.iter().any(|t| t.abs() > half) {
            return bad("angles must lie in [-pi/2, pi/2]");
        }
        if self.g.len() != self.n || self.h_hat.iter().any(|h| h.len() != self.n) {
            return bad("channel length must equal antenna count");
        }
        Ok(())
    }
}

/// Beampattern matching specification.
#[derive(Debug, Clone)]
pub struct SensingSpec {
    pub sample_angles: Vec<f64>,
    pub delta_theta: f64,
    pub omega_c: f64,
}

impl SensingSpec {
    /// `m` angles uniform over [-pi/2, pi/2], both endpoints included.
    pub fn uniform(m: usize, delta_theta: f64, omega_c: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidInput("need at least two sample angles".into()));
        }
        let sample_angles = (0..m)
            .map(|i| -PI / 2.0 + PI * i as f64 / (m - 1) as f64)
            .collect();
        let s = Self {
            sample_angles,
            delta_theta,
            omega_c,
        };
        s.validate(0)?;
        Ok(s)
    }

    pub fn m(&self) -> usize {
        self.sample_angles.len()
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.m() < k.max(1) {
            return Err(Error::InvalidInput("fewer sample angles than targets".into()));
        }
        if !(self.delta_theta > 0.0) {
            return Err(Error::InvalidInput("beam width must be positive".into()));
        }
        if !(self.omega_c >= 0.0) {
            return Err(Error::InvalidInput("cross-correlation weight must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Eavesdropper CSI error model.
#[derive(Debug, Clone)]
pub enum ErrorModel {
    Perfect,
    /// Error norm bounds, one per untrusted target.
    Bounded(Vec<f64>),
    /// Error covariances, one per untrusted target.
    Gaussian(Vec<HermitianMatrix>),
}

impl ErrorModel {
    pub fn validate(&self, k_e: usize) -> Result<()> {
        match self {
            ErrorModel::Perfect => Ok(()),
            ErrorModel::Bounded(eps) => {
                if eps.len() != k_e || eps.iter().any(|e| !(*e >= 0.0)) {
                    return Err(Error::InvalidInput("need one nonnegative bound per eavesdropper".into()));
                }
                Ok(())
            }
            ErrorModel::Gaussian(cs) => {
                if cs.len() != k_e {
                    return Err(Error::InvalidInput("need one covariance per eavesdropper".into()));
                }
                for cm in cs {
                    if cm.min_eigenvalue() < -1e-9 * (1.0 + cm.max_abs()) {
                        return Err(Error::InvalidInput("error covariance must be PSD".into()));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Transmit design: information covariance `w`, sensing/AN covariance `s`.
#[derive(Debug, Clone)]
pub struct Design {
    pub w: HermitianMatrix,
    pub s: HermitianMatrix,
    pub eta: f64,
    pub gamma: f64,
    pub rank_one: bool,
}

impl Design {
    pub fn total(&self) -> HermitianMatrix {
        self.w.add(&self.s)
    }

    /// Checks PSD-ness, the rank-one flag and the per-antenna power rows.
    pub fn check(&self, q: f64) -> Result<()> {
        let scale = self.w.max_abs().max(self.s.max_abs()).max(1.0);
        let tol = 1e-7 * scale;
        if self.w.min_eigenvalue() < -tol || self.s.min_eigenvalue() < -tol {
            return Err(Error::Domain("design covariance is not PSD".into()));
        }
        if self.rank_one {
            let ev = crate::linalg::hermitian_eig(&self.w).eigenvalues;
            let n = ev.len();
            if ev[n - 2] > 1e-6 * ev[n - 1].max(0.0) + 1e-14 {
                return Err(Error::Domain("information covariance is not rank one".into()));
            }
        }
        for d in self.total().diagonal() {
            if (d - q).abs() > 1e-6 * q {
                return Err(Error::Domain(format!("per-antenna power {d:.6e} differs from {q:.6e}")));
            }
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// ULA steering vector, entry m = exp(j 2 pi (d/lambda) m sin(theta)) for m = 0..N-1.
pub fn steering(theta: f64, n: usize, spacing_ratio: f64) -> CVector {
    let k = 2.0 * PI * spacing_ratio * theta.sin();
    DVector::from_fn(n, |m, _| C64::from_polar(1.0, k * m as f64))
}

/// 1 inside any target beam (strict), 0 elsewhere.
pub fn desired_beampattern(theta: f64, target_angles: &[f64], delta_theta: f64) -> f64 {
    if target_angles.iter().any(|t| (theta - t).abs() < delta_theta / 2.0) {
        1.0
    } else {
        0.0
    }
}

/// `a(theta)^H T a(theta)`.
pub fn beampattern_gain(t: &HermitianMatrix, theta: f64, spacing_ratio: f64) -> f64 {
    t.quad_form(&steering(theta, t.n(), spacing_ratio))
}

/// Weighted beampattern matching error plus cross-correlation penalty.
pub fn sensing_objective(
    w: &HermitianMatrix,
    s: &HermitianMatrix,
    eta: f64,
    config: &SystemConfig,
    spec: &SensingSpec,
) -> Result<f64> {
    sensing_objective_total(&w.add(s), eta, config, spec)
}

/// Objective as a function of `T = W + S` alone.
pub fn sensing_objective_total(
    t: &HermitianMatrix,
    eta: f64,
    config: &SystemConfig,
    spec: &SensingSpec,
) -> Result<f64> {
    let k = config.k();
    if k < 2 && spec.omega_c > 0.0 {
        return Err(Error::Domain(
            "cross-correlation term needs at least two targets".into(),
        ));
    }
    let n = config.n;
    if t.n() != n {
        return Err(Error::InvalidInput("covariance size differs from antenna count".into()));
    }
    let mut matching = 0.0;
    for &th in &spec.sample_angles {
        let p = desired_beampattern(th, &config.target_angles, spec.delta_theta);
        let r = eta * p - beampattern_gain(t, th, config.spacing_ratio);
        matching += r * r;
    }
    matching /= spec.m() as f64;
    let mut cross = 0.0;
    if spec.omega_c > 0.0 {
        let a: Vec<CVector> = config
            .target_angles
            .iter()
            .map(|&th| steering(th, n, config.spacing_ratio))
            .collect();
        for p in 0..k {
            for q in p + 1..k {
                cross += t.bilinear(&a[p], &a[q]).norm_sqr();
            }
        }
        cross *= 2.0 * spec.omega_c / (k * k - k) as f64;
    }
    Ok(matching + cross)
}

/// `h^H W h / (h^H S h + sigma^2)`.
pub fn sinr(w: &HermitianMatrix, s: &HermitianMatrix, h: &CVector, sigma_sq: f64) -> f64 {
    let num = w.quad_form(h).max(0.0);
    let den = s.quad_form(h).max(0.0) + sigma_sq;
    if den <= 0.0 {
        return if num > 0.0 { f64::INFINITY } else { 0.0 };
    }
    num / den
}

pub fn sinr_cu(w: &HermitianMatrix, s: &HermitianMatrix, g: &CVector, sigma0_sq: f64) -> f64 {
    sinr(w, s, g, sigma0_sq)
}

pub fn sinr_eve(w: &HermitianMatrix, s: &HermitianMatrix, h: &CVector, sigma_sq: f64) -> f64 {
    sinr(w, s, h, sigma_sq)
}

/// `min_k (log2(1 + gamma_0) - log2(1 + gamma_k))^+` over the given channels.
pub fn secrecy_rate(
    w: &HermitianMatrix,
    s: &HermitianMatrix,
    g: &CVector,
    h_list: &[CVector],
    config: &SystemConfig,
) -> f64 {
    let r0 = (1.0 + sinr_cu(w, s, g, config.sigma0_sq)).log2();
    h_list
        .iter()
        .zip(&config.sigma_k_sq)
        .map(|(h, &sk)| (r0 - (1.0 + sinr_eve(w, s, h, sk)).log2()).max(0.0))
        .fold(if h_list.is_empty() { r0 } else { f64::INFINITY }, f64::min)
}

/// Eavesdropper SINR cap induced by a CU SINR of `gamma`.
pub fn phi(gamma: f64, r0: f64) -> f64 {
    2f64.powf(-r0) * (1.0 + gamma) - 1.0
}

/// Closed interval of admissible CU SINR values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaInterval {
    pub lo: f64,
    pub hi: f64,
}

impl GammaInterval {
    /// `points` uniformly spaced values from `lo` to `hi` inclusive.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        match points {
            0 => vec![],
            1 => vec![self.lo],
            p => (0..p)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (p - 1) as f64)
                .collect(),
        }
    }
}

/// `[2^R0 - 1, N Q ||g||^2 / sigma0^2]`; an empty interval is an infeasibility.
pub fn gamma_interval(config: &SystemConfig, r0: f64) -> Result<GammaInterval> {
    if !(r0 >= 0.0) {
        return Err(Error::InvalidInput("rate threshold must be nonnegative".into()));
    }
    let lo = 2f64.powf(r0) - 1.0;
    let hi = config.n as f64 * config.q * vector_norm_sq(&config.g) / config.sigma0_sq;
    if lo > hi {
        return Err(Error::Infeasible(format!(
            "SINR interval is empty: {lo:.4} > {hi:.4}"
        )));
    }
    Ok(GammaInterval { lo, hi })
}

/// Projects `W~` onto the CU channel direction and moves the remainder into `S`:
/// `W* = W~ g g^H W~ / (g^H W~ g)`, `S* = W~ + S~ - W*`.
pub fn rank_one_construct(
    w_tilde: &HermitianMatrix,
    s_tilde: &HermitianMatrix,
    g: &CVector,
) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let gwg = w_tilde.quad_form(g);
    let scale = vector_norm_sq(g) * (w_tilde.trace().abs() + s_tilde.trace().abs());
    if !(gwg > 1e-12 * scale) || !(gwg > 0.0) {
        return Err(Error::Construction(format!(
            "information covariance carries no power towards the user (g^H W g = {gwg:.3e})"
        )));
    }
    let wg: CVector = w_tilde.as_matrix() * g;
    let w_star = HermitianMatrix::outer(&wg).scale(1.0 / gwg);
    let s_star = w_tilde.add(s_tilde).sub(&w_star);
    Ok((w_star, s_star))
}
