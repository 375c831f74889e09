//! Gaussian-error pipeline: per-eavesdropper outage split, Bernstein-type
//! restriction, the fixed-`gamma` cone program, search, rank-one finishing and
//! Monte-Carlo outage estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{solve, ConicProblem, Status};
use crate::encoding::{Affine, HermExpr, HermVar, ObjectiveForm, ObjectiveModel, Program};
use crate::error::{Error, Result};
use crate::linalg::{c, matrix_sqrt_psd, vector_norm_sq, CVector, HermitianMatrix};
use crate::model::{gamma_interval, phi, secrecy_rate, sensing_objective, sinr_eve, Design, GammaInterval, SensingSpec, SystemConfig};
use crate::random::{binomial_half_width, complex_normal, stream_rng};
use crate::search::{finish_rank_one, search_gamma, Evaluation, SearchSettings, Solved};
use crate::worstcase::{check_gamma, common_program};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone)]
pub struct OutageInstance {
    pub config: SystemConfig,
    pub spec: SensingSpec,
    pub r0: f64,
    /// Secrecy outage threshold.
    pub rho: f64,
    pub covariances: Vec<HermitianMatrix>,
    sqrt_cov: Vec<HermitianMatrix>,
}

impl OutageInstance {
    pub fn new(
        config: SystemConfig,
        spec: SensingSpec,
        r0: f64,
        rho: f64,
        covariances: Vec<HermitianMatrix>,
    ) -> Result<Self> {
        config.validate()?;
        spec.validate(config.k())?;
        if !(r0 >= 0.0) || !r0.is_finite() {
            return Err(Error::InvalidInput("rate threshold must be finite and nonnegative".into()));
        }
        if !(rho > 0.0 && rho < 0.5) {
            return Err(Error::InvalidInput(format!("outage threshold {rho} outside (0, 0.5)")));
        }
        if covariances.len() != config.k_e || covariances.iter().any(|c| c.n() != config.n) {
            return Err(Error::InvalidInput("need one N x N covariance per eavesdropper".into()));
        }
        let sqrt_cov = covariances.iter().map(matrix_sqrt_psd).collect::<Result<_>>()?;
        Ok(Self { config, spec, r0, rho, covariances, sqrt_cov })
    }

    /// Rician eavesdropper channels: the line-of-sight part of `config.h_hat`
    /// is scaled by `sqrt(K/(K+1))` and the scattered part becomes the error,
    /// `C_k = (||h_k^LoS||^2 / N) / (K+1) I`.
    pub fn rician(mut config: SystemConfig, spec: SensingSpec, r0: f64, rho: f64, k_factor: f64) -> Result<Self> {
        if !(k_factor >= 0.0) || !k_factor.is_finite() {
            return Err(Error::InvalidInput("Rician factor must be finite and nonnegative".into()));
        }
        let n = config.n as f64;
        let mut covs = Vec::with_capacity(config.k_e);
        for h in config.h_hat.iter_mut() {
            let gain = vector_norm_sq(h) / n;
            covs.push(HermitianMatrix::identity(config.n).scale(gain / (k_factor + 1.0)));
            *h = &*h * c((k_factor / (k_factor + 1.0)).sqrt(), 0.0);
        }
        Self::new(config, spec, r0, rho, covs)
    }

    pub fn gamma_interval(&self) -> Result<GammaInterval> {
        gamma_interval(&self.config, self.r0)
    }

    pub fn sqrt_covariance(&self, k: usize) -> &HermitianMatrix {
        &self.sqrt_cov[k]
    }

    pub fn rho_bar(&self) -> f64 {
        rho_bar(self.rho, self.config.k_e.max(1))
    }
}

/// Per-eavesdropper outage level `1 - (1 - rho)^(1/K_E)`.
pub fn rho_bar(rho: f64, k_e: usize) -> f64 {
    -((-rho).ln_1p() / k_e as f64).exp_m1()
}

/// Coefficients of the quadratic form in the normalized error `u`.
#[derive(Debug, Clone)]
pub struct BtiData {
    pub a: HermitianMatrix,
    pub q: CVector,
    pub c: f64,
}

impl BtiData {
    /// `u^H A u + 2 Re(u^H q) + c`.
    pub fn eval(&self, u: &CVector) -> f64 {
        self.a.quad_form(u) + 2.0 * u.dotc(&self.q).re + self.c
    }
}

/// `A = C^½ (phi S - W) C^½`, `q = C^½ (phi S - W) h`, `c = h^H (phi S - W) h + sigma^2 phi`.
#[allow(clippy::too_many_arguments)]
pub fn bti_data(
    w: &HermitianMatrix,
    s: &HermitianMatrix,
    gamma: f64,
    h_hat: &CVector,
    cov: &HermitianMatrix,
    sigma_sq: f64,
    r0: f64,
) -> Result<BtiData> {
    let r = matrix_sqrt_psd(cov)?;
    Ok(bti_from_sqrt(w, s, gamma, h_hat, &r, sigma_sq, r0))
}

fn bti_from_sqrt(
    w: &HermitianMatrix,
    s: &HermitianMatrix,
    gamma: f64,
    h_hat: &CVector,
    r: &HermitianMatrix,
    sigma_sq: f64,
    r0: f64,
) -> BtiData {
    let f = phi(gamma, r0);
    let m = s.scale(f).sub(w);
    let a = m.congruence(r.as_matrix());
    let q = r.as_matrix() * (m.as_matrix() * h_hat);
    let cc = m.quad_form(h_hat) + sigma_sq * f;
    BtiData { a, q, c: cc }
}

/// Variable map and assembled program of the fixed-`gamma` restriction.
#[derive(Debug, Clone)]
pub struct P25Encoding {
    pub w: HermVar,
    pub s: HermVar,
    pub eta: usize,
    /// Bernstein auxiliaries per eavesdropper, divided by [`bti_scale`].
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub epigraph: usize,
    pub problem: ConicProblem,
}

impl P25Encoding {
    pub fn extract(&self, x: &[f64], gamma: f64) -> Design {
        Design { w: self.w.value(x), s: self.s.value(x), eta: x[self.eta], gamma, rank_one: false }
    }
}

/// Row scale of eavesdropper `k`'s Bernstein constraints.
pub fn bti_scale(h_hat: &CVector, cov: &HermitianMatrix) -> f64 {
    (vector_norm_sq(h_hat) + cov.trace()).max(f64::MIN_POSITIVE)
}

pub fn build_p25(inst: &OutageInstance, gamma: f64) -> Result<P25Encoding> {
    build_p25_with(inst, gamma, ObjectiveForm::Compressed)
}

pub fn build_p25_with(inst: &OutageInstance, gamma: f64, form: ObjectiveForm) -> Result<P25Encoding> {
    let model = form.model(&inst.config, &inst.spec);
    assemble_p25(inst, &model, gamma)
}

/// Appends the Bernstein restriction for `M' = phi S - W`; returns `(a, b)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn add_bti(
    prog: &mut Program,
    m: &HermExpr,
    h_hat: &CVector,
    r: &HermitianMatrix,
    cov: &HermitianMatrix,
    sigma_sq: f64,
    f: f64,
    rho_bar: f64,
) -> (usize, usize) {
    let n = m.n;
    let scale = bti_scale(h_hat, cov);
    let m = m.scaled(1.0 / scale);
    let a_expr = m.congruence(r.as_matrix());
    let mh = m.mul_vec(h_hat);
    let q: Vec<_> = (0..n)
        .map(|i| {
            let mut e = crate::encoding::CAffine::zero();
            for (k, t) in mh.iter().enumerate() {
                e.add_scaled(t, r.as_matrix()[(i, k)]);
            }
            e
        })
        .collect();
    let mut cc = m.quad(h_hat);
    cc.constant += sigma_sq * f / scale;

    let av = prog.var();
    let bv = prog.var();
    let ln = rho_bar.ln();
    // Tr A - sqrt(-2 ln rho) a + ln rho b + c >= 0
    let mut row = cc;
    for i in 0..n {
        row.add_scaled(&a_expr.at(i, i).re, 1.0);
    }
    row.add_scaled(&Affine::var(av), -(-2.0 * ln).sqrt());
    row.add_scaled(&Affine::var(bv), ln);
    prog.nonneg(vec![row]);
    // || (sqrt2 q, vec A) || <= a
    let mut soc = vec![Affine::var(av)];
    for e in &q {
        soc.push(e.re.scaled(SQRT2));
        soc.push(e.im.scaled(SQRT2));
    }
    for e in &a_expr.entries {
        soc.push(e.re.clone());
        soc.push(e.im.clone());
    }
    prog.soc(soc);
    // b I + A >= 0, b >= 0
    let mut blk = a_expr;
    for i in 0..n {
        blk.at_mut(i, i).re.add_scaled(&Affine::var(bv), 1.0);
    }
    prog.psd_herm(&blk);
    prog.nonneg(vec![Affine::var(bv)]);
    (av, bv)
}

pub(crate) fn assemble_p25(inst: &OutageInstance, model: &ObjectiveModel, gamma: f64) -> Result<P25Encoding> {
    check_gamma(inst.gamma_interval()?, gamma)?;
    let cfg = &inst.config;
    let mut prog = Program::new();
    let (w, s, eta, t) = common_program(&mut prog, cfg, model, gamma);
    let f = phi(gamma, inst.r0);
    let m = s.expr().scaled(f).combine(&w.expr(), -1.0);
    let rb = inst.rho_bar();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for k in 0..cfg.k_e {
        let (av, bv) = add_bti(
            &mut prog,
            &m,
            &cfg.h_hat[k],
            &inst.sqrt_cov[k],
            &inst.covariances[k],
            cfg.sigma_k_sq[k],
            f,
            rb,
        );
        a.push(av);
        b.push(bv);
    }
    Ok(P25Encoding { w, s, eta, a, b, epigraph: t, problem: prog.build() })
}

/// Solves the Gaussian-error problem: `gamma` search, then rank-one finish.
pub fn solve_p2(inst: &OutageInstance, settings: &SearchSettings) -> Result<Solved> {
    let interval = inst.gamma_interval()?;
    let model = settings.objective_form.model(&inst.config, &inst.spec);
    let eval = |gamma: f64| -> Result<Evaluation<Design>> {
        let enc = assemble_p25(inst, &model, gamma)?;
        let sol = solve(&enc.problem, &settings.solver)?;
        if sol.status != Status::Optimal {
            return Ok((sol.status, None));
        }
        let d = enc.extract(&sol.x, gamma);
        let value = sensing_objective(&d.w, &d.s, d.eta, &inst.config, &inst.spec)?;
        Ok((sol.status, Some((value, d))))
    };
    let found = search_gamma(interval, settings, eval)?;
    let design = finish_rank_one(&found.payload, &inst.config.g)?;
    let objective = sensing_objective(&design.w, &design.s, design.eta, &inst.config, &inst.spec)?;
    Ok(Solved { design, relaxed: found.payload, objective, evaluations: found.evaluations })
}

/// Slack of the Bernstein restriction at a fixed design, per eavesdropper,
/// with `a` and `b` at their smallest admissible values, divided by
/// [`bti_scale`]. Nonnegative means the design satisfies the restriction.
pub fn bti_margin(w: &HermitianMatrix, s: &HermitianMatrix, gamma: f64, inst: &OutageInstance) -> Vec<f64> {
    let cfg = &inst.config;
    let ln = inst.rho_bar().ln();
    (0..cfg.k_e)
        .map(|k| {
            let d = bti_from_sqrt(w, s, gamma, &cfg.h_hat[k], &inst.sqrt_cov[k], cfg.sigma_k_sq[k], inst.r0);
            let a = (d.a.frobenius_norm().powi(2) + 2.0 * vector_norm_sq(&d.q)).sqrt();
            let b = (-d.a.min_eigenvalue()).max(0.0);
            let v = d.a.trace() - (-2.0 * ln).sqrt() * a + ln * b + d.c;
            v / bti_scale(&cfg.h_hat[k], &inst.covariances[k])
        })
        .collect()
}

/// Monte-Carlo outage estimate with its 99% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub probability: f64,
    pub half_width: f64,
    pub samples: usize,
    pub seed: u64,
}

fn sample_channels(inst: &OutageInstance, seed: u64, index: u64) -> Vec<CVector> {
    let mut rng = stream_rng(seed, index);
    (0..inst.config.k_e)
        .map(|k| {
            let u = complex_normal(&mut rng, inst.config.n);
            &inst.config.h_hat[k] + inst.sqrt_cov[k].as_matrix() * u
        })
        .collect()
}

/// Fraction of sampled channels whose secrecy rate falls below `R0`.
pub fn empirical_outage(
    w: &HermitianMatrix,
    s: &HermitianMatrix,
    inst: &OutageInstance,
    n_samples: usize,
    seed: u64,
) -> Result<OutageEstimate> {
    if n_samples < 1000 {
        return Err(Error::InvalidInput("need at least 1000 samples".into()));
    }
    let cfg = &inst.config;
    let hits: usize = (0..n_samples as u64)
        .into_par_iter()
        .filter(|&i| {
            let hs = sample_channels(inst, seed, i);
            secrecy_rate(w, s, &cfg.g, &hs, cfg) < inst.r0
        })
        .count();
    let p = hits as f64 / n_samples as f64;
    Ok(OutageEstimate { probability: p, half_width: binomial_half_width(p, n_samples), samples: n_samples, seed })
}

/// Per-eavesdropper fraction of samples with SINR above `phi(gamma)`.
pub fn empirical_violation(
    w: &HermitianMatrix,
    s: &HermitianMatrix,
    gamma: f64,
    inst: &OutageInstance,
    n_samples: usize,
    seed: u64,
) -> Vec<f64> {
    let cfg = &inst.config;
    let f = phi(gamma, inst.r0);
    let counts = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let hs = sample_channels(inst, seed, i);
            hs.iter()
                .zip(&cfg.sigma_k_sq)
                .map(|(h, &sk)| usize::from(sinr_eve(w, s, h, sk) > f))
                .collect::<Vec<_>>()
        })
        .reduce(|| vec![0; cfg.k_e], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect());
    counts.iter().map(|&c| c as f64 / n_samples as f64).collect()
}
