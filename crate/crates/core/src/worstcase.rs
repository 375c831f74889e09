//! Bounded-error pipeline: S-procedure LMIs, the fixed-`gamma` cone program,
//! the `gamma` search, rank-one finishing and worst-case verification.

use crate::conic::{solve, ConicProblem, Status};
use crate::encoding::{Affine, HermExpr, HermVar, ObjectiveForm, ObjectiveModel, Program};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eig, vector_norm_sq, CVector, HermitianMatrix};
use crate::model::{gamma_interval, phi, sensing_objective, Design, GammaInterval, SensingSpec, SystemConfig};
use crate::search::{finish_rank_one, search_gamma, Evaluation, SearchSettings, Solved};

/// Golden-section iterations of the verifier's multiplier search.
const VERIFY_ITERS: usize = 80;
const VERIFY_GRID: usize = 33;
/// Secrecy-rate slack, bps/Hz, granted to solver output in post-checks.
pub const RATE_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct WorstCaseInstance {
    pub config: SystemConfig,
    pub spec: SensingSpec,
    /// Secrecy-rate threshold, bps/Hz.
    pub r0: f64,
    /// Error-ball radii, one per untrusted target.
    pub epsilons: Vec<f64>,
}

impl WorstCaseInstance {
    pub fn new(config: SystemConfig, spec: SensingSpec, r0: f64, epsilons: Vec<f64>) -> Result<Self> {
        config.validate()?;
        spec.validate(config.k())?;
        if !(r0 >= 0.0) || !r0.is_finite() {
            return Err(Error::InvalidInput("rate threshold must be finite and nonnegative".into()));
        }
        if epsilons.len() != config.k_e || epsilons.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::InvalidInput("need one finite nonnegative radius per eavesdropper".into()));
        }
        Ok(Self { config, spec, r0, epsilons })
    }

    /// Radii `mu * ||h_k||`; `mu = 0` is perfect CSI.
    pub fn with_fraction(config: SystemConfig, spec: SensingSpec, r0: f64, mu: f64) -> Result<Self> {
        let eps = config.h_hat.iter().map(|h| mu * vector_norm_sq(h).sqrt()).collect();
        Self::new(config, spec, r0, eps)
    }

    pub fn gamma_interval(&self) -> Result<GammaInterval> {
        gamma_interval(&self.config, self.r0)
    }
}

/// The `(N+1)`-square S-procedure block for eavesdropper `h_hat`:
/// `[[l I - M, -M h], [-h^H M, -l eps^2 - h^H M h + phi sigma^2]]` with `M = W - phi S`.
#[allow(clippy::too_many_arguments)]
pub fn s_procedure_lmi(
    w: &HermitianMatrix,
    s: &HermitianMatrix,
    lambda: f64,
    gamma: f64,
    h_hat: &CVector,
    eps: f64,
    sigma_sq: f64,
    r0: f64,
) -> HermitianMatrix {
    let f = phi(gamma, r0);
    let m = w.sub(&s.scale(f));
    let n = m.n();
    let mh: CVector = m.as_matrix() * h_hat;
    let corner = -lambda * eps * eps - m.quad_form(h_hat) + f * sigma_sq;
    let mut b = nalgebra::DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -m.as_matrix()[(i, j)];
        }
        b[(i, i)] += c(lambda, 0.0);
        b[(i, n)] = -mh[i];
        b[(n, i)] = -mh[i].conj();
    }
    b[(n, n)] = c(corner, 0.0);
    HermitianMatrix::new(b).expect("block is Hermitian by construction")
}

/// Variable map and assembled program of the fixed-`gamma` problem.
#[derive(Debug, Clone)]
pub struct P14Encoding {
    pub w: HermVar,
    pub s: HermVar,
    pub eta: usize,
    /// Normalized multiplier `lambda eps^2 / ||h||^2` per eavesdropper; `None`
    /// when `eps = 0` and the constraint is a single scalar row.
    pub lambdas: Vec<Option<usize>>,
    pub epigraph: usize,
    pub problem: ConicProblem,
}

impl P14Encoding {
    /// Multiplier of the unnormalized block for eavesdropper `k`.
    pub fn lambda(&self, x: &[f64], inst: &WorstCaseInstance, k: usize) -> f64 {
        match self.lambdas[k] {
            Some(j) => {
                let e = inst.epsilons[k];
                x[j] * vector_norm_sq(&inst.config.h_hat[k]) / (e * e)
            }
            None => 0.0,
        }
    }

    pub fn extract(&self, x: &[f64], gamma: f64) -> Design {
        Design { w: self.w.value(x), s: self.s.value(x), eta: x[self.eta], gamma, rank_one: false }
    }
}

/// Beampattern objective model, power rows, CU row and PSD constraints shared
/// by both pipelines. Returns `(W, S, eta, epigraph)`.
pub(crate) fn common_program(
    prog: &mut Program,
    config: &SystemConfig,
    model: &ObjectiveModel,
    gamma: f64,
) -> (HermVar, HermVar, usize, usize) {
    let n = config.n;
    let w = prog.herm_var(n);
    let s = prog.herm_var(n);
    let eta = prog.var();
    let t = prog.var();
    prog.minimize(t, 1.0);
    let (we, se) = (w.expr(), s.expr());
    model.add_epigraph(prog, &we.combine(&se, 1.0).params(), eta, t);
    // (g^H W g - gamma g^H S g - gamma sigma0^2) / sigma0^2 >= 0
    let s0 = config.sigma0_sq;
    let mut cu = we.quad(&config.g).scaled(1.0 / s0);
    cu.add_scaled(&se.quad(&config.g), -gamma / s0);
    cu.constant -= gamma;
    prog.nonneg(vec![cu]);

    prog.eq(
        (0..n)
            .map(|i| {
                let mut e = we.at(i, i).re.plus(&se.at(i, i).re);
                e.constant -= config.q;
                e
            })
            .collect(),
    );
    prog.psd_herm(&we);
    prog.psd_herm(&se);
    (w, s, eta, t)
}

/// Appends the normalized S-procedure constraint for one eavesdropper and
/// returns its multiplier variable, if any.
pub(crate) fn add_lmi(
    prog: &mut Program,
    m: &HermExpr,
    h_hat: &CVector,
    eps: f64,
    sigma_sq: f64,
    f: f64,
) -> Option<usize> {
    let n = m.n;
    let c2 = vector_norm_sq(h_hat);
    let hu: CVector = h_hat / c(c2.sqrt(), 0.0);
    let mut corner = m.quad(&hu).scaled(-1.0);
    corner.constant += f * sigma_sq / c2;
    if eps == 0.0 {
        prog.nonneg(vec![corner]);
        return None;
    }
    let mu = eps / c2.sqrt();
    let nu = prog.var();
    let mut block = HermExpr::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            block.at_mut(i, j).add_scaled(m.at(i, j), c(-mu * mu, 0.0));
        }
        block.at_mut(i, i).re.add_scaled(&Affine::var(nu), 1.0);
    }
    for (i, e) in m.mul_vec(&hu).into_iter().enumerate() {
        block.at_mut(i, n).add_scaled(&e, c(-mu, 0.0));
        block.at_mut(n, i).add_scaled(&e.conj(), c(-mu, 0.0));
    }
    corner.add_scaled(&Affine::var(nu), -1.0);
    block.at_mut(n, n).re = corner;
    prog.nonneg(vec![Affine::var(nu)]);
    prog.psd_herm(&block);
    Some(nu)
}

pub fn build_p14(inst: &WorstCaseInstance, gamma: f64) -> Result<P14Encoding> {
    build_p14_with(inst, gamma, ObjectiveForm::Compressed)
}

pub fn build_p14_with(inst: &WorstCaseInstance, gamma: f64, form: ObjectiveForm) -> Result<P14Encoding> {
    let model = form.model(&inst.config, &inst.spec);
    assemble_p14(inst, &model, gamma)
}

pub(crate) fn assemble_p14(inst: &WorstCaseInstance, model: &ObjectiveModel, gamma: f64) -> Result<P14Encoding> {
    check_gamma(inst.gamma_interval()?, gamma)?;
    let cfg = &inst.config;
    let mut prog = Program::new();
    let (w, s, eta, t) = common_program(&mut prog, cfg, model, gamma);
    let f = phi(gamma, inst.r0);
    let m = w.expr().combine(&s.expr(), -f);
    let lambdas = (0..cfg.k_e)
        .map(|k| add_lmi(&mut prog, &m, &cfg.h_hat[k], inst.epsilons[k], cfg.sigma_k_sq[k], f))
        .collect();
    Ok(P14Encoding { w, s, eta, lambdas, epigraph: t, problem: prog.build() })
}

pub(crate) fn check_gamma(interval: GammaInterval, gamma: f64) -> Result<()> {
    let slack = 1e-12 * interval.hi.abs().max(1.0);
    if !(gamma >= interval.lo - slack && gamma <= interval.hi + slack) {
        return Err(Error::InvalidInput(format!(
            "gamma {gamma} outside [{}, {}]",
            interval.lo, interval.hi
        )));
    }
    Ok(())
}

/// Solves the bounded-error problem: `gamma` search, then rank-one finish.
pub fn solve_p1(inst: &WorstCaseInstance, settings: &SearchSettings) -> Result<Solved> {
    let interval = inst.gamma_interval()?;
    let model = settings.objective_form.model(&inst.config, &inst.spec);
    let eval = |gamma: f64| -> Result<Evaluation<Design>> {
        let enc = assemble_p14(inst, &model, gamma)?;
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

/// Largest minimum eigenvalue of the normalized S-procedure block over the
/// multiplier (the corner scalar when `eps = 0`), and the most negative value
/// that still keeps the worst-case eavesdropper rate within [`RATE_TOL`] of
/// its cap.
///
/// Adding `d I` to the normalized block is the same constraint with the noise
/// term raised by `2d` (by `d` for the scalar form), which lets the
/// eavesdropper SINR exceed `phi` by at most `2d ||h||^2 / sigma^2`.
pub fn worst_case_margin(
    w: &HermitianMatrix,
    s: &HermitianMatrix,
    gamma: f64,
    h_hat: &CVector,
    eps: f64,
    sigma_sq: f64,
    r0: f64,
) -> (f64, f64) {
    let f = phi(gamma, r0);
    let m = w.sub(&s.scale(f));
    let n = m.n();
    let c2 = vector_norm_sq(h_hat);
    let hu: CVector = h_hat / c(c2.sqrt(), 0.0);
    let kappa = -m.quad_form(&hu) + f * sigma_sq / c2;
    let mu = eps / c2.sqrt();
    let slack = RATE_TOL * std::f64::consts::LN_2 * (1.0 + f) * sigma_sq / c2;
    if eps == 0.0 {
        return (kappa, slack);
    }
    let mhu: CVector = m.as_matrix() * &hu;
    let min_eig = |nu: f64| -> f64 {
        let mut b = nalgebra::DMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                b[(i, j)] = -m.as_matrix()[(i, j)] * (mu * mu);
            }
            b[(i, i)] += c(nu, 0.0);
            b[(i, n)] = -mhu[i] * mu;
            b[(n, i)] = -mhu[i].conj() * mu;
        }
        b[(n, n)] = c(kappa - nu, 0.0);
        hermitian_eig(&HermitianMatrix::new(b).expect("Hermitian")).eigenvalues[0]
    };
    // beyond nu = kappa the corner is negative; beyond mu^2 (lambda_max(M) + 1)
    // only the corner binds
    let hi = kappa.max(mu * mu * (m.max_eigenvalue() + 1.0)).max(0.0);
    let grid: Vec<f64> = (0..VERIFY_GRID).map(|i| hi * i as f64 / (VERIFY_GRID - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&v| min_eig(v)).collect();
    let (ib, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let mut best = vals[ib];
    let mut lo = grid[ib.saturating_sub(1)];
    let mut up = grid[(ib + 1).min(VERIFY_GRID - 1)];
    let r = 0.618_033_988_749_894_9;
    let mut x1 = up - r * (up - lo);
    let mut x2 = lo + r * (up - lo);
    let mut f1 = min_eig(x1);
    let mut f2 = min_eig(x2);
    for _ in 0..VERIFY_ITERS {
        if f1 >= f2 {
            up = x2;
            x2 = x1;
            f2 = f1;
            x1 = up - r * (up - lo);
            f1 = min_eig(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (up - lo);
            f2 = min_eig(x2);
        }
        best = best.max(f1).max(f2);
    }
    (best, 0.5 * slack)
}

/// Per eavesdropper: does some `lambda >= 0` make the S-procedure block PSD?
pub fn verify_worst_case(w: &HermitianMatrix, s: &HermitianMatrix, gamma: f64, inst: &WorstCaseInstance) -> Vec<bool> {
    let cfg = &inst.config;
    (0..cfg.k_e)
        .map(|k| {
            let (margin, allowed) =
                worst_case_margin(w, s, gamma, &cfg.h_hat[k], inst.epsilons[k], cfg.sigma_k_sq[k], inst.r0);
            margin >= -allowed
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::*;
    use crate::model::tests::default_config;
    use crate::conic::solve as solve_conic;
    use crate::model::{secrecy_rate, sinr_eve};

    fn spec() -> SensingSpec {
        SensingSpec::uniform(500, 10f64.to_radians(), 1.0).unwrap()
    }

    #[test]
    fn lmi_trivial_examples() {
        let cfg = default_config(0.0);
        let z = HermitianMatrix::zeros(8);
        let h = &cfg.h_hat[0];
        let b = s_procedure_lmi(&z, &z, 0.0, 15.0, h, 0.1, 1e-8, 4.0);
        let f = phi(15.0, 4.0);
        assert_eq!(f, 0.0);
        assert!(b.max_abs() == 0.0);
        let b = s_procedure_lmi(&z, &z, 0.0, 40.0, h, 0.1, 1e-8, 4.0);
        assert!((b.as_matrix()[(8, 8)].re - phi(40.0, 4.0) * 1e-8).abs() < 1e-20);
        assert!(b.min_eigenvalue() >= 0.0);
    }

    #[test]
    fn lmi_homogeneity() {
        let mut r = rng(5);
        let w = random_psd(&mut r, 4, 1);
        let s = random_psd(&mut r, 4, 4);
        let h = random_vector(&mut r, 4);
        let b = s_procedure_lmi(&w, &s, 0.3, 20.0, &h, 0.2, 0.5, 2.0);
        let a = 3.7;
        let b2 = s_procedure_lmi(&w.scale(a), &s.scale(a), 0.3 * a, 20.0, &h, 0.2, 0.5 * a, 2.0);
        assert!((b2.as_matrix() - b.as_matrix() * c(a, 0.0)).norm() < 1e-12 * b2.frobenius_norm());
    }

    #[test]
    fn zero_radius_matches_scalar_sinr_test() {
        let mut r = rng(6);
        let mut agree = 0;
        for _ in 0..200 {
            let w = random_psd(&mut r, 4, 1);
            let s = random_psd(&mut r, 4, 4).scale(0.3);
            let h = random_vector(&mut r, 4);
            let sig = 0.1;
            let (gamma, r0) = (6.0, 1.0);
            let direct = sinr_eve(&w, &s, &h, sig) <= phi(gamma, r0);
            // the block is PSD for some finite lambda iff the corner is positive
            let m = w.sub(&s.scale(phi(gamma, r0)));
            let corner = -m.quad_form(&h) + phi(gamma, r0) * sig;
            if corner.abs() < 1e-6 {
                continue;
            }
            let mh: CVector = m.as_matrix() * &h;
            let mnorm = m.max_eigenvalue().abs().max(m.min_eigenvalue().abs());
            let lambda = mnorm + 2.0 * vector_norm_sq(&mh) / corner.abs() + 1.0;
            let b = s_procedure_lmi(&w, &s, lambda, gamma, &h, 0.0, sig, r0);
            assert_eq!(b.min_eigenvalue() >= 0.0, direct);
            let inst_ok = worst_case_margin(&w, &s, gamma, &h, 0.0, sig, r0);
            assert_eq!(inst_ok.0 >= 0.0, direct);
            agree += 1;
        }
        assert!(agree > 150);
    }

    #[test]
    fn verifier_accepts_when_m_is_negative_semidefinite() {
        let cfg = default_config(0.0);
        let inst = WorstCaseInstance::with_fraction(cfg, spec(), 4.0, 0.5).unwrap();
        let w = HermitianMatrix::zeros(8);
        let s = HermitianMatrix::identity(8).scale(0.125);
        assert!(verify_worst_case(&w, &s, 40.0, &inst).iter().all(|v| *v));
    }

    #[test]
    fn tally_with_stacked_objective() {
        let inst = WorstCaseInstance::with_fraction(default_config(0.0), spec(), 4.0, 0.01).unwrap();
        let enc = build_p14_with(&inst, 20.0, ObjectiveForm::Stacked).unwrap();
        let t = enc.problem.cones.tally();
        assert_eq!(t.soc, vec![1 + 500 + 12]);
        let mut psd = t.psd.clone();
        psd.sort();
        assert_eq!(psd, vec![16, 16, 18, 18]);
        // CU row and the two multipliers
        assert_eq!(t.nonneg, 3);
        assert_eq!(t.zero, 8);
        // each multiplier enters its own block and one nonneg row only
        for (k, nu) in enc.lambdas.iter().enumerate() {
            let nu = nu.unwrap();
            let rows: std::collections::BTreeSet<usize> =
                enc.problem.a.iter().filter(|t| t.col == nu).map(|t| t.row).collect();
            let blocks = enc.problem.cones.blocks();
            let owners: std::collections::BTreeSet<usize> = rows
                .iter()
                .map(|&r| blocks.iter().position(|(off, c)| r >= *off && r < off + c.dim()).unwrap())
                .collect();
            assert_eq!(owners.len(), 2, "eavesdropper {k}");
        }
    }

    #[test]
    fn no_eavesdroppers_means_no_lmis() {
        let mut cfg = default_config(0.0);
        cfg.k_e = 0;
        cfg.h_hat.clear();
        cfg.sigma_k_sq.clear();
        let inst = WorstCaseInstance::new(cfg, spec(), 4.0, vec![]).unwrap();
        let enc = build_p14(&inst, 20.0).unwrap();
        let t = enc.problem.cones.tally();
        assert_eq!(t.psd, vec![16, 16]);
        assert_eq!(t.nonneg, 1);
    }

    #[test]
    fn gamma_outside_interval_is_rejected() {
        let inst = WorstCaseInstance::with_fraction(default_config(0.0), spec(), 4.0, 0.0).unwrap();
        assert!(build_p14(&inst, 10.0).is_err());
        assert!(build_p14(&inst, 81.0).is_err());
    }

    #[test]
    fn perfect_csi_single_solve_meets_rate() {
        let inst = WorstCaseInstance::with_fraction(default_config(0.0), spec(), 4.0, 0.0).unwrap();
        let t0 = std::time::Instant::now();
        let enc = build_p14(&inst, 20.0).unwrap();
        let sol = solve(&enc.problem, &Default::default()).unwrap();
        eprintln!("p14 solve {:.3}s iters {}", t0.elapsed().as_secs_f64(), sol.iterations);
        assert_eq!(sol.status, Status::Optimal);
        let d = enc.extract(&sol.x, 20.0);
        let obj = sensing_objective(&d.w, &d.s, d.eta, &inst.config, &inst.spec).unwrap();
        let t = sol.x[enc.epigraph];
        assert!((t * t - obj).abs() <= 1e-6 * obj, "{} vs {obj}", t * t);
        let rate = secrecy_rate(&d.w, &d.s, &inst.config.g, &inst.config.h_hat, &inst.config);
        assert!(rate >= 4.0 - 1e-3, "rate {rate}");
    }

    fn run_p1(theta0_deg: f64, r0: f64, mu: f64, grid: usize) -> (WorstCaseInstance, Result<Solved>) {
        let inst = WorstCaseInstance::with_fraction(default_config(theta0_deg), spec(), r0, mu).unwrap();
        let r = solve_p1(&inst, &SearchSettings::with_grid(grid));
        (inst, r)
    }

    #[test]
    fn perfect_csi_design_is_rank_one_and_secure() {
        let (inst, r) = run_p1(0.0, 4.0, 0.0, 20);
        let s = r.unwrap();
        let d = &s.design;
        d.check(inst.config.q).unwrap();
        crate::model::tests::assert_construction_invariants(
            &s.relaxed.w,
            &s.relaxed.s,
            &d.w,
            &d.s,
            &inst.config.g,
            1e-7,
        );
        let rel = sensing_objective(&s.relaxed.w, &s.relaxed.s, s.relaxed.eta, &inst.config, &inst.spec).unwrap();
        assert!((rel - s.objective).abs() <= 1e-12 * rel);
        let rate = secrecy_rate(&d.w, &d.s, &inst.config.g, &inst.config.h_hat, &inst.config);
        assert!(rate >= 4.0 - RATE_TOL, "rate {rate}");
        assert!(verify_worst_case(&d.w, &d.s, d.gamma, &inst).iter().all(|v| *v));
        // the returned point is no worse than any evaluated grid point
        for e in s.evaluations.iter().filter_map(|e| e.value) {
            assert!(s.objective <= e * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bounded_design_survives_sampled_errors() {
        let (inst, r) = run_p1(0.0, 4.0, 0.01, 20);
        let d = r.unwrap().design;
        assert!(verify_worst_case(&d.w, &d.s, d.gamma, &inst).iter().all(|v| *v));
        let cfg = &inst.config;
        let mut rng = rng(11);
        let mut worst = f64::INFINITY;
        for _ in 0..10_000 {
            let hs: Vec<CVector> = (0..cfg.k_e)
                .map(|k| {
                    let e = random_vector(&mut rng, cfg.n);
                    let e = &e * c(inst.epsilons[k] / vector_norm_sq(&e).sqrt(), 0.0);
                    &cfg.h_hat[k] + e
                })
                .collect();
            worst = worst.min(secrecy_rate(&d.w, &d.s, &cfg.g, &hs, cfg));
        }
        assert!(worst >= 4.0 - RATE_TOL, "worst sampled rate {worst}");
    }

    #[test]
    fn user_between_eavesdroppers_is_infeasible() {
        let (_, r) = run_p1(15.0, 4.0, 0.01, 20);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn larger_error_balls_never_help() {
        let mut prev = 0.0;
        for mu in [0.0, 0.005, 0.01] {
            let (_, r) = run_p1(3.0, 4.0, mu, 20);
            let d = r.unwrap().objective;
            assert!(d >= prev * (1.0 - 1e-6), "mu {mu}: {d} < {prev}");
            prev = d;
        }
    }

    #[test]
    fn epigraph_squared_matches_objective() {
        let inst = WorstCaseInstance::with_fraction(default_config(0.0), spec(), 4.0, 0.01).unwrap();
        for form in [ObjectiveForm::Compressed, ObjectiveForm::Stacked] {
            let enc = build_p14_with(&inst, 30.0, form).unwrap();
            let sol = solve_conic(&enc.problem, &Default::default()).unwrap();
            assert_eq!(sol.status, Status::Optimal);
            let d = enc.extract(&sol.x, 30.0);
            let obj = sensing_objective(&d.w, &d.s, d.eta, &inst.config, &inst.spec).unwrap();
            let t = sol.x[enc.epigraph];
            assert!((t * t - obj).abs() <= 1e-6 * obj, "{form:?}: {} vs {obj}", t * t);
            for k in 0..2 {
                let lam = enc.lambda(&sol.x, &inst, k);
                assert!(lam >= -1e-9);
            }
        }
    }
}
