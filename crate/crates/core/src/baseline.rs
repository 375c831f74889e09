//! Two-stage benchmark: a power-minimizing secure information beam without
//! artificial noise, then a sensing covariance confined to the null space of
//! the CU channel. Also the secrecy-free sensing-only bound.

use crate::conic::{solve, Status};
use crate::encoding::{Affine, HermExpr, ObjectiveModel, Program};
use crate::error::{Error, Result};
use crate::linalg::{vector_norm_sq, CVector, HermitianMatrix};
use crate::model::{phi, rank_one_construct, sensing_objective_total, GammaInterval, SensingSpec, SystemConfig};
use crate::outage::{add_bti, OutageInstance};
use crate::search::{search_gamma, Evaluation, GridPoint, SearchSettings};
use crate::worstcase::{add_lmi, check_gamma, WorstCaseInstance};

/// Either secrecy model; selects the constraint machinery of stage 1.
#[derive(Debug, Clone)]
pub enum SecrecyInstance {
    Bounded(WorstCaseInstance),
    Gaussian(OutageInstance),
}

impl SecrecyInstance {
    pub fn config(&self) -> &SystemConfig {
        match self {
            SecrecyInstance::Bounded(i) => &i.config,
            SecrecyInstance::Gaussian(i) => &i.config,
        }
    }

    pub fn spec(&self) -> &SensingSpec {
        match self {
            SecrecyInstance::Bounded(i) => &i.spec,
            SecrecyInstance::Gaussian(i) => &i.spec,
        }
    }

    pub fn r0(&self) -> f64 {
        match self {
            SecrecyInstance::Bounded(i) => i.r0,
            SecrecyInstance::Gaussian(i) => i.r0,
        }
    }

    pub fn gamma_interval(&self) -> Result<GammaInterval> {
        match self {
            SecrecyInstance::Bounded(i) => i.gamma_interval(),
            SecrecyInstance::Gaussian(i) => i.gamma_interval(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeparateDesign {
    pub w_bar: HermitianMatrix,
    pub s_bar: HermitianMatrix,
    pub eta: f64,
    pub gamma: f64,
    pub objective: f64,
    pub evaluations: Vec<GridPoint>,
}

/// `I - g g^H / ||g||^2`.
pub fn nullspace_projector(g: &CVector) -> Result<HermitianMatrix> {
    let ng = vector_norm_sq(g);
    if !(ng > 0.0) || !ng.is_finite() {
        return Err(Error::Domain("channel must be nonzero and finite".into()));
    }
    Ok(HermitianMatrix::identity(g.len()).sub(&HermitianMatrix::outer(g).scale(1.0 / ng)))
}

/// Power-minimizing rank-one information covariance with `S = 0`.
#[derive(Debug, Clone)]
pub struct PowerMin {
    pub w_bar: HermitianMatrix,
    pub gamma: f64,
    pub evaluations: Vec<GridPoint>,
}

/// Stage 1: minimize `Tr(W)` subject to the CU row and the secrecy
/// constraints of the instance's error model with `S = 0`, searched over
/// `gamma`, then projected onto the CU channel.
pub fn solve_powermin(inst: &SecrecyInstance, settings: &SearchSettings) -> Result<PowerMin> {
    let cfg = inst.config();
    let n = cfg.n;
    let interval = inst.gamma_interval()?;
    let r0 = inst.r0();
    let eval = |gamma: f64| -> Result<Evaluation<HermitianMatrix>> {
        check_gamma(interval, gamma)?;
        let f = phi(gamma, r0);
        let mut prog = Program::new();
        let w = prog.herm_var(n);
        let we = w.expr();
        for i in 0..n {
            prog.minimize(w.offset + i, 1.0);
        }
        let mut cu = we.quad(&cfg.g).scaled(1.0 / cfg.sigma0_sq);
        cu.constant -= gamma;
        prog.nonneg(vec![cu]);
        prog.psd_herm(&we);
        match inst {
            SecrecyInstance::Bounded(b) => {
                for k in 0..cfg.k_e {
                    add_lmi(&mut prog, &we, &cfg.h_hat[k], b.epsilons[k], cfg.sigma_k_sq[k], f);
                }
            }
            SecrecyInstance::Gaussian(o) => {
                let neg = we.scaled(-1.0);
                for k in 0..cfg.k_e {
                    add_bti(
                        &mut prog,
                        &neg,
                        &cfg.h_hat[k],
                        o.sqrt_covariance(k),
                        &o.covariances[k],
                        cfg.sigma_k_sq[k],
                        f,
                        o.rho_bar(),
                    );
                }
            }
        }
        let sol = solve(&prog.build(), &settings.solver)?;
        if sol.status != Status::Optimal {
            return Ok((sol.status, None));
        }
        let wv = w.value(&sol.x);
        Ok((sol.status, Some((wv.trace(), wv))))
    };
    let found = search_gamma(interval, settings, eval)?;
    let (w_bar, _) = rank_one_construct(&found.payload, &HermitianMatrix::zeros(n), &cfg.g)?;
    let budget = n as f64 * cfg.q;
    if w_bar.trace() > budget * (1.0 + 1e-9) {
        return Err(Error::Infeasible(format!(
            "information beam needs {:.4} W, budget {budget:.4} W",
            w_bar.trace()
        )));
    }
    Ok(PowerMin { w_bar, gamma: found.gamma, evaluations: found.evaluations })
}

/// Optimal covariance, `eta` and objective of a sensing program.
#[derive(Debug, Clone)]
pub struct SensingSolution {
    pub s: HermitianMatrix,
    pub eta: f64,
    pub objective: f64,
}

/// Stage 2: `S = Q2 S2 Q2^H` with `S2 >= 0` and `diag(S + W_bar) = Q`,
/// minimizing the beampattern objective of `W_bar + S`.
pub fn solve_sep_sensing(
    w_bar: &HermitianMatrix,
    config: &SystemConfig,
    spec: &SensingSpec,
    settings: &SearchSettings,
) -> Result<SensingSolution> {
    let n = config.n;
    let tol = 1e-9 * config.q;
    if let Some((i, d)) = w_bar.diagonal().iter().enumerate().find(|(_, d)| **d > config.q + tol) {
        return Err(Error::Infeasible(format!("antenna {i} already spends {d:.6} W of {:.6} W", config.q)));
    }
    let q2 = nullspace_projector(&config.g)?;
    let model = settings.objective_form.model(config, spec);
    let mut prog = Program::new();
    let s2 = prog.herm_var(n);
    let eta = prog.var();
    let t = prog.var();
    prog.minimize(t, 1.0);
    let s_expr = s2.expr().congruence(q2.as_matrix());
    let total = s_expr.combine(&HermExpr::constant(w_bar), 1.0);
    model.add_epigraph(&mut prog, &total.params(), eta, t);
    prog.eq(
        (0..n)
            .map(|i| {
                let mut e = total.at(i, i).re.clone();
                e.constant -= config.q;
                e
            })
            .collect(),
    );
    prog.psd_herm(&s2.expr());
    finish_sensing(&prog, settings, |x| {
        let s2v = s2.value(x);
        (s2v.congruence(q2.as_matrix()), x[eta])
    }, w_bar, config, spec)
}

fn finish_sensing(
    prog: &Program,
    settings: &SearchSettings,
    extract: impl Fn(&[f64]) -> (HermitianMatrix, f64),
    w: &HermitianMatrix,
    config: &SystemConfig,
    spec: &SensingSpec,
) -> Result<SensingSolution> {
    let sol = solve(&prog.build(), &settings.solver)?;
    match sol.status {
        Status::Optimal => {
            let (s, eta) = extract(&sol.x);
            let objective = sensing_objective_total(&w.add(&s), eta, config, spec)?;
            Ok(SensingSolution { s, eta, objective })
        }
        Status::PrimalInfeasible => Err(Error::Infeasible("sensing program is infeasible".into())),
        other => Err(Error::Numerical(format!("sensing program ended with {other:?}"))),
    }
}

/// Secrecy-free bound: minimize the objective over `T >= 0`, `diag(T) = Q`.
pub fn sensing_only(config: &SystemConfig, spec: &SensingSpec, settings: &SearchSettings) -> Result<SensingSolution> {
    let n = config.n;
    let model: ObjectiveModel = settings.objective_form.model(config, spec);
    let mut prog = Program::new();
    let tv = prog.herm_var(n);
    let eta = prog.var();
    let t = prog.var();
    prog.minimize(t, 1.0);
    let te = tv.expr();
    model.add_epigraph(&mut prog, &te.params(), eta, t);
    prog.eq(
        (0..n)
            .map(|i| {
                let mut e: Affine = te.at(i, i).re.clone();
                e.constant -= config.q;
                e
            })
            .collect(),
    );
    prog.psd_herm(&te);
    let zero = HermitianMatrix::zeros(n);
    finish_sensing(&prog, settings, |x| (tv.value(x), x[eta]), &zero, config, spec)
}

/// Both stages.
pub fn solve_separate(inst: &SecrecyInstance, settings: &SearchSettings) -> Result<SeparateDesign> {
    let stage1 = solve_powermin(inst, settings)?;
    let stage2 = solve_sep_sensing(&stage1.w_bar, inst.config(), inst.spec(), settings)?;
    Ok(SeparateDesign {
        w_bar: stage1.w_bar,
        s_bar: stage2.s,
        eta: stage2.eta,
        gamma: stage1.gamma,
        objective: stage2.objective,
        evaluations: stage1.evaluations,
    })
}

/// `||S g|| / ||g||`, zero for an exact null-space design.
pub fn nullspace_leakage(s: &HermitianMatrix, g: &CVector) -> f64 {
    let sg: CVector = s.as_matrix() * g;
    sg.norm() / g.norm()
}
