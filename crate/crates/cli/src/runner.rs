//! Subcommand implementations. Each writes its files into `out` and returns
//! the report; infeasible instances produce a report, not an error.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use isac_core::baseline::{sensing_only, solve_separate, SecrecyInstance};
use isac_core::error::Error;
use isac_core::linalg::HermitianMatrix;
use isac_core::model::{secrecy_rate, sensing_objective_total, sinr_cu, Design};
use isac_core::outage::{empirical_outage, solve_p2};
use isac_core::search::{SearchSettings, Solved};
use isac_core::sensing::CaponTrial;
use isac_core::worstcase::{solve_p1, verify_worst_case};

use crate::output::{
    beampattern, write_beampattern, write_rmse, write_sweep, MatrixJson, Pipeline, RmseRow, SavedDesign, SolveReport,
    SweepRow,
};
use crate::scenario::{ScenarioFile, SecrecyMode};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    R0,
    Theta0,
    Rho,
    Snr,
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::Infeasible(_) => "infeasible",
        _ => "error",
    }
}

/// Joint design for the scenario's secrecy mode.
pub fn solve_joint(inst: &SecrecyInstance, settings: &SearchSettings) -> Result<Solved, Error> {
    match inst {
        SecrecyInstance::Bounded(b) => solve_p1(b, settings),
        SecrecyInstance::Gaussian(g) => solve_p2(g, settings),
    }
}

/// Secrecy check of a design: worst-case verification for bounded errors,
/// a Monte Carlo outage estimate for Gaussian errors.
fn secrecy_check(
    inst: &SecrecyInstance,
    w: &HermitianMatrix,
    s: &HermitianMatrix,
    gamma: f64,
    scenario: &ScenarioFile,
    report: &mut SolveReport,
) -> Result<(), CliError> {
    let cfg = inst.config();
    report.cu_sinr = Some(sinr_cu(w, s, &cfg.g, cfg.sigma0_sq));
    report.secrecy_rate_nominal = Some(secrecy_rate(w, s, &cfg.g, &cfg.h_hat, cfg));
    match inst {
        SecrecyInstance::Bounded(b) => report.verification = Some(verify_worst_case(w, s, gamma, b)),
        SecrecyInstance::Gaussian(g) => {
            report.outage = Some(empirical_outage(w, s, g, scenario.run.mc_samples, scenario.run.seed)?)
        }
    }
    Ok(())
}

fn write_design(
    out: &Path,
    scenario: &ScenarioFile,
    pipeline: Pipeline,
    design: &Design,
    objective: f64,
    report: &SolveReport,
) -> Result<(), CliError> {
    let saved = SavedDesign {
        scenario: scenario.clone(),
        pipeline,
        gamma: design.gamma,
        eta: design.eta,
        objective,
        rank_one: design.rank_one,
        w: MatrixJson::from_hermitian(&design.w),
        s: MatrixJson::from_hermitian(&design.s),
        verification: report.verification.clone(),
        outage: report.outage,
    };
    let text = serde_json::to_string_pretty(&saved).expect("design serializes");
    std::fs::write(out.join("design.json"), text)?;
    Ok(())
}

fn finish_design(
    out: &Path,
    scenario: &ScenarioFile,
    inst: &SecrecyInstance,
    pipeline: Pipeline,
    design: &Design,
    objective: f64,
    report: &mut SolveReport,
) -> Result<(), CliError> {
    let spec = inst.spec();
    secrecy_check(inst, &design.w, &design.s, design.gamma, scenario, report)?;
    let rows = beampattern(&design.w, &design.s, &spec.sample_angles, inst.config().spacing_ratio);
    write_beampattern(&out.join("beampattern.csv"), &rows)?;
    report.status = "optimal".into();
    report.objective = Some(objective);
    report.gamma = Some(design.gamma);
    report.beampattern_rows = rows.len();
    write_design(out, scenario, pipeline, design, objective, report)
}

fn new_report(command: &str, scenario: &ScenarioFile) -> SolveReport {
    SolveReport { command: command.into(), scenario: scenario.to_json(), ..Default::default() }
}

/// `solve-p1` (perfect or bounded CSI) and `solve-p2` (Gaussian CSI).
pub fn run_solve(scenario: &ScenarioFile, pipeline: Pipeline, out: &Path) -> Result<SolveReport, CliError> {
    let start = Instant::now();
    let command = match pipeline {
        Pipeline::P1 => "solve-p1",
        Pipeline::P2 => "solve-p2",
        _ => unreachable!("run_solve handles the joint pipelines"),
    };
    let gaussian = scenario.secrecy.mode == SecrecyMode::Gaussian;
    if gaussian != (pipeline == Pipeline::P2) {
        return Err(CliError::Scenario(format!(
            "secrecy.mode: {command} needs {} mode",
            if pipeline == Pipeline::P2 { "gaussian" } else { "perfect or bounded" }
        )));
    }
    let inst = scenario.instance()?;
    let settings = scenario.search_settings();
    let mut report = new_report(command, scenario);
    match solve_joint(&inst, &settings) {
        Ok(solved) => finish_design(out, scenario, &inst, pipeline, &solved.design, solved.objective, &mut report)?,
        Err(e @ Error::Infeasible(_)) => {
            report.status = status_of(&e).into();
            report.message = Some(e.to_string());
        }
        Err(e) => return Err(e.into()),
    }
    report.seconds = start.elapsed().as_secs_f64();
    report.write(out)?;
    Ok(report)
}

/// Separate (two-stage) design plus the sensing-only bound.
pub fn run_baseline(scenario: &ScenarioFile, out: &Path) -> Result<SolveReport, CliError> {
    let start = Instant::now();
    let inst = scenario.instance()?;
    let settings = scenario.search_settings();
    let mut report = new_report("baseline", scenario);
    report.sensing_only_objective = Some(sensing_only(inst.config(), inst.spec(), &settings)?.objective);
    match solve_separate(&inst, &settings) {
        Ok(sep) => {
            let design = Design { w: sep.w_bar, s: sep.s_bar, eta: sep.eta, gamma: sep.gamma, rank_one: true };
            finish_design(out, scenario, &inst, Pipeline::Separate, &design, sep.objective, &mut report)?;
        }
        Err(e @ Error::Infeasible(_)) => {
            report.status = status_of(&e).into();
            report.message = Some(e.to_string());
        }
        Err(e) => return Err(e.into()),
    }
    report.seconds = start.elapsed().as_secs_f64();
    report.write(out)?;
    Ok(report)
}

fn objective_or_status(r: Result<f64, Error>) -> Result<(Option<f64>, String), CliError> {
    match r {
        Ok(v) => Ok((Some(v), "optimal".into())),
        Err(e @ Error::Infeasible(_)) => Ok((None, status_of(&e).into())),
        Err(e) => Err(e.into()),
    }
}

fn sweep_point(scenario: &ScenarioFile, x: f64, d_sensing_only: Option<f64>) -> Result<SweepRow, CliError> {
    let inst = scenario.instance()?;
    let settings = scenario.search_settings();
    let (d_opt, status) = objective_or_status(solve_joint(&inst, &settings).map(|s| s.objective))?;
    let (d_sep, sep_status) = objective_or_status(solve_separate(&inst, &settings).map(|s| s.objective))?;
    Ok(SweepRow { x, d_opt, d_sep, d_sensing_only, status, sep_status })
}

/// Parameter sweep; points run in parallel and are written in input order.
pub fn run_sweep(scenario: &ScenarioFile, kind: SweepKind, out: &Path) -> Result<SolveReport, CliError> {
    if kind == SweepKind::Snr {
        return run_capon(scenario, out, "sweep snr");
    }
    let start = Instant::now();
    let (values, x_name, command) = match kind {
        SweepKind::R0 => (&scenario.run.sweep.r0, "r0_bps_hz", "sweep r0"),
        SweepKind::Theta0 => (&scenario.run.sweep.theta0_deg, "theta0_deg", "sweep theta0"),
        SweepKind::Rho => (&scenario.run.sweep.rho, "rho", "sweep rho"),
        SweepKind::Snr => unreachable!(),
    };
    if kind == SweepKind::Rho && scenario.secrecy.mode != SecrecyMode::Gaussian {
        return Err(CliError::Scenario("secrecy.mode: a rho sweep needs gaussian mode".into()));
    }
    let points: Vec<ScenarioFile> = values
        .iter()
        .map(|&x| {
            let mut s = scenario.clone();
            match kind {
                SweepKind::R0 => s.secrecy.r0 = x,
                SweepKind::Theta0 => s.geometry.cu_angle_deg = x,
                SweepKind::Rho => s.secrecy.rho = x,
                SweepKind::Snr => unreachable!(),
            }
            s.validate()?;
            Ok(s)
        })
        .collect::<Result<_, CliError>>()?;
    // the sensing-only bound ignores every swept parameter
    let settings = scenario.search_settings();
    let cfg = scenario.system_config()?;
    let bound = objective_or_status(sensing_only(&cfg, &scenario.sensing_spec()?, &settings).map(|s| s.objective))?.0;
    let rows: Vec<SweepRow> = points
        .par_iter()
        .zip(values.par_iter())
        .map(|(s, &x)| sweep_point(s, x, bound))
        .collect::<Result<_, _>>()?;
    write_sweep(&out.join("sweep.csv"), x_name, &rows)?;

    let mut report = new_report(command, scenario);
    report.status = "done".into();
    report.sensing_only_objective = bound;
    let infeasible: Vec<String> =
        rows.iter().filter(|r| r.status == "infeasible").map(|r| r.x.to_string()).collect();
    report.extra.push(("points".into(), rows.len().to_string()));
    report.extra.push(("infeasible_points".into(), infeasible.join(",")));
    report.seconds = start.elapsed().as_secs_f64();
    report.write(out)?;
    Ok(report)
}

/// Angle RMSE versus sensing SNR for the joint, separate and sensing-only
/// designs. Designs that cannot be computed leave their column empty.
pub fn run_capon(scenario: &ScenarioFile, out: &Path, command: &str) -> Result<SolveReport, CliError> {
    let start = Instant::now();
    let inst = scenario.instance()?;
    let settings = scenario.search_settings();
    let cfg = inst.config();
    let mut report = new_report(command, scenario);

    let mut designs: Vec<Option<(HermitianMatrix, HermitianMatrix)>> = Vec::new();
    let joint = solve_joint(&inst, &settings);
    let sep = solve_separate(&inst, &settings);
    let bound = sensing_only(cfg, inst.spec(), &settings);
    for (name, r) in [
        ("joint", joint.map(|s| (s.design.w, s.design.s))),
        ("separate", sep.map(|s| (s.w_bar, s.s_bar))),
        ("sensing_only", bound.map(|b| (HermitianMatrix::zeros(cfg.n), b.s))),
    ] {
        match r {
            Ok(pair) => {
                report.extra.push((format!("{name}_status"), "optimal".into()));
                designs.push(Some(pair));
            }
            Err(e @ Error::Infeasible(_)) => {
                report.extra.push((format!("{name}_status"), status_of(&e).into()));
                designs.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let run = &scenario.run;
    let seeds = run.seed..run.seed + run.seeds;
    let angles: Vec<f64> = cfg.target_angles.clone();
    let rows: Vec<RmseRow> = run
        .snr_db
        .iter()
        .map(|&snr| {
            let trial = CaponTrial {
                angles: angles.clone(),
                snr_db: snr,
                noise_power: run.sensing_noise_power,
                spacing_ratio: cfg.spacing_ratio,
                l: run.l,
                grid_size: run.capon_grid,
                form: Default::default(),
            };
            let eval = |d: &Option<(HermitianMatrix, HermitianMatrix)>| -> Result<Option<f64>, CliError> {
                d.as_ref().map(|(w, s)| trial.mean_rmse(w, s, seeds.clone())).transpose().map_err(Into::into)
            };
            Ok(RmseRow { snr_db: snr, opt: eval(&designs[0])?, sep: eval(&designs[1])?, sensing_only: eval(&designs[2])? })
        })
        .collect::<Result<_, CliError>>()?;
    write_rmse(&out.join("rmse.csv"), &rows)?;

    report.status = "done".into();
    report.extra.push((
        "snr_definition".into(),
        "|beta|^2 N tr(W+S) / sigma_z^2, common |beta|, uniform phases".into(),
    ));
    report.extra.push(("trials_per_point".into(), run.seeds.to_string()));
    report.seconds = start.elapsed().as_secs_f64();
    report.write(out)?;
    Ok(report)
}

/// Re-checks a saved design against its embedded scenario and writes
/// `validate.txt`. Any failed check is an error.
pub fn run_validate(design_path: &Path, out: &Path) -> Result<SolveReport, CliError> {
    let start = Instant::now();
    let saved = SavedDesign::load(design_path)?;
    let scenario = &saved.scenario;
    scenario.validate()?;
    let inst = scenario.instance()?;
    let cfg = inst.config();
    let design = Design {
        w: saved.w.to_hermitian()?,
        s: saved.s.to_hermitian()?,
        eta: saved.eta,
        gamma: saved.gamma,
        rank_one: saved.rank_one,
    };
    let mut report = new_report("validate", scenario);
    let mut failures = Vec::new();
    if let Err(e) = design.check(cfg.q) {
        failures.push(format!("design check: {e}"));
    }
    let objective = sensing_objective_total(&design.total(), design.eta, cfg, inst.spec())?;
    if (objective - saved.objective).abs() > 1e-9 * saved.objective.abs().max(1e-300) {
        failures.push(format!("objective {objective} differs from stored {}", saved.objective));
    }
    secrecy_check(&inst, &design.w, &design.s, design.gamma, scenario, &mut report)?;
    if let Some(v) = &report.verification {
        if v.iter().any(|ok| !ok) {
            failures.push("worst-case secrecy verification failed".into());
        }
    }
    // the saved scenario carries the sample count and seed of the stored estimate
    if let (Some(fresh), Some(stored)) = (report.outage, &saved.outage) {
        let sigma = (stored.probability * (1.0 - stored.probability) / stored.samples as f64).sqrt();
        if fresh.probability != stored.probability {
            failures.push(format!("outage {} differs from stored {}", fresh.probability, stored.probability));
        }
        if (fresh.probability - stored.probability).abs() > 3.0 * sigma {
            failures.push("outage outside three binomial sigmas".into());
        }
    }
    report.objective = Some(objective);
    report.gamma = Some(design.gamma);
    report.extra.push(("pipeline".into(), saved.pipeline.name().into()));
    report.extra.push(("checks_failed".into(), failures.len().to_string()));
    report.status = if failures.is_empty() { "valid".into() } else { "invalid".into() };
    if !failures.is_empty() {
        report.message = Some(failures.join("; "));
    }
    report.seconds = start.elapsed().as_secs_f64();
    std::fs::write(out.join("validate.txt"), report.render())?;
    if failures.is_empty() {
        Ok(report)
    } else {
        Err(CliError::Validation(failures.join("; ")))
    }
}
