//! Output records and their file formats.

use std::path::Path;

use serde::{Deserialize, Serialize};

use isac_core::linalg::{HermitianMatrix, C64};
use isac_core::model::beampattern_gain;
use isac_core::outage::OutageEstimate;

use crate::scenario::ScenarioFile;
use crate::CliError;

/// Which pipeline produced a design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Bounded-error (or perfect-CSI) joint design.
    P1,
    /// Outage-constrained joint design.
    P2,
    Separate,
    SensingOnly,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::P1 => "p1",
            Pipeline::P2 => "p2",
            Pipeline::Separate => "separate",
            Pipeline::SensingOnly => "sensing_only",
        }
    }
}

/// Row-major complex matrix as two real arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_hermitian(h: &HermitianMatrix) -> Self {
        let m = h.as_matrix();
        let n = h.n();
        Self {
            re: (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }

    pub fn to_hermitian(&self) -> Result<HermitianMatrix, CliError> {
        let n = self.re.len();
        if self.im.len() != n || self.re.iter().chain(&self.im).any(|r| r.len() != n) {
            return Err(CliError::Validation("stored matrix is not square".into()));
        }
        let m = isac_core::linalg::ComplexMatrix::from_row_major(
            n,
            n,
            &(0..n * n).map(|k| C64::new(self.re[k / n][k % n], self.im[k / n][k % n])).collect::<Vec<_>>(),
        )?;
        Ok(HermitianMatrix::new(m.into_matrix())?)
    }
}

/// Design file written by the solve commands and read by `validate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SavedDesign {
    pub scenario: ScenarioFile,
    pub pipeline: Pipeline,
    pub gamma: f64,
    pub eta: f64,
    pub objective: f64,
    pub rank_one: bool,
    pub w: MatrixJson,
    pub s: MatrixJson,
    pub verification: Option<Vec<bool>>,
    pub outage: Option<OutageEstimate>,
}

impl SavedDesign {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Scenario(format!("{}: {e}", path.display())))
    }
}

/// Beampattern of a design at one angle (gains in W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSample {
    pub angle_deg: f64,
    pub total: f64,
    pub info: f64,
    pub sensing: f64,
}

pub fn beampattern(w: &HermitianMatrix, s: &HermitianMatrix, angles: &[f64], spacing_ratio: f64) -> Vec<BeamSample> {
    angles
        .iter()
        .map(|&t| {
            let info = beampattern_gain(w, t, spacing_ratio);
            let sensing = beampattern_gain(s, t, spacing_ratio);
            BeamSample { angle_deg: t.to_degrees(), total: info + sensing, info, sensing }
        })
        .collect()
}

/// Summary of one run; every field past `status` is optional so a report can
/// be written for any terminal status.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveReport {
    pub command: String,
    pub status: String,
    pub message: Option<String>,
    pub objective: Option<f64>,
    pub gamma: Option<f64>,
    pub cu_sinr: Option<f64>,
    pub secrecy_rate_nominal: Option<f64>,
    pub verification: Option<Vec<bool>>,
    pub outage: Option<OutageEstimate>,
    pub sensing_only_objective: Option<f64>,
    pub beampattern_rows: usize,
    pub extra: Vec<(String, String)>,
    pub seconds: f64,
    pub scenario: String,
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "n/a".to_string(), |x| x.to_string())
}

impl SolveReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k}: {v}\n"));
        line("command", self.command.clone());
        line("status", self.status.clone());
        if let Some(m) = &self.message {
            line("message", m.clone());
        }
        line("objective_D", opt(&self.objective));
        line("gamma", opt(&self.gamma));
        line("cu_sinr", opt(&self.cu_sinr));
        line("secrecy_rate_nominal_bps_hz", opt(&self.secrecy_rate_nominal));
        line(
            "secrecy_verified",
            self.verification.as_ref().map_or("n/a".into(), |v| {
                v.iter().map(|b| if *b { "pass" } else { "fail" }).collect::<Vec<_>>().join(",")
            }),
        );
        match &self.outage {
            Some(o) => line(
                "empirical_outage",
                format!("{} +- {} ({} samples, seed {})", o.probability, o.half_width, o.samples, o.seed),
            ),
            None => line("empirical_outage", "n/a".into()),
        }
        line("sensing_only_objective_D", opt(&self.sensing_only_objective));
        line("beampattern_rows", self.beampattern_rows.to_string());
        for (k, v) in &self.extra {
            line(k, v.clone());
        }
        line("seconds", format!("{:.3}", self.seconds));
        out.push_str("scenario:\n");
        out.push_str(&self.scenario);
        out.push('\n');
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::write(dir.join("report.txt"), self.render())?;
        Ok(())
    }
}

/// Grid coordinates: plain decimal.
fn num(v: f64) -> String {
    v.to_string()
}

/// Measured values: shortest round-trip exponent form.
fn val(v: f64) -> String {
    format!("{v:e}")
}

fn opt_val(v: Option<f64>) -> String {
    v.map(val).unwrap_or_default()
}

pub fn write_beampattern(path: &Path, rows: &[BeamSample]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["angle_deg", "total_W", "info_W", "sensing_W"])?;
    for r in rows {
        w.write_record([num(r.angle_deg), val(r.total), val(r.info), val(r.sensing)])?;
    }
    w.flush()?;
    Ok(())
}

/// One point of a parameter sweep. Objectives are in W^2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x: f64,
    pub d_opt: Option<f64>,
    pub d_sep: Option<f64>,
    pub d_sensing_only: Option<f64>,
    pub status: String,
    pub sep_status: String,
}

pub fn write_sweep(path: &Path, x_name: &str, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([x_name, "D_opt_W2", "D_sep_W2", "D_sensing_only_W2", "status", "sep_status"])?;
    for r in rows {
        w.write_record([
            num(r.x),
            opt_val(r.d_opt),
            opt_val(r.d_sep),
            opt_val(r.d_sensing_only),
            r.status.clone(),
            r.sep_status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean angle RMSE (degrees) per design at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseRow {
    pub snr_db: f64,
    pub opt: Option<f64>,
    pub sep: Option<f64>,
    pub sensing_only: Option<f64>,
}

pub fn write_rmse(path: &Path, rows: &[RmseRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["snr_db", "rmse_opt_deg", "rmse_sep_deg", "rmse_sensing_only_deg"])?;
    for r in rows {
        w.write_record([num(r.snr_db), opt_val(r.opt), opt_val(r.sep), opt_val(r.sensing_only)])?;
    }
    w.flush()?;
    Ok(())
}
