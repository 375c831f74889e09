//! Scenario files: JSON documents describing one experiment. Angles are in
//! degrees here and converted to radians when building core types.

use serde::{Deserialize, Serialize};

use isac_core::baseline::SecrecyInstance;
use isac_core::model::{SensingSpec, SystemConfig};
use isac_core::outage::OutageInstance;
use isac_core::search::SearchSettings;
use isac_core::worstcase::WorstCaseInstance;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub system: SystemSection,
    pub geometry: GeometrySection,
    pub sensing: SensingSection,
    pub secrecy: SecrecySection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub n: usize,
    /// Per-antenna power (W). Mutually exclusive with `q_total`.
    pub q_per_antenna: Option<f64>,
    /// Total power (W), split evenly over the antennas.
    pub q_total: Option<f64>,
    pub spacing_ratio: f64,
    /// CU receiver noise power (W).
    pub sigma0_sq: f64,
    /// Eavesdropper noise power (W).
    pub sigma_eve_sq: f64,
    pub cu_attenuation_db: f64,
    pub eve_attenuation_db: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            n: 8,
            q_per_antenna: None,
            q_total: None,
            spacing_ratio: 0.5,
            sigma0_sq: 1e-8,
            sigma_eve_sq: 1e-8,
            cu_attenuation_db: 70.0,
            eve_attenuation_db: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometrySection {
    pub cu_angle_deg: f64,
    /// Target angles; the first `k_e` are untrusted.
    pub target_angles_deg: Vec<f64>,
    pub k_e: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self { cu_angle_deg: 0.0, target_angles_deg: vec![-15.0, 15.0, -45.0, 45.0], k_e: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingSection {
    pub m: usize,
    pub delta_theta_deg: f64,
    pub omega_c: f64,
}

impl Default for SensingSection {
    fn default() -> Self {
        Self { m: 500, delta_theta_deg: 10.0, omega_c: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecrecyMode {
    Perfect,
    Bounded,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecrecySection {
    pub mode: SecrecyMode,
    /// Secrecy rate threshold (bps/Hz).
    pub r0: f64,
    /// Bounded mode: `eps_k = mu ||h_k||`.
    pub epsilon_fraction: f64,
    /// Gaussian mode: outage probability threshold.
    pub rho: f64,
    /// Gaussian mode: Rician factor of the eavesdropper channels.
    pub rician_k: f64,
}

impl Default for SecrecySection {
    fn default() -> Self {
        Self { mode: SecrecyMode::Perfect, r0: 4.0, epsilon_fraction: 0.01, rho: 0.1, rician_k: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub gamma_grid: usize,
    pub refine_iters: usize,
    pub seed: u64,
    /// Capon Monte Carlo trials per SNR point.
    pub seeds: u64,
    /// Channel samples for the empirical outage estimate.
    pub mc_samples: usize,
    pub capon_grid: usize,
    /// Symbols per Capon block.
    #[serde(rename = "L")]
    pub l: usize,
    pub snr_db: Vec<f64>,
    /// Noise power of the sensing receiver (W).
    pub sensing_noise_power: f64,
    pub sweep: SweepValues,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            gamma_grid: 100,
            refine_iters: 12,
            seed: 1,
            seeds: 100,
            mc_samples: 100_000,
            capon_grid: 1000,
            l: 256,
            snr_db: vec![-10.0, 0.0, 10.0, 20.0],
            sensing_noise_power: 1.0,
            sweep: SweepValues::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepValues {
    pub r0: Vec<f64>,
    pub theta0_deg: Vec<f64>,
    pub rho: Vec<f64>,
}

impl Default for SweepValues {
    fn default() -> Self {
        Self {
            r0: (1..=6).map(f64::from).collect(),
            theta0_deg: (-15..=15).map(|i| f64::from(2 * i)).collect(),
            rho: vec![0.1, 0.15, 0.2],
        }
    }
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Scenario(format!("{key}: {msg}"))
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        // serde_json messages carry the line and column of the offending key
        let s: Self = serde_json::from_str(text).map_err(|e| CliError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Scenario(m) => CliError::Scenario(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks that do not need the core constructors; those run in
    /// [`ScenarioFile::instance`] and report their own messages.
    pub fn validate(&self) -> Result<(), CliError> {
        let sys = &self.system;
        if sys.n == 0 {
            return Err(invalid("system.n", "must be positive"));
        }
        match (sys.q_per_antenna, sys.q_total) {
            (Some(_), Some(_)) => return Err(invalid("system.q_total", "set either q_total or q_per_antenna, not both")),
            (Some(q), None) | (None, Some(q)) if !(q > 0.0 && q.is_finite()) => {
                return Err(invalid("system.q", format!("power {q} must be positive")))
            }
            _ => {}
        }
        if !(sys.spacing_ratio > 0.0) {
            return Err(invalid("system.spacing_ratio", "must be positive"));
        }
        if !(sys.sigma0_sq > 0.0) || !(sys.sigma_eve_sq > 0.0) {
            return Err(invalid("system.sigma0_sq", "noise powers must be positive"));
        }
        let geo = &self.geometry;
        if geo.k_e > geo.target_angles_deg.len() {
            return Err(invalid("geometry.k_e", "exceeds the number of targets"));
        }
        if geo.target_angles_deg.iter().chain([&geo.cu_angle_deg]).any(|a| !(a.abs() <= 90.0)) {
            return Err(invalid("geometry", "angles must lie in [-90, 90] degrees"));
        }
        if self.sensing.m < 2 {
            return Err(invalid("sensing.m", "need at least two sample angles"));
        }
        let sec = &self.secrecy;
        if !(sec.r0 >= 0.0 && sec.r0.is_finite()) {
            return Err(invalid("secrecy.r0", "must be finite and nonnegative"));
        }
        if !(sec.epsilon_fraction >= 0.0) {
            return Err(invalid("secrecy.epsilon_fraction", "must be nonnegative"));
        }
        if sec.mode == SecrecyMode::Gaussian && !(sec.rho > 0.0 && sec.rho < 0.5) {
            return Err(invalid("secrecy.rho", "must lie in (0, 0.5)"));
        }
        let run = &self.run;
        if run.gamma_grid == 0 {
            return Err(invalid("run.gamma_grid", "must be positive"));
        }
        if run.capon_grid < 2 || run.l == 0 || run.seeds == 0 {
            return Err(invalid("run", "capon_grid >= 2, L >= 1 and seeds >= 1 required"));
        }
        if run.mc_samples < 1000 {
            return Err(invalid("run.mc_samples", "need at least 1000 samples"));
        }
        if !(run.sensing_noise_power > 0.0) {
            return Err(invalid("run.sensing_noise_power", "must be positive"));
        }
        Ok(())
    }

    pub fn q_per_antenna(&self) -> f64 {
        let n = self.system.n as f64;
        match (self.system.q_per_antenna, self.system.q_total) {
            (Some(q), _) => q,
            (None, Some(total)) => total / n,
            (None, None) => 1.0 / n,
        }
    }

    pub fn system_config(&self) -> Result<SystemConfig, CliError> {
        let sys = &self.system;
        let geo = &self.geometry;
        Ok(SystemConfig::line_of_sight(
            sys.n,
            self.q_per_antenna(),
            sys.spacing_ratio,
            sys.sigma0_sq,
            sys.sigma_eve_sq,
            geo.cu_angle_deg.to_radians(),
            geo.target_angles_deg.iter().map(|a| a.to_radians()).collect(),
            geo.k_e,
            sys.cu_attenuation_db,
            sys.eve_attenuation_db,
        )?)
    }

    pub fn sensing_spec(&self) -> Result<SensingSpec, CliError> {
        Ok(SensingSpec::uniform(self.sensing.m, self.sensing.delta_theta_deg.to_radians(), self.sensing.omega_c)?)
    }

    pub fn instance(&self) -> Result<SecrecyInstance, CliError> {
        let cfg = self.system_config()?;
        let spec = self.sensing_spec()?;
        let sec = &self.secrecy;
        Ok(match sec.mode {
            SecrecyMode::Perfect => SecrecyInstance::Bounded(WorstCaseInstance::with_fraction(cfg, spec, sec.r0, 0.0)?),
            SecrecyMode::Bounded => {
                SecrecyInstance::Bounded(WorstCaseInstance::with_fraction(cfg, spec, sec.r0, sec.epsilon_fraction)?)
            }
            SecrecyMode::Gaussian => {
                SecrecyInstance::Gaussian(OutageInstance::rician(cfg, spec, sec.r0, sec.rho, sec.rician_k)?)
            }
        })
    }

    pub fn search_settings(&self) -> SearchSettings {
        SearchSettings { grid_points: self.run.gamma_grid, refine_iters: self.run.refine_iters, ..Default::default() }
    }
}
