use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::certificate::CertificateConfig;
use crate::dual_analysis::LocateOptions;
use crate::error::{Error, Result};
use crate::model::{MixtureInstance, MixtureInstanceJson};
use crate::solver::SolverOptions;
use crate::synthesis::{synth_instance, AmplitudeModel, SynthesisConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Synth,
    Demix,
    PhaseTransition,
    Certificate,
}

/// Where a demixing instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceSource {
    Synthesis(SynthesisConfig),
    /// A `MixtureInstance` JSON file, as written by `synth`.
    Path(PathBuf),
}

impl Default for InstanceSource {
    fn default() -> Self {
        InstanceSource::Synthesis(SynthesisConfig::fig1(0))
    }
}

impl InstanceSource {
    pub fn load(&self) -> Result<MixtureInstance> {
        match self {
            InstanceSource::Synthesis(cfg) => synth_instance(cfg),
            InstanceSource::Path(path) => {
                let text = std::fs::read_to_string(path)?;
                let json: MixtureInstanceJson = serde_json::from_str(&text)?;
                MixtureInstance::from_json(&json)
            }
        }
    }
}

/// Separation sweep in multiples of `1/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseTransitionConfig {
    pub n_sensors: usize,
    pub f1: f64,
    pub delta_start: f64,
    pub delta_step: f64,
    pub delta_stop: f64,
    pub snapshots: Vec<usize>,
    pub trials: usize,
    pub total_outliers: usize,
    pub amplitude_model: AmplitudeModel,
    pub outlier_magnitude: f64,
}

impl Default for PhaseTransitionConfig {
    fn default() -> Self {
        Self {
            n_sensors: 50,
            f1: 0.2,
            delta_start: 0.1,
            delta_step: 0.1,
            delta_stop: 1.5,
            snapshots: vec![1, 3, 5],
            trials: 20,
            total_outliers: 10,
            amplitude_model: AmplitudeModel::ComplexGaussian,
            outlier_magnitude: 1.0,
        }
    }
}

impl PhaseTransitionConfig {
    /// Sweep points `δ·N`, inclusive of the stop value up to rounding.
    pub fn deltas_times_n(&self) -> Vec<f64> {
        let count =
            ((self.delta_stop - self.delta_start) / self.delta_step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.delta_start + i as f64 * self.delta_step)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfiguration(msg));
        if !(self.delta_start < self.delta_stop) {
            return invalid(format!(
                "sweep start {} must be below stop {}",
                self.delta_start, self.delta_stop
            ));
        }
        if !(self.delta_step > 0.0 && self.delta_start > 0.0) {
            return invalid("sweep start and step must be positive".into());
        }
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        if self.snapshots.is_empty() || self.snapshots.contains(&0) {
            return invalid("snapshot counts must be positive".into());
        }
        if !(0.0..1.0).contains(&self.f1) || self.n_sensors < 2 {
            return invalid(format!(
                "need f1 in [0, 1) and N ≥ 2, got {} and {}",
                self.f1, self.n_sensors
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Checked against the subcommand when present.
    pub command: Option<Command>,
    pub instance: InstanceSource,
    pub solver: SolverOptions,
    pub locate: LocateOptions,
    /// `None` selects `1/√N`.
    pub lambda: Option<f64>,
    pub phase_transition: PhaseTransitionConfig,
    pub certificate: CertificateConfig,
    /// Number of consecutive certificate seeds to run.
    pub certificate_seeds: usize,
    /// Grid for exported dual-polynomial traces; zero follows the locate grid.
    pub trace_grid: usize,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            instance: InstanceSource::default(),
            solver: SolverOptions::default(),
            locate: LocateOptions::default(),
            lambda: None,
            phase_transition: PhaseTransitionConfig::default(),
            certificate: CertificateConfig::default(),
            certificate_seeds: 1,
            trace_grid: 0,
            out: PathBuf::from("out"),
            seed: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfiguration(format!("{}: {e}", path.display())))
    }

    /// `λ` for `n` sensors.
    pub fn lambda_for(&self, n: usize) -> Result<f64> {
        match self.lambda {
            None => Ok(1.0 / (n as f64).sqrt()),
            Some(l) if l > 0.0 && l.is_finite() => Ok(l),
            Some(l) => Err(Error::InvalidConfiguration(format!(
                "lambda must be positive, got {l}"
            ))),
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
