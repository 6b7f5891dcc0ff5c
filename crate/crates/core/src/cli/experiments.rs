use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::{run_certificate, CertificateConfig, CertificateReport};
use crate::dual_analysis::{demix, success, LocateOptions};
use crate::error::Result;
use crate::solver::SolverOptions;
use crate::synthesis::{hash_indices, synth_instance, FrequencySpec, OutlierMode, SynthesisConfig};
use crate::trig::wrap_unit;

use super::config::PhaseTransitionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub delta: f64,
    pub delta_times_n: f64,
    pub snapshots: usize,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRate {
    pub snapshots: usize,
    pub delta_times_n: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransitionResult {
    /// Sorted by snapshot count, then separation.
    pub cells: Vec<CellRate>,
    /// Sorted by snapshot count, separation, then trial index.
    pub trials: Vec<TrialRecord>,
}

impl PhaseTransitionResult {
    pub fn rate(&self, snapshots: usize, delta_times_n: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.snapshots == snapshots && (c.delta_times_n - delta_times_n).abs() < 1e-9)
            .map(|c| c.success_rate)
    }

    /// Smallest swept `δ·N` whose success rate reaches `level`.
    pub fn min_delta_reaching(&self, snapshots: usize, level: f64) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.snapshots == snapshots && c.success_rate >= level)
            .map(|c| c.delta_times_n)
            .min_by(f64::total_cmp)
    }
}

/// Seed of one trial; independent of execution order.
pub fn trial_seed(base: u64, snapshots: usize, delta_index: usize, trial: usize) -> u64 {
    base ^ hash_indices(&[snapshots as u64, delta_index as u64, trial as u64])
}

/// Two tones at `f₁` and `f₁ + δ`, outliers on distinct sensors.
pub fn trial_instance_config(
    cfg: &PhaseTransitionConfig,
    snapshots: usize,
    delta: f64,
    seed: u64,
) -> SynthesisConfig {
    SynthesisConfig {
        n_sensors: cfg.n_sensors,
        n_snapshots: snapshots,
        frequencies: FrequencySpec::Explicit(vec![cfg.f1, wrap_unit(cfg.f1 + delta)]),
        amplitude_model: cfg.amplitude_model.clone(),
        s_per_snapshot: 0,
        total_outliers: Some(cfg.total_outliers),
        outlier_mode: OutlierMode::DistinctSensorsOverall,
        outlier_magnitude: cfg.outlier_magnitude,
        seed,
    }
}

/// One demixing trial; any failure along the way counts as unsuccessful.
pub fn run_trial(
    cfg: &PhaseTransitionConfig,
    snapshots: usize,
    delta: f64,
    seed: u64,
    lambda: Option<f64>,
    solver: &SolverOptions,
    locate: &LocateOptions,
) -> bool {
    let outcome =
        synth_instance(&trial_instance_config(cfg, snapshots, delta, seed)).and_then(|inst| {
            let lam = lambda.unwrap_or(1.0 / (cfg.n_sensors as f64).sqrt());
            let (report, _) = demix(&inst.measurement(), lam, solver, locate)?;
            if !report.solver_converged {
                debug!(
                    "trial seed {seed}: solver stopped after {} iterations",
                    report.solver_iterations
                );
            }
            Ok(success(&report.estimated_frequencies, &inst.frequencies))
        });
    outcome.unwrap_or_else(|e| {
        warn!("trial seed {seed} (L = {snapshots}, delta = {delta}) failed: {e}");
        false
    })
}

/// Success rates over the `(L, δ)` grid. Trials run in parallel on the
/// current rayon pool; results do not depend on the schedule.
pub fn run_phase_transition(
    cfg: &PhaseTransitionConfig,
    base_seed: u64,
    lambda: Option<f64>,
    solver: &SolverOptions,
    locate: &LocateOptions,
) -> Result<PhaseTransitionResult> {
    cfg.validate()?;
    solver.validate()?;
    let n = cfg.n_sensors as f64;
    let deltas = cfg.deltas_times_n();
    let jobs: Vec<(usize, usize, usize)> = cfg
        .snapshots
        .iter()
        .flat_map(|&l| (0..deltas.len()).flat_map(move |d| (0..cfg.trials).map(move |t| (l, d, t))))
        .collect();
    let trials: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(l, d, t)| {
            let delta = deltas[d] / n;
            let seed = trial_seed(base_seed, l, d, t);
            TrialRecord {
                seed,
                delta,
                delta_times_n: deltas[d],
                snapshots: l,
                success: run_trial(cfg, l, delta, seed, lambda, solver, locate),
            }
        })
        .collect();
    let cells = trials
        .chunks(cfg.trials)
        .map(|chunk| CellRate {
            snapshots: chunk[0].snapshots,
            delta_times_n: chunk[0].delta_times_n,
            success_rate: chunk.iter().filter(|t| t.success).count() as f64 / chunk.len() as f64,
        })
        .collect();
    Ok(PhaseTransitionResult { cells, trials })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub report: CertificateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub runs: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub max_interpolation_residual: f64,
    pub reports: Vec<SeedReport>,
}

/// Certificates for seeds `cfg.seed .. cfg.seed + count`, in seed order.
pub fn run_certificate_sweep(cfg: &CertificateConfig, count: usize) -> Result<CertificateSummary> {
    cfg.validate()?;
    let reports = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            let run = run_certificate(&CertificateConfig {
                seed,
                ..cfg.clone()
            })?;
            Ok(SeedReport {
                seed,
                report: run.report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = reports.iter().filter(|r| r.report.pass).count();
    Ok(CertificateSummary {
        runs: reports.len(),
        passed,
        pass_rate: if reports.is_empty() {
            0.0
        } else {
            passed as f64 / reports.len() as f64
        },
        max_interpolation_residual: reports
            .iter()
            .map(|r| r.report.interpolation_residual)
            .fold(0.0, f64::max),
        reports,
    })
}
