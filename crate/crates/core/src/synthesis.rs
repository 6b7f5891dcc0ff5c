//! Seeded generation of random demixing instances.
//!
//! Every instance is a pure function of its [`SynthesisConfig`]. The seed
//! keys a ChaCha20 generator and each random ingredient draws from its own
//! stream, so changing one ingredient (say, the outlier count) leaves the
//! others untouched.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{join_row_major, min_separation, MixtureInstance};
use crate::{CMatrix, C64};

const MAX_REJECTIONS: usize = 1_000_000;

/// Independent random streams derived from one instance seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Frequencies = 1,
    Amplitudes = 2,
    OutlierPositions = 3,
    OutlierValues = 4,
    Certificate = 5,
}

/// ChaCha20 keyed by `seed`, positioned on `stream`.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer; used to derive per-trial seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a short tuple of integers.
pub fn hash_indices(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |h, &p| mix64(h ^ mix64(p)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencySpec {
    Explicit(Vec<f64>),
    Random { count: usize, min_separation: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeModel {
    /// i.i.d. standard circular complex Gaussian, `E|a|² = 1`.
    ComplexGaussian,
    /// `|a| = 1` with i.i.d. uniform phase.
    UnitModulusUniformPhase,
    /// Fixed `K × L` amplitudes, row-major.
    Explicit { re: Vec<f64>, im: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierMode {
    /// Each snapshot picks its own sensors; a sensor may be hit in several snapshots.
    PerSnapshot,
    /// Every corrupted sensor is hit in exactly one snapshot.
    DistinctSensorsOverall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub n_sensors: usize,
    pub n_snapshots: usize,
    pub frequencies: FrequencySpec,
    #[serde(default = "default_amplitudes")]
    pub amplitude_model: AmplitudeModel,
    #[serde(default)]
    pub s_per_snapshot: usize,
    /// When set, overrides `s_per_snapshot`: this many outliers in total,
    /// spread as evenly as possible over the snapshots.
    #[serde(default)]
    pub total_outliers: Option<usize>,
    #[serde(default = "default_mode")]
    pub outlier_mode: OutlierMode,
    #[serde(default = "default_magnitude")]
    pub outlier_magnitude: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_amplitudes() -> AmplitudeModel {
    AmplitudeModel::ComplexGaussian
}

fn default_mode() -> OutlierMode {
    OutlierMode::DistinctSensorsOverall
}

fn default_magnitude() -> f64 {
    1.0
}

impl SynthesisConfig {
    /// Three tones at 0.1, 0.4, 0.8 seen by 50 sensors over 5 snapshots,
    /// three outliers per snapshot on distinct sensors.
    pub fn fig1(seed: u64) -> Self {
        Self {
            n_sensors: 50,
            n_snapshots: 5,
            frequencies: FrequencySpec::Explicit(vec![0.1, 0.4, 0.8]),
            amplitude_model: AmplitudeModel::ComplexGaussian,
            s_per_snapshot: 3,
            total_outliers: None,
            outlier_mode: OutlierMode::DistinctSensorsOverall,
            outlier_magnitude: 1.0,
            seed,
        }
    }

    /// Outlier count in each snapshot, before any random assignment of the
    /// remainder.
    fn column_counts(&self, rng: &mut ChaCha20Rng) -> Vec<usize> {
        let l = self.n_snapshots;
        match self.total_outliers {
            None => vec![self.s_per_snapshot; l],
            Some(total) => {
                let mut counts = vec![total / l; l];
                for c in sample(rng, l, total % l).into_iter() {
                    counts[c] += 1;
                }
                counts
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 || self.n_snapshots == 0 {
            return Err(Error::InvalidConfiguration(
                "N and L must be positive".into(),
            ));
        }
        if !(self.outlier_magnitude > 0.0 && self.outlier_magnitude.is_finite()) {
            return Err(Error::InvalidConfiguration(
                "outlier magnitude must be positive".into(),
            ));
        }
        let total = self
            .total_outliers
            .unwrap_or(self.s_per_snapshot * self.n_snapshots);
        let per_column = match self.total_outliers {
            Some(t) => t.div_ceil(self.n_snapshots),
            None => self.s_per_snapshot,
        };
        if per_column > self.n_sensors {
            return Err(Error::InvalidConfiguration(format!(
                "{per_column} outliers per snapshot exceed N = {}",
                self.n_sensors
            )));
        }
        if self.outlier_mode == OutlierMode::DistinctSensorsOverall && total > self.n_sensors {
            return Err(Error::InvalidConfiguration(format!(
                "{total} distinct outlier sensors exceed N = {}",
                self.n_sensors
            )));
        }
        Ok(())
    }
}

/// Rejection-sample `count` frequencies on the torus with pairwise wrap
/// distance at least `min_sep`; returned sorted.
pub fn synth_frequencies(count: usize, min_sep: f64, seed: u64) -> Result<Vec<f64>> {
    let mut rng = stream_rng(seed, Stream::Frequencies);
    sample_frequencies(count, min_sep, &mut rng)
}

fn sample_frequencies(count: usize, min_sep: f64, rng: &mut ChaCha20Rng) -> Result<Vec<f64>> {
    if !(min_sep >= 0.0) || count as f64 * min_sep > 1.0 {
        return Err(Error::InvalidConfiguration(format!(
            "{count} frequencies cannot be {min_sep} apart on the unit circle"
        )));
    }
    for _ in 0..MAX_REJECTIONS {
        let mut f: Vec<f64> = (0..count).map(|_| rng.random::<f64>()).collect();
        if count < 2 || min_separation(&f)? >= min_sep {
            f.sort_by(f64::total_cmp);
            return Ok(f);
        }
    }
    Err(Error::SynthesisFailure(format!(
        "no {count} frequencies with separation {min_sep} after {MAX_REJECTIONS} draws"
    )))
}

fn complex_gaussian(rng: &mut ChaCha20Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn unit_phase(rng: &mut ChaCha20Rng) -> C64 {
    C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU)
}

pub fn synth_instance(cfg: &SynthesisConfig) -> Result<MixtureInstance> {
    cfg.validate()?;
    let (n, l) = (cfg.n_sensors, cfg.n_snapshots);

    let frequencies = match &cfg.frequencies {
        FrequencySpec::Explicit(f) => f.clone(),
        FrequencySpec::Random {
            count,
            min_separation,
        } => synth_frequencies(*count, *min_separation, cfg.seed)?,
    };
    let k = frequencies.len();

    let amplitudes = {
        let mut rng = stream_rng(cfg.seed, Stream::Amplitudes);
        match &cfg.amplitude_model {
            AmplitudeModel::ComplexGaussian => {
                CMatrix::from_fn(k, l, |_, _| complex_gaussian(&mut rng))
            }
            AmplitudeModel::UnitModulusUniformPhase => {
                CMatrix::from_fn(k, l, |_, _| unit_phase(&mut rng))
            }
            AmplitudeModel::Explicit { re, im } => join_row_major(k, l, re, im)?,
        }
    };

    let mut pos_rng = stream_rng(cfg.seed, Stream::OutlierPositions);
    let counts = cfg.column_counts(&mut pos_rng);
    let positions: Vec<Vec<usize>> = match cfg.outlier_mode {
        OutlierMode::PerSnapshot => counts
            .iter()
            .map(|&c| sample(&mut pos_rng, n, c).into_vec())
            .collect(),
        OutlierMode::DistinctSensorsOverall => {
            let total: usize = counts.iter().sum();
            let rows = sample(&mut pos_rng, n, total).into_vec();
            let mut start = 0;
            counts
                .iter()
                .map(|&c| {
                    let chunk = rows[start..start + c].to_vec();
                    start += c;
                    chunk
                })
                .collect()
        }
    };

    let mut val_rng = stream_rng(cfg.seed, Stream::OutlierValues);
    let mut outliers = CMatrix::zeros(n, l);
    for (col, rows) in positions.iter().enumerate() {
        let mut rows = rows.clone();
        rows.sort_unstable();
        for row in rows {
            let v = match cfg.amplitude_model {
                AmplitudeModel::UnitModulusUniformPhase => unit_phase(&mut val_rng),
                _ => complex_gaussian(&mut val_rng),
            };
            outliers[(row, col)] = v * cfg.outlier_magnitude;
        }
    }

    let mut inst = MixtureInstance::new(frequencies, amplitudes, outliers)?;
    inst.seed = Some(cfg.seed);
    Ok(inst)
}
