//! Randomized dual certificate for exact demixing.
//!
//! A kernel made of three Dirichlet factors is restricted to the clean
//! sensors, and a combination of its shifts and derivative shifts is solved
//! for so that the resulting polynomial interpolates the sign pattern
//! `h_k b_kᴴ` with zero derivative at every frequency. Adding the fixed
//! outlier term `R(f)` gives a dual variable whose outlier rows are exactly
//! `λ r_d`. [`validate_certificate`] then checks the remaining optimality
//! conditions on fine grids.

mod kernel;
mod system;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use kernel::{
    kernel_eval, kernel_index, restrict_kernel, sensor_index, Kernel, KernelCoefficients,
    RestrictedKernel, DIRICHLET_FRACTIONS,
};
pub use system::{
    build_system, solve_certificate, Certificate, InterpolationSystem, MAX_CONDITION,
};

use crate::error::{Error, Result};
use crate::model::{row_norms, wrap_distance};
use crate::synthesis::{stream_rng, Stream};
use crate::trig::wrap_unit;
use crate::{CMatrix, C64};

/// Largest interpolation residual accepted by a passing certificate.
pub const INTERPOLATION_TOLERANCE: f64 = 1e-8;
/// Half-width of the near region around each frequency, before scaling.
pub const NEAR_RADIUS: f64 = 0.09;
/// Smallest validation grid.
pub const MIN_VALIDATION_GRID: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NearRadius {
    /// `0.09 / m`.
    ScaledByM,
    /// `0.09`.
    Absolute,
}

impl NearRadius {
    pub fn radius(self, m: usize) -> f64 {
        match self {
            NearRadius::ScaledByM => NEAR_RADIUS / m as f64,
            NearRadius::Absolute => NEAR_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationOptions {
    /// Uniform grid for the off-support bound; raised to at least 2¹⁴.
    pub grid: usize,
    /// Points per near region for the curvature check.
    pub near_points: usize,
    pub near_radius: NearRadius,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            grid: MIN_VALIDATION_GRID,
            near_points: 201,
            near_radius: NearRadius::ScaledByM,
        }
    }
}

/// Worst-case margins of the optimality conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// Largest of `‖P(f_k) − h_k b_kᴴ‖₂` and `‖κP′(f_k)‖₂`.
    pub interpolation_residual: f64,
    /// `max ‖Q(f)‖₂` on the grid outside the near regions.
    pub offgrid_max: f64,
    /// `max ‖Q′‖₂² + Re(Q″Qᴴ)` over the near regions.
    pub near_curvature_max: f64,
    /// `max_{l ∉ Ω} ‖Γ_l‖₂ / λ`.
    pub outlier_row_margin: f64,
    #[serde(rename = "condition_number_D")]
    pub condition_number_d: f64,
    /// `max_{d ∈ Ω} ‖Γ_d − λ r_d‖₂`; zero up to rounding by construction.
    pub outlier_sign_residual: f64,
    pub near_radius: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl CertificateReport {
    fn failed(condition_number_d: f64, near_radius: f64, reason: String) -> Self {
        Self {
            interpolation_residual: f64::NAN,
            offgrid_max: f64::NAN,
            near_curvature_max: f64::NAN,
            outlier_row_margin: f64::NAN,
            condition_number_d,
            outlier_sign_residual: f64::NAN,
            near_radius,
            pass: false,
            failure: Some(reason),
        }
    }
}

/// Check the interpolation, off-support, curvature and outlier-row
/// conditions of a solved certificate.
pub fn validate_certificate(
    cert: &Certificate,
    lambda: f64,
    opts: &ValidationOptions,
) -> CertificateReport {
    let sys = cert.system();
    let m = sys.kernel.half_length();
    let n = 2 * m + 1;
    let radius = opts.near_radius.radius(m);

    let mut interpolation_residual: f64 = 0.0;
    for (k, &fk) in sys.freqs.iter().enumerate() {
        let value = (cert.eval(fk, 0) - sys.phi.row(k)).norm();
        let slope = cert.eval(fk, 1).norm() * sys.kappa;
        interpolation_residual = interpolation_residual.max(value).max(slope);
    }

    let grid = opts.grid.max(MIN_VALIDATION_GRID);
    let norms = cert.poly.grid_norms(grid);
    let near = |f: f64| sys.freqs.iter().any(|&fk| wrap_distance(f, fk) <= radius);
    let offgrid_max = norms
        .iter()
        .enumerate()
        .filter(|(i, _)| !near(*i as f64 / grid as f64))
        .map(|(_, v)| *v)
        .fold(0.0, f64::max);

    let points = opts.near_points.max(3);
    let mut near_curvature_max = f64::NEG_INFINITY;
    for &fk in &sys.freqs {
        for i in 0..points {
            let f = fk - radius + 2.0 * radius * i as f64 / (points - 1) as f64;
            let jet = cert.poly.norm_sq_jet(wrap_unit(f));
            near_curvature_max = near_curvature_max.max(0.5 * jet.second);
        }
    }

    let mut on_omega = vec![false; n];
    sys.omega.iter().for_each(|&d| on_omega[d] = true);
    let norms_rows = row_norms(&cert.gamma);
    let outlier_row_margin = norms_rows
        .iter()
        .enumerate()
        .filter(|(j, _)| !on_omega[*j])
        .map(|(_, v)| v / lambda)
        .fold(0.0, f64::max);
    let outlier_sign_residual = sys
        .omega
        .iter()
        .enumerate()
        .map(|(i, &d)| (cert.gamma.row(d) - sys.r.row(i) * C64::new(lambda, 0.0)).norm())
        .fold(0.0, f64::max);

    let pass = interpolation_residual <= INTERPOLATION_TOLERANCE
        && offgrid_max < 1.0
        && near_curvature_max < 0.0
        && outlier_row_margin < 1.0
        && cert.condition_number <= MAX_CONDITION;

    CertificateReport {
        interpolation_residual,
        offgrid_max,
        near_curvature_max,
        outlier_row_margin,
        condition_number_d: cert.condition_number,
        outlier_sign_residual,
        near_radius: radius,
        pass,
        failure: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertificateConfig {
    /// Odd signal length `N = 2m + 1`.
    pub n_sensors: usize,
    pub n_freqs: usize,
    /// Spacing between consecutive frequencies; `None` selects `4/(N − 1)`.
    pub separation: Option<f64>,
    pub n_outliers: usize,
    pub n_snapshots: usize,
    pub validation: ValidationOptions,
    pub seed: u64,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self {
            n_sensors: 201,
            n_freqs: 2,
            separation: None,
            n_outliers: 5,
            n_snapshots: 2,
            validation: ValidationOptions::default(),
            seed: 0,
        }
    }
}

impl CertificateConfig {
    pub fn half_length(&self) -> usize {
        self.n_sensors / 2
    }

    pub fn separation(&self) -> f64 {
        self.separation
            .unwrap_or(4.0 / (self.n_sensors as f64 - 1.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sensors.is_multiple_of(2) || self.n_sensors < 9 {
            return Err(Error::InvalidConfiguration(format!(
                "certificate needs an odd N ≥ 9, got {}",
                self.n_sensors
            )));
        }
        if self.n_freqs == 0 || self.n_snapshots == 0 {
            return Err(Error::InvalidConfiguration(
                "K and L must be positive".into(),
            ));
        }
        if self.n_outliers > self.n_sensors {
            return Err(Error::InvalidConfiguration(format!(
                "{} outliers exceed N = {}",
                self.n_outliers, self.n_sensors
            )));
        }
        let sep = self.separation();
        if !(sep > 0.0) || sep * self.n_freqs as f64 > 1.0 {
            return Err(Error::InvalidConfiguration(format!(
                "{} frequencies cannot be spaced {sep} apart",
                self.n_freqs
            )));
        }
        Ok(())
    }
}

/// Random ingredients of one certificate draw.
#[derive(Debug, Clone)]
pub struct CertificateDraw {
    pub freqs: Vec<f64>,
    pub omega: Vec<usize>,
    pub h: Vec<C64>,
    /// `K × L`, row `k` is `b_kᴴ`.
    pub b_rows: CMatrix,
    /// `s × L`.
    pub r: CMatrix,
}

fn unit_row(rng: &mut impl Rng, l: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..l)
            .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Equispaced frequencies from a uniform offset, uniform outlier sensors,
/// uniform phases `h_k`, and `b_k`, `r_d` uniform on the complex sphere.
pub fn draw(cfg: &CertificateConfig) -> Result<CertificateDraw> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Certificate);
    let (k, l, n) = (cfg.n_freqs, cfg.n_snapshots, cfg.n_sensors);
    let offset: f64 = rng.random();
    let mut freqs: Vec<f64> = (0..k)
        .map(|i| wrap_unit(offset + i as f64 * cfg.separation()))
        .collect();
    freqs.sort_by(f64::total_cmp);
    let mut omega = sample(&mut rng, n, cfg.n_outliers).into_vec();
    omega.sort_unstable();
    let h = (0..k)
        .map(|_| C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
        .collect();
    let mut b_rows = CMatrix::zeros(k, l);
    for i in 0..k {
        let row = unit_row(&mut rng, l);
        for (j, z) in row.into_iter().enumerate() {
            b_rows[(i, j)] = z;
        }
    }
    let mut r = CMatrix::zeros(omega.len(), l);
    for i in 0..omega.len() {
        let row = unit_row(&mut rng, l);
        for (j, z) in row.into_iter().enumerate() {
            r[(i, j)] = z;
        }
    }
    Ok(CertificateDraw {
        freqs,
        omega,
        h,
        b_rows,
        r,
    })
}

#[derive(Debug, Clone)]
pub struct CertificateRun {
    pub draw: CertificateDraw,
    pub report: CertificateReport,
    pub certificate: Option<Certificate>,
}

impl CertificateRun {
    /// `(f, ‖Q(f)‖₂)` on the validation grid; empty when construction failed.
    pub fn trace(&self, grid: usize) -> Vec<(f64, f64)> {
        match &self.certificate {
            None => Vec::new(),
            Some(cert) => cert
                .poly
                .grid_norms(grid)
                .into_iter()
                .enumerate()
                .map(|(i, v)| (i as f64 / grid as f64, v))
                .collect(),
        }
    }
}

/// Draw, build, solve and validate one certificate with `λ = 1/√N`.
///
/// Construction failures (an ill-conditioned interpolation matrix) are
/// reported through a failing report rather than an error.
pub fn run_certificate(cfg: &CertificateConfig) -> Result<CertificateRun> {
    let draw = draw(cfg)?;
    let kernel = Kernel::build(cfg.half_length())?;
    let restricted = restrict_kernel(&kernel, &draw.omega)?;
    let system = build_system(
        &draw.freqs,
        &draw.omega,
        &draw.h,
        &draw.b_rows,
        &draw.r,
        &restricted,
    )?;
    let lambda = 1.0 / (cfg.n_sensors as f64).sqrt();
    let radius = cfg.validation.near_radius.radius(cfg.half_length());
    match solve_certificate(&system) {
        Ok(cert) => {
            let report = validate_certificate(&cert, lambda, &cfg.validation);
            Ok(CertificateRun {
                draw,
                report,
                certificate: Some(cert),
            })
        }
        Err(Error::CertificateFailure(reason)) => {
            let svd = system.d.clone().svd(false, false);
            let cond = svd.singular_values.max() / svd.singular_values.min();
            Ok(CertificateRun {
                draw,
                report: CertificateReport::failed(cond, radius, reason),
                certificate: None,
            })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn unit_b(k: usize, l: usize) -> CMatrix {
        CMatrix::from_fn(k, l, |i, j| {
            C64::from_polar(1.0 / (l as f64).sqrt(), (i + 2 * j) as f64)
        })
    }

    #[test]
    fn single_node_system_is_diagonal_like() {
        let kernel = Kernel::build(20).unwrap();
        let rk = RestrictedKernel::from(&kernel);
        let sys = build_system(
            &[0.3],
            &[],
            &[C64::new(1.0, 0.0)],
            &unit_b(1, 2),
            &CMatrix::zeros(0, 2),
            &rk,
        )
        .unwrap();
        let kappa = kernel.kappa();
        assert!((sys.d[(0, 0)] - kernel.eval(0.0, 0).unwrap()).norm() < 1e-15);
        assert!((sys.d[(0, 1)] - kernel.eval(0.0, 1).unwrap() * kappa).norm() < 1e-15);
        // −κ²K̄″(0) = 1
        assert!((sys.d[(1, 1)] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn single_node_interpolates_exactly() {
        let kernel = Kernel::build(20).unwrap();
        let rk = RestrictedKernel::from(&kernel);
        let h = [C64::from_polar(1.0, 0.7)];
        let b = unit_b(1, 3);
        let sys = build_system(&[0.61], &[], &h, &b, &CMatrix::zeros(0, 3), &rk).unwrap();
        let cert = solve_certificate(&sys).unwrap();
        assert!((cert.eval(0.61, 0) - b.row(0) * h[0]).norm() < 1e-10);
        assert!(cert.eval(0.61, 1).norm() * sys.kappa < 1e-10);
    }

    #[test]
    fn kernel_form_matches_coefficient_form() {
        let cfg = CertificateConfig {
            n_sensors: 61,
            n_freqs: 3,
            separation: Some(0.2),
            n_outliers: 4,
            n_snapshots: 2,
            ..Default::default()
        };
        let run = run_certificate(&cfg).unwrap();
        let cert = run.certificate.unwrap();
        for i in 0..64 {
            let f = i as f64 / 64.0 + 0.003;
            for order in 0..=2 {
                let a = cert.eval(f, order);
                let b = cert.eval_kernel_form(f, order).unwrap();
                assert!((a - &b).norm() <= 1e-9 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn dense_outliers_fail_without_panicking() {
        let cfg = CertificateConfig {
            n_sensors: 201,
            n_freqs: 2,
            n_outliers: 199,
            seed: 4,
            ..Default::default()
        };
        let run = run_certificate(&cfg).unwrap();
        assert!(!run.report.pass);
    }

    #[test]
    fn real_signs_interpolate_unit_norm() {
        let kernel = Kernel::build(40).unwrap();
        let rk = RestrictedKernel::from(&kernel);
        let freqs = [0.1, 0.4, 0.75];
        let h = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), C64::new(1.0, 0.0)];
        let b = CMatrix::from_element(3, 1, C64::new(1.0, 0.0));
        let sys = build_system(&freqs, &[], &h, &b, &CMatrix::zeros(0, 1), &rk).unwrap();
        let cert = solve_certificate(&sys).unwrap();
        for (k, &f) in freqs.iter().enumerate() {
            assert!((cert.eval(f, 0)[0] - h[k]).norm() <= 1e-10);
            assert!((cert.eval(f, 0).norm() - 1.0).abs() <= 1e-10);
            assert!(cert.eval(f, 1).norm() * sys.kappa <= 1e-10);
        }
    }

    #[test]
    fn sensor_form_is_modulated_kernel_form() {
        let cfg = CertificateConfig {
            n_sensors: 101,
            n_snapshots: 3,
            n_outliers: 6,
            seed: 9,
            ..Default::default()
        };
        let run = run_certificate(&cfg).unwrap();
        let cert = run.certificate.unwrap();
        let dp = crate::dual_analysis::DualPolynomial::new(&cert.gamma);
        let m = cfg.half_length() as f64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..512 {
            let f: f64 = rng.random();
            let sensor = dp.eval(f, 0).unwrap();
            let kernel_form = cert.eval_kernel_form(f, 0).unwrap() * crate::trig::cis_turns(-m * f);
            assert!((sensor - kernel_form).norm() <= 1e-8);
        }
    }

    #[test]
    fn outlier_rows_carry_scaled_signs() {
        let cfg = CertificateConfig {
            n_sensors: 61,
            n_outliers: 3,
            seed: 2,
            ..Default::default()
        };
        let run = run_certificate(&cfg).unwrap();
        let cert = run.certificate.unwrap();
        let lambda = 1.0 / 61f64.sqrt();
        for (i, &d) in run.draw.omega.iter().enumerate() {
            let expected = run.draw.r.row(i) * C64::new(lambda, 0.0);
            assert!((cert.gamma.row(d) - expected).norm() < 1e-12);
        }
        assert!(run.report.outlier_sign_residual < 1e-12);
    }

    #[test]
    fn outlier_free_certificate_passes() {
        let cfg = CertificateConfig {
            n_outliers: 0,
            seed: 3,
            ..Default::default()
        };
        let run = run_certificate(&cfg).unwrap();
        assert!(run.report.pass, "{:?}", run.report);
        assert!(run.report.interpolation_residual <= 1e-8);
        assert!(run.report.offgrid_max < 1.0 && run.report.near_curvature_max < 0.0);
    }

    #[test]
    fn passing_certificate_localizes_its_frequencies() {
        let cfg = CertificateConfig {
            seed: 12,
            ..Default::default()
        };
        let run = run_certificate(&cfg).unwrap();
        assert!(run.report.pass);
        let dp = crate::dual_analysis::DualPolynomial::new(&run.certificate.unwrap().gamma);
        let found = crate::dual_analysis::locate_frequencies(&dp, &Default::default());
        assert_eq!(found.len(), run.draw.freqs.len());
        let dev = crate::dual_analysis::max_matched_deviation(&found, &run.draw.freqs).unwrap();
        assert!(dev <= 1e-6, "{dev}");
    }

    #[test]
    fn draws_are_reproducible() {
        let cfg = CertificateConfig::default();
        let a = draw(&cfg).unwrap();
        let b = draw(&cfg).unwrap();
        assert_eq!(a.freqs, b.freqs);
        assert_eq!(a.omega, b.omega);
        assert_eq!(a.r, b.r);
        let sep = crate::model::min_separation(&a.freqs).unwrap();
        assert!((sep - cfg.separation()).abs() < 1e-12);
    }

    #[test]
    fn config_checks() {
        let even = CertificateConfig {
            n_sensors: 200,
            ..Default::default()
        };
        assert!(even.validate().is_err());
        let crowded = CertificateConfig {
            n_freqs: 300,
            ..Default::default()
        };
        assert!(crowded.validate().is_err());
    }
}
