//! Reading estimates off a dual solution.
//!
//! Frequencies sit where the dual polynomial `Q(f) = Σ_j Γ_{j,:} e^{−i2πjf}`
//! reaches unit norm, outlier sensors where the rows of `Γ` saturate the
//! `‖·‖₂ ≤ λ` bound. Amplitudes and outlier values then follow from a least
//! squares fit on the clean sensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    default_grid, group_norms, row_norms, split_row_major, vandermonde, wrap_distance,
};
use crate::solver::{solve_dual_sdp, DualSdpProblem, SdpSolution, SolverOptions};
use crate::trig::{wrap_unit, Sign, TrigPoly};
use crate::{CMatrix, CRow};

/// Largest per-frequency deviation counted as a successful recovery.
pub const SUCCESS_TOLERANCE: f64 = 1e-4;

/// Vector-valued dual polynomial `Q(f) = Σ_j Γ_{j,:} e^{−i2πjf}`.
///
/// This is the polynomial bounded by the LMI `T*(Λ) = e₁`; it equals
/// `√N · a(f, 0)ᴴ Γ` for the unit-norm atom `a`.
#[derive(Debug, Clone)]
pub struct DualPolynomial {
    poly: TrigPoly,
}

impl DualPolynomial {
    pub fn new(gamma: &CMatrix) -> Self {
        Self {
            poly: TrigPoly::new(gamma.clone(), 0, Sign::Minus),
        }
    }

    pub fn gamma(&self) -> &CMatrix {
        self.poly.coeffs()
    }

    pub fn n_sensors(&self) -> usize {
        self.poly.coeffs().nrows()
    }

    pub fn eval(&self, f: f64, order: u32) -> Result<CRow> {
        if order > 2 {
            return Err(Error::InvalidConfiguration(format!(
                "derivative order {order} is not supported"
            )));
        }
        Ok(self.poly.eval(f, order))
    }

    pub fn norm_at(&self, f: f64) -> f64 {
        self.poly.eval(f, 0).norm()
    }

    /// `(k/M, ‖Q(k/M)‖₂)` for `k = 0..M`.
    pub fn grid_trace(&self, grid: usize) -> Vec<(f64, f64)> {
        self.poly
            .grid_norms(grid)
            .into_iter()
            .enumerate()
            .map(|(k, v)| (k as f64 / grid as f64, v))
            .collect()
    }

    pub(crate) fn poly(&self) -> &TrigPoly {
        &self.poly
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocateOptions {
    /// Grid size; zero selects `max(2¹³, 32N)`.
    pub grid: usize,
    /// Grid peaks below `1 − tau_peak` are not refined.
    pub tau_peak: f64,
    /// Refined peaks below `1 − accept_peak` are dropped.
    pub accept_peak: f64,
    pub newton_steps: usize,
    /// Rows with `‖Γ_row‖₂ ≥ λ(1 − tau_row)` are outliers.
    pub tau_row: f64,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self {
            grid: 0,
            tau_peak: 1e-3,
            accept_peak: 1e-4,
            newton_steps: 3,
            tau_row: 1e-3,
        }
    }
}

impl LocateOptions {
    pub fn grid_for(&self, n: usize) -> usize {
        if self.grid == 0 {
            default_grid(n)
        } else {
            self.grid
        }
    }
}

/// Refined local maxima of `‖Q‖₂` that reach `1 − accept_peak`, as
/// `(frequency, peak value)` sorted by frequency.
pub fn locate_peaks(dp: &DualPolynomial, opts: &LocateOptions) -> Vec<(f64, f64)> {
    let grid = opts.grid_for(dp.n_sensors());
    let spacing = 1.0 / grid as f64;
    let mut peaks: Vec<(f64, f64)> = dp
        .poly()
        .peaks(grid, 1.0 - opts.tau_peak, opts.newton_steps)
        .into_iter()
        .filter(|(_, v)| *v >= 1.0 - opts.accept_peak)
        .collect();
    // Two grid maxima can refine onto the same peak.
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(peaks.len());
    peaks.sort_by(|a, b| a.0.total_cmp(&b.0));
    for p in peaks {
        match merged.last_mut() {
            Some(last) if wrap_distance(last.0, p.0) <= spacing => {
                if p.1 > last.1 {
                    *last = p;
                }
            }
            _ => merged.push(p),
        }
    }
    if merged.len() > 1 {
        let (first, last) = (merged[0], merged[merged.len() - 1]);
        if wrap_distance(first.0, last.0) <= spacing {
            if last.1 > first.1 {
                merged[0] = last;
            }
            merged.pop();
            merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }
    merged
}

pub fn locate_frequencies(dp: &DualPolynomial, opts: &LocateOptions) -> Vec<f64> {
    locate_peaks(dp, opts).into_iter().map(|(f, _)| f).collect()
}

/// Sensors whose dual row is on the `λ` sphere up to `tau_row`.
pub fn locate_outliers(gamma: &CMatrix, lambda: f64, tau_row: f64) -> Vec<usize> {
    row_norms(gamma)
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v >= lambda * (1.0 - tau_row))
        .map(|(i, _)| i)
        .collect()
}

/// Least-squares amplitudes from the sensors outside `outlier_rows`, and the
/// outliers as the residual on `outlier_rows`.
pub fn recover_amplitudes(
    y: &CMatrix,
    freqs: &[f64],
    outlier_rows: &[usize],
) -> Result<(CMatrix, CMatrix)> {
    let (n, l) = y.shape();
    if let Some(&bad) = outlier_rows.iter().find(|&&r| r >= n) {
        return Err(Error::InvalidDimension(format!(
            "outlier row {bad} out of range for N = {n}"
        )));
    }
    let mut is_outlier = vec![false; n];
    outlier_rows.iter().for_each(|&r| is_outlier[r] = true);
    let clean: Vec<usize> = (0..n).filter(|&j| !is_outlier[j]).collect();
    if clean.is_empty() {
        return Err(Error::IllPosedRecovery(
            "every sensor is marked as an outlier".into(),
        ));
    }
    let k = freqs.len();
    if clean.len() < k {
        return Err(Error::IllPosedRecovery(format!(
            "{} clean sensors cannot determine {k} amplitudes",
            clean.len()
        )));
    }

    let v = vandermonde(n, freqs);
    let amplitudes = if k == 0 {
        CMatrix::zeros(0, l)
    } else {
        let v_clean = v.select_rows(&clean);
        let y_clean = y.select_rows(&clean);
        let svd = v_clean.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-10 * smax) {
            return Err(Error::IllPosedRecovery(format!(
                "Vandermonde system on clean sensors is rank deficient (σ_min/σ_max = {:e})",
                smin / smax
            )));
        }
        svd.solve(&y_clean, 0.0)
            .map_err(|e| Error::NumericalFailure(format!("least squares solve failed: {e}")))?
    };

    let fitted = &v * &amplitudes;
    let mut outliers = CMatrix::zeros(n, l);
    for &r in outlier_rows {
        let row = y.row(r) - fitted.row(r);
        outliers.set_row(r, &row);
    }
    Ok((amplitudes, outliers))
}

#[derive(Debug, Clone)]
pub struct DemixReport {
    pub estimated_frequencies: Vec<f64>,
    /// `K̂ × L`.
    pub estimated_amplitudes: CMatrix,
    pub estimated_outlier_rows: Vec<usize>,
    pub estimated_outliers: CMatrix,
    pub estimated_signal: CMatrix,
    pub duality_gap: f64,
    pub peak_values: Vec<f64>,
    pub lambda: f64,
    pub dual_objective: f64,
    pub solver_converged: bool,
    pub solver_iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl DemixReport {
    pub fn to_json(&self) -> DemixReportJson {
        let (amplitudes_re, amplitudes_im) = split_row_major(&self.estimated_amplitudes);
        let (outliers_re, outliers_im) = split_row_major(&self.estimated_outliers);
        let (signal_re, signal_im) = split_row_major(&self.estimated_signal);
        DemixReportJson {
            n_sensors: self.estimated_signal.nrows(),
            n_snapshots: self.estimated_signal.ncols(),
            lambda: self.lambda,
            estimated_frequencies: self.estimated_frequencies.clone(),
            peak_values: self.peak_values.clone(),
            estimated_outlier_rows: self.estimated_outlier_rows.clone(),
            amplitudes_re,
            amplitudes_im,
            outliers_re,
            outliers_im,
            signal_re,
            signal_im,
            duality_gap: self.duality_gap,
            dual_objective: self.dual_objective,
            solver_converged: self.solver_converged,
            solver_iterations: self.solver_iterations,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
        }
    }
}

/// Serialized [`DemixReport`]; complex matrices are split row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemixReportJson {
    pub n_sensors: usize,
    pub n_snapshots: usize,
    pub lambda: f64,
    pub estimated_frequencies: Vec<f64>,
    pub peak_values: Vec<f64>,
    pub estimated_outlier_rows: Vec<usize>,
    pub amplitudes_re: Vec<f64>,
    pub amplitudes_im: Vec<f64>,
    pub outliers_re: Vec<f64>,
    pub outliers_im: Vec<f64>,
    pub signal_re: Vec<f64>,
    pub signal_im: Vec<f64>,
    pub duality_gap: f64,
    pub dual_objective: f64,
    pub solver_converged: bool,
    pub solver_iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Primal value of the recovered decomposition, `Σ_k ĉ_k + λ‖Ẑ‖_{1,2}`.
///
/// With `S = Σ_k e^{i2πjf_k} A_{k,:}` and unit-norm atoms
/// `a(f) = e^{i2πjf}/√N`, Eq. `S = √N Σ_k a(f_k) ψ_kᴴ` gives `ψ_k = A_{k,:}ᴴ`
/// up to the `1/√N` housed in `ψ`; the weight that the LMI `T*(Λ) = e₁`
/// dualizes is the group total variation, so `ĉ_k = ‖Â_{k,:}‖₂`.
pub fn primal_value(amplitudes: &CMatrix, outliers: &CMatrix, lambda: f64) -> f64 {
    let atomic: f64 = if amplitudes.nrows() == 0 {
        0.0
    } else {
        row_norms(amplitudes).iter().sum()
    };
    let (l12, _) = group_norms(outliers).unwrap_or((0.0, 0.0));
    atomic + lambda * l12
}

/// `|Re⟨Y, Γ⟩ − (Σ_k ĉ_k + λ‖Ẑ‖_{1,2})| / max(1, |Re⟨Y, Γ⟩|)`.
pub fn duality_gap(y: &CMatrix, report: &DemixReport, solution: &SdpSolution, lambda: f64) -> f64 {
    let dual = crate::solver::real_inner(y, &solution.gamma);
    let primal = primal_value(
        &report.estimated_amplitudes,
        &report.estimated_outliers,
        lambda,
    );
    (dual - primal).abs() / dual.abs().max(1.0)
}

/// True iff the counts agree and, after sorting, every estimate is within
/// [`SUCCESS_TOLERANCE`] of its partner. Cyclic re-alignments of the sorted
/// estimates are also tried so that a tone straddling `f = 0` still matches.
pub fn success(f_est: &[f64], f_true: &[f64]) -> bool {
    max_matched_deviation(f_est, f_true).is_some_and(|d| d <= SUCCESS_TOLERANCE)
}

/// Largest deviation under the best sorted/cyclic matching, `None` when the
/// counts differ.
pub fn max_matched_deviation(f_est: &[f64], f_true: &[f64]) -> Option<f64> {
    if f_est.len() != f_true.len() {
        return None;
    }
    if f_est.is_empty() {
        return Some(0.0);
    }
    let mut a: Vec<f64> = f_est.iter().map(|&f| wrap_unit(f)).collect();
    let mut b: Vec<f64> = f_true.iter().map(|&f| wrap_unit(f)).collect();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let k = a.len();
    (0..k)
        .map(|shift| {
            (0..k)
                .map(|i| wrap_distance(a[(i + shift) % k], b[i]))
                .fold(0.0, f64::max)
        })
        .min_by(f64::total_cmp)
}

/// Solve, localize, and fit: the full demixing pipeline for one measurement.
pub fn demix(
    y: &CMatrix,
    lambda: f64,
    solver: &SolverOptions,
    locate: &LocateOptions,
) -> Result<(DemixReport, SdpSolution)> {
    let problem = DualSdpProblem::new(y.clone(), lambda)?;
    let solution = solve_dual_sdp(&problem, solver)?;
    let dp = DualPolynomial::new(&solution.gamma);
    let peaks = locate_peaks(&dp, locate);
    let freqs: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    let rows = locate_outliers(&solution.gamma, lambda, locate.tau_row);
    let (amplitudes, outliers) = recover_amplitudes(y, &freqs, &rows)?;
    let signal = vandermonde(y.nrows(), &freqs) * &amplitudes;
    let mut report = DemixReport {
        estimated_frequencies: freqs,
        estimated_amplitudes: amplitudes,
        estimated_outlier_rows: rows,
        estimated_outliers: outliers,
        estimated_signal: signal,
        duality_gap: 0.0,
        peak_values: peaks.iter().map(|p| p.1).collect(),
        lambda,
        dual_objective: solution.objective,
        solver_converged: solution.converged,
        solver_iterations: solution.iterations,
        primal_residual: solution.primal_residual,
        dual_residual: solution.dual_residual,
    };
    report.duality_gap = duality_gap(y, &report, &solution, lambda);
    Ok((report, solution))
}
