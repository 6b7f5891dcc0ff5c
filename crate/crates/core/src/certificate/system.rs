//! The interpolation system and the assembled certificate polynomial.
//!
//! The certificate is built in kernel coordinates,
//! `P(f) = Σ_k α_k K(f − f_k) + κ β_k K′(f − f_k) + R(f)` with
//! `R(f) = (1/√N) Σ_{d∈Ω} r_d e^{i2π l_d f}` and `l_d = m − d`. In sensor
//! coordinates it is `Σ_j Γ_j e^{−i2πjf} = e^{−i2πmf} P(f)`, so norms agree
//! pointwise.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::trig::{cis_turns, Sign, TrigPoly};
use crate::{CMatrix, CRow, C64};

use super::kernel::{kernel_index, sensor_index, KernelCoefficients, RestrictedKernel};

/// `D` is rejected above this condition number.
pub const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct InterpolationSystem {
    /// `2K × 2K` block matrix `[[D₀, D₁], [D₁′, D₂]]`.
    pub d: CMatrix,
    /// `K × L`, row `k` is `h_k b_kᴴ`.
    pub phi: CMatrix,
    /// `2K × s`, one column `ν` per outlier sensor.
    pub b_omega: CMatrix,
    /// `s × L` unit-norm outlier sign rows.
    pub r: CMatrix,
    pub kappa: f64,
    pub freqs: Vec<f64>,
    /// Outlier sensors, in the order of the columns of `b_omega`.
    pub omega: Vec<usize>,
    pub kernel: RestrictedKernel,
}

impl InterpolationSystem {
    pub fn n_sensors(&self) -> usize {
        2 * self.kernel.half_length() + 1
    }

    /// `[Φ; 0] − (1/√N) B_Ω r`.
    pub fn rhs(&self) -> CMatrix {
        let k = self.freqs.len();
        let l = self.phi.ncols();
        let mut rhs = CMatrix::zeros(2 * k, l);
        rhs.view_mut((0, 0), (k, l)).copy_from(&self.phi);
        if !self.omega.is_empty() {
            let scale = 1.0 / (self.n_sensors() as f64).sqrt();
            rhs -= &self.b_omega * &self.r * C64::new(scale, 0.0);
        }
        rhs
    }
}

/// `ν` for kernel index `l`: `[e^{i2πl f_k}]_k` over `[−i2πlκ e^{i2πl f_k}]_k`,
/// so that `(1/√N) B_Ω r` stacks `R(f_k)` over `−κR′(f_k)`.
fn nu(l: i64, freqs: &[f64], kappa: f64) -> Vec<C64> {
    let k = freqs.len();
    let mut v = vec![C64::new(0.0, 0.0); 2 * k];
    let deriv = C64::new(0.0, -2.0 * PI * l as f64 * kappa);
    for (i, &f) in freqs.iter().enumerate() {
        let e = cis_turns(l as f64 * f);
        v[i] = e;
        v[k + i] = deriv * e;
    }
    v
}

/// Fill the interpolation system.
///
/// `b_rows` holds `b_kᴴ` as its `k`-th row. The lower-left block is
/// `−κK′(f_j − f_k)`: the derivative conditions `κP′(f_j) = 0` written with
/// the sign that makes it coincide with `D₁ᵀ` for an even kernel.
pub fn build_system(
    freqs: &[f64],
    omega: &[usize],
    h: &[C64],
    b_rows: &CMatrix,
    r: &CMatrix,
    kernel: &RestrictedKernel,
) -> Result<InterpolationSystem> {
    let k = freqs.len();
    let l = b_rows.ncols();
    if k == 0 || h.len() != k || b_rows.nrows() != k {
        return Err(Error::InvalidDimension(format!(
            "need matching nonempty frequencies ({k}), signs ({}) and b rows ({})",
            h.len(),
            b_rows.nrows()
        )));
    }
    if r.nrows() != omega.len() || (r.nrows() > 0 && r.ncols() != l) {
        return Err(Error::InvalidDimension(format!(
            "r is {}x{}, expected {}x{l}",
            r.nrows(),
            r.ncols(),
            omega.len()
        )));
    }
    if k >= 2 && crate::model::min_separation(freqs)? <= 0.0 {
        return Err(Error::InvalidConfiguration(
            "interpolation nodes must be distinct".into(),
        ));
    }
    let unit = |v: f64| (v - 1.0).abs() < 1e-9;
    if !h.iter().all(|z| unit(z.norm()))
        || !b_rows.row_iter().all(|row| unit(row.norm()))
        || !r.row_iter().all(|row| unit(row.norm()))
    {
        return Err(Error::InvalidConfiguration(
            "h, b and r must have unit norm".into(),
        ));
    }
    let n = 2 * kernel.half_length() + 1;
    if let Some(&bad) = omega.iter().find(|&&j| j >= n) {
        return Err(Error::InvalidConfiguration(format!(
            "sensor {bad} outside 0..{n}"
        )));
    }

    let kappa = kernel.base().kappa();
    let mut d = CMatrix::zeros(2 * k, 2 * k);
    for j in 0..k {
        for i in 0..k {
            let x = freqs[j] - freqs[i];
            let k0 = kernel.eval(x, 0)?;
            let k1 = kernel.eval(x, 1)?;
            let k2 = kernel.eval(x, 2)?;
            d[(j, i)] = k0;
            d[(j, k + i)] = k1 * kappa;
            d[(k + j, i)] = -k1 * kappa;
            d[(k + j, k + i)] = -k2 * kappa * kappa;
        }
    }

    let m = kernel.half_length();
    let mut b_omega = CMatrix::zeros(2 * k, omega.len());
    for (col, &sensor) in omega.iter().enumerate() {
        let v = nu(kernel_index(sensor, m), freqs, kappa);
        for (row, z) in v.into_iter().enumerate() {
            b_omega[(row, col)] = z;
        }
    }

    let mut phi = b_rows.clone();
    for (i, hk) in h.iter().enumerate() {
        let row = b_rows.row(i) * *hk;
        phi.set_row(i, &row);
    }

    Ok(InterpolationSystem {
        d,
        phi,
        b_omega,
        r: if r.nrows() == 0 {
            CMatrix::zeros(0, l)
        } else {
            r.clone()
        },
        kappa,
        freqs: freqs.to_vec(),
        omega: omega.to_vec(),
        kernel: kernel.clone(),
    })
}

#[derive(Debug, Clone)]
pub struct Certificate {
    /// `K × L`.
    pub alpha: CMatrix,
    /// `K × L`.
    pub beta: CMatrix,
    pub condition_number: f64,
    /// `P` in kernel coordinates, exponents `−m..=m`.
    pub poly: TrigPoly,
    /// `N × L` dual variable in sensor coordinates.
    pub gamma: CMatrix,
    system: InterpolationSystem,
}

impl Certificate {
    pub fn system(&self) -> &InterpolationSystem {
        &self.system
    }

    /// Derivative of `P` from its coefficient sequence.
    pub fn eval(&self, f: f64, order: u32) -> CRow {
        self.poly.eval(f, order)
    }

    /// Derivative of `P` from the kernel expansion directly (`order ≤ 2`).
    pub fn eval_kernel_form(&self, f: f64, order: u32) -> Result<CRow> {
        if order > 2 {
            return Err(Error::InvalidConfiguration(format!("order {order} > 2")));
        }
        let sys = &self.system;
        let l = sys.phi.ncols();
        let mut out = CRow::zeros(l);
        for (k, &fk) in sys.freqs.iter().enumerate() {
            let a = sys.kernel.eval(f - fk, order)?;
            let b = sys.kernel.eval(f - fk, order + 1)? * sys.kappa;
            out += self.alpha.row(k) * a + self.beta.row(k) * b;
        }
        let m = sys.kernel.half_length();
        let scale = 1.0 / (sys.n_sensors() as f64).sqrt();
        for (i, &d) in sys.omega.iter().enumerate() {
            let lidx = kernel_index(d, m) as f64;
            let w = C64::new(0.0, 2.0 * PI * lidx).powu(order) * cis_turns(lidx * f) * scale;
            out += sys.r.row(i) * w;
        }
        Ok(out)
    }
}

/// Solve `D [α; β] = [Φ; 0] − (1/√N) B_Ω r` and assemble the coefficients.
pub fn solve_certificate(system: &InterpolationSystem) -> Result<Certificate> {
    let k = system.freqs.len();
    let l = system.phi.ncols();
    let svd = system.d.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = smax / smin;
    if !(condition_number.is_finite() && condition_number <= MAX_CONDITION) {
        return Err(Error::CertificateFailure(format!(
            "interpolation matrix is ill-conditioned (cond = {condition_number:e})"
        )));
    }
    let sol = system
        .d
        .clone()
        .lu()
        .solve(&system.rhs())
        .ok_or_else(|| Error::CertificateFailure("interpolation matrix is singular".into()))?;
    let alpha = sol.view((0, 0), (k, l)).into_owned();
    let beta = sol.view((k, 0), (k, l)).into_owned();

    let m = system.kernel.half_length();
    let n = 2 * m + 1;
    let mut coeffs = CMatrix::zeros(n, l);
    for idx in 0..n {
        let lidx = idx as i64 - m as i64;
        let c = system.kernel.coeff(lidx);
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let deriv = C64::new(0.0, 2.0 * PI * lidx as f64 * system.kappa);
        let mut row = CRow::zeros(l);
        for (kk, &fk) in system.freqs.iter().enumerate() {
            let phase = cis_turns(-(lidx as f64) * fk);
            row += (alpha.row(kk) + beta.row(kk) * deriv) * phase;
        }
        coeffs.set_row(idx, &(row * c));
    }
    let scale = 1.0 / (n as f64).sqrt();
    for (i, &d) in system.omega.iter().enumerate() {
        let idx = (kernel_index(d, m) + m as i64) as usize;
        let row = coeffs.row(idx) + system.r.row(i) * C64::new(scale, 0.0);
        coeffs.set_row(idx, &row);
    }

    let mut gamma = CMatrix::zeros(n, l);
    for idx in 0..n {
        let j = sensor_index(idx as i64 - m as i64, m);
        gamma.set_row(j, &coeffs.row(idx));
    }

    Ok(Certificate {
        alpha,
        beta,
        condition_number,
        poly: TrigPoly::new(coeffs, -(m as i64), Sign::Plus),
        gamma,
        system: system.clone(),
    })
}
