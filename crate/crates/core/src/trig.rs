//! Vector-valued trigonometric polynomials.
//!
//! A [`TrigPoly`] holds a coefficient row per integer exponent and evaluates
//! `P(f) = Σ_t C[t,:] · exp(σ·i2π·e_t·f)` with `e_t = first_exponent + t` and
//! `σ = ±1`. Both the dual polynomial of the SDP (exponents `0..N`, `σ = −1`)
//! and the certificate polynomial (exponents `−m..=m`, `σ = +1`) are instances.

use std::f64::consts::PI;

use crate::{CMatrix, CRow, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `exp(i2π·x)` with the argument reduced modulo one first.
pub(crate) fn cis_turns(x: f64) -> C64 {
    let r = x - x.floor();
    let (s, c) = (2.0 * PI * r).sin_cos();
    C64::new(c, s)
}

/// Wrap a frequency into `[0, 1)`.
pub fn wrap_unit(f: f64) -> f64 {
    let r = f - f.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[derive(Debug, Clone)]
pub struct TrigPoly {
    coeffs: CMatrix,
    first_exponent: i64,
    sign: Sign,
}

/// Value of `g(f) = ‖P(f)‖²` and its first two derivatives.
#[derive(Debug, Clone, Copy)]
pub struct NormSqJet {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

impl TrigPoly {
    pub fn new(coeffs: CMatrix, first_exponent: i64, sign: Sign) -> Self {
        Self {
            coeffs,
            first_exponent,
            sign,
        }
    }

    pub fn coeffs(&self) -> &CMatrix {
        &self.coeffs
    }

    pub fn width(&self) -> usize {
        self.coeffs.ncols()
    }

    fn exponent(&self, t: usize) -> i64 {
        self.first_exponent + t as i64
    }

    /// Derivative of the given order at `f`.
    pub fn eval(&self, f: f64, order: u32) -> CRow {
        let sigma = self.sign.value();
        let mut out = CRow::zeros(self.width());
        for t in 0..self.coeffs.nrows() {
            let e = self.exponent(t);
            let mut w = cis_turns(sigma * e as f64 * f);
            if order > 0 {
                let factor = C64::new(0.0, sigma * 2.0 * PI * e as f64);
                w *= factor.powu(order);
            }
            if w == C64::new(0.0, 0.0) {
                continue;
            }
            for l in 0..self.width() {
                out[l] += self.coeffs[(t, l)] * w;
            }
        }
        out
    }

    /// `‖P(f)‖²` with its first and second derivatives in `f`.
    pub fn norm_sq_jet(&self, f: f64) -> NormSqJet {
        let p0 = self.eval(f, 0);
        let p1 = self.eval(f, 1);
        let p2 = self.eval(f, 2);
        let value = p0.norm_squared();
        let mut cross1 = 0.0;
        let mut cross2 = 0.0;
        for l in 0..self.width() {
            cross1 += (p1[l] * p0[l].conj()).re;
            cross2 += (p2[l] * p0[l].conj()).re;
        }
        NormSqJet {
            value,
            first: 2.0 * cross1,
            second: 2.0 * (p1.norm_squared() + cross2),
        }
    }

    /// `‖P(k/M)‖` for `k = 0..M`.
    pub fn grid_norms(&self, grid: usize) -> Vec<f64> {
        let m = grid as i64;
        let table: Vec<C64> = (0..grid)
            .map(|k| cis_turns(self.sign.value() * k as f64 / grid as f64))
            .collect();
        let width = self.width();
        let mut acc = vec![C64::new(0.0, 0.0); width];
        (0..grid)
            .map(|k| {
                acc.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
                for t in 0..self.coeffs.nrows() {
                    let idx = (self.exponent(t) * k as i64).rem_euclid(m) as usize;
                    let w = table[idx];
                    for (l, a) in acc.iter_mut().enumerate() {
                        *a += self.coeffs[(t, l)] * w;
                    }
                }
                acc.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
            })
            .collect()
    }

    /// Newton ascent on `‖P‖²` from `f`; stops early when the local model is
    /// not concave.
    pub fn refine_peak(&self, f: f64, steps: usize, max_step: f64) -> f64 {
        let mut f = f;
        for _ in 0..steps {
            let jet = self.norm_sq_jet(f);
            if jet.second >= 0.0 || !jet.second.is_finite() {
                break;
            }
            let step = (-jet.first / jet.second).clamp(-max_step, max_step);
            f += step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        wrap_unit(f)
    }

    /// Grid search for local maxima of `‖P‖` followed by Newton refinement.
    /// Returns `(frequency, refined norm)` pairs sorted by frequency, keeping
    /// only grid peaks with norm at least `threshold`.
    pub fn peaks(&self, grid: usize, threshold: f64, newton_steps: usize) -> Vec<(f64, f64)> {
        let norms = self.grid_norms(grid);
        let h = 1.0 / grid as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for k in 0..grid {
            let prev = norms[(k + grid - 1) % grid];
            let next = norms[(k + 1) % grid];
            let cur = norms[k];
            if cur < threshold || cur < prev || cur <= next {
                continue;
            }
            let f = self.refine_peak(k as f64 * h, newton_steps, h);
            let v = self.eval(f, 0).norm();
            out.push((f, v));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrigPoly {
        let coeffs = CMatrix::from_fn(7, 2, |i, j| {
            C64::new(
                (i as f64 * 0.37 + j as f64).sin(),
                (i as f64 * 1.3 - j as f64).cos(),
            )
        });
        TrigPoly::new(coeffs, -3, Sign::Plus)
    }

    #[test]
    fn grid_matches_pointwise() {
        let p = sample();
        let g = p.grid_norms(64);
        for (k, v) in g.iter().enumerate() {
            let direct = p.eval(k as f64 / 64.0, 0).norm();
            assert!((direct - v).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = TrigPoly::new(sample().coeffs().clone(), 0, Sign::Minus);
        let h = 1e-6;
        for &f in &[0.03, 0.41, 0.77] {
            let fd = (p.eval(f + h, 0) - p.eval(f - h, 0)) / C64::new(2.0 * h, 0.0);
            assert!((fd - p.eval(f, 1)).norm() < 1e-5 * p.eval(f, 1).norm().max(1.0));
            let fd2 = (p.eval(f + h, 1) - p.eval(f - h, 1)) / C64::new(2.0 * h, 0.0);
            assert!((fd2 - p.eval(f, 2)).norm() < 1e-5 * p.eval(f, 2).norm().max(1.0));
            let jet = p.norm_sq_jet(f);
            let g = |x: f64| p.eval(x, 0).norm_squared();
            assert!(
                ((g(f + h) - g(f - h)) / (2.0 * h) - jet.first).abs()
                    < 1e-4 * jet.first.abs().max(1.0)
            );
        }
    }

    #[test]
    fn wrap_unit_stays_in_range() {
        assert_eq!(wrap_unit(1.0), 0.0);
        assert!((wrap_unit(-0.25) - 0.75).abs() < 1e-15);
        assert!(wrap_unit(-1e-18) < 1.0);
    }
}
