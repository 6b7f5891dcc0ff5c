//! Interpolation kernel: a product of three Dirichlet kernels and its
//! restriction to the sensors that carry no outlier.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::trig::cis_turns;
use crate::C64;

/// Fractions of `m` giving the three Dirichlet orders.
pub const DIRICHLET_FRACTIONS: [f64; 3] = [0.247, 0.339, 0.414];

/// Coefficients `c_l`, `l = −m..=m`, of `Σ_l c_l e^{i2πlf}`.
pub trait KernelCoefficients {
    fn half_length(&self) -> usize;

    /// Slice of length `2m + 1`; entry `l + m` holds `c_l`.
    fn coefficients(&self) -> &[C64];

    fn coeff(&self, l: i64) -> C64 {
        let m = self.half_length() as i64;
        if l.abs() > m {
            C64::new(0.0, 0.0)
        } else {
            self.coefficients()[(l + m) as usize]
        }
    }

    fn eval(&self, f: f64, order: u32) -> Result<C64> {
        kernel_eval(self, f, order)
    }
}

/// `Σ_l (i2πl)^order c_l e^{i2πlf}` for `order ≤ 3`.
pub fn kernel_eval<K: KernelCoefficients + ?Sized>(kernel: &K, f: f64, order: u32) -> Result<C64> {
    if order > 3 {
        return Err(Error::InvalidConfiguration(format!(
            "kernel derivative order {order} > 3"
        )));
    }
    let m = kernel.half_length() as i64;
    let mut acc = C64::new(0.0, 0.0);
    for (idx, c) in kernel.coefficients().iter().enumerate() {
        if *c == C64::new(0.0, 0.0) {
            continue;
        }
        let l = idx as i64 - m;
        let factor = C64::new(0.0, 2.0 * PI * l as f64).powu(order);
        acc += c * factor * cis_turns(l as f64 * f);
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    m: usize,
    orders: [usize; 3],
    coeffs: Vec<C64>,
}

impl Kernel {
    /// Dirichlet orders `⌊0.247m⌋, ⌊0.339m⌋, ⌊0.414m⌋`, each factor scaled to
    /// one at the origin, multiplied together by convolving coefficients.
    pub fn build(m: usize) -> Result<Self> {
        if m < 4 {
            return Err(Error::InvalidConfiguration(format!(
                "kernel half-length {m} < 4"
            )));
        }
        let orders = DIRICHLET_FRACTIONS.map(|a| (a * m as f64).floor() as usize);
        let mut coeffs = vec![1.0];
        for &order in &orders {
            let factor = vec![1.0 / (2 * order + 1) as f64; 2 * order + 1];
            coeffs = convolve(&coeffs, &factor);
        }
        let reach = orders.iter().sum::<usize>();
        debug_assert!(reach <= m);
        let mut padded = vec![C64::new(0.0, 0.0); 2 * m + 1];
        for (i, c) in coeffs.iter().enumerate() {
            padded[m - reach + i] = C64::new(*c, 0.0);
        }
        Ok(Self {
            m,
            orders,
            coeffs: padded,
        })
    }

    pub fn orders(&self) -> [usize; 3] {
        self.orders
    }

    /// Signal length `2m + 1`.
    pub fn len(&self) -> usize {
        2 * self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `1/√|K̄″(0)|`; `K̄″(0)` is negative at the central maximum.
    pub fn kappa(&self) -> f64 {
        let second = kernel_eval(self, 0.0, 2).expect("order 2 is supported").re;
        1.0 / second.abs().sqrt()
    }
}

impl KernelCoefficients for Kernel {
    fn half_length(&self) -> usize {
        self.m
    }

    fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Kernel index carried by sensor `j`.
///
/// The sensor-domain dual polynomial `Σ_j Γ_j e^{−i2πjf}` equals
/// `e^{−i2πmf} Σ_l p_l e^{+i2πlf}` with `p_l = Γ_{m−l}`, so sensor `j`
/// corresponds to kernel exponent `l = m − j`.
pub fn kernel_index(sensor: usize, m: usize) -> i64 {
    m as i64 - sensor as i64
}

pub fn sensor_index(l: i64, m: usize) -> usize {
    (m as i64 - l) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedKernel {
    base: Kernel,
    /// `keep[l + m]` is false on kernel indices of outlier sensors.
    keep: Vec<bool>,
    coeffs: Vec<C64>,
}

impl RestrictedKernel {
    pub fn base(&self) -> &Kernel {
        &self.base
    }

    pub fn keeps(&self, l: i64) -> bool {
        let m = self.base.m as i64;
        l.abs() <= m && self.keep[(l + m) as usize]
    }
}

impl KernelCoefficients for RestrictedKernel {
    fn half_length(&self) -> usize {
        self.base.m
    }

    fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }
}

/// Zero the coefficients of the kernel indices of the sensors in `omega`.
pub fn restrict_kernel(kernel: &Kernel, omega: &[usize]) -> Result<RestrictedKernel> {
    let n = kernel.len();
    let m = kernel.m;
    let mut keep = vec![true; n];
    for &j in omega {
        if j >= n {
            return Err(Error::InvalidConfiguration(format!(
                "sensor {j} outside 0..{n}"
            )));
        }
        keep[(kernel_index(j, m) + m as i64) as usize] = false;
    }
    let coeffs = kernel
        .coeffs
        .iter()
        .zip(&keep)
        .map(|(c, k)| if *k { *c } else { C64::new(0.0, 0.0) })
        .collect();
    Ok(RestrictedKernel {
        base: kernel.clone(),
        keep,
        coeffs,
    })
}

/// Restriction to the full sensor set.
impl From<&Kernel> for RestrictedKernel {
    fn from(kernel: &Kernel) -> Self {
        restrict_kernel(kernel, &[]).expect("empty support is always valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirichlet(order: usize, f: f64) -> f64 {
        let n = (2 * order + 1) as f64;
        let s = (PI * f).sin();
        if s.abs() < 1e-12 {
            1.0
        } else {
            (n * PI * f).sin() / (n * s)
        }
    }

    #[test]
    fn normalized_at_origin() {
        for m in [4, 10, 50, 100] {
            let k = Kernel::build(m).unwrap();
            assert!((k.eval(0.0, 0).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-12);
            let sum: C64 = k.coefficients().iter().sum();
            assert!((sum.re - 1.0).abs() < 1e-12);
        }
        assert!(Kernel::build(3).is_err());
    }

    #[test]
    fn matches_product_of_dirichlet_kernels() {
        let k = Kernel::build(50).unwrap();
        let [a, b, c] = k.orders();
        assert_eq!([a, b, c], [12, 16, 20]);
        let mut worst: f64 = 0.0;
        for i in 0..4096 {
            let f = i as f64 / 4096.0;
            let product = dirichlet(a, f) * dirichlet(b, f) * dirichlet(c, f);
            worst = worst.max((k.eval(f, 0).unwrap() - C64::new(product, 0.0)).norm());
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn hermitian_symmetric_coefficients() {
        let k = Kernel::build(37).unwrap();
        for l in 0..=37i64 {
            assert!((k.coeff(-l) - k.coeff(l).conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn derivative_examples() {
        let k = Kernel::build(30).unwrap();
        assert!(k.eval(0.0, 1).unwrap().norm() < 1e-12);
        let second = k.eval(0.0, 2).unwrap();
        assert!(second.re < 0.0 && second.im.abs() < 1e-9);
        // κ²|K̄″(0)| = 1
        assert!((k.kappa().powi(2) * second.re.abs() - 1.0).abs() < 1e-12);
        assert!(k.eval(0.1, 4).is_err());
    }

    #[test]
    fn restriction_edge_cases() {
        let k = Kernel::build(8).unwrap();
        let same = restrict_kernel(&k, &[]).unwrap();
        assert_eq!(same.coefficients(), k.coefficients());
        let all: Vec<usize> = (0..k.len()).collect();
        let none = restrict_kernel(&k, &all).unwrap();
        assert!(none.coefficients().iter().all(|c| c.norm() == 0.0));
        assert!(restrict_kernel(&k, &[17]).is_err());
        let one = restrict_kernel(&k, &[2]).unwrap();
        assert!(!one.keeps(6));
        assert_eq!(one.coeff(6), C64::new(0.0, 0.0));
        assert_eq!(sensor_index(kernel_index(2, 8), 8), 2);
    }
}
