//! Domain types for the sines-plus-spikes model and the elementary maps used
//! by the solver: atoms, minimum separation, the Toeplitz-trace adjoint, group
//! norms and the dual atomic norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trig::{cis_turns, Sign, TrigPoly};
use crate::{CMatrix, CVector, C64};

/// Ground truth and measurements for one demixing problem.
///
/// Rows index sensors `j = 0..N`, columns index snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureInstance {
    pub frequencies: Vec<f64>,
    /// `K × L`, entry `(k, l)` is the amplitude of frequency `k` in snapshot `l`.
    pub amplitudes: CMatrix,
    /// `N × L` outlier matrix.
    pub outliers: CMatrix,
    pub seed: Option<u64>,
}

impl MixtureInstance {
    pub fn new(frequencies: Vec<f64>, amplitudes: CMatrix, outliers: CMatrix) -> Result<Self> {
        if outliers.nrows() == 0 || outliers.ncols() == 0 {
            return Err(Error::InvalidDimension(
                "outlier matrix must be nonempty".into(),
            ));
        }
        if amplitudes.nrows() != frequencies.len() || amplitudes.ncols() != outliers.ncols() {
            return Err(Error::InvalidDimension(format!(
                "amplitudes are {}x{}, expected {}x{}",
                amplitudes.nrows(),
                amplitudes.ncols(),
                frequencies.len(),
                outliers.ncols()
            )));
        }
        if frequencies
            .iter()
            .any(|f| !f.is_finite() || *f < 0.0 || *f >= 1.0)
        {
            return Err(Error::InvalidConfiguration(
                "frequencies must lie in [0, 1)".into(),
            ));
        }
        if frequencies.len() >= 2 && min_separation(&frequencies)? == 0.0 {
            return Err(Error::InvalidConfiguration(
                "frequencies must be pairwise distinct".into(),
            ));
        }
        Ok(Self {
            frequencies,
            amplitudes,
            outliers,
            seed: None,
        })
    }

    pub fn n_sensors(&self) -> usize {
        self.outliers.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.outliers.ncols()
    }

    /// `S_{jl} = Σ_k a_{kl} e^{i2πj f_k}`.
    pub fn signal(&self) -> CMatrix {
        vandermonde(self.n_sensors(), &self.frequencies) * &self.amplitudes
    }

    pub fn measurement(&self) -> CMatrix {
        self.signal() + &self.outliers
    }

    /// Rows of `Z` with at least one nonzero entry.
    pub fn outlier_rows(&self) -> Vec<usize> {
        (0..self.n_sensors())
            .filter(|&j| {
                self.outliers
                    .row(j)
                    .iter()
                    .any(|z| *z != C64::new(0.0, 0.0))
            })
            .collect()
    }

    pub fn to_json(&self) -> MixtureInstanceJson {
        let (amplitudes_re, amplitudes_im) = split_row_major(&self.amplitudes);
        let (outliers_re, outliers_im) = split_row_major(&self.outliers);
        MixtureInstanceJson {
            n_sensors: self.n_sensors(),
            n_snapshots: self.n_snapshots(),
            frequencies: self.frequencies.clone(),
            amplitudes_re,
            amplitudes_im,
            outliers_re,
            outliers_im,
            seed: self.seed,
        }
    }

    pub fn from_json(json: &MixtureInstanceJson) -> Result<Self> {
        let k = json.frequencies.len();
        let amplitudes = join_row_major(
            k,
            json.n_snapshots,
            &json.amplitudes_re,
            &json.amplitudes_im,
        )?;
        let outliers = join_row_major(
            json.n_sensors,
            json.n_snapshots,
            &json.outliers_re,
            &json.outliers_im,
        )?;
        let mut inst = Self::new(json.frequencies.clone(), amplitudes, outliers)?;
        inst.seed = json.seed;
        Ok(inst)
    }
}

/// On-disk form of [`MixtureInstance`]; complex matrices are split into
/// row-major real and imaginary arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureInstanceJson {
    pub n_sensors: usize,
    pub n_snapshots: usize,
    pub frequencies: Vec<f64>,
    pub amplitudes_re: Vec<f64>,
    pub amplitudes_im: Vec<f64>,
    pub outliers_re: Vec<f64>,
    pub outliers_im: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

pub(crate) fn split_row_major(m: &CMatrix) -> (Vec<f64>, Vec<f64>) {
    let mut re = Vec::with_capacity(m.len());
    let mut im = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            re.push(m[(i, j)].re);
            im.push(m[(i, j)].im);
        }
    }
    (re, im)
}

pub(crate) fn join_row_major(rows: usize, cols: usize, re: &[f64], im: &[f64]) -> Result<CMatrix> {
    if re.len() != rows * cols || im.len() != rows * cols {
        return Err(Error::InvalidDimension(format!(
            "expected {} entries for a {rows}x{cols} matrix, got re={} im={}",
            rows * cols,
            re.len(),
            im.len()
        )));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        C64::new(re[i * cols + j], im[i * cols + j])
    }))
}

/// An element `a(f, φ) bᴴ` of the atomic set; only the sinusoidal factor is
/// stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub frequency: f64,
    pub phase: f64,
    pub len: usize,
}

impl Atom {
    pub fn realize(&self) -> Result<CVector> {
        atom(self.frequency, self.phase, self.len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    pub lambda: f64,
}

impl RegularizationConfig {
    /// `λ = 1/√N`.
    pub fn for_sensors(n: usize) -> Self {
        Self {
            lambda: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfiguration(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }
}

/// Unit-norm sinusoid `(1/√N) e^{iφ} [1, e^{i2πf}, …, e^{i2π(N−1)f}]ᵀ`.
pub fn atom(f: f64, phase: f64, n: usize) -> Result<CVector> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "atom length must be positive".into(),
        ));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let rot = C64::from_polar(scale, phase);
    Ok(CVector::from_fn(n, |j, _| rot * cis_turns(j as f64 * f)))
}

/// `N × K` matrix with entries `e^{i2πj f_k}`.
pub fn vandermonde(n: usize, freqs: &[f64]) -> CMatrix {
    CMatrix::from_fn(n, freqs.len(), |j, k| cis_turns(j as f64 * freqs[k]))
}

/// Distance on the unit circle `[0, 1)`.
pub fn wrap_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Smallest pairwise wrap-around distance.
pub fn min_separation(freqs: &[f64]) -> Result<f64> {
    if freqs.len() < 2 {
        return Err(Error::UndefinedSeparation);
    }
    let mut best = f64::INFINITY;
    for i in 0..freqs.len() {
        for j in (i + 1)..freqs.len() {
            best = best.min(wrap_distance(freqs[i], freqs[j]));
        }
    }
    Ok(best)
}

/// `T*(Λ)_j = Σ_i Λ_{i, i+j}` (0-based): sums along the superdiagonals.
pub fn toeplitz_adjoint(lambda: &CMatrix) -> Result<CVector> {
    let n = lambda.nrows();
    if n != lambda.ncols() {
        return Err(Error::InvalidDimension(format!(
            "Toeplitz adjoint needs a square matrix, got {}x{}",
            n,
            lambda.ncols()
        )));
    }
    let mut out = CVector::zeros(n);
    for j in 0..n {
        for i in 0..(n - j) {
            out[j] += lambda[(i, i + j)];
        }
    }
    Ok(out)
}

/// Row-wise Euclidean norms.
pub fn row_norms(m: &CMatrix) -> Vec<f64> {
    m.row_iter().map(|r| r.norm()).collect()
}

/// `(‖M‖_{1,2}, ‖M‖_{∞,2})`: sum and maximum of the row norms.
pub fn group_norms(m: &CMatrix) -> Result<(f64, f64)> {
    if m.is_empty() {
        return Err(Error::InvalidDimension(
            "group norms of an empty matrix".into(),
        ));
    }
    let norms = row_norms(m);
    Ok((
        norms.iter().sum(),
        norms.iter().copied().fold(0.0, f64::max),
    ))
}

/// Grid size used when the caller does not pick one.
pub fn default_grid(n: usize) -> usize {
    (1usize << 13).max(32 * n)
}

/// `sup_f ‖Γᴴ a(f, 0)‖₂` over unit-norm atoms, evaluated on a uniform grid and
/// polished with three Newton steps at every grid-local maximum.
pub fn dual_atomic_norm(gamma: &CMatrix, grid_size: usize) -> Result<f64> {
    let n = gamma.nrows();
    if n == 0 || gamma.ncols() == 0 {
        return Err(Error::InvalidDimension(
            "dual atomic norm of an empty matrix".into(),
        ));
    }
    if grid_size < 2 * n {
        return Err(Error::InvalidConfiguration(format!(
            "grid of {grid_size} points is coarser than 2N = {}",
            2 * n
        )));
    }
    // ‖Γᴴa(f)‖ = ‖a(f)ᴴΓ‖ = (1/√N)‖Σ_j Γ_j e^{-i2πjf}‖
    let poly = TrigPoly::new(gamma / C64::new((n as f64).sqrt(), 0.0), 0, Sign::Minus);
    let grid = poly.grid_norms(grid_size);
    let mut best = grid.iter().copied().fold(0.0, f64::max);
    if best == 0.0 {
        return Ok(0.0);
    }
    for (_, v) in poly.peaks(grid_size, 0.0, 3) {
        best = best.max(v);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn approx_vec(a: &CVector, b: &[C64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn atom_examples() {
        let a = atom(0.0, 0.0, 4).unwrap();
        assert!(approx_vec(&a, &[C64::new(0.5, 0.0); 4], 1e-15));
        let b = atom(0.5, 0.0, 2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!(approx_vec(
            &b,
            &[C64::new(s, 0.0), C64::new(-s, 0.0)],
            1e-15
        ));
        let c = atom(0.3, 1.1, 16).unwrap();
        assert!((c.norm() - 1.0).abs() < 1e-12);
        assert!(matches!(atom(0.1, 0.0, 0), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn separation_examples() {
        // pairs: 0.3, 0.3 (0.1 ↔ 0.8 wraps to 0.3) and 0.4
        assert!((min_separation(&[0.1, 0.4, 0.8]).unwrap() - 0.3).abs() < 1e-15);
        assert!((min_separation(&[0.0, 0.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!((min_separation(&[0.02, 0.98]).unwrap() - 0.04).abs() < 1e-12);
        assert!(matches!(
            min_separation(&[0.3]),
            Err(Error::UndefinedSeparation)
        ));
    }

    #[test]
    fn toeplitz_adjoint_examples() {
        let t = toeplitz_adjoint(&CMatrix::identity(5, 5)).unwrap();
        assert_eq!(t[0], C64::new(5.0, 0.0));
        assert!(t.iter().skip(1).all(|z| *z == C64::new(0.0, 0.0)));
        let ones = CMatrix::from_element(3, 3, C64::new(1.0, 0.0));
        let t = toeplitz_adjoint(&ones).unwrap();
        assert_eq!(
            t.as_slice(),
            &[C64::new(3.0, 0.0), C64::new(2.0, 0.0), C64::new(1.0, 0.0)]
        );
        assert!(toeplitz_adjoint(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn toeplitz_adjoint_brute_force() {
        let m = CMatrix::from_fn(4, 4, |i, j| {
            C64::new((i * 4 + j) as f64 * 0.7 - 3.0, (j as f64 - i as f64) * 1.3)
        });
        let t = toeplitz_adjoint(&m).unwrap();
        for d in 0..4 {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    if j as i64 - i as i64 == d as i64 {
                        s += m[(i, j)];
                    }
                }
            }
            assert!((t[d] - s).norm() < 1e-14);
        }
    }

    #[test]
    fn group_norm_examples() {
        assert_eq!(group_norms(&CMatrix::zeros(3, 2)).unwrap(), (0.0, 0.0));
        let r = CMatrix::from_row_slice(1, 2, &[C64::new(3.0, 0.0), C64::new(4.0, 0.0)]);
        assert_eq!(group_norms(&r).unwrap(), (5.0, 5.0));
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 2.0),
            ],
        );
        assert_eq!(group_norms(&m).unwrap(), (3.0, 2.0));
        assert!(group_norms(&CMatrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn dual_atomic_norm_examples() {
        let n = 24;
        assert_eq!(dual_atomic_norm(&CMatrix::zeros(n, 2), 4096).unwrap(), 0.0);
        let b = CMatrix::from_row_slice(1, 2, &[C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let a = atom(0.3217, 0.0, n).unwrap();
        let gamma = &a * b.conjugate();
        let v = dual_atomic_norm(&gamma, 4096).unwrap();
        assert!((v - 1.0).abs() < 1e-8, "{v}");
        let v2 = dual_atomic_norm(&(&gamma * C64::new(2.0, 0.0)), 4096).unwrap();
        assert_eq!(v2, 2.0 * v);
        assert!(matches!(
            dual_atomic_norm(&gamma, 10),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn instance_json_round_trip() {
        let amps = CMatrix::from_fn(2, 3, |i, j| C64::new(i as f64 + 0.5, j as f64 - 1.0));
        let mut z = CMatrix::zeros(8, 3);
        z[(5, 1)] = C64::new(0.0, 2.0);
        let inst = MixtureInstance::new(vec![0.1, 0.6], amps, z).unwrap();
        let back = MixtureInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, back);
        assert_eq!(back.outlier_rows(), vec![5]);
    }

    proptest! {
        #[test]
        fn atom_has_unit_norm(f in 0.0f64..1.0, phase in 0.0f64..std::f64::consts::TAU, n in 1usize..200) {
            prop_assert!((atom(f, phase, n).unwrap().norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn separation_is_permutation_and_shift_invariant(
            freqs in proptest::collection::vec(0.0f64..1.0, 2..8),
            shift in 0.0f64..1.0,
        ) {
            let base = min_separation(&freqs).unwrap();
            let mut rev = freqs.clone();
            rev.reverse();
            prop_assert_eq!(min_separation(&rev).unwrap(), base);
            let shifted: Vec<f64> = freqs.iter().map(|f| (f + shift).rem_euclid(1.0)).collect();
            prop_assert!((min_separation(&shifted).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn toeplitz_adjoint_is_linear(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let gen = |s: u64| CMatrix::from_fn(5, 5, |i, j| {
                let x = ((i * 5 + j) as f64 + s as f64 * 0.618).sin();
                C64::new(x, (x * 7.1).cos())
            });
            let (a, b) = (gen(seed), gen(seed + 17));
            let lhs = toeplitz_adjoint(&(&a * C64::new(alpha, 0.0) + &b * C64::new(beta, 0.0))).unwrap();
            let rhs = toeplitz_adjoint(&a).unwrap() * C64::new(alpha, 0.0) + toeplitz_adjoint(&b).unwrap() * C64::new(beta, 0.0);
            prop_assert!((lhs - rhs).norm() < 1e-12);
        }

        #[test]
        fn dual_atomic_norm_bounds_every_probe(seed in 0u64..200, probe in 0.0f64..1.0) {
            let gamma = CMatrix::from_fn(10, 2, |i, j| {
                let x = ((i * 2 + j) as f64 * 1.7 + seed as f64).sin();
                C64::new(x, (x * 3.3).cos())
            });
            let v = dual_atomic_norm(&gamma, 1024).unwrap();
            let a = atom(probe, 0.0, 10).unwrap();
            prop_assert!(v >= (gamma.adjoint() * a).norm() - 1e-12);
        }
    }
}
