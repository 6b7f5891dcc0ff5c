//! Euclidean projections used by the ADMM splitting.

use nalgebra::linalg::SymmetricEigen;

use crate::error::{Error, Result};
use crate::{CMatrix, C64};

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Frobenius-nearest positive semidefinite matrix: eigen-decompose the
/// Hermitian part and clamp negative eigenvalues to zero.
pub fn project_psd(m: &CMatrix) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimension(format!(
            "PSD projection needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let h = hermitian_part(m);
    let n = h.nrows();
    if n == 0 {
        return Ok(h);
    }
    let eig = SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite eigenvalue".into()));
    }
    let positive = eig.eigenvalues.iter().filter(|&&v| v > 0.0).count();
    // Rebuild from whichever side of the spectrum is smaller.
    let keep_positive = positive <= n / 2;
    let idx: Vec<usize> = (0..n)
        .filter(|&i| (eig.eigenvalues[i] > 0.0) == keep_positive)
        .collect();
    let mut factor = CMatrix::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        let s = eig.eigenvalues[i].abs().sqrt();
        factor.set_column(c, &(eig.eigenvectors.column(i) * C64::new(s, 0.0)));
    }
    let part = &factor * factor.adjoint();
    let out = if keep_positive { part } else { h + part };
    Ok(hermitian_part(&out))
}

/// Frobenius-nearest Hermitian matrix whose superdiagonal sums equal
/// `[1, 0, …, 0]`: each superdiagonal is shifted uniformly by its excess over
/// the target divided by its length, subdiagonals follow by conjugation.
pub fn project_affine_lambda(m: &CMatrix) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimension(format!(
            "affine projection needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = hermitian_part(m);
    shift_diagonals(&mut out);
    Ok(out)
}

/// In-place core of [`project_affine_lambda`]; `m` must already be Hermitian.
pub(crate) fn shift_diagonals(m: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        let len = n - j;
        let mut sum = C64::new(0.0, 0.0);
        for i in 0..len {
            sum += m[(i, i + j)];
        }
        let target = if j == 0 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
        let shift = (sum - target) / len as f64;
        for i in 0..len {
            m[(i, i + j)] -= shift;
            if j > 0 {
                m[(i + j, i)] = m[(i, i + j)].conj();
            } else {
                m[(i, i)].im = 0.0;
            }
        }
    }
}

/// Rows with Euclidean norm above `lambda` are rescaled onto the sphere of
/// radius `lambda`; the rest are left alone.
pub fn project_row_ball(gamma: &CMatrix, lambda: f64) -> CMatrix {
    let mut out = gamma.clone();
    clamp_rows(&mut out, lambda);
    out
}

pub(crate) fn clamp_rows(gamma: &mut CMatrix, lambda: f64) {
    for i in 0..gamma.nrows() {
        let norm = gamma.row(i).norm();
        if norm > lambda {
            let s = lambda / norm;
            gamma.row_mut(i).scale_mut(s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::toeplitz_adjoint;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn psd_examples() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.0, 0.0),
            c(-1.0, 0.0),
        ]));
        let p = project_psd(&m).unwrap();
        assert!(
            (p - CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                c(1.0, 0.0),
                c(0.0, 0.0)
            ])))
            .norm()
                < 1e-14
        );

        let g = CMatrix::from_fn(4, 3, |i, j| {
            c((i + 2 * j) as f64 * 0.3, i as f64 - j as f64)
        });
        let psd = &g * g.adjoint();
        assert!((project_psd(&psd).unwrap() - &psd).norm() < 1e-10);
        assert!(project_psd(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn affine_examples() {
        let p = project_affine_lambda(&CMatrix::identity(4, 4)).unwrap();
        assert!((p - CMatrix::identity(4, 4) * c(0.25, 0.0)).norm() < 1e-15);

        let mut feasible = CMatrix::from_fn(5, 5, |i, j| {
            c((i * j) as f64 * 0.1, (i as f64 - j as f64) * 0.2)
        });
        feasible = hermitian_part(&feasible);
        shift_diagonals(&mut feasible);
        assert!((project_affine_lambda(&feasible).unwrap() - &feasible).norm() < 1e-15);
        let t = toeplitz_adjoint(&feasible).unwrap();
        assert!((t[0] - c(1.0, 0.0)).norm() < 1e-14);
        assert!(t.iter().skip(1).all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn row_ball_examples() {
        let on = CMatrix::from_row_slice(1, 2, &[c(3.0, 0.0), c(4.0, 0.0)]);
        assert_eq!(project_row_ball(&on, 5.0), on);
        let out = CMatrix::from_row_slice(1, 2, &[c(6.0, 0.0), c(8.0, 0.0)]);
        assert!((project_row_ball(&out, 5.0) - on).norm() < 1e-15);
        assert_eq!(
            project_row_ball(&CMatrix::zeros(3, 2), 0.5),
            CMatrix::zeros(3, 2)
        );
    }
}
