//! ADMM solver for the dual demixing SDP
//!
//! ```text
//! maximize   Re⟨Y, Γ⟩
//! subject to [[Λ, Γ], [Γᴴ, I_L]] ⪰ 0,  T*(Λ) = e₁,  ‖Γ‖_{∞,2} ≤ λ
//! ```
//!
//! The variable is the Hermitian block matrix `X = [[Λ, Γ], [Γᴴ, W]]`. One
//! ADMM block projects onto the PSD cone, the other onto the affine-plus-ball
//! set `{W = I, T*(Λ) = e₁, ‖Γ‖_{∞,2} ≤ λ}` after a proximal shift of the
//! linear objective. The two constraint sets decouple over the blocks of `X`,
//! so both projections are exact.

mod projections;

use serde::{Deserialize, Serialize};

pub use projections::{hermitian_part, project_affine_lambda, project_psd, project_row_ball};

use crate::error::{Error, Result};
use crate::model::{group_norms, toeplitz_adjoint};
use crate::{CMatrix, C64};

const RHO_MIN: f64 = 1e-4;
const RHO_MAX: f64 = 1e4;
const ADAPT_EVERY: usize = 20;
const ADAPT_RATIO: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct DualSdpProblem {
    pub y: CMatrix,
    pub lambda: f64,
}

impl DualSdpProblem {
    pub fn new(y: CMatrix, lambda: f64) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidDimension(
                "measurement matrix is empty".into(),
            ));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfiguration(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidConfiguration(
                "measurement contains non-finite entries".into(),
            ));
        }
        Ok(Self { y, lambda })
    }

    pub fn n_sensors(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.y.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub rho: f64,
    pub adaptive_penalty: bool,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: usize,
    pub over_relaxation: f64,
    /// Tolerance of the feasibility checks on a returned solution.
    pub eps_feas: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            adaptive_penalty: true,
            eps_abs: 1e-7,
            eps_rel: 1e-6,
            max_iterations: 100_000,
            over_relaxation: 1.6,
            eps_feas: 1e-5,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.rho, self.eps_abs, self.eps_rel, self.eps_feas];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.max_iterations == 0 {
            return Err(Error::InvalidConfiguration(
                "solver tolerances and penalty must be positive".into(),
            ));
        }
        if !(1.0..=1.8).contains(&self.over_relaxation) {
            return Err(Error::InvalidConfiguration(format!(
                "over-relaxation {} outside [1, 1.8]",
                self.over_relaxation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// `N × L` dual variable.
    pub gamma: CMatrix,
    /// `N × N` Hermitian Gram block.
    pub lambda_block: CMatrix,
    /// `Re⟨Y, Γ⟩`.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
}

/// Worst violations of the three constraint families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    /// `max(0, −λ_min)` of the block matrix with `W = I`.
    pub psd_violation: f64,
    /// `‖T*(Λ) − e₁‖₂`.
    pub trace_violation: f64,
    /// `‖Γ‖_{∞,2} / λ − 1`, clipped at zero.
    pub row_violation: f64,
}

impl Feasibility {
    pub fn holds(&self, eps: f64) -> bool {
        self.psd_violation <= eps && self.trace_violation <= eps && self.row_violation <= eps
    }
}

impl SdpSolution {
    pub fn block_matrix(&self) -> CMatrix {
        assemble(&self.lambda_block, &self.gamma)
    }

    pub fn feasibility(&self, lambda: f64) -> Result<Feasibility> {
        let block = hermitian_part(&self.block_matrix());
        let eig =
            nalgebra::linalg::SymmetricEigen::try_new(block, f64::EPSILON, 0).ok_or_else(|| {
                Error::NumericalFailure("eigensolver failed in feasibility check".into())
            })?;
        let min_eig = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let mut t = toeplitz_adjoint(&self.lambda_block)?;
        t[0] -= C64::new(1.0, 0.0);
        let (_, max_row) = group_norms(&self.gamma)?;
        Ok(Feasibility {
            psd_violation: (-min_eig).max(0.0),
            trace_violation: t.norm(),
            row_violation: (max_row / lambda - 1.0).max(0.0),
        })
    }
}

fn assemble(lambda_block: &CMatrix, gamma: &CMatrix) -> CMatrix {
    let (n, l) = gamma.shape();
    let mut x = CMatrix::zeros(n + l, n + l);
    x.view_mut((0, 0), (n, n)).copy_from(lambda_block);
    x.view_mut((0, n), (n, l)).copy_from(gamma);
    x.view_mut((n, 0), (l, n)).copy_from(&gamma.adjoint());
    x.view_mut((n, n), (l, l)).fill_with_identity();
    x
}

/// `Re⟨A, B⟩_F`.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Exact projection onto `{W = I, T*(Λ) = e₁, ‖Γ‖_{∞,2} ≤ λ}` of the
/// Hermitian matrix `v` after adding `shift` to its upper-right block.
fn project_constraint_set(v: &CMatrix, shift: &CMatrix, n: usize, lambda: f64) -> CMatrix {
    let l = v.nrows() - n;
    let mut lam = hermitian_part(&v.view((0, 0), (n, n)).into_owned());
    projections::shift_diagonals(&mut lam);
    let upper = v.view((0, n), (n, l));
    let lower = v.view((n, 0), (l, n));
    let mut gamma = (upper + lower.adjoint()) * C64::new(0.5, 0.0) + shift;
    projections::clamp_rows(&mut gamma, lambda);
    assemble(&lam, &gamma)
}

/// Maximize `Re⟨Y, Γ⟩` over the feasible set with over-relaxed ADMM.
///
/// The measurement is rescaled to unit Frobenius norm internally; the feasible
/// set does not depend on `Y` so the maximizer is unchanged and the reported
/// objective is in the caller's units.
pub fn solve_dual_sdp(problem: &DualSdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    opts.validate()?;
    let (n, l) = problem.y.shape();
    let dim = n + l;
    let lambda = problem.lambda;

    let y_norm = problem.y.norm();
    let mut lam0 = CMatrix::identity(n, n);
    lam0.scale_mut(1.0 / n as f64);
    let gamma0 = CMatrix::zeros(n, l);
    if y_norm == 0.0 {
        return Ok(SdpSolution {
            gamma: gamma0,
            lambda_block: lam0,
            objective: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
            converged: true,
            trace: Vec::new(),
        });
    }
    let y_unit = &problem.y / C64::new(y_norm, 0.0);

    let mut z = assemble(&lam0, &gamma0);
    let mut x = z.clone();
    let mut u = CMatrix::zeros(dim, dim);
    let mut rho = opts.rho;
    let alpha = opts.over_relaxation;
    let eps_scale = opts.eps_abs * dim as f64;

    let mut trace = Vec::new();
    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut x_prev_norm = x.norm();

    for k in 1..=opts.max_iterations {
        iterations = k;
        let shift = &y_unit * C64::new(0.5 / rho, 0.0);
        x = project_constraint_set(&(&z - &u), &shift, n, lambda);
        let x_hat = &x * C64::new(alpha, 0.0) + &z * C64::new(1.0 - alpha, 0.0);
        let z_prev = std::mem::replace(&mut z, project_psd(&(&x_hat + &u))?);
        u += &x_hat - &z;

        primal_residual = (&x - &z).norm();
        dual_residual = rho * (&z - &z_prev).norm();
        if !primal_residual.is_finite() || !dual_residual.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite residual at iteration {k}"
            )));
        }

        let x_norm = x.norm();
        let eps_primal = eps_scale + opts.eps_rel * x_norm.max(x_prev_norm);
        let eps_dual = eps_scale + opts.eps_rel * rho * u.norm();
        x_prev_norm = x_norm;

        let objective = y_norm * real_inner(&y_unit, &x.view((0, n), (n, l)).into_owned());
        trace.push(IterationRecord {
            iteration: k,
            objective,
            primal_residual,
            dual_residual,
        });

        if primal_residual <= eps_primal && dual_residual <= eps_dual {
            converged = true;
            break;
        }

        if opts.adaptive_penalty && k % ADAPT_EVERY == 0 {
            if primal_residual > ADAPT_RATIO * dual_residual && rho < RHO_MAX {
                rho *= 2.0;
                u.scale_mut(0.5);
            } else if dual_residual > ADAPT_RATIO * primal_residual && rho > RHO_MIN {
                rho *= 0.5;
                u.scale_mut(2.0);
            }
        }
    }

    let gamma = x.view((0, n), (n, l)).into_owned();
    let lambda_block = x.view((0, 0), (n, n)).into_owned();
    let objective = real_inner(&problem.y, &gamma);
    Ok(SdpSolution {
        gamma,
        lambda_block,
        objective,
        primal_residual,
        dual_residual,
        iterations,
        converged,
        trace,
    })
}
