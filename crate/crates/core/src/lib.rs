//! Joint recovery of spectrally sparse multi-snapshot signals and row-sparse
//! outliers.
//!
//! The measurement model is `Y = S + Z` where every column of `S` is a sum of
//! the same `K` complex exponentials and `Z` is nonzero on a small set of
//! sensor rows. Recovery solves the dual semidefinite program of the group
//! total-variation demixing problem with an ADMM splitting, then reads the
//! frequencies off the peaks of the dual polynomial and the outlier rows off
//! the saturated rows of the dual variable.
//!
//! The [`certificate`] module builds the randomized interpolating dual
//! polynomial that proves exact recovery and checks its optimality conditions
//! numerically.

pub mod certificate;
pub mod cli;
pub mod dual_analysis;
pub mod error;
pub mod model;
pub mod solver;
pub mod synthesis;
pub mod trig;

pub use error::{Error, Result};
pub use nalgebra::Complex;

/// Complex double used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex row vector.
pub type CRow = nalgebra::RowDVector<C64>;
