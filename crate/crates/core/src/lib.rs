//! Numerical pseudo-differential calculus on the Heisenberg group ℍₙ.
//!
//! Functions on ℍₙ ≅ ℝ^{2n+1} are sampled on tensor grids; operator-valued
//! Fourier coefficients π_λ(κ) are Weyl quantizations of rescaled Euclidean
//! Fourier transforms and are stored as truncated Hermite matrices.

pub mod container;
pub mod difference_ops;
pub mod error;
pub mod fd;
pub mod heisenberg;
pub mod par;
pub mod phase_space;
pub mod quantize;
pub mod representations;
pub mod samples;
pub mod symbol_calculus;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use num_complex::Complex64 as C64;

pub use heisenberg::{dilate, group_mul, Field, GroupBox, HPoint, MultiIndex};
pub use phase_space::{
    fourier_transform, hermite_basis, hermite_eval, Grid1D, GridFunction, PhaseSpace, PhaseSymbol,
    RepOperator, TensorGrid, WeylSymbol,
};
