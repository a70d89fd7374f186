//! Active subspaces of black-box functions estimated through Gaussian-process
//! surrogates, and their extension to jump-discontinuous functions.
//!
//! Module map:
//!
//! - [`linalg`], [`rng`], [`data`], [`quad`]: numeric substrate.
//! - [`testfn`]: analytic test functions with known ridge and jump structure.
//! - [`gp`]: GP surrogate fitting, posterior mean and its gradient.
//! - [`asm`]: Monte-Carlo active subspaces of surrogates, importances and
//!   dimension selection.
//! - [`discas`]: finite-radius regression slopes `β_r`, the matrices `B^r`,
//!   the normalizing constant `A_P` and the boundary-integral oracle.
//! - [`reduce`]: sliced inverse regression, KNN and cross-validated
//!   prediction comparisons.

pub mod asm;
pub mod data;
pub mod discas;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod quad;
pub mod reduce;
pub mod rng;
pub mod testfn;

pub use asm::SubspaceReport;
pub use data::{Dataset, ParamRange};
pub use discas::ExtendedAsmEstimate;
pub use error::{Error, Result};
pub use gp::{GpModel, KernelFamily, KernelSpec};
pub use linalg::{psd_sqrt, subspace_cosine, sym_eig, SpectralMatrix};
pub use reduce::{ProjectionKind, ProjectionSpec};
pub use testfn::{PiecewiseSmooth, RidgeKind, TestFunction};

pub use nalgebra::{DMatrix, DVector};
