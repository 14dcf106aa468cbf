//! Loss functions for parameters on restricted spaces and their Bayes estimators.
//!
//! The crate is organised bottom-up:
//!
//! - [`spaces`] and [`loss`]: parameter spaces (real line, positive half-line,
//!   intervals, rectangles, the unit simplex), the generalized logit, the loss
//!   catalog and the symmetry utilities.
//! - [`moments`]: posterior moment providers, analytic (Beta, truncated normal)
//!   and numeric (1-D/2-D Gauss–Legendre grids, Monte-Carlo samples).
//! - [`estimators`]: closed-form Bayes estimators (scale means, the
//!   precautionary estimator, the interval estimator), a brute-force
//!   expected-loss minimizer and the two-arm sample-size formula.
//! - [`intervals`]: confidence intervals for a binomial proportion.
//! - [`sim`]: the deterministic Monte-Carlo harness for the four estimation
//!   studies.
//! - [`verify`]: oracle cross-check families, shared by tests and the CLI.

pub mod error;
pub mod estimators;
pub mod intervals;
pub mod loss;
pub mod minimize;
pub mod moments;
pub mod quadrature;
pub mod sim;
pub mod spaces;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use estimators::{EstimatorResult, Method};
pub use intervals::{CiKind, ConfidenceInterval};
pub use loss::{LossFunction, LossKind};
pub use moments::{Grid1D, Grid2D, MomentSet, PosteriorModel};
pub use spaces::ParameterSpace;
