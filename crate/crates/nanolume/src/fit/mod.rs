//! Nonlinear least squares and the domain fitting procedures.
//!
//! [`engine`] hosts a damped Gauss–Newton (Levenberg–Marquardt) solver with
//! a numerical Jacobian and per-parameter reparameterizations that keep
//! rates positive and fractions inside (0, 1). [`models`] builds on it:
//! the background-diluted g²(τ) fit, the saturation L-L curve fit and the
//! weighted zero-power lifetime extrapolation.

pub mod engine;
pub mod models;

pub use engine::{
    least_squares, least_squares_multistart, numerical_jacobian, FitError, FitFlag, FitOptions,
    FitResult, Transform,
};
pub use models::{
    fit_g2, fit_lifetime, fit_saturation, G2FitOutcome, G2Model, LifetimeFit, SaturationFit,
};
