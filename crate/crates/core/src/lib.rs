//! Fitting of K concentric ellipses (shared center, shared tilt) to noisy
//! 2-D points with non-iterative algebraic estimators.
//!
//! A scene of K concentric ellipses is described either geometrically
//! (center, per-ring semi-axes, common tilt) or algebraically by a single
//! unit vector θ = (A, B, C, D, E, F_1, …, F_K): the quadratic part and the
//! linear part are shared by every ring, while each ring keeps its own
//! constant term. Every estimator in this crate minimizes the summed squared
//! algebraic distance subject to a quadratic constraint θᵀNθ = 1 and is
//! therefore a generalized eigenvector of a symmetric pencil (M, N), where M
//! is the carrier scatter matrix. The five supported constraints are:
//!
//! * `Ls` — N = I, plain eigenvector of M.
//! * `OLeary` — N encodes AC − B² = 1, guaranteeing an ellipse pair.
//! * `Taubin` — N is the summed carrier covariance, solved through a
//!   reduced pencil because the covariance has a zero F-block.
//! * `SemiHyper` — Taubin's N plus a centroid correction that cancels the
//!   essential (sample-size independent) part of the second-order bias.
//! * `Hyper` — the full bias-cancelling constraint; zero second-order bias.
//!
//! [`error_analysis`] evaluates the leading covariance and the per-method
//! second-order biases at a known true scene; [`simulation`] provides the
//! seeded Monte Carlo harness (NMSE, normalized bias, run time, convergence
//! rate) used to compare methods empirically.

pub mod error_analysis;
pub mod estimators;
pub mod geometry;
pub mod linalg;
pub mod matrices;
pub mod simulation;

pub use estimators::{fit_all, FitError, FitResult, Method};
pub use geometry::{ConcentricTheta, GeometricParams, GeometryError, Point, Ring};
pub use matrices::DataSet;
