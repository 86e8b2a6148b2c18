//! The five fitting methods, each a selected eigenpair of a symmetric
//! pencil (M, N) over the carrier scatter matrix M.
//!
//! Selection rules:
//!
//! * `Ls` — eigenvector of M for its smallest eigenvalue.
//! * `OLeary` — smallest positive generalized eigenvalue of (M, N_OL);
//!   exactly one positive eigenvalue exists for positive definite M.
//! * `Taubin` — smallest positive eigenvalue of the reduced 5×5 pencil
//!   (M¹¹ − M¹²(M²²)⁻¹M¹²ᵀ, Ň_T); the F-block of θ is recovered by back
//!   substitution. The reduction removes the infinite eigenvalues caused by
//!   the constraint's zero F-block.
//! * `Hyper` / `SemiHyper` — the noiseless pencil value is zero, so the
//!   eigenvalue closest to zero (any sign) is selected, equivalently the
//!   largest |η| of the reversed pencil N θ = η M θ.
//!
//! On noiseless data M is singular with the true θ spanning its kernel;
//! every method short-circuits to that kernel vector.

use crate::geometry::{ConcentricTheta, GeometryError};
use crate::linalg::{
    near_kernel_pinv, solve_symmetric_pencil, SymmetricDecomposition, DEFAULT_PINV_REL_TOL,
    KERNEL_REL_TOL,
};
use crate::matrices::{
    assemble_scatter, hyper_constraint, oleary_constraint, parameter_dim, semi_hyper_constraint,
    taubin_constraint, DataSet, ScatterMatrix,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("ring {ring} has no points")]
    EmptyRing { ring: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

impl From<GeometryError> for FitError {
    fn from(e: GeometryError) -> Self {
        FitError::NumericalFailure(e.to_string())
    }
}

/// The five algebraic fitting methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ls,
    OLeary,
    Taubin,
    SemiHyper,
    Hyper,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ls,
        Method::OLeary,
        Method::Taubin,
        Method::SemiHyper,
        Method::Hyper,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ls => "ls",
            Method::OLeary => "oleary",
            Method::Taubin => "taubin",
            Method::SemiHyper => "semi-hyper",
            Method::Hyper => "hyper",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ls" => Some(Method::Ls),
            "oleary" | "ol" | "o'leary" => Some(Method::OLeary),
            "taubin" | "tau" => Some(Method::Taubin),
            "semi-hyper" | "semi" | "semihyper" => Some(Method::SemiHyper),
            "hyper" => Some(Method::Hyper),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of one fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub method: Method,
    pub theta: ConcentricTheta,
    /// Selected pencil eigenvalue λ of M θ = λ N θ (for Hyper/SemiHyper this
    /// is 1/η of the reversed problem; zero on the noiseless kernel path).
    pub eigenvalue: f64,
    /// Whether θ converts back to concentric ellipses.
    pub valid: bool,
    pub elapsed_seconds: f64,
    /// ‖M θ − λ N θ‖ / ‖M‖ for the method's pencil.
    pub pencil_residual: f64,
}

/// Checks the invariants every fit relies on: non-empty rings, at least
/// 6 + K points in total, and a usable scale.
pub fn validate(data: &DataSet) -> Result<(), FitError> {
    for (i, ring) in data.rings.iter().enumerate() {
        if ring.is_empty() {
            return Err(FitError::EmptyRing { ring: i + 1 });
        }
    }
    let needed = parameter_dim(data.ring_count()) + 1;
    let got = data.total_points();
    if got < needed {
        return Err(FitError::InsufficientPoints { needed, got });
    }
    if !(data.f0 > 0.0 && data.f0.is_finite()) {
        return Err(FitError::NumericalFailure(
            "scale f0 must be positive and finite".into(),
        ));
    }
    for (_, p) in data.points() {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(FitError::NumericalFailure(
                "data contains non-finite coordinates".into(),
            ));
        }
    }
    Ok(())
}

struct SelectedPair {
    eigenvalue: f64,
    vector: DVector<f64>,
}

/// Kernel shortcut for noiseless data: the smallest eigenvalue of M is zero
/// up to roundoff and its eigenvector is the exact solution for every method.
fn scatter_kernel(m_dec: &SymmetricDecomposition) -> Option<SelectedPair> {
    let last = m_dec.eigenvalues.len() - 1;
    let beta_min = m_dec.eigenvalues[last];
    if beta_min.abs() <= KERNEL_REL_TOL * m_dec.max_abs_eigenvalue() {
        Some(SelectedPair {
            eigenvalue: 0.0,
            vector: m_dec.eigenvectors[last].clone(),
        })
    } else {
        None
    }
}

fn positive_floor(pairs: &crate::linalg::PencilSolution) -> f64 {
    let max_abs = pairs
        .pairs
        .iter()
        .fold(0.0f64, |acc, p| acc.max(p.eigenvalue.abs()));
    KERNEL_REL_TOL * max_abs
}

fn select_smallest_positive(m: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<SelectedPair, FitError> {
    let sol =
        solve_symmetric_pencil(m, n).map_err(|e| FitError::NumericalFailure(e.to_string()))?;
    let floor = positive_floor(&sol);
    let pair = sol
        .smallest_positive(floor)
        .ok_or_else(|| FitError::NumericalFailure("no positive pencil eigenvalue".into()))?;
    Ok(SelectedPair {
        eigenvalue: pair.eigenvalue,
        vector: pair.eigenvector.clone(),
    })
}

fn select_closest_to_zero(m: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<SelectedPair, FitError> {
    let sol =
        solve_symmetric_pencil(m, n).map_err(|e| FitError::NumericalFailure(e.to_string()))?;
    let pair = sol
        .pairs
        .iter()
        .min_by(|a, b| {
            a.eigenvalue
                .abs()
                .partial_cmp(&b.eigenvalue.abs())
                .expect("finite eigenvalues")
        })
        .ok_or_else(|| FitError::NumericalFailure("empty pencil solution".into()))?;
    Ok(SelectedPair {
        eigenvalue: pair.eigenvalue,
        vector: pair.eigenvector.clone(),
    })
}

/// Reduced Taubin solve on noisy data (M²² is invertible because every ring
/// has points; its diagonal is n_i·f0⁴).
fn taubin_reduced(data: &DataSet, m: &DMatrix<f64>) -> Result<SelectedPair, FitError> {
    let k = data.ring_count();
    let m11 = m.view((0, 0), (5, 5)).into_owned();
    let m12 = m.view((0, 5), (5, k)).into_owned();
    let mut m22_inv_diag = DVector::zeros(k);
    for i in 0..k {
        let d = m[(5 + i, 5 + i)];
        if d <= 0.0 || d.is_nan() {
            return Err(FitError::EmptyRing { ring: i + 1 });
        }
        m22_inv_diag[i] = 1.0 / d;
    }
    let m22_inv = DMatrix::from_diagonal(&m22_inv_diag);
    let reduced = &m11 - &m12 * &m22_inv * m12.transpose();
    let reduced = crate::linalg::symmetrize(&reduced);
    let nt_full = taubin_constraint(data);
    let nt = nt_full.view((0, 0), (5, 5)).into_owned();
    let picked = select_smallest_positive(&reduced, &nt)?;
    let theta1 = picked.vector;
    let theta2 = -(&m22_inv * m12.transpose() * &theta1);
    let mut full = DVector::zeros(5 + k);
    full.rows_mut(0, 5).copy_from(&theta1);
    full.rows_mut(5, k).copy_from(&theta2);
    Ok(SelectedPair {
        eigenvalue: picked.eigenvalue,
        vector: full,
    })
}

/// Runs one method against a pre-assembled scatter matrix.
fn fit_with_scatter(
    data: &DataSet,
    method: Method,
    scatter: &ScatterMatrix,
) -> Result<FitResult, FitError> {
    let start = Instant::now();
    let m = &scatter.matrix;
    let dim = m.nrows();
    let m_dec = SymmetricDecomposition::new(m);
    let kernel = scatter_kernel(&m_dec);

    // (selected pair, constraint matrix for the residual; None means λ = 0
    // so the constraint side drops out of the residual.)
    let (picked, constraint): (SelectedPair, Option<DMatrix<f64>>) = match method {
        Method::Ls => {
            let last = dim - 1;
            (
                SelectedPair {
                    eigenvalue: m_dec.eigenvalues[last].max(0.0),
                    vector: m_dec.eigenvectors[last].clone(),
                },
                Some(DMatrix::identity(dim, dim)),
            )
        }
        Method::OLeary => match kernel {
            Some(pair) => (pair, None),
            None => {
                let n = oleary_constraint(data.ring_count());
                (select_smallest_positive(m, &n)?, Some(n))
            }
        },
        Method::Taubin => match kernel {
            Some(pair) => (pair, None),
            None => {
                let pair = taubin_reduced(data, m)?;
                (pair, Some(taubin_constraint(data)))
            }
        },
        Method::SemiHyper => match kernel {
            Some(pair) => (pair, None),
            None => {
                let n = semi_hyper_constraint(data);
                (select_closest_to_zero(m, &n)?, Some(n))
            }
        },
        Method::Hyper => match kernel {
            Some(pair) => (pair, None),
            None => {
                // At small noise the scatter matrix estimates a singular M̃
                // and its near-kernel eigenvalue must not be reciprocated;
                // at large noise the matrix is genuinely regular and the
                // full inverse is the right plug-in.
                let m_pinv = near_kernel_pinv(m, DEFAULT_PINV_REL_TOL);
                let n = hyper_constraint(data, &m_pinv);
                (select_closest_to_zero(m, &n)?, Some(n))
            }
        },
    };

    let theta = ConcentricTheta::new(picked.vector.clone(), data.f0)?;
    let theta_vec = theta.as_vector();
    let residual_vec = match &constraint {
        Some(n) => m * theta_vec - picked.eigenvalue * (n * theta_vec),
        None => m * theta_vec,
    };
    let pencil_residual = residual_vec.norm() / m.norm();
    let valid = theta.to_geometry().is_ok();
    Ok(FitResult {
        method,
        theta,
        eigenvalue: picked.eigenvalue,
        valid,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        pencil_residual,
    })
}

/// Fits one method, assembling the scatter matrix internally.
pub fn fit_method(data: &DataSet, method: Method) -> Result<FitResult, FitError> {
    validate(data)?;
    let scatter = assemble_scatter(data);
    fit_with_scatter(data, method, &scatter)
}

pub fn fit_ls(data: &DataSet) -> Result<FitResult, FitError> {
    fit_method(data, Method::Ls)
}

pub fn fit_oleary(data: &DataSet) -> Result<FitResult, FitError> {
    fit_method(data, Method::OLeary)
}

pub fn fit_taubin(data: &DataSet) -> Result<FitResult, FitError> {
    fit_method(data, Method::Taubin)
}

pub fn fit_semi_hyper(data: &DataSet) -> Result<FitResult, FitError> {
    fit_method(data, Method::SemiHyper)
}

pub fn fit_hyper(data: &DataSet) -> Result<FitResult, FitError> {
    fit_method(data, Method::Hyper)
}

/// Runs the requested methods over one shared scatter matrix. Failures stay
/// per-method; the reported timings cover each method's own work after the
/// shared assembly.
pub fn fit_selected(
    data: &DataSet,
    methods: &[Method],
) -> Result<BTreeMap<Method, Result<FitResult, FitError>>, FitError> {
    validate(data)?;
    let scatter = assemble_scatter(data);
    Ok(methods
        .iter()
        .map(|&method| (method, fit_with_scatter(data, method, &scatter)))
        .collect())
}

/// All five methods over one shared scatter matrix.
pub fn fit_all(data: &DataSet) -> Result<BTreeMap<Method, Result<FitResult, FitError>>, FitError> {
    fit_selected(data, &Method::ALL)
}
