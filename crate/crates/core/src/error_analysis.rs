//! Leading-order variance and per-method second-order biases evaluated at a
//! known true scene.
//!
//! Writing θ̂ = θ̃ + Δ₁θ̂ + Δ₂θ̂ + O(σ³) for any estimator solving
//! M θ = λ N θ, the first-order term has zero mean and covariance
//! σ²·M̃⁻ M̃′ M̃⁻ independently of the constraint N, where
//! M̃′ = Σ (θ̃ᵀV₀θ̃)·ξ̃ξ̃ᵀ weighs each carrier by its noise response. The
//! mean of the second-order term does depend on N:
//!
//! ```text
//!   E[Δ₂θ̂] = M̃⁻ ( (θ̃ᵀE[T]θ̃)/(θ̃ᵀÑθ̃) · Ñθ̃ − E[T]θ̃ ),
//!   T = Δ₂M − Δ₁M M̃⁻ Δ₁M,
//! ```
//!
//! and the expected value of T evaluates in closed form from the carriers, their normalized
//! covariances and M̃⁻. The per-method biases split into a part shared by
//! all methods (an essential O(σ²) term plus a nonessential O(σ²/n) term)
//! and a method-specific essential term; the hyper constraint is built to
//! cancel everything.
//!
//! All quantities here are σ²-free factors: multiply by σ² to obtain the
//! dimensional covariance or bias. The gauge is fixed by unit-norm,
//! sign-canonical θ̃.

use crate::estimators::Method;
use crate::geometry::{ConcentricTheta, GeometryError};
use crate::linalg::{symmetrize, truncated_pinv};
use crate::matrices::{
    assemble_scatter, carrier_covariance, carrier_noise_mean, carrier_sum, hyper_constraint,
    oleary_constraint, parameter_dim, pointwise_correction, semi_hyper_constraint,
    taubin_constraint, DataSet,
};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Relative truncation used for the deflated pseudoinverse of the exact
/// scatter matrix. Only numerical junk sits below this once the known kernel
/// direction has been projected out.
const TRUE_SCENE_PINV_REL_TOL: f64 = 1e-12;

/// Relative residual allowed for a point to count as exactly on its ring.
const TRUE_POINT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    /// θ̃ᵀNθ̃ vanished for the requested constraint.
    #[error("degenerate constraint: quadratic form vanishes at the true parameters")]
    DegenerateConstraint,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

impl From<GeometryError> for AnalysisError {
    fn from(e: GeometryError) -> Self {
        AnalysisError::InvalidScene(e.to_string())
    }
}

/// A noiseless scene: the true parameter vector, exact points, and the
/// matrices derived from them that every analysis quantity reuses.
#[derive(Debug, Clone)]
pub struct TrueScene {
    theta: ConcentricTheta,
    data: DataSet,
    carriers: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    scatter: DMatrix<f64>,
    scatter_pinv: DMatrix<f64>,
}

impl TrueScene {
    /// Validates that every point lies on its ring (relative residual below
    /// 1e−12) and precomputes the carrier set and the deflated pseudoinverse
    /// M̃⁻. The kernel of the exact scatter matrix is span(θ̃), so the θ̃
    /// direction is projected out explicitly before truncating.
    pub fn new(theta: ConcentricTheta, data: DataSet) -> Result<Self, AnalysisError> {
        if theta.ring_count() != data.ring_count() {
            return Err(AnalysisError::InvalidScene(
                "ring count mismatch between theta and data".into(),
            ));
        }
        if (theta.f0() - data.f0).abs() > 0.0 {
            return Err(AnalysisError::InvalidScene(
                "theta and data must share the same f0".into(),
            ));
        }
        let k = data.ring_count();
        let dim = parameter_dim(k);
        let total = data.total_points();
        if total < dim + 1 {
            return Err(AnalysisError::InvalidScene(format!(
                "need at least {} true points, got {}",
                dim + 1,
                total
            )));
        }
        let mut carriers = Vec::with_capacity(total);
        let mut covariances = Vec::with_capacity(total);
        for (ring, p) in data.points() {
            let xi = data.carrier_of(ring, p);
            let resid = xi.dot(theta.as_vector());
            if resid.abs() > TRUE_POINT_REL_TOL * xi.norm().max(1.0) {
                return Err(AnalysisError::InvalidScene(format!(
                    "point ({}, {}) is not on ring {} (residual {resid:.3e})",
                    p.x,
                    p.y,
                    ring + 1
                )));
            }
            covariances.push(carrier_covariance(p, k, data.f0));
            carriers.push(xi);
        }
        let scatter = assemble_scatter(&data).matrix;
        let t = theta.as_vector();
        let projector = DMatrix::identity(dim, dim) - t * t.transpose();
        let deflated = symmetrize(&(&projector * &scatter * &projector));
        let scatter_pinv = truncated_pinv(&deflated, TRUE_SCENE_PINV_REL_TOL);
        Ok(Self {
            theta,
            data,
            carriers,
            covariances,
            scatter,
            scatter_pinv,
        })
    }

    pub fn theta(&self) -> &ConcentricTheta {
        &self.theta
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    pub fn scatter(&self) -> &DMatrix<f64> {
        &self.scatter
    }

    /// Deflated Moore–Penrose inverse M̃⁻ of the exact scatter matrix.
    pub fn scatter_pinv(&self) -> &DMatrix<f64> {
        &self.scatter_pinv
    }

    /// M̃′ = Σ (θ̃ᵀV₀θ̃)·ξ̃ξ̃ᵀ, the noise-weighted scatter matrix.
    pub fn noise_weighted_scatter(&self) -> DMatrix<f64> {
        let t = self.theta.as_vector();
        let dim = t.len();
        let mut out = DMatrix::zeros(dim, dim);
        for (xi, v0) in self.carriers.iter().zip(&self.covariances) {
            let weight = t.dot(&(v0 * t));
            out += weight * (xi * xi.transpose());
        }
        out
    }

    /// σ²-free leading covariance M̃⁻ M̃′ M̃⁻, identical for all methods.
    pub fn leading_covariance(&self) -> DMatrix<f64> {
        let mp = &self.scatter_pinv;
        mp * self.noise_weighted_scatter() * mp
    }

    /// tr[M̃⁻M̃′], the scalar entering both p and q.
    pub fn weighted_trace(&self) -> f64 {
        (self.scatter_pinv() * self.noise_weighted_scatter()).trace()
    }

    /// σ²-free radial term of the mean error in the unit-norm gauge.
    ///
    /// ‖θ̂‖ = 1 forces θ̃ᵀΔ₂θ̂ = −‖Δ₁θ̂‖²/2, so the mean of θ̂ − θ̃ carries
    /// −σ²·(tr[M̃⁻M̃′M̃⁻]/2)·θ̃ on top of the method-dependent bias, which is
    /// orthogonal to θ̃. The term is method-independent pure gauge; it must
    /// be added when comparing mean errors against [`second_order_bias`].
    pub fn radial_gauge_bias(&self) -> DVector<f64> {
        -(self.leading_covariance().trace() / 2.0) * self.theta.as_vector()
    }

    /// Π̃ = Σ Π̃_ij, the summed per-point second-order correction.
    pub fn correction_matrix(&self) -> DMatrix<f64> {
        let dim = self.theta.as_vector().len();
        let mut out = DMatrix::zeros(dim, dim);
        for (xi, v0) in self.carriers.iter().zip(&self.covariances) {
            out += pointwise_correction(xi, v0, &self.scatter_pinv);
        }
        out
    }

    /// π̃ = Π̃θ̃ evaluated termwise:
    /// Σ ( (ξ̃ᵀM̃⁻ξ̃)·V₀θ̃ + (θ̃ᵀV₀M̃⁻ξ̃)·ξ̃ ).
    pub fn correction_vector(&self) -> DVector<f64> {
        let t = self.theta.as_vector();
        let mp = &self.scatter_pinv;
        let mut out = DVector::zeros(t.len());
        for (xi, v0) in self.carriers.iter().zip(&self.covariances) {
            let mp_xi = mp * xi;
            out += xi.dot(&mp_xi) * (v0 * t);
            out += t.dot(&(v0 * &mp_xi)) * xi;
        }
        out
    }

    /// True Taubin constraint Ñ_T.
    pub fn taubin(&self) -> DMatrix<f64> {
        taubin_constraint(&self.data)
    }

    /// True semi-hyper constraint Ñ_S = Ñ_T + 2S[ξ̃_c eᵀ].
    pub fn semi_hyper(&self) -> DMatrix<f64> {
        semi_hyper_constraint(&self.data)
    }

    /// True hyper constraint Ñ_H, built with the deflated M̃⁻.
    pub fn hyper(&self) -> DMatrix<f64> {
        hyper_constraint(&self.data, &self.scatter_pinv)
    }

    /// The method's true constraint matrix.
    pub fn constraint_matrix(&self, method: Method) -> DMatrix<f64> {
        let dim = self.theta.as_vector().len();
        match method {
            Method::Ls => DMatrix::identity(dim, dim),
            Method::OLeary => oleary_constraint(self.data.ring_count()),
            Method::Taubin => self.taubin(),
            Method::SemiHyper => self.semi_hyper(),
            Method::Hyper => self.hyper(),
        }
    }

    /// σ²-free expectation of T as a full matrix:
    /// Ñ_S − Π̃ − Σ tr[M̃⁻V₀]·ξ̃ξ̃ᵀ.
    pub fn expected_perturbation_matrix(&self) -> DMatrix<f64> {
        let mut out = self.semi_hyper() - self.correction_matrix();
        for (xi, v0) in self.carriers.iter().zip(&self.covariances) {
            let trace = (&self.scatter_pinv * v0).trace();
            out -= trace * (xi * xi.transpose());
        }
        out
    }

    /// σ²-free product of the expected T with θ̃: Ñ_Sθ̃ − π̃; the trace
    /// term drops since ξ̃ᵀθ̃ = 0.
    pub fn expected_perturbation_theta(&self) -> DVector<f64> {
        self.semi_hyper() * self.theta.as_vector() - self.correction_vector()
    }

    /// σ²-free second-order bias for an arbitrary constraint matrix,
    /// straight from the general expansion and the full expected-T matrix.
    pub fn second_order_bias_for_constraint(
        &self,
        n: &DMatrix<f64>,
    ) -> Result<DVector<f64>, AnalysisError> {
        let t = self.theta.as_vector();
        let n_theta = n * t;
        let gauge = t.dot(&n_theta);
        if gauge.abs() <= 1e-12 * n.norm().max(1e-300) {
            return Err(AnalysisError::DegenerateConstraint);
        }
        let et = self.expected_perturbation_matrix();
        let et_theta = &et * t;
        let ratio = t.dot(&et_theta) / gauge;
        Ok(&self.scatter_pinv * (ratio * n_theta - et_theta))
    }
}

/// σ²-free second-order bias of a method with its anatomy: the essential
/// and nonessential parts shared by all methods plus the method-specific
/// essential remainder. `bias` always equals the sum of the three parts.
#[derive(Debug, Clone)]
pub struct BiasReport {
    pub method: Method,
    pub bias: DVector<f64>,
    pub essential_common: DVector<f64>,
    pub nonessential: DVector<f64>,
    pub essential_diff: DVector<f64>,
}

impl BiasReport {
    pub fn norm(&self) -> f64 {
        self.bias.norm()
    }
}

/// Closed-form σ²-free second-order bias of one method at a true scene.
///
/// With p = tr[M̃⁻M̃′]/(θ̃ᵀN_OLθ̃) and q = tr[M̃⁻M̃′]/(θ̃ᵀÑ_Tθ̃):
///
/// * LS:    −M̃⁻(Ñ_Tθ̃ + (eᵀθ̃)ξ̃_c − π̃)
/// * O'Leary: M̃⁻((r − p)·N_OLθ̃ − Ñ_Tθ̃ − (eᵀθ̃)ξ̃_c + π̃),
///   r = (θ̃ᵀÑ_Tθ̃)/(θ̃ᵀN_OLθ̃). The r-term carries the gauge projection of
///   the general expansion onto the O'Leary constraint; dropping it is only
///   exact when N_OLθ̃ and Ñ_Tθ̃ are parallel.
/// * Taubin: −M̃⁻(q·Ñ_Tθ̃ + (eᵀθ̃)ξ̃_c − π̃)
/// * SemiHyper: −M̃⁻(q·(Ñ_Tθ̃ + (eᵀθ̃)ξ̃_c) − π̃)
/// * Hyper: 0 by construction.
pub fn second_order_bias(scene: &TrueScene, method: Method) -> Result<BiasReport, AnalysisError> {
    let t = scene.theta().as_vector();
    let dim = t.len();
    let mp = scene.scatter_pinv();
    let zero = DVector::zeros(dim);
    if method == Method::Hyper {
        // Exact cancellation; verified separately against the general
        // expansion applied to Ñ_H.
        let gauge = t.dot(&(scene.hyper() * t));
        if gauge.abs() <= 1e-12 * scene.hyper().norm().max(1e-300) {
            return Err(AnalysisError::DegenerateConstraint);
        }
        return Ok(BiasReport {
            method,
            bias: zero.clone(),
            essential_common: zero.clone(),
            nonessential: zero.clone(),
            essential_diff: zero,
        });
    }

    let nt_theta = scene.taubin() * t;
    let gauge_t = t.dot(&nt_theta);
    if gauge_t.abs() <= 1e-12 * scene.taubin().norm().max(1e-300) {
        return Err(AnalysisError::DegenerateConstraint);
    }
    let trace = scene.weighted_trace();
    let q = trace / gauge_t;
    let e_dot = carrier_noise_mean(scene.data().ring_count()).dot(t);
    let centroid = mp * carrier_sum(scene.data());
    let nonessential = mp * scene.correction_vector();

    let (essential_common, essential_diff) = match method {
        Method::Ls => (-e_dot * &centroid, -(mp * &nt_theta)),
        Method::Taubin => (-e_dot * &centroid, -q * (mp * &nt_theta)),
        Method::SemiHyper => (-q * e_dot * &centroid, -q * (mp * &nt_theta)),
        Method::OLeary => {
            let nol = oleary_constraint(scene.data().ring_count());
            let nol_theta = &nol * t;
            let gauge_ol = t.dot(&nol_theta);
            if gauge_ol.abs() <= 1e-12 * nol.norm() {
                return Err(AnalysisError::DegenerateConstraint);
            }
            let p = trace / gauge_ol;
            let r = gauge_t / gauge_ol;
            let diff = (r - p) * (mp * &nol_theta) - mp * &nt_theta;
            (-e_dot * &centroid, diff)
        }
        Method::Hyper => unreachable!(),
    };
    let bias = &essential_common + &nonessential + &essential_diff;
    Ok(BiasReport {
        method,
        bias,
        essential_common,
        nonessential,
        essential_diff,
    })
}

/// One row of a theoretical bias sweep: the sweep value and ‖bias‖/σ² per
/// method (`None` where the constraint degenerated).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub norms: BTreeMap<Method, Option<f64>>,
}

/// Evaluates ‖second-order bias‖ per method across prepared scenes.
pub fn bias_scan(points: &[(f64, TrueScene)], methods: &[Method]) -> Vec<SweepRow> {
    points
        .iter()
        .map(|(value, scene)| {
            let norms = methods
                .iter()
                .map(|&m| (m, second_order_bias(scene, m).ok().map(|r| r.norm())))
                .collect();
            SweepRow {
                value: *value,
                norms,
            }
        })
        .collect()
}
