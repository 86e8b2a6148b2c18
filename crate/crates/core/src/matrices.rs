//! Carrier vectors, the scatter matrix M, normalized carrier covariances,
//! and the constraint matrices that distinguish the fitting methods.
//!
//! A point (x, y) on ring i of K lifts to the carrier
//!
//! ```text
//!   ξ = (x², 2xy, y², 2f0 x, 2f0 y, f0² δ_{i1}, …, f0² δ_{iK})
//! ```
//!
//! so the ring equation becomes the linear relation ξᵀθ = 0 and the summed
//! squared algebraic distance is θᵀMθ with M = Σ ξξᵀ. Under isotropic
//! coordinate noise of variance σ², the leading covariance of ξ is σ² times
//! the matrix returned by [`carrier_covariance`]; its F-block rows and
//! columns vanish because the indicator entries carry no noise.

use crate::geometry::Point;
use crate::linalg::symmetrize;
use nalgebra::{DMatrix, DVector};

/// Length of θ and of the carriers for a K-ring scene.
pub fn parameter_dim(ring_count: usize) -> usize {
    5 + ring_count
}

/// Points grouped by ring (inner to outer) plus the coordinate scale f0.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub rings: Vec<Vec<Point>>,
    pub f0: f64,
}

impl DataSet {
    pub fn new(rings: Vec<Vec<Point>>, f0: f64) -> Self {
        Self { rings, f0 }
    }

    pub fn ring_count(&self) -> usize {
        self.rings.len()
    }

    pub fn total_points(&self) -> usize {
        self.rings.iter().map(Vec::len).sum()
    }

    /// Iterates (ring index, point) over all points in ring order.
    pub fn points(&self) -> impl Iterator<Item = (usize, Point)> + '_ {
        self.rings
            .iter()
            .enumerate()
            .flat_map(|(i, ring)| ring.iter().map(move |&p| (i, p)))
    }

    /// Carrier of one point of this set.
    pub fn carrier_of(&self, ring: usize, p: Point) -> DVector<f64> {
        carrier(p, ring, self.ring_count(), self.f0)
    }
}

/// Carrier vector of a point on ring `ring` (0-based) of `ring_count` rings.
pub fn carrier(p: Point, ring: usize, ring_count: usize, f0: f64) -> DVector<f64> {
    assert!(ring < ring_count, "ring index out of range");
    let mut xi = DVector::zeros(parameter_dim(ring_count));
    xi[0] = p.x * p.x;
    xi[1] = 2.0 * p.x * p.y;
    xi[2] = p.y * p.y;
    xi[3] = 2.0 * f0 * p.x;
    xi[4] = 2.0 * f0 * p.y;
    xi[5 + ring] = f0 * f0;
    xi
}

/// Normalized covariance of a carrier: the Jacobian product J Jᵀ of the
/// carrier with respect to (x, y). Identical for every ring since only the
/// coordinate entries respond to noise.
pub fn carrier_covariance(p: Point, ring_count: usize, f0: f64) -> DMatrix<f64> {
    let dim = parameter_dim(ring_count);
    let (x, y) = (p.x, p.y);
    let mut v = DMatrix::zeros(dim, dim);
    v[(0, 0)] = x * x;
    v[(0, 1)] = x * y;
    v[(0, 3)] = f0 * x;
    v[(1, 0)] = x * y;
    v[(1, 1)] = x * x + y * y;
    v[(1, 2)] = x * y;
    v[(1, 3)] = f0 * y;
    v[(1, 4)] = f0 * x;
    v[(2, 1)] = x * y;
    v[(2, 2)] = y * y;
    v[(2, 4)] = f0 * y;
    v[(3, 0)] = f0 * x;
    v[(3, 1)] = f0 * y;
    v[(3, 3)] = f0 * f0;
    v[(4, 1)] = f0 * x;
    v[(4, 2)] = f0 * y;
    v[(4, 4)] = f0 * f0;
    4.0 * v
}

/// Scatter matrix M = Σ ξξᵀ with its point count.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrix {
    pub matrix: DMatrix<f64>,
    pub point_count: usize,
}

/// Sums the carrier outer products over every point, in ring order.
pub fn assemble_scatter(data: &DataSet) -> ScatterMatrix {
    let dim = parameter_dim(data.ring_count());
    let mut m = DMatrix::zeros(dim, dim);
    let mut count = 0usize;
    for (ring, p) in data.points() {
        let xi = data.carrier_of(ring, p);
        m += &xi * xi.transpose();
        count += 1;
    }
    ScatterMatrix {
        matrix: m,
        point_count: count,
    }
}

/// Taubin constraint: the summed normalized carrier covariance. Positive
/// semi-definite with an identically zero F-block.
pub fn taubin_constraint(data: &DataSet) -> DMatrix<f64> {
    let dim = parameter_dim(data.ring_count());
    let mut n = DMatrix::zeros(dim, dim);
    for (_, p) in data.points() {
        n += carrier_covariance(p, data.ring_count(), data.f0);
    }
    n
}

/// Ellipticity constraint: θᵀNθ = AC − B², nonzero only on the quadratic
/// block. Its nonzero eigenvalues are {1/2, −1/2, −1}.
pub fn oleary_constraint(ring_count: usize) -> DMatrix<f64> {
    let dim = parameter_dim(ring_count);
    let mut n = DMatrix::zeros(dim, dim);
    n[(0, 2)] = 0.5;
    n[(2, 0)] = 0.5;
    n[(1, 1)] = -1.0;
    n
}

/// Sum of all carriers.
pub fn carrier_sum(data: &DataSet) -> DVector<f64> {
    let dim = parameter_dim(data.ring_count());
    let mut xi_c = DVector::zeros(dim);
    for (ring, p) in data.points() {
        xi_c += data.carrier_of(ring, p);
    }
    xi_c
}

/// σ²-free mean of the second-order carrier perturbation: noise shifts the
/// x² and y² entries by σ² on average and nothing else.
pub fn carrier_noise_mean(ring_count: usize) -> DVector<f64> {
    let mut e = DVector::zeros(parameter_dim(ring_count));
    e[0] = 1.0;
    e[2] = 1.0;
    e
}

/// Semi-hyper constraint: the Taubin constraint plus the symmetrized
/// centroid correction 2S[ξ_c eᵀ]. Indefinite in general.
pub fn semi_hyper_constraint(data: &DataSet) -> DMatrix<f64> {
    let xi_c = carrier_sum(data);
    let e = carrier_noise_mean(data.ring_count());
    taubin_constraint(data) + 2.0 * symmetrize(&(&xi_c * e.transpose()))
}

/// Per-point second-order correction Π = (ξᵀM⁻ξ)·V0 + 2S[V0 M⁻ ξ ξᵀ].
pub fn pointwise_correction(
    xi: &DVector<f64>,
    v0: &DMatrix<f64>,
    m_pinv: &DMatrix<f64>,
) -> DMatrix<f64> {
    let m_pinv_xi = m_pinv * xi;
    let quad = xi.dot(&m_pinv_xi);
    quad * v0 + 2.0 * symmetrize(&(v0 * &m_pinv_xi * xi.transpose()))
}

/// Bias-cancelling constraint built from the data and a (truncated)
/// pseudoinverse of its scatter matrix:
///
/// ```text
///   N_H = N_T + 2S[ξ_c eᵀ] − Σ ( tr[M⁻ V0]·ξξᵀ + Π )
/// ```
///
/// Every ingredient is a normalized covariance, so N_H is σ-free.
pub fn hyper_constraint(data: &DataSet, m_pinv: &DMatrix<f64>) -> DMatrix<f64> {
    let mut n = semi_hyper_constraint(data);
    for (ring, p) in data.points() {
        let xi = data.carrier_of(ring, p);
        let v0 = carrier_covariance(p, data.ring_count(), data.f0);
        let trace = (m_pinv * &v0).trace();
        n -= trace * (&xi * xi.transpose());
        n -= pointwise_correction(&xi, &v0, m_pinv);
    }
    n
}
