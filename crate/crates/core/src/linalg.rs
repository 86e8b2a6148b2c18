//! Dense symmetric linear algebra shared by the estimators and the error
//! analysis: deterministic eigendecomposition, truncated pseudoinverse, and
//! a solver for symmetric pencils M x = λ N x with positive semi-definite M.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative eigenvalue cutoff below which a symmetric matrix is treated as
/// singular when solving pencils.
pub const KERNEL_REL_TOL: f64 = 1e-12;

/// Default relative truncation threshold for [`truncated_pinv`].
pub const DEFAULT_PINV_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted in
/// descending order and a deterministic sign convention per eigenvector
/// (largest-magnitude component positive).
pub struct SymmetricDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors, one per eigenvalue, in matching order.
    pub eigenvectors: Vec<DVector<f64>>,
}

impl SymmetricDecomposition {
    pub fn new(m: &DMatrix<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        let eig = m.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| {
            eig.eigenvalues[j]
                .partial_cmp(&eig.eigenvalues[i])
                .expect("eigenvalues are finite")
        });
        let mut eigenvalues = Vec::with_capacity(order.len());
        let mut eigenvectors = Vec::with_capacity(order.len());
        for &idx in &order {
            eigenvalues.push(eig.eigenvalues[idx]);
            let mut v = eig.eigenvectors.column(idx).into_owned();
            fix_vector_sign(&mut v);
            eigenvectors.push(v);
        }
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0f64, |acc, &x| acc.max(x.abs()))
    }

    /// Reassembles U diag(f(β)) Uᵀ for a spectral map `f`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.eigenvalues.len();
        let mut out = DMatrix::zeros(n, n);
        for (beta, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let w = f(*beta);
            if w != 0.0 {
                out += w * v * v.transpose();
            }
        }
        out
    }
}

/// Makes the component of largest magnitude positive; ties break on the
/// earliest such component. Keeps eigenvector output reproducible.
fn fix_vector_sign(v: &mut DVector<f64>) {
    let mut best = 0usize;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Truncated Moore–Penrose inverse of a symmetric matrix.
///
/// Eigenvalues with |β| ≤ `rel_tol`·max|β| are zeroed, the rest are
/// reciprocated. The relative form keeps the truncation invariant under a
/// joint rescaling of the data and f0.
pub fn truncated_pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let dec = SymmetricDecomposition::new(m);
    let cutoff = rel_tol * dec.max_abs_eigenvalue();
    dec.map_spectrum(|beta| if beta.abs() > cutoff { 1.0 / beta } else { 0.0 })
}

/// Inverse of a noisy estimate of a nearly singular symmetric matrix: when
/// the smallest eigenvalue falls under `rel_tol`·max|β| it is dropped —
/// D⁻ = Diag(1/β₁, …, 1/β_{d−1}, 0) — and otherwise the full inverse is
/// returned. Only the smallest eigenvalue is ever dropped: zeroing more of
/// the spectrum guts downstream corrections on badly conditioned scenes,
/// while reciprocating a near-kernel eigenvalue would inject an O(1/σ²)
/// spurious component.
pub fn near_kernel_pinv(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let dec = SymmetricDecomposition::new(m);
    let cutoff = rel_tol * dec.max_abs_eigenvalue();
    let smallest = dec
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let drop_smallest = smallest.abs() <= cutoff;
    let junk = KERNEL_REL_TOL * dec.max_abs_eigenvalue();
    dec.map_spectrum(|beta| {
        if beta.abs() <= junk || (drop_smallest && beta == smallest) {
            0.0
        } else {
            1.0 / beta
        }
    })
}

/// One generalized eigenpair of a pencil.
#[derive(Debug, Clone)]
pub struct PencilPair {
    pub eigenvalue: f64,
    pub eigenvector: DVector<f64>,
}

/// All finite real eigenpairs of M x = λ N x, sorted by eigenvalue.
#[derive(Debug, Clone)]
pub struct PencilSolution {
    pub pairs: Vec<PencilPair>,
}

impl PencilSolution {
    pub fn smallest_positive(&self, abs_floor: f64) -> Option<&PencilPair> {
        self.pairs.iter().find(|p| p.eigenvalue > abs_floor)
    }
}

/// Solves the symmetric pencil M x = λ N x for all finite real eigenpairs.
///
/// M must be symmetric positive semi-definite; N symmetric but otherwise
/// arbitrary (indefinite and singular N are fine). The pencil is reversed to
/// N x = η M x and whitened by M's positive eigenspace, so directions where
/// N acts trivially (η = 0, λ infinite) drop out, and kernel directions of M
/// are reported as λ = 0 pairs. Every returned pair is verified against the
/// residual ‖Mx − λNx‖ ≤ 1e−8·(‖M‖ + |λ|·‖N‖).
pub fn solve_symmetric_pencil(
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
) -> Result<PencilSolution, LinalgError> {
    if m.nrows() != n.nrows() || m.ncols() != n.ncols() || m.nrows() != m.ncols() {
        return Err(LinalgError::NumericalFailure(
            "pencil matrices must be square and of equal size".into(),
        ));
    }
    let dim = m.nrows();
    let m_dec = SymmetricDecomposition::new(m);
    let beta_max = m_dec.max_abs_eigenvalue();
    if beta_max <= 0.0 || beta_max.is_nan() {
        return Err(LinalgError::NumericalFailure(
            "left pencil matrix is zero".into(),
        ));
    }
    let kernel_cut = KERNEL_REL_TOL * beta_max;

    let mut pairs: Vec<PencilPair> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for (i, &beta) in m_dec.eigenvalues.iter().enumerate() {
        if beta > kernel_cut {
            kept.push(i);
        } else {
            // M-kernel direction: an exact λ = 0 eigenpair of the pencil.
            pairs.push(PencilPair {
                eigenvalue: 0.0,
                eigenvector: m_dec.eigenvectors[i].clone(),
            });
        }
    }

    if !kept.is_empty() {
        // Whitening basis W = U_+ diag(β^{-1/2}); C = Wᵀ N W is symmetric and
        // shares eigenvalues η with the reversed pencil N x = η M x.
        let mut w = DMatrix::zeros(dim, kept.len());
        for (col, &i) in kept.iter().enumerate() {
            let scale = 1.0 / m_dec.eigenvalues[i].sqrt();
            w.set_column(col, &(scale * &m_dec.eigenvectors[i]));
        }
        let c = w.transpose() * n * &w;
        let c = 0.5 * (&c + c.transpose());
        let c_dec = SymmetricDecomposition::new(&c);
        let eta_max = c_dec.max_abs_eigenvalue();
        let eta_cut = KERNEL_REL_TOL * eta_max.max(1e-300);
        for (eta, y) in c_dec.eigenvalues.iter().zip(&c_dec.eigenvectors) {
            if eta.abs() <= eta_cut {
                continue; // λ infinite
            }
            let mut x = &w * y;
            let norm = x.norm();
            if norm <= 0.0 || norm.is_nan() {
                continue;
            }
            x /= norm;
            fix_vector_sign(&mut x);
            pairs.push(PencilPair {
                eigenvalue: 1.0 / eta,
                eigenvector: x,
            });
        }
    }

    let m_norm = m.norm();
    let n_norm = n.norm();
    pairs.retain(|p| {
        let resid = (m * &p.eigenvector - p.eigenvalue * (n * &p.eigenvector)).norm();
        resid <= 1e-8 * (m_norm + p.eigenvalue.abs() * n_norm)
    });
    if pairs.is_empty() {
        return Err(LinalgError::NumericalFailure(
            "no finite real eigenpair found".into(),
        ));
    }
    pairs.sort_by(|a, b| {
        a.eigenvalue
            .partial_cmp(&b.eigenvalue)
            .expect("eigenvalues are finite")
    });
    Ok(PencilSolution { pairs })
}

/// Symmetrization (X + Xᵀ)/2.
pub fn symmetrize(x: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (x + x.transpose())
}
