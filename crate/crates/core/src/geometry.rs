//! Geometric and algebraic parameterizations of concentric ellipses.
//!
//! A single ellipse with center (x_c, y_c), semi-axes a ≥ b > 0 and tilt ψ
//! satisfies the implicit equation
//!
//! ```text
//!   A x² + 2B xy + C y² + 2D x + 2E y + F = 0,     AC − B² > 0.
//! ```
//!
//! K concentric ellipses share the center and the tilt, so they share
//! (A, B, C, D, E) up to scale and differ only in the constant term. The
//! whole scene is one unit vector θ = (A, B, C, D, E, F_1, …, F_K), stored
//! together with the coordinate scale f0 that keeps carrier entries of
//! comparable magnitude: the scaled equation reads
//!
//! ```text
//!   A x² + 2B xy + C y² + 2f0 D x + 2f0 E y + f0² F_i = 0.
//! ```
//!
//! Conversions in both directions live here, along with the algebraic
//! residual used everywhere else in the crate.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Relative tolerance for the common-ratio check on ring axes.
const PROPORTIONALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    /// The conic coefficients do not describe a real ellipse.
    #[error("conic is not a real ellipse")]
    NotAnEllipse,
    /// A ring of a fitted θ failed the ellipse test.
    #[error("ring {ring} does not describe a real ellipse")]
    NotConcentricEllipses { ring: usize },
    /// Ring axes violate the common-ratio assumption a_i/a_1 = b_i/b_1.
    #[error("ring {ring} axes are not proportional to ring 1")]
    NotProportional { ring: usize },
    /// A constructor argument violates a documented invariant.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// A 2-D observation in data units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Semi-axes of one ring, `a` major and `b` minor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub a: f64,
    pub b: f64,
}

impl Ring {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }
}

/// Center, rings ordered inner to outer, and the common tilt ψ ∈ [−π/2, π/2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    pub center: Point,
    pub rings: Vec<Ring>,
    pub psi: f64,
}

impl GeometricParams {
    /// Validating constructor for a scene: every ring needs a ≥ b > 0 and the
    /// rings must be strictly nested. ψ is normalized into [−π/2, π/2).
    pub fn new(center: Point, rings: Vec<Ring>, psi: f64) -> Result<Self, GeometryError> {
        if rings.is_empty() {
            return Err(GeometryError::InvalidParameters(
                "at least one ring is required".into(),
            ));
        }
        if !(center.x.is_finite() && center.y.is_finite() && psi.is_finite()) {
            return Err(GeometryError::InvalidParameters(
                "center and tilt must be finite".into(),
            ));
        }
        for (i, r) in rings.iter().enumerate() {
            if !(r.b > 0.0 && r.a >= r.b && r.a.is_finite()) {
                return Err(GeometryError::InvalidParameters(format!(
                    "ring {} needs finite a >= b > 0",
                    i + 1
                )));
            }
            if i > 0 && !(r.a > rings[i - 1].a && r.b > rings[i - 1].b) {
                return Err(GeometryError::InvalidParameters(format!(
                    "ring {} is not strictly outside ring {}",
                    i + 1,
                    i
                )));
            }
        }
        Ok(Self {
            center,
            rings,
            psi: normalize_psi(psi),
        })
    }

    pub fn ring_count(&self) -> usize {
        self.rings.len()
    }

    /// Point on ring `ring` at eccentric-anomaly parameter `t`.
    pub fn point_on_ring(&self, ring: usize, t: f64) -> Point {
        let Ring { a, b } = self.rings[ring];
        let (sin_p, cos_p) = self.psi.sin_cos();
        let (sin_t, cos_t) = t.sin_cos();
        Point {
            x: self.center.x + a * cos_t * cos_p - b * sin_t * sin_p,
            y: self.center.y + a * cos_t * sin_p + b * sin_t * cos_p,
        }
    }

    /// Assembles the shared algebraic vector for a scene whose rings are
    /// scaled copies of ring 1 (a_i/a_1 = b_i/b_1). The shared block comes
    /// from ring 1; ring i contributes its constant term only.
    pub fn to_theta(&self, f0: f64) -> Result<ConcentricTheta, GeometryError> {
        let base = single_conic(self.center, self.rings[0], self.psi);
        let ratio0 = |r: &Ring| r.a / self.rings[0].a;
        for (i, r) in self.rings.iter().enumerate() {
            let ra = r.a / self.rings[0].a;
            let rb = r.b / self.rings[0].b;
            if (ra - rb).abs() > PROPORTIONALITY_TOL * ra.abs().max(rb.abs()) {
                return Err(GeometryError::NotProportional { ring: i + 1 });
            }
        }
        // In ring-1's gauge the constant term of ring i is the quadratic form
        // at the center minus the squared scale ratio.
        let quad_at_center = base.a * self.center.x * self.center.x
            + 2.0 * base.b * self.center.x * self.center.y
            + base.c * self.center.y * self.center.y;
        let k = self.ring_count();
        let mut coeffs = DVector::zeros(5 + k);
        coeffs[0] = base.a;
        coeffs[1] = base.b;
        coeffs[2] = base.c;
        coeffs[3] = base.d / f0;
        coeffs[4] = base.e / f0;
        for (i, r) in self.rings.iter().enumerate() {
            let ratio = ratio0(r);
            coeffs[5 + i] = (quad_at_center - ratio * ratio) / (f0 * f0);
        }
        ConcentricTheta::new(coeffs, f0)
    }
}

/// Unscaled coefficients of A x² + 2B xy + C y² + 2D x + 2E y + F = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleConic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

/// Conic coefficients of the ellipse with the given center, axes and tilt,
/// normalized so the right-hand side of the centered form is 1.
pub fn single_conic(center: Point, ring: Ring, psi: f64) -> SingleConic {
    let (s, c) = psi.sin_cos();
    let a2 = ring.a * ring.a;
    let b2 = ring.b * ring.b;
    let ca = c * c / a2 + s * s / b2;
    let cb = c * s * (1.0 / a2 - 1.0 / b2);
    let cc = s * s / a2 + c * c / b2;
    let cd = -ca * center.x - cb * center.y;
    let ce = -cb * center.x - cc * center.y;
    let cf =
        ca * center.x * center.x + 2.0 * cb * center.x * center.y + cc * center.y * center.y - 1.0;
    SingleConic {
        a: ca,
        b: cb,
        c: cc,
        d: cd,
        e: ce,
        f: cf,
    }
}

/// Recovers center, semi-axes and tilt from conic coefficients.
///
/// Scale-equivalent inputs give the same result: the coefficients are first
/// normalized so that A + C > 0 (for an ellipse A and C share their sign),
/// then the center solves the gradient system, the axes come from the
/// eigenvalues of the quadratic part evaluated against the conic value at
/// the center, and ψ is the major-axis angle.
pub fn conic_to_geometry(conic: &SingleConic) -> Result<(Point, Ring, f64), GeometryError> {
    let SingleConic { a, b, c, d, e, f } = if conic.a + conic.c < 0.0 {
        SingleConic {
            a: -conic.a,
            b: -conic.b,
            c: -conic.c,
            d: -conic.d,
            e: -conic.e,
            f: -conic.f,
        }
    } else {
        *conic
    };
    let denom = b * b - a * c;
    if denom >= 0.0 || !denom.is_finite() {
        return Err(GeometryError::NotAnEllipse);
    }
    let xc = (c * d - b * e) / denom;
    let yc = (a * e - b * d) / denom;
    // Conic value at the center, multiplied by (B² − AC).
    let g = a * e * e + c * d * d - 2.0 * b * d * e + denom * f;
    let spread = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    let rad_major = 2.0 * g * (a + c + spread);
    let rad_minor = 2.0 * g * (a + c - spread);
    if rad_major <= 0.0 || rad_minor <= 0.0 {
        return Err(GeometryError::NotAnEllipse);
    }
    let semi_major = -rad_major.sqrt() / (2.0 * denom);
    let semi_minor = -rad_minor.sqrt() / (2.0 * denom);
    let psi = if b == 0.0 {
        if a <= c {
            0.0
        } else {
            FRAC_PI_2
        }
    } else {
        ((c - a - spread) / (2.0 * b)).atan()
    };
    Ok((
        Point::new(xc, yc),
        Ring::new(semi_major, semi_minor),
        normalize_psi(psi),
    ))
}

/// Maps an angle to the canonical tilt range [−π/2, π/2).
pub fn normalize_psi(psi: f64) -> f64 {
    let mut p = psi.rem_euclid(PI);
    if p >= FRAC_PI_2 {
        p -= PI;
    }
    p
}

/// Unit-norm, sign-canonical algebraic parameters (A, B, C, D, E, F_1…F_K)
/// of K concentric ellipses, together with the coordinate scale f0.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentricTheta {
    coeffs: DVector<f64>,
    f0: f64,
}

impl ConcentricTheta {
    /// Normalizes to unit Euclidean norm and canonical sign (A > 0, or the
    /// first nonzero entry positive when A = 0).
    pub fn new(coeffs: DVector<f64>, f0: f64) -> Result<Self, GeometryError> {
        if coeffs.len() < 6 {
            return Err(GeometryError::InvalidParameters(
                "theta needs at least 6 entries (K >= 1)".into(),
            ));
        }
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(GeometryError::InvalidParameters(
                "scale f0 must be positive and finite".into(),
            ));
        }
        let norm = coeffs.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(GeometryError::InvalidParameters(
                "theta must be a nonzero finite vector".into(),
            ));
        }
        let mut coeffs = coeffs / norm;
        canonicalize_sign(&mut coeffs);
        Ok(Self { coeffs, f0 })
    }

    pub fn ring_count(&self) -> usize {
        self.coeffs.len() - 5
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.coeffs
    }

    /// Algebraic residual of a point against ring `ring` (0-based):
    /// A x² + 2B xy + C y² + 2f0 D x + 2f0 E y + f0² F_ring. Zero exactly on
    /// the ring's ellipse.
    pub fn residual(&self, p: Point, ring: usize) -> f64 {
        let t = &self.coeffs;
        let f0 = self.f0;
        t[0] * p.x * p.x
            + 2.0 * t[1] * p.x * p.y
            + t[2] * p.y * p.y
            + 2.0 * f0 * t[3] * p.x
            + 2.0 * f0 * t[4] * p.y
            + f0 * f0 * t[5 + ring]
    }

    /// Unscaled conic coefficients of one ring.
    pub fn ring_conic(&self, ring: usize) -> SingleConic {
        let t = &self.coeffs;
        SingleConic {
            a: t[0],
            b: t[1],
            c: t[2],
            d: self.f0 * t[3],
            e: self.f0 * t[4],
            f: self.f0 * self.f0 * t[5 + ring],
        }
    }

    /// Recovers the geometric parameters ring by ring.
    ///
    /// This is also the validity predicate for fitted vectors: it fails with
    /// [`GeometryError::NotConcentricEllipses`] as soon as one ring is not a
    /// real ellipse. Fitted rings are returned in the order of the F-block
    /// without requiring nesting (a noisy fit owns no such guarantee).
    pub fn to_geometry(&self) -> Result<GeometricParams, GeometryError> {
        let mut rings = Vec::with_capacity(self.ring_count());
        let mut center = Point::new(0.0, 0.0);
        let mut psi = 0.0;
        for ring in 0..self.ring_count() {
            let (c, r, p) = conic_to_geometry(&self.ring_conic(ring))
                .map_err(|_| GeometryError::NotConcentricEllipses { ring: ring + 1 })?;
            if ring == 0 {
                center = c;
                psi = p;
            }
            rings.push(r);
        }
        Ok(GeometricParams { center, rings, psi })
    }
}

/// Flips the vector in place so the leading coefficient convention holds.
pub fn canonicalize_sign(v: &mut DVector<f64>) {
    let lead = v.iter().copied().find(|x| *x != 0.0).unwrap_or(0.0);
    if lead < 0.0 {
        v.neg_mut();
    }
}
