//! Rotation group primitives.
//!
//! Rotations are stored as dense 3×3 matrices. Tangent vectors live in ℝ³ and
//! map to skew-symmetric matrices through [`wedge`] / [`vee`].
//!
//! The Jacobian `J_u` used throughout the crate is the left-trivialised
//! derivative of the exponential,
//!
//! ```text
//! exp(-u∧) · d/dt exp((u + t w)∧) |₀ = (J_u w)∧
//! ```
//!
//! so that `exp((u + δ)∧) ≈ exp(u∧) · exp((J_u δ)∧)` to first order. In the
//! robotics literature this is often called the *right* Jacobian.
//!
//! Closed forms are 0/0 at the origin; each map switches to a truncated
//! Taylor series below a small-angle threshold.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::SVD;

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;

/// Below this angle `exp_so3` uses its second-order series.
pub const EXP_SMALL_ANGLE: f64 = 1e-6;
/// Below this angle the Jacobians use their second-order series.
pub const JACOBIAN_SMALL_ANGLE: f64 = 1e-4;
/// Margin from π at which the logarithm refuses to pick a branch.
pub const LOG_PI_MARGIN: f64 = 1e-6;

const SKEW_TOL: f64 = 1e-9;
const ROTATION_TOL: f64 = 1e-9;
const REORTHO_TRIGGER: f64 = 1e-12;

/// Maps `v` to the skew-symmetric matrix `v∧` with `v∧ w = v × w`.
#[inline]
pub fn wedge(v: &Vec3) -> Matrix3 {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`wedge`]. Rejects matrices that are not skew-symmetric to 1e-9.
pub fn vee(m: &Matrix3) -> Result<Vec3> {
    let asym = (m + m.transpose()).abs().max();
    if asym > SKEW_TOL {
        return Err(Error::NotSkew(asym));
    }
    Ok(vee_unchecked(m))
}

#[inline]
pub(crate) fn vee_unchecked(m: &Matrix3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// A 3×3 special orthogonal matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps `m` after checking `mᵀm = I` and `det m = 1` to 1e-9.
    pub fn from_matrix(m: Matrix3) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::NotRotation("non-finite entry".into()));
        }
        let ortho = (m.transpose() * m - Matrix3::identity()).norm();
        if ortho > ROTATION_TOL {
            return Err(Error::NotRotation(format!("‖RᵀR − I‖ = {ortho:e}")));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotRotation(format!("det = {det}")));
        }
        Ok(Rotation(m))
    }

    /// Wraps `m` without any check. The caller guarantees `m ∈ SO(3)`.
    #[inline]
    pub fn from_matrix_unchecked(m: Matrix3) -> Self {
        Rotation(m)
    }

    /// Nearest rotation in Frobenius norm (polar factor of the SVD).
    pub fn project(m: &Matrix3) -> Self {
        let svd = SVD::new(*m, true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            // singular values are sorted descending; flip the weakest axis
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Rotation(r)
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3 {
        &self.0
    }

    #[inline]
    pub fn into_inner(self) -> Matrix3 {
        self.0
    }

    #[inline]
    pub fn inverse(&self) -> Self {
        Rotation(self.0.transpose())
    }

    /// Rotation angle in [0, π], i.e. `arccos((tr R − 1)/2)`.
    ///
    /// Evaluated as `atan2(sin θ, cos θ)` so that angles near zero keep full
    /// precision instead of the ~1e-8 floor of a bare arccos.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let c = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        let s = vee_unchecked(&((m - m.transpose()) * 0.5)).norm();
        s.atan2(c)
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    fn renormalized(self) -> Self {
        if self.orthogonality_error() > REORTHO_TRIGGER {
            Rotation::project(&self.0)
        } else {
            self
        }
    }
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(
            f,
            "Rotation[[{:.6}, {:.6}, {:.6}], [{:.6}, {:.6}, {:.6}], [{:.6}, {:.6}, {:.6}]]",
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)]
        )
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Rotation::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    #[inline]
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    #[inline]
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// `1 − cos θ` without cancellation for small θ.
#[inline]
fn one_minus_cos(theta: f64) -> f64 {
    let s = (0.5 * theta).sin();
    2.0 * s * s
}

/// `exp(v∧)` by the Rodrigues formula.
pub fn exp_so3(v: &Vec3) -> Rotation {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let k = wedge(v);
    let k2 = k * k;
    let (a, b) = if theta < EXP_SMALL_ANGLE {
        (1.0, 0.5)
    } else {
        (theta.sin() / theta, one_minus_cos(theta) / theta2)
    };
    Rotation(Matrix3::identity() + k * a + k2 * b)
}

/// `log∨(R)`, defined for rotation angles strictly below `π − 1e-6`.
pub fn log_so3(r: &Rotation) -> Result<Vec3> {
    let m = r.matrix();
    let cos_theta = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    // w = sin θ · axis
    let w = vee_unchecked(&((m - m.transpose()) * 0.5));
    let sin_theta = w.norm();
    let theta = sin_theta.atan2(cos_theta);
    if theta >= PI - LOG_PI_MARGIN {
        return Err(Error::Domain {
            op: "log_so3",
            angle: theta,
        });
    }
    if theta < 1e-4 {
        // θ / sin θ = 1 + θ²/6 + O(θ⁴)
        return Ok(w * (1.0 + theta * theta / 6.0));
    }
    if cos_theta > -0.9 {
        return Ok(w * (theta / sin_theta));
    }
    // Near π the antisymmetric part is small; recover the axis from the
    // symmetric part (R + Rᵀ)/2 − cos θ I = (1 − cos θ) a aᵀ.
    let s = (m + m.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
    let diag = s.diagonal();
    let i = diag.imax();
    let mut axis: Vec3 = s.column(i).into_owned() / diag[i].max(f64::MIN_POSITIVE).sqrt();
    axis /= axis.norm();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// `R · exp(u∧)`, re-projected onto SO(3) when drift exceeds 1e-12.
#[inline]
pub fn boxplus(r: &Rotation, u: &Vec3) -> Rotation {
    (*r * exp_so3(u)).renormalized()
}

/// The left-trivialised Jacobian of the exponential,
/// `J_u = I − (1 − cos θ)/θ² u∧ + (θ − sin θ)/θ³ u∧²`.
pub fn left_jacobian(u: &Vec3) -> Matrix3 {
    let theta = u.norm();
    let (a, b) = if theta < JACOBIAN_SMALL_ANGLE {
        jacobian_coeffs_series(theta)
    } else {
        jacobian_coeffs_closed(theta)
    };
    let k = wedge(u);
    Matrix3::identity() - k * a + k * k * b
}

/// Coefficients of `u∧` (negated) and `u∧²` in `J_u`.
pub(crate) fn jacobian_coeffs_closed(theta: f64) -> (f64, f64) {
    let theta2 = theta * theta;
    (
        one_minus_cos(theta) / theta2,
        (theta - theta.sin()) / (theta2 * theta),
    )
}

pub(crate) fn jacobian_coeffs_series(_theta: f64) -> (f64, f64) {
    (0.5, 1.0 / 6.0)
}

/// `J_u⁻¹ = I + ½u∧ + (1/θ² − (1 + cos θ)/(2θ sin θ)) u∧²`.
///
/// The ratio `(1 + cos θ)/sin θ` is evaluated as `cot(θ/2)`, which is regular
/// at θ = π. The only singularity left is θ = 2π.
pub fn left_jacobian_inv(u: &Vec3) -> Result<Matrix3> {
    let theta = u.norm();
    if theta >= 2.0 * PI - 1e-6 {
        return Err(Error::Domain {
            op: "left_jacobian_inv",
            angle: theta,
        });
    }
    let c = if theta < JACOBIAN_SMALL_ANGLE {
        inv_jacobian_coeff_series(theta)
    } else {
        inv_jacobian_coeff_closed(theta)
    };
    let k = wedge(u);
    Ok(Matrix3::identity() + k * 0.5 + k * k * c)
}

/// Coefficient of `u∧²` in `J_u⁻¹`.
pub(crate) fn inv_jacobian_coeff_closed(theta: f64) -> f64 {
    let half = 0.5 * theta;
    1.0 / (theta * theta) - half.cos() / (half.sin() * 2.0 * theta)
}

pub(crate) fn inv_jacobian_coeff_series(_theta: f64) -> f64 {
    1.0 / 12.0
}

/// `Ad∨_R`, the matrix of `u ↦ (R u∧ Rᵀ)∨`. On SO(3) this is `R` itself.
#[inline]
pub fn adjoint_matrix(r: &Rotation) -> Matrix3 {
    *r.matrix()
}

/// `ad∨_u`, the matrix of `v ↦ [u∧, v∧]∨`. Equals `u∧`.
#[inline]
pub fn ad_matrix(u: &Vec3) -> Matrix3 {
    wedge(u)
}

/// Geodesic distance `arccos((tr(R₁ᵀR₂) − 1)/2)` in [0, π].
pub fn rotation_error(truth: &Rotation, estimate: &Rotation) -> f64 {
    (truth.inverse() * *estimate).angle()
}
