//! Concentrated Gaussian distributions on SO(3).
//!
//! A concentrated Gaussian `G_X̂(μ, Σ)` is a Euclidean Gaussian `N(μ, Σ)` on the
//! log coordinates `log∨(X̂⁻¹X)` centred at the reference point `X̂`. The two
//! coordinate changes below move mass between the mean vector and the
//! reference point while transporting the covariance with the Jacobian.

use std::f64::consts::PI;

use nalgebra::{Cholesky, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::so3::{boxplus, exp_so3, left_jacobian, left_jacobian_inv, log_so3, Matrix3, Rotation, Vec3};

const SYMMETRY_TOL: f64 = 1e-10;

/// A symmetric positive-definite 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpdMatrix3(Matrix3);

impl SpdMatrix3 {
    /// Checks symmetry (to 1e-10, relative to the largest entry when that
    /// exceeds one) and a strictly positive smallest eigenvalue.
    pub fn new(m: Matrix3) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let scale = m.abs().max().max(1.0);
        let asym = (m - m.transpose()).abs().max();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSpd(format!("asymmetry {asym:e}")));
        }
        let sym = (m + m.transpose()) * 0.5;
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        if min_eig <= 0.0 {
            return Err(Error::NotSpd(format!("smallest eigenvalue {min_eig:e}")));
        }
        Ok(SpdMatrix3(sym))
    }

    /// Skips validation. Used for degenerate fixtures such as a zero noise
    /// covariance, and for products that are SPD by construction.
    #[inline]
    pub fn new_unchecked(m: Matrix3) -> Self {
        SpdMatrix3(m)
    }

    pub fn from_diagonal(d: &Vec3) -> Result<Self> {
        SpdMatrix3::new(Matrix3::from_diagonal(d))
    }

    pub fn identity() -> Self {
        SpdMatrix3(Matrix3::identity())
    }

    pub fn scaled_identity(s: f64) -> Self {
        SpdMatrix3(Matrix3::identity() * s)
    }

    pub fn zeros() -> Self {
        SpdMatrix3(Matrix3::zeros())
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix3 {
        &self.0
    }

    pub fn eigenvalues(&self) -> Vec3 {
        let mut e = SymmetricEigen::new(self.0).eigenvalues;
        e.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn inverse(&self) -> Result<Matrix3> {
        self.0
            .try_inverse()
            .ok_or_else(|| Error::NotSpd("singular matrix".into()))
    }

    /// `A S Aᵀ`, symmetrised.
    pub fn congruence(&self, a: &Matrix3) -> SpdMatrix3 {
        SpdMatrix3::symmetrize(&(a * self.0 * a.transpose()))
    }

    pub fn symmetrize(m: &Matrix3) -> SpdMatrix3 {
        SpdMatrix3((m + m.transpose()) * 0.5)
    }

    pub fn scale(&self, s: f64) -> SpdMatrix3 {
        SpdMatrix3(self.0 * s)
    }
}

impl std::ops::Add for SpdMatrix3 {
    type Output = SpdMatrix3;
    fn add(self, rhs: SpdMatrix3) -> SpdMatrix3 {
        SpdMatrix3(self.0 + rhs.0)
    }
}

/// Draws `n ~ N(0, cov)`. Accepts positive semi-definite `cov`.
pub fn sample_normal<R: Rng + ?Sized>(cov: &SpdMatrix3, rng: &mut R) -> Vec3 {
    let z = Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    match Cholesky::new(*cov.matrix()) {
        Some(ch) => ch.l() * z,
        None => {
            let eig = SymmetricEigen::new(*cov.matrix());
            let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            eig.eigenvectors * Matrix3::from_diagonal(&sqrt_vals) * z
        }
    }
}

/// `G_X̂(μ, Σ)` on SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentratedGaussian {
    pub ref_point: Rotation,
    pub mean: Vec3,
    pub cov: SpdMatrix3,
}

impl ConcentratedGaussian {
    pub fn new(ref_point: Rotation, mean: Vec3, cov: SpdMatrix3) -> Result<Self> {
        let n = mean.norm();
        if !(n < PI) {
            return Err(Error::Domain {
                op: "ConcentratedGaussian::new",
                angle: n,
            });
        }
        Ok(ConcentratedGaussian {
            ref_point,
            mean,
            cov,
        })
    }

    pub fn zero_mean(ref_point: Rotation, cov: SpdMatrix3) -> Self {
        ConcentratedGaussian {
            ref_point,
            mean: Vec3::zeros(),
            cov,
        }
    }

    /// `log p(X)` with the Euclidean normaliser `−½ log((2π)³ det Σ)`.
    ///
    /// The normaliser is exact only in the concentrated limit; it makes
    /// values comparable across evaluations at a fixed `Σ`.
    pub fn log_density(&self, x: &Rotation) -> Result<f64> {
        Ok(self.quadratic_term(x)? + self.log_normalizer())
    }

    /// `−½ (ξ − μ)ᵀ Σ⁻¹ (ξ − μ)` with `ξ = log∨(X̂⁻¹X)`.
    pub fn quadratic_term(&self, x: &Rotation) -> Result<f64> {
        let xi = log_so3(&(self.ref_point.inverse() * *x))?;
        let e = xi - self.mean;
        let info = self.cov.inverse()?;
        Ok(-0.5 * e.dot(&(info * e)))
    }

    pub fn log_normalizer(&self) -> f64 {
        -0.5 * ((2.0 * PI).powi(3) * self.cov.matrix().determinant()).ln()
    }

    /// Draws `X̂ ⊞ (μ + n)`, `n ~ N(0, Σ)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Rotation {
        let n = sample_normal(&self.cov, rng);
        boxplus(&self.ref_point, &(self.mean + n))
    }

    /// Moves the mean into the reference point:
    /// `G_X̂(μ, Σ) ≈ G_{X̂ exp(μ)}(0, J_μ Σ J_μᵀ)`.
    pub fn absorb_mean(&self) -> Result<ConcentratedGaussian> {
        let n = self.mean.norm();
        if n >= PI {
            return Err(Error::Domain {
                op: "absorb_mean",
                angle: n,
            });
        }
        let j = left_jacobian(&self.mean);
        Ok(ConcentratedGaussian {
            ref_point: boxplus(&self.ref_point, &self.mean),
            mean: Vec3::zeros(),
            cov: self.cov.congruence(&j),
        })
    }

    /// Re-expresses a zero-mean distribution around `new_ref`:
    /// `G_X̂₁(0, Σ₁) ≈ G_X₂(μ₂, J_μ₂⁻¹ Σ₁ J_μ₂⁻ᵀ)` with `μ₂ = log∨(X₂⁻¹X̂₁)`.
    pub fn change_reference(&self, new_ref: &Rotation) -> Result<ConcentratedGaussian> {
        if self.mean != Vec3::zeros() {
            return Err(Error::InvalidInput(
                "change_reference expects a zero-mean distribution".into(),
            ));
        }
        let mean = log_so3(&(new_ref.inverse() * self.ref_point))?;
        let j_inv = left_jacobian_inv(&mean)?;
        Ok(ConcentratedGaussian {
            ref_point: *new_ref,
            mean,
            cov: self.cov.congruence(&j_inv),
        })
    }

    /// The point `X̂ exp(μ∧)` of maximal density.
    pub fn mode(&self) -> Rotation {
        self.ref_point * exp_so3(&self.mean)
    }
}
