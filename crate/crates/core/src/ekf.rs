//! Single-agent attitude EKF.
//!
//! The information state is a zero-mean concentrated Gaussian
//! `R ~ G_R̂(0, P)`, with the body-frame error convention `R = R̂ exp(ε∧)`.
//!
//! Linearisation (first order in the error `ε` and gyro noise `n`):
//!
//! ```text
//! predict:  ε⁺ ≈ Aᵀ ε − Δt J(Δt ω̃) n,   A = exp(Δt ω̃∧)
//! output:   z = Rᵀd + ν ≈ R̂ᵀd + (R̂ᵀd)∧ ε + ν
//! ```
//!
//! After each Kalman update the non-zero posterior mean is absorbed into the
//! reference point and the covariance transported by the Jacobian.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::gaussian::{ConcentratedGaussian, SpdMatrix3};
use crate::so3::{exp_so3, left_jacobian, rotation_error, wedge, Matrix3, Rotation, Vec3};

/// Condition number above which the innovation covariance is rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// An agent's own attitude estimate `(R̂, P̂)` at time `time`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentEstimate {
    pub attitude: Rotation,
    pub cov: SpdMatrix3,
    /// Seconds.
    pub time: f64,
}

/// One gyroscope sample held over `dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    /// Body-frame angular velocity, rad/s.
    pub omega: Vec3,
    pub dt: f64,
    /// Gyro noise covariance, (rad/s)².
    pub gyro_cov: SpdMatrix3,
}

impl ImuSample {
    pub fn new(omega: Vec3, dt: f64, gyro_cov: SpdMatrix3) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidInput(format!("imu dt must be positive, got {dt}")));
        }
        Ok(ImuSample { omega, dt, gyro_cov })
    }
}

/// A body-frame observation of the known reference direction `direction_index`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionalMeasurement {
    pub value: Vec3,
    pub direction_index: usize,
    pub noise_cov: SpdMatrix3,
}

impl AgentEstimate {
    pub fn new(attitude: Rotation, cov: SpdMatrix3, time: f64) -> Self {
        AgentEstimate {
            attitude,
            cov,
            time,
        }
    }

    pub fn as_gaussian(&self) -> ConcentratedGaussian {
        ConcentratedGaussian::zero_mean(self.attitude, self.cov)
    }

    /// Attitude error against `truth`, in radians.
    pub fn error_to(&self, truth: &Rotation) -> f64 {
        rotation_error(truth, &self.attitude)
    }

    /// Propagates through `R⁺ = R exp(Δt ω∧)`.
    pub fn predict(&self, imu: &ImuSample) -> AgentEstimate {
        let step = imu.omega * imu.dt;
        let a = exp_so3(&step);
        let f = a.matrix().transpose();
        let g = left_jacobian(&step) * (-imu.dt);
        let cov = self.cov.matrix();
        let p = f * cov * f.transpose() + g * imu.gyro_cov.matrix() * g.transpose();
        AgentEstimate {
            attitude: crate::so3::boxplus(&self.attitude, &step),
            cov: SpdMatrix3::symmetrize(&p),
            time: self.time + imu.dt,
        }
    }

    /// Kalman update with one known-direction measurement followed by the
    /// covariance reset. `direction` is the world-frame unit vector `d`.
    pub fn update_directional(
        &self,
        m: &DirectionalMeasurement,
        direction: &Vec3,
    ) -> Result<AgentEstimate> {
        let predicted = self.attitude.inverse() * *direction;
        let h = wedge(&predicted);
        let residual = m.value - predicted;
        let p = self.cov.matrix();

        let s = h * p * h.transpose() + m.noise_cov.matrix();
        let s = (s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(s).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 0.0) || hi / lo > MAX_INNOVATION_CONDITION {
            return Err(Error::SingularInnovation(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
        }
        let s_inv = s
            .try_inverse()
            .ok_or(Error::SingularInnovation(f64::INFINITY))?;

        let gain = p * h.transpose() * s_inv;
        let correction = gain * residual;
        let posterior = (Matrix3::identity() - gain * h) * p;
        debug_assert!(
            (posterior - posterior.transpose()).abs().max() < 1e-10 * p.abs().max().max(1.0),
            "posterior covariance lost symmetry"
        );

        let reset = ConcentratedGaussian {
            ref_point: self.attitude,
            mean: correction,
            cov: SpdMatrix3::symmetrize(&posterior),
        }
        .absorb_mean()?;
        Ok(AgentEstimate {
            attitude: reset.ref_point,
            cov: reset.cov,
            time: self.time,
        })
    }
}
