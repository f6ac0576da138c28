use rand::Rng;

use crate::ekf::DirectionalMeasurement;
use crate::error::Result;
use crate::fusion::{RelativeMeasurement, RelativeModel};
use crate::gaussian::{sample_normal, SpdMatrix3};
use crate::so3::{boxplus, exp_so3, log_so3, Rotation, Vec3};

/// `z = Rᵀd + n`, `n ~ N(0, noise_cov)`.
pub fn synthesize_directional<R: Rng + ?Sized>(
    true_state: &Rotation,
    direction: &Vec3,
    direction_index: usize,
    noise_cov: &SpdMatrix3,
    rng: &mut R,
) -> DirectionalMeasurement {
    let value = true_state.inverse() * *direction + sample_normal(noise_cov, rng);
    DirectionalMeasurement {
        value,
        direction_index,
        noise_cov: *noise_cov,
    }
}

/// One relative-sensor noise draw `κ ~ N(0, Q)`, applied under either model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeDraw {
    pub kappa: Vec3,
}

impl RelativeDraw {
    pub fn sample<R: Rng + ?Sized>(noise_cov: &SpdMatrix3, rng: &mut R) -> Self {
        RelativeDraw {
            kappa: sample_normal(noise_cov, rng),
        }
    }

    /// Physical: `R_j⁻¹R_i ⊞ κ`. Angular: `exp(log∨(R_j⁻¹R_i) + κ)`.
    pub fn apply(
        &self,
        kind: RelativeModel,
        target: &Rotation,
        observer: &Rotation,
        noise_cov: &SpdMatrix3,
    ) -> Result<RelativeMeasurement> {
        let relative = observer.inverse() * *target;
        let value = match kind {
            RelativeModel::Physical => boxplus(&relative, &self.kappa),
            RelativeModel::Angular => exp_so3(&(log_so3(&relative)? + self.kappa)),
        };
        Ok(RelativeMeasurement {
            kind,
            value,
            noise_cov: *noise_cov,
        })
    }
}

/// Measurement of agent `i` (`target`) taken by agent `j` (`observer`).
pub fn synthesize_relative<R: Rng + ?Sized>(
    kind: RelativeModel,
    target: &Rotation,
    observer: &Rotation,
    noise_cov: &SpdMatrix3,
    rng: &mut R,
) -> Result<RelativeMeasurement> {
    RelativeDraw::sample(noise_cov, rng).apply(kind, target, observer, noise_cov)
}
