use rand::Rng;

use crate::gaussian::{sample_normal, SpdMatrix3};
use crate::so3::{boxplus, Rotation, Vec3};

use super::ScenarioConfig;

/// Nominal body angular velocity as a function of time.
#[derive(Clone, Debug, PartialEq)]
pub enum OmegaProfile {
    /// `ω_k(τ) = abs_sin_k |sin τ| + abs_cos_k |cos τ|` rad/s.
    Oscillatory { abs_sin: Vec3, abs_cos: Vec3 },
    Constant(Vec3),
}

impl OmegaProfile {
    pub fn eval(&self, tau: f64) -> Vec3 {
        match self {
            OmegaProfile::Oscillatory { abs_sin, abs_cos } => {
                abs_sin * tau.sin().abs() + abs_cos * tau.cos().abs()
            }
            OmegaProfile::Constant(w) => *w,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryProfile {
    pub agent_id: usize,
    pub omega: OmegaProfile,
    pub gyro_noise_cov: SpdMatrix3,
}

/// True attitudes at every step and the gyro samples the filters receive.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// `num_steps + 1` attitudes, index = step.
    pub true_states: Vec<Rotation>,
    /// `num_steps` noisy rates; sample `n` drives step `n → n + 1`.
    pub measured_omegas: Vec<Vec3>,
}

/// Euler-integrates `R(n+1) = R(n) exp(Δt ω∧)` from `initial`.
///
/// The gyro samples are the profile plus `N(0, gyro_noise_cov)`. The truth
/// integrates those noisy samples when `cfg.truth_from_measured_omega` is
/// set and the clean profile otherwise.
pub fn generate_trajectory<R: Rng + ?Sized>(
    profile: &TrajectoryProfile,
    cfg: &ScenarioConfig,
    initial: Rotation,
    rng: &mut R,
) -> Trajectory {
    let steps = cfg.num_steps();
    let mut true_states = Vec::with_capacity(steps + 1);
    let mut measured_omegas = Vec::with_capacity(steps);
    let mut r = initial;
    true_states.push(r);
    for n in 0..steps {
        let clean = profile.omega.eval(cfg.time_at(n));
        let measured = clean + sample_normal(&profile.gyro_noise_cov, rng);
        let driving = if cfg.truth_from_measured_omega { measured } else { clean };
        r = boxplus(&r, &(driving * cfg.dt));
        true_states.push(r);
        measured_omegas.push(measured);
    }
    Trajectory {
        true_states,
        measured_omegas,
    }
}
