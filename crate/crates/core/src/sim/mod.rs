//! Multi-agent simulation and Monte-Carlo evaluation.
//!
//! Agent 0 is the ego agent whose error is recorded; it runs three filters
//! side by side (proposed, directional-only, naive) on identical sensor draws.
//! Every other agent runs a single proposed filter and shares its estimate
//! along the configured observer → target edges.

mod monte_carlo;
mod scenario;
mod sensors;
mod trajectory;

pub use monte_carlo::{
    percentile, run_batch, run_monte_carlo, run_seed_bytes, summarize, MonteCarloSummary, VariantSummary,
};
pub use scenario::{run_scenario, run_scenario_with_rng, RunRecord};
pub use sensors::{synthesize_directional, synthesize_relative, RelativeDraw};
pub use trajectory::{generate_trajectory, OmegaProfile, Trajectory, TrajectoryProfile};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fusion::{AlphaPolicy, ProxyChoice, RelativeModel};
use crate::gaussian::SpdMatrix3;
use crate::so3::Vec3;

/// The three ego filters compared in every run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Proposed,
    DirectionalOnly,
    Naive,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Proposed, Variant::DirectionalOnly, Variant::Naive];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Proposed => "proposed",
            Variant::DirectionalOnly => "directional_only",
            Variant::Naive => "naive",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    /// World-frame unit directions this agent observes.
    pub directions: Vec<Vec3>,
    pub directional_noise_cov: SpdMatrix3,
    pub gyro_noise_cov: SpdMatrix3,
    pub trajectory: OmegaProfile,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Horizon, s.
    pub duration: f64,
    /// Hz.
    pub directional_rate: f64,
    /// Hz.
    pub relative_rate: f64,
    pub agents: Vec<AgentConfig>,
    pub relative_model: RelativeModel,
    /// `Q_j` of every relative sensor.
    pub relative_noise_cov: SpdMatrix3,
    /// `(observer, target)` pairs; the observer measures and shares.
    pub edges: Vec<(usize, usize)>,
    /// Angle between agent 0's and every other agent's initial true attitude.
    pub initial_offset: f64,
    pub initial_estimate_cov: SpdMatrix3,
    pub alpha_policy: AlphaPolicy,
    pub proxy: ProxyChoice,
    /// When true the truth integrates the same noisy rate the filters see;
    /// otherwise the truth integrates the clean profile.
    pub truth_from_measured_omega: bool,
    pub seed: u64,
    pub num_runs: usize,
}

impl Default for ScenarioConfig {
    /// The two-agent experiment: agent 0 sees `d₁` only, agent 1 sees `d₁`
    /// and `d₂` and measures agent 0 at 1 Hz.
    fn default() -> Self {
        let d1 = Vec3::new(0.0, 1.0, 0.0);
        let d2 = Vec3::new(1.0, 0.0, 0.0);
        let directional = SpdMatrix3::new_unchecked(nalgebra::Matrix3::from_diagonal(&Vec3::new(0.04, 0.01, 0.09)));
        let gyro = SpdMatrix3::new_unchecked(nalgebra::Matrix3::from_diagonal(&Vec3::new(0.09, 0.04, 0.01)));
        ScenarioConfig {
            dt: 0.02,
            duration: 60.0,
            directional_rate: 20.0,
            relative_rate: 1.0,
            agents: vec![
                AgentConfig {
                    directions: vec![d1],
                    directional_noise_cov: directional,
                    gyro_noise_cov: gyro,
                    trajectory: OmegaProfile::Oscillatory {
                        abs_sin: Vec3::new(10.0, 0.0, 0.1),
                        abs_cos: Vec3::new(0.0, 1.0, 0.0),
                    },
                },
                AgentConfig {
                    directions: vec![d1, d2],
                    directional_noise_cov: directional,
                    gyro_noise_cov: gyro,
                    trajectory: OmegaProfile::Oscillatory {
                        abs_sin: Vec3::new(1.0, 0.0, 5.0),
                        abs_cos: Vec3::new(0.0, 0.5, 0.0),
                    },
                },
            ],
            relative_model: RelativeModel::Physical,
            relative_noise_cov: SpdMatrix3::new_unchecked(nalgebra::Matrix3::from_diagonal(&Vec3::new(
                0.25, 0.09, 0.04,
            ))),
            edges: vec![(1, 0)],
            initial_offset: std::f64::consts::PI - 1e-3,
            initial_estimate_cov: SpdMatrix3::identity(),
            alpha_policy: AlphaPolicy::Fixed(0.5),
            proxy: ProxyChoice::Measurement,
            truth_from_measured_omega: true,
            seed: 1,
            num_runs: 1000,
        }
    }
}

impl ScenarioConfig {
    /// Number of integration steps; the record holds one more sample.
    pub fn num_steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Time of step `n`.
    pub fn time_at(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Whether an event of the given rate fires on step `n ≥ 1`. Event `k`
    /// is due at `k / rate` and handled on the first step at or after it.
    pub fn fires(&self, rate: f64, n: usize) -> bool {
        n > 0 && events_by(rate, self.dt, n) > events_by(rate, self.dt, n - 1)
    }

    /// Events of the given rate expected over the whole run.
    pub fn expected_events(&self, rate: f64) -> usize {
        events_by(rate, self.dt, self.num_steps())
    }

    pub fn trajectory_profile(&self, agent_id: usize) -> TrajectoryProfile {
        let a = &self.agents[agent_id];
        TrajectoryProfile {
            agent_id,
            omega: a.trajectory.clone(),
            gyro_noise_cov: a.gyro_noise_cov,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!(
                "duration {} is not a whole number of dt = {} steps",
                self.duration, self.dt
            ));
        }
        for (name, rate) in [
            ("directional rate", self.directional_rate),
            ("relative rate", self.relative_rate),
        ] {
            if !(rate > 0.0) || rate > 1.0 / self.dt + 1e-9 {
                return bad(format!("{name} {rate} Hz must lie in (0, 1/dt]"));
            }
        }
        if self.agents.is_empty() {
            return bad("at least one agent is required".into());
        }
        for (i, a) in self.agents.iter().enumerate() {
            for d in &a.directions {
                if (d.norm() - 1.0).abs() > 1e-9 {
                    return bad(format!("agent {i}: direction {d:?} is not unit norm"));
                }
            }
        }
        for &(obs, tgt) in &self.edges {
            if obs == tgt || obs >= self.agents.len() || tgt >= self.agents.len() {
                return bad(format!("invalid relative edge ({obs}, {tgt})"));
            }
        }
        if let AlphaPolicy::Fixed(a) = self.alpha_policy {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("alpha {a} outside [0, 1]"));
            }
        }
        if !(self.initial_offset >= 0.0 && self.initial_offset < std::f64::consts::PI) {
            return bad(format!("initial offset {} must lie in [0, π)", self.initial_offset));
        }
        if self.num_runs == 0 {
            return bad("num_runs must be at least 1".into());
        }
        Ok(())
    }
}

fn events_by(rate: f64, dt: f64, n: usize) -> usize {
    (n as f64 * dt * rate + 1e-9).floor() as usize
}
