use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::ekf::{AgentEstimate, ImuSample};
use crate::error::{Error, Result};
use crate::fusion::{fuse_relative, EventCounter, FusionConfig, FusionMethod, SharePacket};
use crate::gaussian::{sample_normal, SpdMatrix3};
use crate::so3::{boxplus, exp_so3, Matrix3, Rotation, Vec3};

use super::sensors::{synthesize_directional, RelativeDraw};
use super::trajectory::{generate_trajectory, Trajectory};
use super::{run_seed_bytes, ScenarioConfig, Variant};

/// Initial errors are redrawn until they stay this far inside the log chart.
const INITIAL_ERROR_MARGIN: f64 = 0.05;

/// Per-step ego errors of one run, plus event bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub time: Vec<f64>,
    pub error_proposed: Vec<f64>,
    pub error_directional_only: Vec<f64>,
    pub error_naive: Vec<f64>,
    /// Packets the proposed ego filter dropped.
    pub rejection_count: usize,
    pub naive_rejection_count: usize,
    /// Directional update events per agent.
    pub directional_events: Vec<usize>,
    pub relative_events: usize,
    /// Relative measurements that could not be synthesised (angle at π).
    pub relative_skipped: usize,
    /// Directional updates that failed and were skipped.
    pub update_failures: usize,
}

impl RunRecord {
    pub fn errors(&self, variant: Variant) -> &[f64] {
        match variant {
            Variant::Proposed => &self.error_proposed,
            Variant::DirectionalOnly => &self.error_directional_only,
            Variant::Naive => &self.error_naive,
        }
    }

    /// Mean error over samples with `from ≤ t ≤ to` (small slack for rounding).
    pub fn window_mean(&self, variant: Variant, from: f64, to: f64) -> f64 {
        let (sum, count) = self
            .time
            .iter()
            .zip(self.errors(variant))
            .filter(|(t, _)| **t >= from - 1e-9 && **t <= to + 1e-9)
            .fold((0.0, 0usize), |(s, c), (_, e)| (s + e, c + 1));
        if count == 0 {
            f64::NAN
        } else {
            sum / count as f64
        }
    }
}

/// Runs replication `run_index` of `cfg` with its derived seed.
pub fn run_scenario(cfg: &ScenarioConfig, run_index: u64) -> Result<RunRecord> {
    let mut rng = ChaCha20Rng::from_seed(run_seed_bytes(cfg.seed, run_index));
    run_scenario_with_rng(cfg, &mut rng)
}

struct AgentFilters {
    own: AgentEstimate,
    // only populated for agent 0
    directional_only: Option<AgentEstimate>,
    naive: Option<AgentEstimate>,
}

impl AgentFilters {
    fn for_each(&mut self, mut f: impl FnMut(&mut AgentEstimate)) {
        f(&mut self.own);
        if let Some(e) = self.directional_only.as_mut() {
            f(e);
        }
        if let Some(e) = self.naive.as_mut() {
            f(e);
        }
    }
}

fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    // the polar factor of a Gaussian matrix is Haar-distributed
    let m = Matrix3::from_fn(|_, _| rng.sample(StandardNormal));
    Rotation::project(&m)
}

fn random_axis<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

fn initial_error<R: Rng + ?Sized>(cov: &SpdMatrix3, rng: &mut R) -> Vec3 {
    loop {
        let e = sample_normal(cov, rng);
        if e.norm() < std::f64::consts::PI - INITIAL_ERROR_MARGIN {
            return e;
        }
    }
}

/// The discrete-event loop.
///
/// Every step: gyro predict on all filters. On directional ticks every agent
/// updates with each of its directions (one draw shared by all of that
/// agent's filters). On relative ticks each observer measures its target and
/// sends a packet carrying its own estimate; the ego's proposed and naive
/// filters fuse it, the directional-only filter ignores it.
pub fn run_scenario_with_rng<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<RunRecord> {
    cfg.validate()?;
    let n_agents = cfg.agents.len();
    let steps = cfg.num_steps();

    let ego_truth0 = random_rotation(rng);
    let mut initial_truth = vec![ego_truth0];
    for _ in 1..n_agents {
        let axis = random_axis(rng);
        initial_truth.push(ego_truth0 * exp_so3(&(axis * cfg.initial_offset)));
    }

    let mut filters: Vec<AgentFilters> = initial_truth
        .iter()
        .enumerate()
        .map(|(i, truth)| {
            let attitude = boxplus(truth, &initial_error(&cfg.initial_estimate_cov, rng));
            let est = AgentEstimate::new(attitude, cfg.initial_estimate_cov, 0.0);
            AgentFilters {
                own: est,
                directional_only: (i == 0).then_some(est),
                naive: (i == 0).then_some(est),
            }
        })
        .collect();

    let trajectories: Vec<Trajectory> = (0..n_agents)
        .map(|i| generate_trajectory(&cfg.trajectory_profile(i), cfg, initial_truth[i], rng))
        .collect();

    let proposed_cfg = FusionConfig {
        method: FusionMethod::Geometric,
        alpha_policy: cfg.alpha_policy,
        proxy: cfg.proxy,
    };
    let naive_cfg = FusionConfig {
        method: FusionMethod::Naive,
        ..proposed_cfg
    };

    let mut record = RunRecord {
        time: Vec::with_capacity(steps + 1),
        error_proposed: Vec::with_capacity(steps + 1),
        error_directional_only: Vec::with_capacity(steps + 1),
        error_naive: Vec::with_capacity(steps + 1),
        rejection_count: 0,
        naive_rejection_count: 0,
        directional_events: vec![0; n_agents],
        relative_events: 0,
        relative_skipped: 0,
        update_failures: 0,
    };
    let mut proposed_events = EventCounter::default();
    let mut naive_events = EventCounter::default();
    let mut other_events = EventCounter::default();

    push_errors(&mut record, 0.0, &filters[0], &trajectories[0].true_states[0])?;

    for n in 1..=steps {
        let t = cfg.time_at(n);

        for (i, (agent, f)) in cfg.agents.iter().zip(filters.iter_mut()).enumerate() {
            let omega = trajectories[i].measured_omegas[n - 1];
            let imu = ImuSample::new(omega, cfg.dt, agent.gyro_noise_cov)?;
            f.for_each(|e| {
                *e = e.predict(&imu);
                e.time = t;
            });
        }

        if cfg.fires(cfg.directional_rate, n) {
            for (i, agent) in cfg.agents.iter().enumerate() {
                let truth = trajectories[i].true_states[n];
                for (k, d) in agent.directions.iter().enumerate() {
                    let m = synthesize_directional(&truth, d, k, &agent.directional_noise_cov, rng);
                    let mut failures = 0;
                    filters[i].for_each(|e| match e.update_directional(&m, d) {
                        Ok(updated) => *e = updated,
                        Err(_) => failures += 1,
                    });
                    record.update_failures += failures;
                }
                record.directional_events[i] += 1;
            }
        }

        if cfg.fires(cfg.relative_rate, n) {
            record.relative_events += 1;
            for &(observer, target) in &cfg.edges {
                let draw = RelativeDraw::sample(&cfg.relative_noise_cov, rng);
                let m = match draw.apply(
                    cfg.relative_model,
                    &trajectories[target].true_states[n],
                    &trajectories[observer].true_states[n],
                    &cfg.relative_noise_cov,
                ) {
                    Ok(m) => m,
                    Err(_) => {
                        record.relative_skipped += 1;
                        continue;
                    }
                };
                let pkt = SharePacket::new(m, filters[observer].own, observer, target, t)?;
                let f = &mut filters[target];
                if target == 0 {
                    f.own = fuse_relative(&f.own, &pkt, &proposed_cfg, &mut proposed_events);
                    if let Some(naive) = f.naive.as_mut() {
                        *naive = fuse_relative(naive, &pkt, &naive_cfg, &mut naive_events);
                    }
                } else {
                    f.own = fuse_relative(&f.own, &pkt, &proposed_cfg, &mut other_events);
                }
            }
        }

        push_errors(&mut record, t, &filters[0], &trajectories[0].true_states[n])?;
    }

    record.rejection_count = proposed_events.rejected;
    record.naive_rejection_count = naive_events.rejected;

    let expected_dir = cfg.expected_events(cfg.directional_rate);
    let expected_rel = cfg.expected_events(cfg.relative_rate);
    if record.directional_events.iter().any(|&c| c != expected_dir) || record.relative_events != expected_rel {
        return Err(Error::InvalidInput(format!(
            "event schedule mismatch: directional {:?} (expected {expected_dir}), relative {} (expected {expected_rel})",
            record.directional_events, record.relative_events
        )));
    }
    Ok(record)
}

fn push_errors(record: &mut RunRecord, t: f64, ego: &AgentFilters, truth: &Rotation) -> Result<()> {
    let e_prop = ego.own.error_to(truth);
    let e_dir = ego.directional_only.map_or(f64::NAN, |e| e.error_to(truth));
    let e_naive = ego.naive.map_or(f64::NAN, |e| e.error_to(truth));
    for e in [e_prop, e_dir, e_naive] {
        if !e.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite attitude error at t = {t}")));
        }
    }
    record.time.push(t);
    record.error_proposed.push(e_prop);
    record.error_directional_only.push(e_dir);
    record.error_naive.push(e_naive);
    Ok(())
}
