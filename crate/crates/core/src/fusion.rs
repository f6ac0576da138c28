//! Fusion of relative-attitude measurements shared by a neighbouring agent.
//!
//! Pipeline for a packet from agent `j` about agent `i`:
//!
//! 1. An angle-axis (angular) measurement is turned into a physical one by
//!    absorbing its non-zero mean ([`angular_to_physical`]).
//! 2. The measurement and `j`'s estimate reconstruct an estimate of `R_i`
//!    ([`preprocess_relative`]).
//! 3. That estimate is re-expressed around `i`'s own reference point
//!    ([`geometric_correction`]).
//! 4. Both ellipsoids are combined with the convex-combination-ellipsoid rule
//!    ([`cce_fuse`]) and the result reset to a zero-mean distribution.
//!
//! The naive baseline runs the same pipeline with every Jacobian replaced by
//! the identity.

use serde::{Deserialize, Serialize};

use crate::ekf::AgentEstimate;
use crate::error::{Error, Result};
use crate::gaussian::{ConcentratedGaussian, SpdMatrix3};
use crate::so3::{boxplus, left_jacobian, log_so3, Rotation, Vec3};

/// Generative model of a relative-attitude sensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeModel {
    /// Direction-cosine measurement `y = R_j⁻¹R_i ⊞ κ`.
    Physical,
    /// Angle-axis measurement `z = exp(log∨(R_j⁻¹R_i) + κ)`.
    Angular,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeMeasurement {
    pub kind: RelativeModel,
    pub value: Rotation,
    /// `Q_j`.
    pub noise_cov: SpdMatrix3,
}

/// What the measuring agent broadcasts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SharePacket {
    pub measurement: RelativeMeasurement,
    pub sender_estimate: AgentEstimate,
    pub sender_id: usize,
    pub target_id: usize,
    pub timestamp: f64,
}

impl SharePacket {
    pub fn new(
        measurement: RelativeMeasurement,
        sender_estimate: AgentEstimate,
        sender_id: usize,
        target_id: usize,
        timestamp: f64,
    ) -> Result<Self> {
        if sender_id == target_id {
            return Err(Error::InvalidInput(format!(
                "packet sender and target are both agent {sender_id}"
            )));
        }
        Ok(SharePacket {
            measurement,
            sender_estimate,
            sender_id,
            target_id,
            timestamp,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipsoidFusionResult {
    /// `û⁺`, the fused centre in the ego agent's log coordinates.
    pub mean_correction: Vec3,
    /// `P⁺ = kX`.
    pub cov: SpdMatrix3,
    pub alpha_used: f64,
    /// `k = 1 − d²`.
    pub shrink_factor: f64,
    /// `d²`.
    pub mahalanobis_sq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    Fixed(f64),
    Optimal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMethod {
    /// Jacobian-corrected covariance transport.
    Geometric,
    /// Identity Jacobians everywhere.
    Naive,
}

/// Linearisation point used to convert an angular measurement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyChoice {
    /// The measurement itself stands in for the true relative attitude.
    #[default]
    Measurement,
    /// `R̂_j⁻¹ R̂_i` from the two agents' estimates.
    Estimates,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionConfig {
    pub method: FusionMethod,
    pub alpha_policy: AlphaPolicy,
    pub proxy: ProxyChoice,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FusionEvent {
    Fused {
        timestamp: f64,
        sender_id: usize,
        alpha: f64,
        mahalanobis_sq: f64,
    },
    Rejected {
        timestamp: f64,
        sender_id: usize,
        reason: Error,
    },
}

/// Receives diagnostics from [`fuse_relative`].
pub trait EventSink {
    fn record(&mut self, event: FusionEvent);
}

impl EventSink for Vec<FusionEvent> {
    fn record(&mut self, event: FusionEvent) {
        self.push(event);
    }
}

/// Discards all events.
pub struct NullSink;

impl EventSink for NullSink {
    fn record(&mut self, _event: FusionEvent) {}
}

/// Counts accepted and rejected packets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventCounter {
    pub fused: usize,
    pub rejected: usize,
}

impl EventSink for EventCounter {
    fn record(&mut self, event: FusionEvent) {
        match event {
            FusionEvent::Fused { .. } => self.fused += 1,
            FusionEvent::Rejected { .. } => self.rejected += 1,
        }
    }
}

/// Converts an angular measurement into a physical one, using the
/// measurement as the linearisation point: `Q* = J_u Q J_uᵀ`, `u = log∨(z)`.
pub fn angular_to_physical(m: &RelativeMeasurement) -> Result<RelativeMeasurement> {
    angular_to_physical_with_proxy(m, &m.value)
}

/// As [`angular_to_physical`] with an explicit stand-in for the true
/// relative attitude.
pub fn angular_to_physical_with_proxy(
    m: &RelativeMeasurement,
    proxy: &Rotation,
) -> Result<RelativeMeasurement> {
    if m.kind != RelativeModel::Angular {
        return Err(Error::InvalidInput("expected an angular measurement".into()));
    }
    let u = log_so3(proxy)?;
    Ok(RelativeMeasurement {
        kind: RelativeModel::Physical,
        value: m.value,
        noise_cov: m.noise_cov.congruence(&left_jacobian(&u)),
    })
}

/// Builds `G_{R̂_j y}(0, A P̂_j Aᵀ + Q)` with `A = (R̂_j⁻¹R̂_i)ᵀ`.
pub fn preprocess_relative(pkt: &SharePacket, ego: &AgentEstimate) -> Result<ConcentratedGaussian> {
    let m = &pkt.measurement;
    if m.kind != RelativeModel::Physical {
        return Err(Error::InvalidInput(
            "preprocess_relative needs a physical measurement".into(),
        ));
    }
    let sender = &pkt.sender_estimate;
    let relative = sender.attitude.inverse() * ego.attitude;
    let a = relative.matrix().transpose();
    let cov = sender.cov.congruence(&a) + m.noise_cov;
    Ok(ConcentratedGaussian::zero_mean(sender.attitude * m.value, cov))
}

/// Re-expresses the shared estimate around the ego reference point.
pub fn geometric_correction(
    shared: &ConcentratedGaussian,
    ego: &AgentEstimate,
) -> Result<ConcentratedGaussian> {
    shared.change_reference(&ego.attitude)
}

/// [`geometric_correction`] with an identity Jacobian: same mean, covariance
/// copied unchanged.
pub fn naive_correction(
    shared: &ConcentratedGaussian,
    ego: &AgentEstimate,
) -> Result<ConcentratedGaussian> {
    let mean = log_so3(&(ego.attitude.inverse() * shared.ref_point))?;
    Ok(ConcentratedGaussian {
        ref_point: ego.attitude,
        mean,
        cov: shared.cov,
    })
}

/// Convex-combination-ellipsoid fusion of `E(0, P)` and `E(μ, P*)`.
///
/// ```text
/// X  = (α P⁻¹ + (1 − α) P*⁻¹)⁻¹
/// d² = μᵀ (P/α + P*/(1 − α))⁻¹ μ,   k = 1 − d²
/// P⁺ = k X,   û⁺ = X (1 − α) P*⁻¹ μ
/// ```
///
/// At α = 1 and α = 0 the analytic limits are returned (ego kept, shared
/// adopted). Fails with [`Error::EmptyIntersection`] when `d² ≥ 1`.
pub fn cce_fuse(
    ego_cov: &SpdMatrix3,
    mean: &Vec3,
    shared_cov: &SpdMatrix3,
    alpha: f64,
) -> Result<EllipsoidFusionResult> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    if alpha == 1.0 {
        return Ok(EllipsoidFusionResult {
            mean_correction: Vec3::zeros(),
            cov: *ego_cov,
            alpha_used: alpha,
            shrink_factor: 1.0,
            mahalanobis_sq: 0.0,
        });
    }
    if alpha == 0.0 {
        return Ok(EllipsoidFusionResult {
            mean_correction: *mean,
            cov: *shared_cov,
            alpha_used: alpha,
            shrink_factor: 1.0,
            mahalanobis_sq: 0.0,
        });
    }
    let ego_info = ego_cov.inverse()?;
    let shared_info = shared_cov.inverse()?;
    let x = (ego_info * alpha + shared_info * (1.0 - alpha))
        .try_inverse()
        .ok_or_else(|| Error::NotSpd("combined information is singular".into()))?;
    let metric = (ego_cov.matrix() / alpha + shared_cov.matrix() / (1.0 - alpha))
        .try_inverse()
        .ok_or_else(|| Error::NotSpd("combined covariance is singular".into()))?;
    let d2 = mean.dot(&(metric * mean));
    if !(d2 < 1.0) {
        return Err(Error::EmptyIntersection(d2));
    }
    let k = 1.0 - d2;
    Ok(EllipsoidFusionResult {
        mean_correction: x * (shared_info * mean * (1.0 - alpha)),
        cov: SpdMatrix3::symmetrize(&(x * k)),
        alpha_used: alpha,
        shrink_factor: k,
        mahalanobis_sq: d2,
    })
}

const ALPHA_GRID: usize = 64;
const ALPHA_EDGE: f64 = 1e-3;
const GOLDEN_TOL: f64 = 1e-7;

fn fused_det(ego_cov: &SpdMatrix3, mean: &Vec3, shared_cov: &SpdMatrix3, alpha: f64) -> Result<f64> {
    match cce_fuse(ego_cov, mean, shared_cov, alpha) {
        Ok(r) => Ok(r.cov.matrix().determinant()),
        Err(Error::EmptyIntersection(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `argmin_α det(P⁺(α))` over [0, 1].
///
/// A 64-point grid on `[1e-3, 1 − 1e-3]` plus both endpoints seeds a
/// golden-section refinement around the best grid point. Gains with an
/// empty intersection count as +∞. When the determinant does not depend on
/// α the tie is broken at 0.5.
///
/// Note the determinant tends to zero wherever `d²(α) → 1`, so for nearly
/// disjoint ellipsoids the minimiser sits on that boundary.
pub fn optimal_alpha(ego_cov: &SpdMatrix3, mean: &Vec3, shared_cov: &SpdMatrix3) -> Result<f64> {
    let f = |a: f64| fused_det(ego_cov, mean, shared_cov, a);

    let mut grid = Vec::with_capacity(ALPHA_GRID + 2);
    grid.push(0.0);
    for i in 0..ALPHA_GRID {
        grid.push(ALPHA_EDGE + (1.0 - 2.0 * ALPHA_EDGE) * i as f64 / (ALPHA_GRID - 1) as f64);
    }
    grid.push(1.0);
    let values = grid.iter().map(|&a| f(a)).collect::<Result<Vec<_>>>()?;

    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        let d2 = cce_fuse(ego_cov, mean, shared_cov, 0.5)
            .err()
            .and_then(|e| match e {
                Error::EmptyIntersection(d2) => Some(d2),
                _ => None,
            })
            .unwrap_or(f64::INFINITY);
        return Err(Error::EmptyIntersection(d2));
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if finite.len() == values.len() && hi - lo <= 1e-12 * hi.abs().max(f64::MIN_POSITIVE) {
        return Ok(0.5);
    }

    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid.len() - 1)];
    let (mut best_alpha, mut best_val) = (grid[best], values[best]);

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    for (alpha, val) in [(c, fc), (d, fd)] {
        if val < best_val {
            best_alpha = alpha;
            best_val = val;
        }
    }
    Ok(best_alpha)
}

/// Runs the whole pipeline and resets the result to a zero-mean estimate.
///
/// Any failure (empty intersection, a rotation outside the log chart, a
/// packet older than the ego estimate) leaves `ego` unchanged and is
/// reported to `sink`.
pub fn fuse_relative(
    ego: &AgentEstimate,
    pkt: &SharePacket,
    cfg: &FusionConfig,
    sink: &mut dyn EventSink,
) -> AgentEstimate {
    match try_fuse_relative(ego, pkt, cfg) {
        Ok((fused, res)) => {
            sink.record(FusionEvent::Fused {
                timestamp: pkt.timestamp,
                sender_id: pkt.sender_id,
                alpha: res.alpha_used,
                mahalanobis_sq: res.mahalanobis_sq,
            });
            fused
        }
        Err(reason) => {
            sink.record(FusionEvent::Rejected {
                timestamp: pkt.timestamp,
                sender_id: pkt.sender_id,
                reason,
            });
            *ego
        }
    }
}

/// Fallible core of [`fuse_relative`]; also returns the ellipsoid result.
pub fn try_fuse_relative(
    ego: &AgentEstimate,
    pkt: &SharePacket,
    cfg: &FusionConfig,
) -> Result<(AgentEstimate, EllipsoidFusionResult)> {
    if pkt.timestamp < ego.time - 1e-9 {
        return Err(Error::InvalidInput(format!(
            "packet timestamp {} precedes ego time {}",
            pkt.timestamp, ego.time
        )));
    }
    let measurement = match (pkt.measurement.kind, cfg.method) {
        (RelativeModel::Physical, _) => pkt.measurement,
        (RelativeModel::Angular, FusionMethod::Naive) => RelativeMeasurement {
            kind: RelativeModel::Physical,
            ..pkt.measurement
        },
        (RelativeModel::Angular, FusionMethod::Geometric) => match cfg.proxy {
            ProxyChoice::Measurement => angular_to_physical(&pkt.measurement)?,
            ProxyChoice::Estimates => {
                let proxy = pkt.sender_estimate.attitude.inverse() * ego.attitude;
                angular_to_physical_with_proxy(&pkt.measurement, &proxy)?
            }
        },
    };
    let pkt = SharePacket {
        measurement,
        ..*pkt
    };
    let shared = preprocess_relative(&pkt, ego)?;
    let local = match cfg.method {
        FusionMethod::Geometric => geometric_correction(&shared, ego)?,
        FusionMethod::Naive => naive_correction(&shared, ego)?,
    };
    let alpha = match cfg.alpha_policy {
        AlphaPolicy::Fixed(a) => a,
        AlphaPolicy::Optimal => optimal_alpha(&ego.cov, &local.mean, &local.cov)?,
    };
    let res = cce_fuse(&ego.cov, &local.mean, &local.cov, alpha)?;
    let fused = reset(ego, &res, cfg.method)?;
    Ok((fused, res))
}

/// Moves the fused centre into the attitude estimate. The geometric variant
/// transports the covariance with `J_û`; the naive one keeps it as is.
pub fn reset(
    ego: &AgentEstimate,
    res: &EllipsoidFusionResult,
    method: FusionMethod,
) -> Result<AgentEstimate> {
    let (attitude, cov) = match method {
        FusionMethod::Geometric => {
            let g = ConcentratedGaussian::new(ego.attitude, res.mean_correction, res.cov)?
                .absorb_mean()?;
            (g.ref_point, g.cov)
        }
        FusionMethod::Naive => (boxplus(&ego.attitude, &res.mean_correction), res.cov),
    };
    Ok(AgentEstimate {
        attitude,
        cov,
        time: ego.time,
    })
}
