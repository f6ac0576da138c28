use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::scenario::{run_scenario, RunRecord};
use super::{ScenarioConfig, Variant};

/// Seed of replication `run_index`: SHA-256 over a domain tag, the base seed
/// and the run index (both little-endian), used as a ChaCha20 key.
///
/// Frozen: changing it changes every published number.
pub fn run_seed_bytes(seed: u64, run_index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"geofuse/run-seed/v1");
    h.update(seed.to_le_bytes());
    h.update(run_index.to_le_bytes());
    h.finalize().into()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub mean: Vec<f64>,
    pub p25: Vec<f64>,
    pub p75: Vec<f64>,
}

/// Per-step statistics of the ego error over all runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloSummary {
    pub time: Vec<f64>,
    pub num_runs: usize,
    /// In [`Variant::ALL`] order.
    pub variants: Vec<VariantSummary>,
    pub total_rejections: usize,
    pub total_naive_rejections: usize,
}

impl MonteCarloSummary {
    pub fn variant(&self, v: Variant) -> &VariantSummary {
        self.variants
            .iter()
            .find(|s| s.variant == v)
            .expect("summary holds every variant")
    }
}

/// Runs every replication of `cfg` on the current rayon pool. The output is
/// ordered by run index and does not depend on the pool size.
pub fn run_batch(cfg: &ScenarioConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    (0..cfg.num_runs as u64)
        .into_par_iter()
        .map(|k| run_scenario(cfg, k))
        .collect()
}

pub fn run_monte_carlo(cfg: &ScenarioConfig) -> Result<MonteCarloSummary> {
    summarize(&run_batch(cfg)?)
}

/// Linear interpolation between order statistics (`q` in [0, 1]).
/// `sorted` must be ascending and non-empty.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

pub fn summarize(records: &[RunRecord]) -> Result<MonteCarloSummary> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidInput("no runs to summarise".into()))?;
    let len = first.time.len();
    if records.iter().any(|r| r.time.len() != len) {
        return Err(Error::InvalidInput("runs have different lengths".into()));
    }
    let n = records.len() as f64;
    let mut column = vec![0.0; records.len()];
    let variants = Variant::ALL
        .iter()
        .map(|&v| {
            let mut mean = Vec::with_capacity(len);
            let mut p25 = Vec::with_capacity(len);
            let mut p75 = Vec::with_capacity(len);
            for step in 0..len {
                for (slot, r) in column.iter_mut().zip(records) {
                    *slot = r.errors(v)[step];
                }
                mean.push(column.iter().sum::<f64>() / n);
                column.sort_by(|a, b| a.total_cmp(b));
                p25.push(percentile(&column, 0.25));
                p75.push(percentile(&column, 0.75));
            }
            VariantSummary {
                variant: v,
                mean,
                p25,
                p75,
            }
        })
        .collect();
    Ok(MonteCarloSummary {
        time: first.time.clone(),
        num_runs: records.len(),
        variants,
        total_rejections: records.iter().map(|r| r.rejection_count).sum(),
        total_naive_rejections: records.iter().map(|r| r.naive_rejection_count).sum(),
    })
}
