//! Result files: `errors.csv` and `run_meta.json`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config;
use crate::sim::{MonteCarloSummary, ScenarioConfig};

pub const CSV_HEADER: &str = "time_s,variant,mean_rad,p25_rad,p75_rad";

/// Identifies the build that produced a result: the crate version plus the
/// git revision when the crate was compiled inside a checkout.
pub const BUILD_ID: &str = match option_env!("GEOFUSE_GIT_REV") {
    Some(rev) => rev,
    None => concat!("v", env!("CARGO_PKG_VERSION")),
};

#[derive(Debug, thiserror::Error)]
#[error("{path}: {source}")]
pub struct ReportError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    config: serde_json::Value,
    seed: u64,
    build: &'a str,
    wall_time_s: f64,
}

/// Renders `x` with nine significant digits in positional notation.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // round first so 9.9999999996 becomes 10.0000000 rather than 10.00000000
    let sci = format!("{x:.8e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (8 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn write_csv<W: Write>(summary: &MonteCarloSummary, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (step, t) in summary.time.iter().enumerate() {
        for v in &summary.variants {
            writeln!(
                out,
                "{},{},{},{},{}",
                format_sig9(*t),
                v.variant.name(),
                format_sig9(v.mean[step]),
                format_sig9(v.p25[step]),
                format_sig9(v.p75[step]),
            )?;
        }
    }
    Ok(())
}

/// Writes `errors.csv` and `run_meta.json` into `dir`, creating it if needed.
pub fn emit_results(
    summary: &MonteCarloSummary,
    cfg: &ScenarioConfig,
    wall_time_s: f64,
    dir: &Path,
) -> Result<(), ReportError> {
    let at = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ReportError { path, source }
    };
    std::fs::create_dir_all(dir).map_err(at(dir))?;

    let csv_path = dir.join("errors.csv");
    let file = File::create(&csv_path).map_err(at(&csv_path))?;
    let mut w = BufWriter::new(file);
    write_csv(summary, &mut w)
        .and_then(|_| w.flush())
        .map_err(at(&csv_path))?;

    let meta_path = dir.join("run_meta.json");
    let meta = RunMeta {
        config: config::to_json(cfg),
        seed: cfg.seed,
        build: BUILD_ID,
        wall_time_s,
    };
    let text = serde_json::to_string_pretty(&meta).expect("metadata serialises");
    std::fs::write(&meta_path, text + "\n").map_err(at(&meta_path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1.00000000");
        assert_eq!(format_sig9(0.02), "0.0200000000");
        assert_eq!(format_sig9(60.0), "60.0000000");
        assert_eq!(format_sig9(0.123456789123), "0.123456789");
        assert_eq!(format_sig9(9.9999999996), "10.0000000");
        assert_eq!(format_sig9(1234567891.0), "1234567891");
        assert_eq!(format_sig9(-2.5), "-2.50000000");
    }
}
