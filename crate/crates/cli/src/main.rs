use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use geofuse::config::load_config;
use geofuse::report::emit_results;
use geofuse::selftest::{run_selftest, SelftestOptions};
use geofuse::sim::{run_monte_carlo, ScenarioConfig, Variant};

#[derive(Parser)]
#[command(name = "geofuse", version, about = "Collaborative SO(3) attitude estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte-Carlo experiment and write errors.csv and run_meta.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Override a config value by dotted path, e.g. `monte_carlo.num_runs=10`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Parse and validate a config file without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the numerical self-checks.
    Selftest {
        /// Scales a Jacobian coefficient; any value but 1 must make the
        /// finite-difference group fail.
        #[arg(long, default_value_t = 1.0, hide = true)]
        perturb_jacobian: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            threads,
            overrides,
        } => run(&config, &out, threads, &overrides),
        Command::ValidateConfig { config, overrides } => validate(&config, &overrides),
        Command::Selftest { perturb_jacobian } => selftest(perturb_jacobian),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &Path, overrides: &[String]) -> Result<ScenarioConfig> {
    load_config(path, overrides).with_context(|| format!("loading {}", path.display()))
}

fn validate(path: &Path, overrides: &[String]) -> Result<ExitCode> {
    let cfg = load(path, overrides)?;
    println!(
        "ok: {} agents, {} steps, {} runs, seed {}",
        cfg.agents.len(),
        cfg.num_steps(),
        cfg.num_runs,
        cfg.seed
    );
    Ok(ExitCode::SUCCESS)
}

fn run(path: &Path, out: &Path, threads: usize, overrides: &[String]) -> Result<ExitCode> {
    let cfg = load(path, overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")?;

    let start = Instant::now();
    let summary = pool.install(|| run_monte_carlo(&cfg)).context("simulation failed")?;
    let wall = start.elapsed().as_secs_f64();

    let created = !out.exists();
    if let Err(e) = emit_results(&summary, &cfg, wall, out) {
        remove_partial(out, created);
        return Err(e).context("writing results");
    }

    println!("{} runs in {wall:.1} s -> {}", cfg.num_runs, out.display());
    let last = summary.time.len() - 1;
    for v in Variant::ALL {
        println!("  {:<17} final mean error {:.4} rad", v.name(), summary.variant(v).mean[last]);
    }
    println!(
        "  rejected packets: proposed {}, naive {}",
        summary.total_rejections, summary.total_naive_rejections
    );
    Ok(ExitCode::SUCCESS)
}

fn remove_partial(out: &Path, created: bool) {
    if created {
        let _ = std::fs::remove_dir_all(out);
    } else {
        for name in ["errors.csv", "run_meta.json"] {
            let _ = std::fs::remove_file(out.join(name));
        }
    }
}

fn selftest(perturb_jacobian: f64) -> Result<ExitCode> {
    let report = run_selftest(&SelftestOptions {
        jacobian_perturbation: perturb_jacobian,
        ..SelftestOptions::default()
    });
    println!("{report}");
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
