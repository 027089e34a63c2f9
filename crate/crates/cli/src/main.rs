// SPDX-License-Identifier: MIT OR Apache-2.0

//! `covchange` command-line driver.
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 on a numerical
//! domain error, 1 on an I/O failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use covchange::harness::{
    run_genie_experiment, run_roc_experiment, simulate_frames, DetectorSpec, ExperimentConfig, FrameRecord,
    ThresholdPolicy,
};
use covchange::estimation::DEFAULT_KAPPA;
use covchange::report::{emit_results, manifest_path, to_csv, Manifest, ResultRow};
use covchange::{one_ring_covariance, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "covchange", version, about = "Covariance-change detection experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML experiment configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed of all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials per hypothesis.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output CSV path; a `.manifest` file is written next to it. Defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a one-ring covariance matrix as `row,col,re,im` CSV.
    Covgen {
        /// Extra rotation of the angle of departure, in degrees.
        #[arg(long, default_value_t = 0.0)]
        delta_aod_deg: f64,
    },
    /// Genie-aided detector: empirical and analytic error rates.
    Genie,
    /// Threshold sweep of a plug-in detector.
    Roc {
        /// Overrides the detector of the configuration; a genie configuration defaults to ml.
        #[arg(long, value_enum)]
        detector: Option<PluginKind>,
        /// Number of sweep thresholds when the configuration has no sweep.
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Frame-by-frame protocol simulation.
    Frames {
        #[arg(long, default_value_t = 10)]
        frames: usize,
        /// 1-based frame at which the covariance changes.
        #[arg(long)]
        change_frame: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PluginKind {
    Ml,
    Shrinkage,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(args: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.global.threads {
        if threads == 0 {
            return Err(Error::InvalidConfig("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("cannot start thread pool: {e}")))?;
    }
    let mut cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Covgen { delta_aod_deg } => {
            cfg.validate()?;
            let ring = cfg.ring.params().rotated(delta_aod_deg.to_radians());
            let cov = one_ring_covariance(&ring, cfg.system.antennas)?;
            let mut text = String::from("row,col,re,im\n");
            for i in 0..cov.dim() {
                for j in 0..cov.dim() {
                    let z = cov.matrix()[(i, j)];
                    writeln!(text, "{i},{j},{},{}", z.re, z.im).expect("writing to a String cannot fail");
                }
            }
            write_text(&cfg, &text, "covgen")
        }
        Command::Genie => {
            let rows = run_genie_experiment(&cfg)?;
            write_rows(&cfg, &rows, "genie")
        }
        Command::Roc { detector, points } => {
            let ml = DetectorSpec::Ml { kappa: DEFAULT_KAPPA, beta: None };
            match (detector, &cfg.detector) {
                (Some(PluginKind::Ml), DetectorSpec::Ml { .. }) => {}
                (Some(PluginKind::Ml), _) | (None, DetectorSpec::Genie) => cfg.detector = ml,
                (Some(PluginKind::Shrinkage), _) => cfg.detector = DetectorSpec::Shrinkage,
                (None, _) => {}
            }
            if !matches!(cfg.threshold, ThresholdPolicy::Sweep { .. }) {
                cfg.threshold = ThresholdPolicy::Sweep { min: None, max: None, count: points };
            }
            let rows = run_roc_experiment(&cfg)?;
            write_rows(&cfg, &rows, "roc")
        }
        Command::Frames { frames, change_frame } => {
            let log = simulate_frames(&cfg, frames, change_frame)?;
            write_text(&cfg, &frames_csv(&log), "frames")
        }
    }
}

fn manifest(cfg: &ExperimentConfig, command: &str) -> Manifest {
    let mut m = cfg.manifest();
    m.push("command", command);
    m.push("threads", rayon::current_num_threads());
    m
}

fn write_rows(cfg: &ExperimentConfig, rows: &[ResultRow], command: &str) -> Result<()> {
    for r in rows.iter().filter(|r| r.is_underpowered()) {
        eprintln!(
            "warning: {} K={} ΔΩ={} Θ={}: {} trials give a standard error above a fifth of the error rate",
            r.detector, r.k, r.delta_aod_deg, r.threshold, r.trials
        );
    }
    match &cfg.output {
        Some(path) => emit_results(rows, path, &manifest(cfg, command)),
        None => {
            print!("{}", to_csv(rows)?);
            Ok(())
        }
    }
}

fn write_text(cfg: &ExperimentConfig, text: &str, command: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, text)?;
            std::fs::write(manifest_path(path), manifest(cfg, command).render())?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn frames_csv(log: &[FrameRecord]) -> String {
    let mut text = String::from("frame,change_injected,decision,statistic,threshold,reference_updated\n");
    for r in log {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            r.frame, r.change_injected, r.decision, r.statistic, r.threshold, r.reference_updated
        )
        .expect("writing to a String cannot fail");
    }
    text
}
