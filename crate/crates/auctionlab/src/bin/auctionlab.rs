//! Batch front-end: each subcommand runs one pipeline stage against an
//! artifact directory; `run` chains them all.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use auctionlab::counterfactual::PricingMode;
use auctionlab::pipeline::{
    run_pipeline, stage_classify, stage_counterfactual, stage_estimate, stage_invert,
    stage_report, stage_screen, stage_simulate, stage_verify_cm, PipelineError, RunConfig,
};

#[derive(Parser)]
#[command(name = "auctionlab", version, about = "Procurement auction toolkit")]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores); never affects output bytes.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Artifact directory; overrides the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Test size for the screens; overrides the config.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Minimum simultaneous bids for a screened pair.
    #[arg(long, global = true)]
    min_joint: Option<usize>,

    /// Counterfactual pricing mode.
    #[arg(long, global = true, value_enum)]
    pricing_mode: Option<PricingArg>,

    /// Marginal excess burden applied to rent totals.
    #[arg(long, global = true)]
    meb: Option<f64>,

    /// Revenue-share threshold for the regular-bidder classification.
    #[arg(long, global = true)]
    rev_threshold: Option<f64>,

    /// Participation-rate threshold for the regular-bidder classification.
    #[arg(long, global = true)]
    part_threshold: Option<f64>,

    /// Bandwidth for the discrete-covariate kernels.
    #[arg(long, global = true)]
    h_n: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PricingArg {
    /// Price against bidders outside the ring (mechanism-consistent).
    Cm,
    /// Price within the ring, excluding the winner.
    Paper,
}

#[derive(Subcommand)]
enum Command {
    /// Generate equilibrium bid data (writes bids.csv and truth.csv).
    Simulate,
    /// Classify bidders into fringe and regular (writes enriched.csv).
    Classify,
    /// Fit the local polynomial estimator (writes lpe_dump.csv).
    Estimate,
    /// Recover pseudo-costs from bids (writes pseudo_costs.csv).
    Invert,
    /// Run the collusion screens (writes screens.json).
    Screen,
    /// Price the collusion-proof counterfactual (writes rent_report.json).
    Counterfactual,
    /// Verify the collusion-proof auction by enumeration, or replay one
    /// report profile from JSON.
    VerifyCm {
        /// JSON file of reports `[{"bidder", "cost", "coalition": [..]}]`;
        /// when given, the mechanism runs once and prints the outcome.
        #[arg(long)]
        reports: Option<PathBuf>,
        /// Punishment transfer for the single-profile replay.
        #[arg(long, default_value_t = 1.0)]
        transfer: f64,
    },
    /// Collate the manifest from existing artifacts (writes manifest.json).
    Report,
    /// Run every stage in order.
    Run,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    if let Some(alpha) = cli.alpha {
        cfg.screens.alpha = alpha;
    }
    if let Some(min_joint) = cli.min_joint {
        cfg.screens.min_joint = min_joint;
    }
    if let Some(mode) = cli.pricing_mode {
        cfg.counterfactual.pricing_mode = match mode {
            PricingArg::Cm => PricingMode::MechanismConsistent,
            PricingArg::Paper => PricingMode::PaperLiteral,
        };
    }
    if let Some(meb) = cli.meb {
        cfg.counterfactual.meb = meb;
    }
    if let Some(v) = cli.rev_threshold {
        cfg.classify.rev_threshold = v;
    }
    if let Some(v) = cli.part_threshold {
        cfg.classify.part_threshold = v;
    }
    if let Some(v) = cli.h_n {
        cfg.estimate.h_n = v;
    }
    Ok(cfg)
}

fn replay_reports(path: &PathBuf, transfer: f64) -> Result<(), String> {
    if !path.exists() {
        return Err(format!("input path `{}` does not exist", path.display()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let reports: Vec<auctionlab::mechanism::CoalitionReport> =
        serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let outcome =
        auctionlab::mechanism::run_mechanism(&reports, transfer).map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&outcome).map_err(|e| e.to_string())?);
    Ok(())
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = load_config(cli)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if cfg.workers > 0 {
            b = b.num_threads(cfg.workers);
        }
        b.build().map_err(|e| PipelineError::Config(e.to_string()))?
    };
    match &cli.command {
        Command::Simulate => pool.install(|| stage_simulate(&cfg)),
        Command::Classify => pool.install(|| stage_classify(&cfg)),
        Command::Estimate => pool.install(|| stage_estimate(&cfg)),
        Command::Invert => pool.install(|| stage_invert(&cfg)).map(|_| ()),
        Command::Screen => pool.install(|| stage_screen(&cfg)).map(|rep| {
            eprintln!(
                "screened {} pairs; broad ring {}, tight ring {}",
                rep.pairs.len(),
                rep.broad_ring.len(),
                rep.tight_ring.len()
            );
        }),
        Command::Counterfactual => pool.install(|| stage_counterfactual(&cfg)).map(|rep| {
            for ring in &rep.rings {
                eprintln!(
                    "ring {}: rent {:.6} ({:.4}% of spend, {:.4}% with excess burden)",
                    ring.label,
                    ring.total_rent,
                    100.0 * ring.pct,
                    100.0 * ring.pct_with_meb
                );
            }
        }),
        Command::VerifyCm { reports, transfer } => match reports {
            Some(path) => replay_reports(path, *transfer)
                .map_err(|message| PipelineError::Stage { stage: "verify-cm", message }),
            None => pool.install(|| stage_verify_cm(&cfg)).map(|rep| {
                eprintln!(
                    "checked {} partitions, {} deviations: {}",
                    rep.partitions_checked,
                    rep.deviations_checked,
                    if rep.holds() { "no counterexamples" } else { "COUNTEREXAMPLES FOUND" }
                );
            }),
        },
        Command::Report => pool.install(|| stage_report(&cfg)).map(|m| {
            eprintln!("manifest written ({} artifacts)", m.artifacts.len());
        }),
        Command::Run => pool.install(|| run_pipeline(&cfg)).map(|m| {
            eprintln!(
                "pipeline complete: {} artifacts in {}",
                m.artifacts.len(),
                cfg.out_dir.display()
            );
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(PipelineError::MissingInput(path)) => {
            eprintln!("error: input path `{}` does not exist", path.display());
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
