//! Run the whole batch pipeline — simulate, classify, estimate, invert,
//! screen, counterfactual, verify, report — into an artifact directory.
//!
//! ```bash
//! cargo run --release -p auctionlab --example full_pipeline
//! ```

use auctionlab::pipeline::{run_pipeline, RunConfig};
use auctionlab::synth::{CostFamily, ParticipantsSpec, XDistribution};

fn main() {
    let out_dir = std::env::temp_dir().join("auctionlab-pipeline-example");
    let mut cfg = RunConfig { seed: 7, out_dir: out_dir.clone(), ..RunConfig::default() };
    cfg.simulate.auctions = 80;
    cfg.simulate.pool0 = 14;
    cfg.simulate.pool1 = 4;
    cfg.simulate.participants = ParticipantsSpec::FixedCounts { n0: 3, n1: 2 };
    cfg.simulate.cost0 = CostFamily::Uniform { lo: 0.4, hi: 1.0 };
    cfg.simulate.cost1 = CostFamily::Uniform { lo: 0.4, hi: 1.0 };
    cfg.simulate.x_dist = XDistribution::Uniform { lo: 1.0, hi: 3.0 };
    cfg.classify.rev_threshold = 0.04;
    cfg.classify.part_threshold = 0.3;
    cfg.screens.min_joint = 8;
    cfg.verify_cm.grid = vec![1.0, 2.0, 3.0];

    let manifest = run_pipeline(&cfg).expect("pipeline runs");
    println!("config hash: {}", manifest.config_hash);
    println!("artifacts in {}:", out_dir.display());
    for name in &manifest.artifacts {
        println!("  {name}");
    }
    println!("counts:");
    for (key, value) in &manifest.counts {
        println!("  {key} = {value}");
    }
}
