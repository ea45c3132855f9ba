//! Recover bidder costs from bids via the first-order condition, first with
//! the true bid distributions (an exact round trip) and then with estimated
//! ones.
//!
//! ```bash
//! cargo run --release -p auctionlab --example recover_costs
//! ```

use std::collections::BTreeMap;

use auctionlab::gpv::invert_dataset;
use auctionlab::lpe::{FittedLpe, LpeConfig};
use auctionlab::synth::{
    generate_dataset, CostFamily, MarketConfig, ParticipantsSpec, TrueSymmetricHazards,
    XDistribution,
};

fn main() {
    let family = CostFamily::Uniform { lo: 0.0, hi: 1.0 };
    let mut cfg = MarketConfig::example();
    cfg.auctions = 500;
    cfg.pool0 = 12;
    cfg.pool1 = 0;
    cfg.participants = ParticipantsSpec::FixedCounts { n0: 3, n1: 0 };
    cfg.cost0 = family.clone();
    cfg.cost1 = family.clone();
    cfg.x_dist = XDistribution::Constant { value: 1.0 };
    cfg.seed = 8;
    let market = generate_dataset(&cfg).unwrap();
    let truth: BTreeMap<(String, String), f64> = market
        .truth
        .iter()
        .map(|t| ((t.auction_id.clone(), t.bidder_id.clone()), t.true_cost))
        .collect();

    // Route 1: hand the inverter the true distributions.
    let exact_model = TrueSymmetricHazards::new(family, 3).unwrap();
    let exact = invert_dataset(&market.dataset, &exact_model);
    let worst = exact
        .iter()
        .map(|r| (r.c_hat - truth[&(r.auction_id.clone(), r.bidder_id.clone())]).abs())
        .fold(0.0_f64, f64::max);
    println!("with true distributions: worst |c_hat - c| = {worst:.2e} (analytic round trip)");

    // Route 2: estimate the distributions first.
    let fitted = FittedLpe::fit(&market.dataset, &LpeConfig::default()).unwrap();
    let estimated = invert_dataset(&market.dataset, &fitted);
    let mut errors: Vec<f64> = estimated
        .iter()
        .filter(|r| !r.flags.any())
        .map(|r| (r.c_hat - truth[&(r.auction_id.clone(), r.bidder_id.clone())]).abs())
        .collect();
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let flagged = estimated.iter().filter(|r| r.flags.any()).count();
    println!(
        "with estimated distributions: median |c_hat - c| = {:.4}, p90 = {:.4} ({} of {} rows flagged)",
        errors[errors.len() / 2],
        errors[errors.len() * 9 / 10],
        flagged,
        estimated.len()
    );

    println!("\nsample rows (bid -> recovered cost vs truth):");
    for r in estimated.iter().step_by(estimated.len() / 8).take(8) {
        let c = truth[&(r.auction_id.clone(), r.bidder_id.clone())];
        println!(
            "  {} {}: b = {:.4}, c_hat = {:.4}, c = {:.4}, markup = {:.4}",
            r.auction_id, r.bidder_id, r.bid, r.c_hat, c, r.markup
        );
    }
}
