//! Generate an equilibrium procurement market with known cost primitives.
//!
//! ```bash
//! cargo run --release -p auctionlab --example simulate_market
//! ```

use auctionlab::synth::{
    generate_dataset, write_bids_csv, write_truth_csv, CostFamily, MarketConfig,
    ParticipantsSpec, XDistribution,
};

fn main() {
    let cfg = MarketConfig {
        auctions: 200,
        pool0: 14,
        pool1: 5,
        participants: ParticipantsSpec::Random { n_lo: 3, n_hi: 6, type1_prob: 0.4 },
        cost0: CostFamily::Uniform { lo: 0.4, hi: 1.0 },
        cost1: CostFamily::TruncatedNormal { lo: 0.4, hi: 1.0, mu: 0.6, sigma: 0.2 },
        x_dist: XDistribution::Uniform { lo: 1.0, hi: 5.0 },
        seed: 42,
        ..MarketConfig::example()
    };
    let market = generate_dataset(&cfg).expect("valid config");

    let d = &market.dataset;
    let n_bids = d.n_bids();
    let avg_n = n_bids as f64 / d.auctions.len() as f64;
    let avg_win = d.auctions.iter().map(|a| a.winner().bid).sum::<f64>() / d.auctions.len() as f64;
    let avg_est =
        d.auctions.iter().map(|a| a.engineer_estimate).sum::<f64>() / d.auctions.len() as f64;
    println!("auctions: {}", d.auctions.len());
    println!("bids:     {n_bids} ({avg_n:.2} per auction)");
    println!("average winning bid {avg_win:.3} vs engineer estimate {avg_est:.3}");

    // Winners always bid above their true cost in equilibrium.
    let costs: std::collections::BTreeMap<(String, String), f64> = market
        .truth
        .iter()
        .map(|t| ((t.auction_id.clone(), t.bidder_id.clone()), t.true_cost))
        .collect();
    let avg_markup = d
        .auctions
        .iter()
        .map(|a| {
            let w = a.winner();
            w.bid - costs[&(a.id.clone(), w.bidder_id.clone())]
        })
        .sum::<f64>()
        / d.auctions.len() as f64;
    println!("average winner markup over true cost: {avg_markup:.4}");

    let dir = std::env::temp_dir().join("auctionlab-simulate-example");
    std::fs::create_dir_all(&dir).unwrap();
    let mut bids = Vec::new();
    write_bids_csv(d, &mut bids).unwrap();
    std::fs::write(dir.join("bids.csv"), &bids).unwrap();
    let mut truth = Vec::new();
    write_truth_csv(&market.truth, &mut truth).unwrap();
    std::fs::write(dir.join("truth.csv"), &truth).unwrap();
    println!("wrote bids.csv and truth.csv under {}", dir.display());
}
