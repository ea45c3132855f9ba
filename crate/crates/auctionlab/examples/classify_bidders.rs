//! Load a bids CSV, classify bidders into fringe and regular types, and
//! compare actual wins with expected wins.
//!
//! ```bash
//! cargo run --release -p auctionlab --example classify_bidders
//! ```

use std::collections::BTreeSet;

use auctionlab::market::{
    classify_bidders, expected_wins, load_dataset_from, participation_timeline,
};
use auctionlab::synth::{generate_dataset, write_bids_csv, MarketConfig, ParticipantsSpec};

fn main() {
    // Build an input CSV in memory; any file with the same columns works.
    let mut cfg = MarketConfig::example();
    cfg.auctions = 150;
    cfg.pool0 = 16;
    cfg.pool1 = 4;
    cfg.participants = ParticipantsSpec::FixedCounts { n0: 3, n1 : 2 };
    cfg.seed = 3;
    let market = generate_dataset(&cfg).unwrap();
    let mut csv = Vec::new();
    write_bids_csv(&market.dataset, &mut csv).unwrap();

    let report = load_dataset_from(csv.as_slice()).expect("well-formed CSV");
    println!(
        "loaded {} auctions, {} bids ({} single-bidder auctions dropped)",
        report.dataset.auctions.len(),
        report.dataset.n_bids(),
        report.dropped_single_bidder
    );

    // Regular bidders: at least 4% revenue share and 30% participation in
    // this small market (the survey-scale defaults are 1% and 3%).
    let d = classify_bidders(report.dataset, 0.04, 0.30).unwrap();
    println!("\n{:<8} {:>5} {:>9} {:>7} {:>8} {:>9}", "bidder", "type", "share", "rate", "wins", "expected");
    for (id, b) in &d.bidders {
        let wins = d
            .auctions
            .iter()
            .filter(|a| a.winner().bidder_id == *id)
            .count();
        let expected = expected_wins(&d, id).unwrap_or(0.0);
        println!(
            "{id:<8} {:>5} {:>9.3} {:>7.3} {:>8} {:>9.2}",
            b.type_k, b.revenue_share, b.participation_rate, wins, expected
        );
    }
    let n1: u32 = d.auctions.first().map(|a| a.n1).unwrap_or(0);
    let regulars: BTreeSet<String> = d
        .bidders
        .values()
        .filter(|b| b.type_k == 1)
        .map(|b| b.id.clone())
        .collect();
    println!("\n{} regular bidders; first auction carries n1 = {n1}", regulars.len());

    // Participation timeline for the regulars: the machine-readable export
    // for eyeballing entry patterns.
    let timeline = participation_timeline(&d, &regulars);
    println!("first entry events of the regular bidders:");
    for (date, bidder) in timeline.iter().take(6) {
        println!("  {date}  {bidder}");
    }
}
