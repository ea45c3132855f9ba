//! Run the coalition-reporting collusion-proof auction on a few report
//! profiles: truthful singletons, a consistent two-member ring, and a
//! one-sided claim that triggers the punishment phase.
//!
//! ```bash
//! cargo run --release -p auctionlab --example collusion_proof_auction
//! ```

use auctionlab::mechanism::{detect_disagreements, run_mechanism, CoalitionReport};

fn show(title: &str, reports: &[CoalitionReport], t: f64) {
    println!("== {title} ==");
    let disagreements = detect_disagreements(reports).unwrap();
    if disagreements.is_empty() {
        println!("no disagreements; standard phase");
    } else {
        println!("disagreements: {disagreements:?}; punishment phase");
    }
    let outcome = run_mechanism(reports, t).unwrap();
    println!("{}", serde_json::to_string_pretty(&outcome).unwrap());
    println!();
}

fn main() {
    // All independent: collapses to a second-price (lowest-cost) auction.
    show(
        "independent bidders",
        &[
            CoalitionReport::new("1", 10.0, &[]),
            CoalitionReport::new("2", 12.0, &[]),
            CoalitionReport::new("3", 15.0, &[]),
        ],
        1.0,
    );

    // Bidders 1 and 2 report one ring; the price comes from outside it.
    show(
        "two-member ring",
        &[
            CoalitionReport::new("1", 10.0, &["2"]),
            CoalitionReport::new("2", 12.0, &["1"]),
            CoalitionReport::new("3", 15.0, &[]),
        ],
        1.0,
    );

    // Bidder 1 names 2, but 2 does not reciprocate: no award, bidder 1 is
    // charged 2t, bidder 2 receives t, the seller keeps t.
    show(
        "one-sided claim",
        &[
            CoalitionReport::new("1", 10.0, &["2"]),
            CoalitionReport::new("2", 12.0, &[]),
            CoalitionReport::new("3", 15.0, &[]),
        ],
        1.0,
    );
}
