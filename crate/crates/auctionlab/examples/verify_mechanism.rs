//! Brute-force verification of the collusion-proof auction: enumerate every
//! coalition partition, cost profile, and coordinated deviation, then show
//! that a deliberately broken price rule is caught.
//!
//! ```bash
//! cargo run --release -p auctionlab --example verify_mechanism
//! ```

use auctionlab::mechanism::{verify_theorem, verify_theorem_with_rule, PriceRule};

fn main() {
    let grid = [1.0, 2.0, 3.0, 4.0, 5.0];
    for n in 2..=4u32 {
        let report = verify_theorem(&grid, n, 1.0).unwrap();
        println!(
            "n = {n}: {} partitions, {} cost profiles, {} deviations -> {}",
            report.partitions_checked,
            report.cost_profiles_checked,
            report.deviations_checked,
            if report.holds() { "no counterexamples" } else { "VIOLATIONS" }
        );
    }

    // Mutate the price rule: pay the winner its own report. Truth-telling
    // stops being dominant and the verifier produces a concrete scenario.
    let broken = verify_theorem_with_rule(&grid, 3, 1.0, PriceRule::WinnerOwnCost).unwrap();
    println!(
        "\nbroken rule: {} truthfulness violations",
        broken.truthfulness_violations
    );
    if let Some(ex) = broken.counterexamples.iter().find(|e| e.property == "truthfulness") {
        println!("first counterexample:");
        println!("{}", serde_json::to_string_pretty(ex).unwrap());
    }
}
