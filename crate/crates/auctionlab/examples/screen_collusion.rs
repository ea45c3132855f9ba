//! Plant a four-member cartel in a competitive market and let the screens
//! find it: frequent co-bidding pairs, residual-independence tests, and
//! exchangeability F-tests.
//!
//! ```bash
//! cargo run --release -p auctionlab --example screen_collusion
//! ```

use std::collections::BTreeSet;

use auctionlab::screens::{run_screens, ScreenConfig};
use auctionlab::synth::{
    generate_dataset, CartelConduct, CartelSpec, CostFamily, MarketConfig, ParticipantsSpec,
    XDistribution,
};

fn main() {
    let members: BTreeSet<String> =
        ["r000", "r001", "r002", "r003"].iter().map(|s| s.to_string()).collect();
    let mut cfg = MarketConfig::example();
    cfg.auctions = 120;
    cfg.pool0 = 16;
    cfg.pool1 = 6;
    cfg.participants = ParticipantsSpec::FixedCounts { n0: 3, n1: 4 };
    cfg.cost0 = CostFamily::Uniform { lo: 0.4, hi: 1.0 };
    cfg.cost1 = CostFamily::Uniform { lo: 0.4, hi: 1.0 };
    cfg.x_dist = XDistribution::Uniform { lo: 1.0, hi: 4.0 };
    cfg.seed = 99;
    cfg.cartel = Some(CartelSpec {
        members: members.clone(),
        conduct: CartelConduct::DesignatedLow { margin_lo: 0.05, margin_hi: 0.15 },
    });
    let market = generate_dataset(&cfg).unwrap();

    let report = run_screens(
        &market.dataset,
        &ScreenConfig { min_joint: 15, ..ScreenConfig::default() },
    )
    .unwrap();

    println!("screened bidders: {:?}", report.screened);
    if let Some(m) = &report.market_exchangeability {
        println!(
            "market exchangeability: F = {:.4} (r = {}, T - m = {}), tail area {:.4}",
            m.f_stat,
            m.r,
            m.t_obs - m.m_params,
            m.upper_tail_area
        );
    }
    println!(
        "\n{:<14} {:>7} {:>9} {:>9} {:>9} {:>9}",
        "pair", "joint", "rho", "p", "F", "tail"
    );
    for rec in &report.pairs {
        let (rho, p) = rec
            .independence
            .as_ref()
            .map(|t| (t.statistic, t.p_value))
            .unwrap_or((f64::NAN, f64::NAN));
        let (f, uta) = rec
            .exchangeability
            .as_ref()
            .map(|t| (t.f_stat, t.upper_tail_area))
            .unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{:<14} {:>7} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            format!("({}, {})", rec.pair.0, rec.pair.1),
            rec.n_joint,
            rho,
            p,
            f,
            uta
        );
    }
    println!("\nbroad ring: {:?}", report.broad_ring);
    println!("tight ring: {:?}", report.tight_ring);
    let caught = members.is_subset(&report.broad_ring);
    println!("planted members {:?} all flagged: {caught}", members);
}
