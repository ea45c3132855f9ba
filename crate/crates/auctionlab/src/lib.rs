//! Toolkit for low-bid (procurement) auction analysis.
//!
//! The crate covers the full arc of a procurement study:
//!
//! - [`market`] — load, validate and enrich bid-level data; classify bidders
//!   into fringe and regular types.
//! - [`synth`] — simulate equilibrium bid data from known cost primitives,
//!   including markets with a planted cartel, so every estimator can be
//!   validated against ground truth.
//! - [`lpe`] — local polynomial estimation of conditional bid distributions
//!   and densities with Epanechnikov/Gaussian product kernels and
//!   rule-of-thumb bandwidths.
//! - [`gpv`] — first-order-condition inversion of bids into pseudo-costs.
//! - [`screens`] — competitive-bidding screens: frequent-pair detection,
//!   pooled fixed-effects regressions, residual-independence and
//!   exchangeability tests, and ring flagging.
//! - [`mechanism`] — the coalition-reporting collusion-proof auction with
//!   punishment and standard phases, plus brute-force verification of its
//!   dominant-strategy properties on small instances.
//! - [`counterfactual`] — the rent a buyer would pay running the
//!   collusion-proof auction on recovered costs, with excess-burden
//!   adjustment.
//! - [`pipeline`] — batch front-end wiring the stages together behind a
//!   seeded, byte-reproducible artifact directory.
//!
//! Each major capability has a runnable example under `examples/`; the
//! `auctionlab` binary exposes the same stages as subcommands for batch use.
//!
//! ```bash
//! cargo run --release -p auctionlab --example simulate_market
//! cargo run --release -p auctionlab --example classify_bidders
//! cargo run --release -p auctionlab --example estimate_densities
//! cargo run --release -p auctionlab --example recover_costs
//! cargo run --release -p auctionlab --example screen_collusion
//! cargo run --release -p auctionlab --example collusion_proof_auction
//! cargo run --release -p auctionlab --example verify_mechanism
//! cargo run --release -p auctionlab --example counterfactual_rent
//! cargo run --release -p auctionlab --example full_pipeline
//! ```

pub mod counterfactual;
pub mod geo;
pub mod gpv;
pub mod lpe;
pub mod market;
pub mod mechanism;
pub mod pipeline;
pub mod screens;
pub mod synth;
