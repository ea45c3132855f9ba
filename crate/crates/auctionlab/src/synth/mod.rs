//! Synthetic equilibrium markets with known cost primitives.
//!
//! Bids are generated from exact (symmetric) or shooting-solved (asymmetric)
//! equilibrium strategies, so downstream estimators can be validated against
//! the retained true costs. A cartel can be planted after generation to give
//! the screens something to find.

mod equilibrium;
mod family;
mod generate;

pub use equilibrium::{
    asymmetric_equilibrium_solve, symmetric_equilibrium_bid, AsymmetricSolution, EquilibriumError,
    SymmetricStrategy,
};
pub use family::{CostFamily, FamilyError};
pub use generate::{
    derive_rng, generate_dataset, plant_cartel, write_bids_csv, write_truth_csv, CartelConduct,
    CartelSpec, MarketConfig, ParticipantsSpec, SyntheticMarket, TrueSymmetricHazards,
    TruthRecord, XDistribution,
};
