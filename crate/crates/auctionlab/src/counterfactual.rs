//! Counterfactual cost of running the collusion-proof auction.
//!
//! Given recovered pseudo-costs and a hypothesized ring, each auction won by
//! a ring member would have been awarded at the collusion-proof price
//! instead of the winner's cost. The per-auction rent is that price minus
//! the winner's pseudo-cost; auctions won outside the ring contribute
//! nothing. Totals are expressed as a share of actual spend and grossed up
//! by the marginal excess burden of the taxes that would fund them.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gpv::PseudoCost;
use crate::market::{Dataset, ProjectAuction};

#[derive(Debug, Error)]
pub enum CounterfactualError {
    #[error("ring `{0}` names bidder `{1}` missing from the dataset")]
    UnknownMember(String, String),
    #[error("no pseudo-cost for winner `{bidder}` of auction `{auction}`")]
    MissingWinnerCost { auction: String, bidder: String },
    #[error("negative excess burden {0}")]
    BadMeb(f64),
}

/// A hypothesized ring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RingHypothesis {
    /// `broad`, `tight`, or a custom label.
    pub label: String,
    pub members: BTreeSet<String>,
}

/// Which comparison set prices the counterfactual award.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PricingMode {
    /// Lowest pseudo-cost among participants outside the ring — the price
    /// the mechanism itself would charge against the winning coalition.
    MechanismConsistent,
    /// Lowest pseudo-cost among ring participants other than the winner.
    PaperLiteral,
}

/// Why an auction dropped out of the counterfactual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    WinnerCostFlagged,
    EmptyComparisonSet,
}

/// Price outcome for one auction.
#[derive(Debug, Clone, PartialEq)]
pub enum CmPrice {
    Price { o: f64, reserve_capped: bool },
    Excluded(ExclusionReason),
}

fn cost_lookup<'a>(
    pseudo_costs: &'a [PseudoCost],
) -> BTreeMap<(&'a str, &'a str), &'a PseudoCost> {
    pseudo_costs
        .iter()
        .map(|p| ((p.auction_id.as_str(), p.bidder_id.as_str()), p))
        .collect()
}

/// Counterfactual price for one auction under a ring hypothesis.
///
/// `reserve` (typically the engineer's estimate) caps the price when the
/// comparison set is empty; without it such auctions are excluded.
pub fn cm_price(
    auction: &ProjectAuction,
    costs: &BTreeMap<(&str, &str), &PseudoCost>,
    ring: &BTreeSet<String>,
    mode: PricingMode,
    reserve: Option<f64>,
) -> Result<CmPrice, CounterfactualError> {
    let winner = auction.winner();
    let winner_cost = costs.get(&(auction.id.as_str(), winner.bidder_id.as_str())).ok_or(
        CounterfactualError::MissingWinnerCost {
            auction: auction.id.clone(),
            bidder: winner.bidder_id.clone(),
        },
    )?;
    if winner_cost.flags.any() {
        return Ok(CmPrice::Excluded(ExclusionReason::WinnerCostFlagged));
    }
    if !ring.contains(&winner.bidder_id) {
        // No coalition member won; the buyer pays the winner's own cost.
        return Ok(CmPrice::Price { o: winner_cost.c_hat, reserve_capped: false });
    }
    let comparison_min = auction
        .bids
        .iter()
        .filter(|b| b.bidder_id != winner.bidder_id)
        .filter(|b| match mode {
            PricingMode::MechanismConsistent => !ring.contains(&b.bidder_id),
            PricingMode::PaperLiteral => ring.contains(&b.bidder_id),
        })
        .filter_map(|b| costs.get(&(auction.id.as_str(), b.bidder_id.as_str())))
        .filter(|p| !p.flags.any())
        .map(|p| p.c_hat)
        .fold(f64::INFINITY, f64::min);
    if comparison_min.is_finite() {
        Ok(CmPrice::Price { o: comparison_min, reserve_capped: false })
    } else if let Some(r) = reserve {
        Ok(CmPrice::Price { o: r, reserve_capped: true })
    } else {
        Ok(CmPrice::Excluded(ExclusionReason::EmptyComparisonSet))
    }
}

/// Per-auction rent: the price premium over the winner's cost when a ring
/// member won, floored at zero, and zero otherwise.
pub fn auction_rent(o: f64, winner_cost: f64, winner_in_ring: bool) -> f64 {
    if winner_in_ring {
        (o - winner_cost).max(0.0)
    } else {
        0.0
    }
}

/// Rent summary for one ring hypothesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RingRent {
    pub label: String,
    pub mode: PricingMode,
    pub members: BTreeSet<String>,
    pub total_rent: f64,
    /// Actual winning-bid spend over included auctions.
    pub base_spend: f64,
    /// Engineer-estimate spend over the same auctions, for sensitivity.
    pub base_estimate: f64,
    pub pct: f64,
    pub meb: f64,
    pub pct_with_meb: f64,
    pub included_auctions: usize,
    pub excluded_auctions: usize,
    pub exclusions: Vec<(String, ExclusionReason)>,
    pub reserve_capped: usize,
    /// Auctions whose raw rent was negative and floored to zero.
    pub floored_negative: usize,
    pub warning: Option<String>,
}

/// Pairwise monotonicity check between nested ring hypotheses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NestedCheck {
    pub smaller: String,
    pub larger: String,
    pub holds: bool,
}

/// Full counterfactual output, serialized as `rent_report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RentReport {
    pub mode: PricingMode,
    pub meb: f64,
    pub rings: Vec<RingRent>,
    /// For every nested pair of hypotheses: total rent must weakly grow
    /// with the ring.
    pub nested_checks: Vec<NestedCheck>,
}

/// Aggregate the counterfactual over auctions for each ring hypothesis.
///
/// Auctions are visited in id order so totals are deterministic. The
/// engineer's estimate serves as the reserve when the comparison set is
/// empty.
pub fn rent_report(
    d: &Dataset,
    pseudo_costs: &[PseudoCost],
    rings: &[RingHypothesis],
    meb: f64,
    mode: PricingMode,
) -> Result<RentReport, CounterfactualError> {
    if meb < 0.0 {
        return Err(CounterfactualError::BadMeb(meb));
    }
    for ring in rings {
        for m in &ring.members {
            if !d.bidders.contains_key(m) {
                return Err(CounterfactualError::UnknownMember(ring.label.clone(), m.clone()));
            }
        }
    }
    let costs = cost_lookup(pseudo_costs);
    let mut order: Vec<&ProjectAuction> = d.auctions.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let mut out = Vec::with_capacity(rings.len());
    for ring in rings {
        let mut total_rent = 0.0;
        let mut base_spend = 0.0;
        let mut base_estimate = 0.0;
        let mut included = 0usize;
        let mut exclusions = Vec::new();
        let mut reserve_capped = 0usize;
        let mut floored = 0usize;
        for a in &order {
            let price = cm_price(a, &costs, &ring.members, mode, Some(a.engineer_estimate))?;
            match price {
                CmPrice::Excluded(reason) => {
                    exclusions.push((a.id.clone(), reason));
                }
                CmPrice::Price { o, reserve_capped: capped } => {
                    let winner = a.winner();
                    let winner_in_ring = ring.members.contains(&winner.bidder_id);
                    let c_winner =
                        costs[&(a.id.as_str(), winner.bidder_id.as_str())].c_hat;
                    let rent = auction_rent(o, c_winner, winner_in_ring);
                    if winner_in_ring && o < c_winner {
                        floored += 1;
                    }
                    if capped {
                        reserve_capped += 1;
                    }
                    total_rent += rent;
                    base_spend += winner.bid;
                    base_estimate += a.engineer_estimate;
                    included += 1;
                }
            }
        }
        let excluded = exclusions.len();
        let warning = if excluded * 5 > excluded + included {
            Some(format!(
                "{excluded} of {} auctions excluded (> 20%); rent shares are unreliable",
                excluded + included
            ))
        } else {
            None
        };
        let pct = if base_spend > 0.0 { total_rent / base_spend } else { 0.0 };
        out.push(RingRent {
            label: ring.label.clone(),
            mode,
            members: ring.members.clone(),
            total_rent,
            base_spend,
            base_estimate,
            pct,
            meb,
            pct_with_meb: pct * (1.0 + meb),
            included_auctions: included,
            excluded_auctions: excluded,
            exclusions,
            reserve_capped,
            floored_negative: floored,
            warning,
        });
    }

    let mut nested_checks = Vec::new();
    for i in 0..rings.len() {
        for j in 0..rings.len() {
            if i != j && rings[i].members.is_subset(&rings[j].members) {
                nested_checks.push(NestedCheck {
                    smaller: rings[i].label.clone(),
                    larger: rings[j].label.clone(),
                    holds: out[i].total_rent <= out[j].total_rent + 1e-12,
                });
            }
        }
    }

    Ok(RentReport { mode, meb, rings: out, nested_checks })
}
