//! First-order-condition inversion of bids into pseudo-costs.
//!
//! A bid `b` by a type-k bidder facing `n_k - 1` same-type and `n_k'`
//! other-type rivals implies the cost
//!
//! ```text
//! c = b - 1 / ((n_k - 1) psi_k(b) + n_k' psi_k'(b))
//! ```
//!
//! where `psi_k = g_k / (1 - G_k)` is the bid-domain hazard of the type-k
//! conditional bid distribution. Estimation runs in log-bid space; the
//! chain rule `psi_b(b) = psi_d(ln b) / b` makes the two routes identical,
//! so hazard providers hand over bid-domain values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lpe::FittedLpe;
use crate::market::Dataset;

#[derive(Debug, Error)]
pub enum GpvError {
    #[error("bid's own type has no bidders in the auction")]
    MissingOwnType,
    #[error("fewer than one rival bidder; the inversion denominator is empty")]
    NoRivals,
    #[error("hazard denominator is zero or negative at bid {0}")]
    ZeroDenominator(f64),
    #[error("hazard model failed: {0}")]
    Model(String),
}

/// Bid-domain hazards of the two conditional bid distributions at one point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HazardPair {
    pub psi_0: f64,
    pub psi_1: f64,
}

impl HazardPair {
    pub fn get(&self, type_k: u8) -> f64 {
        if type_k == 0 {
            self.psi_0
        } else {
            self.psi_1
        }
    }
}

/// A hazard evaluation with the diagnostics that become pseudo-cost flags.
#[derive(Debug, Clone, Copy)]
pub struct HazardEval {
    pub pair: HazardPair,
    /// Some clamp (CDF into `[1e-6, 1-1e-6]` or density floor) was active.
    pub clamped: bool,
    /// The point lies outside the estimation sample's observed ranges.
    pub extrapolated: bool,
}

/// Source of conditional bid-distribution hazards.
///
/// `n0`/`n1` are the auction's type counts; implementations may skip a type
/// whose count is zero (its hazard never enters the denominator).
pub trait HazardModel: Sync {
    fn hazards(&self, bid: f64, x: f64, n0: u32, n1: u32) -> Result<HazardEval, GpvError>;
}

/// Clamp bounds applied before hazard formation.
pub const CDF_CLAMP: (f64, f64) = (1e-6, 1.0 - 1e-6);
pub const PDF_FLOOR: f64 = 1e-8;

impl HazardModel for FittedLpe {
    fn hazards(&self, bid: f64, x: f64, n0: u32, n1: u32) -> Result<HazardEval, GpvError> {
        let d = bid.ln();
        let mut psi = [0.0_f64; 2];
        let mut clamped = false;
        let mut extrapolated = false;
        for (k, count) in [(0u8, n0), (1u8, n1)] {
            if count == 0 {
                continue;
            }
            let g_cdf = self
                .cdf_hat(k, d, x, n0 as f64, n1 as f64)
                .map_err(|e| GpvError::Model(e.to_string()))?;
            let g_pdf = self
                .pdf_hat(k, d, x, n0 as f64, n1 as f64)
                .map_err(|e| GpvError::Model(e.to_string()))?;
            let g_cdf_c = g_cdf.clamp(CDF_CLAMP.0, CDF_CLAMP.1);
            let g_pdf_c = g_pdf.max(PDF_FLOOR);
            clamped |= g_cdf_c != g_cdf || g_pdf_c != g_pdf;
            extrapolated |= self.extrapolates(k, d, x);
            // Log-domain hazard mapped back to the bid domain.
            psi[k as usize] = g_pdf_c / (1.0 - g_cdf_c) / bid;
        }
        Ok(HazardEval { pair: HazardPair { psi_0: psi[0], psi_1: psi[1] }, clamped, extrapolated })
    }
}

/// Result of inverting a single bid.
#[derive(Debug, Clone, Copy)]
pub struct BidInversion {
    pub c_hat: f64,
    /// `b - c_hat`, strictly positive whenever the denominator is positive.
    pub markup: f64,
}

/// Invert one bid through the first-order condition.
pub fn invert_bid(
    bid: f64,
    type_k: u8,
    n0: u32,
    n1: u32,
    hz: &HazardPair,
) -> Result<BidInversion, GpvError> {
    let n_own = if type_k == 0 { n0 } else { n1 };
    let n_other = if type_k == 0 { n1 } else { n0 };
    if n_own < 1 {
        return Err(GpvError::MissingOwnType);
    }
    if n_own - 1 + n_other < 1 {
        return Err(GpvError::NoRivals);
    }
    let denom = (n_own - 1) as f64 * hz.get(type_k) + n_other as f64 * hz.get(1 - type_k);
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(GpvError::ZeroDenominator(bid));
    }
    let markup = 1.0 / denom;
    Ok(BidInversion { c_hat: bid - markup, markup })
}

/// Diagnostics carried by each recovered pseudo-cost.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PseudoCostFlags {
    pub negative_cost: bool,
    pub extrapolated: bool,
    pub clamped_hazard: bool,
    /// Recovered cost fails to increase with the bid within its type and
    /// covariate cell; a symptom of hazard noise between near-tied bids.
    pub non_monotone: bool,
    /// The inversion itself failed; `c_hat` is NaN and the row is excluded
    /// downstream.
    pub inversion_error: bool,
}

impl PseudoCostFlags {
    pub fn any(&self) -> bool {
        self.negative_cost
            || self.extrapolated
            || self.clamped_hazard
            || self.non_monotone
            || self.inversion_error
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.negative_cost {
            parts.push("negative_cost");
        }
        if self.extrapolated {
            parts.push("extrapolated");
        }
        if self.clamped_hazard {
            parts.push("clamped_hazard");
        }
        if self.non_monotone {
            parts.push("non_monotone");
        }
        if self.inversion_error {
            parts.push("inversion_error");
        }
        parts.join("|")
    }
}

/// A bid paired with its recovered cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoCost {
    pub auction_id: String,
    pub bidder_id: String,
    pub bid: f64,
    pub type_k: u8,
    pub c_hat: f64,
    pub markup: f64,
    pub flags: PseudoCostFlags,
}

/// Invert every bid in the dataset against a hazard model.
///
/// Failures (zero denominators, hazard-model errors) become flagged rows
/// rather than aborts, so one pathological bid cannot sink a run.
pub fn invert_dataset(d: &Dataset, model: &dyn HazardModel) -> Vec<PseudoCost> {
    let per_auction: Vec<Vec<PseudoCost>> = d
        .auctions
        .par_iter()
        .map(|a| {
            a.bids
                .iter()
                .map(|bid| {
                    let mut flags = PseudoCostFlags::default();
                    let (c_hat, markup) =
                        match model.hazards(bid.bid, a.engineer_estimate, a.n0, a.n1).and_then(
                            |ev| {
                                flags.clamped_hazard = ev.clamped;
                                flags.extrapolated = ev.extrapolated;
                                invert_bid(bid.bid, bid.type_k, a.n0, a.n1, &ev.pair)
                            },
                        ) {
                            Ok(inv) => (inv.c_hat, inv.markup),
                            Err(_) => {
                                flags.inversion_error = true;
                                (f64::NAN, f64::NAN)
                            }
                        };
                    flags.negative_cost = c_hat < 0.0;
                    PseudoCost {
                        auction_id: a.id.clone(),
                        bidder_id: bid.bidder_id.clone(),
                        bid: bid.bid,
                        type_k: bid.type_k,
                        c_hat,
                        markup,
                        flags,
                    }
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<PseudoCost> = per_auction.into_iter().flatten().collect();
    flag_non_monotone(d, &mut rows);
    rows
}

/// Mark rows whose recovered cost fails to strictly increase with the bid
/// inside a (type, x, n0, n1) cell. A greedy forward pass keeps the running
/// maximum of accepted costs and flags rows that fall at or below it, so the
/// unflagged rows always form a strictly increasing sequence.
fn flag_non_monotone(d: &Dataset, rows: &mut [PseudoCost]) {
    let mut cell_of: std::collections::BTreeMap<&str, (u64, u32, u32)> =
        std::collections::BTreeMap::new();
    for a in &d.auctions {
        cell_of.insert(a.id.as_str(), (a.engineer_estimate.to_bits(), a.n0, a.n1));
    }
    let mut groups: std::collections::BTreeMap<(u8, u64, u32, u32), Vec<usize>> =
        std::collections::BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if r.flags.inversion_error {
            continue;
        }
        let (x_bits, n0, n1) = cell_of[r.auction_id.as_str()];
        groups.entry((r.type_k, x_bits, n0, n1)).or_default().push(i);
    }
    for idx in groups.values_mut() {
        idx.sort_by(|&a, &b| {
            rows[a]
                .bid
                .partial_cmp(&rows[b].bid)
                .unwrap()
                .then_with(|| rows[a].auction_id.cmp(&rows[b].auction_id))
                .then_with(|| rows[a].bidder_id.cmp(&rows[b].bidder_id))
        });
        let mut last_kept = f64::NEG_INFINITY;
        for &i in idx.iter() {
            if rows[i].c_hat > last_kept {
                last_kept = rows[i].c_hat;
            } else {
                rows[i].flags.non_monotone = true;
            }
        }
    }
}

/// Write the pseudo-cost CSV: `auction_id, bidder_id, b, c_hat, markup, flags`.
pub fn write_pseudo_costs_csv<W: std::io::Write>(
    rows: &[PseudoCost],
    out: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["auction_id", "bidder_id", "b", "c_hat", "markup", "flags"])?;
    for r in rows {
        w.write_record([
            r.auction_id.as_str(),
            r.bidder_id.as_str(),
            &format!("{:.6}", r.bid),
            &format!("{:.6}", r.c_hat),
            &format!("{:.6}", r.markup),
            &r.flags.render(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
