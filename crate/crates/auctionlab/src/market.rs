//! Bid-level market data: loading, validation, enrichment and bidder typing.
//!
//! The input is a flat CSV with one bid per row. Loading attaches winners
//! (lowest bid, ties broken by lexicographically smallest bidder id),
//! office-to-site distances, and backlog-derived capacity/utilization.
//! [`classify_bidders`] then splits bidders into fringe (type 0) and regular
//! (type 1) by revenue share and participation rate.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_miles, GeoError};

/// Required input columns, in documentation order.
pub const INPUT_COLUMNS: [&str; 10] = [
    "auction_id",
    "letting_date",
    "engineer_estimate",
    "site_lat",
    "site_lon",
    "bidder_id",
    "office_lat",
    "office_lon",
    "bid",
    "backlog",
];

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}` in input header")]
    MissingColumn(String),
    #[error("line {line}: {msg}")]
    BadRow { line: u64, msg: String },
    #[error("duplicate bid for auction `{auction}` by bidder `{bidder}`")]
    DuplicateBid { auction: String, bidder: String },
    #[error("coordinate error: {0}")]
    Geo(#[from] GeoError),
    #[error("classification threshold {0} outside (0, 1)")]
    BadThreshold(f64),
    #[error("total winning revenue is zero; shares undefined")]
    ZeroWinningRevenue,
    #[error("unknown bidder `{0}`")]
    UnknownBidder(String),
    #[error("bidder `{0}` participates in no auction")]
    NoParticipation(String),
}

/// A market participant with classification state and derived covariates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bidder {
    pub id: String,
    pub office_lat: f64,
    pub office_lon: f64,
    /// 0 = fringe, 1 = regular. Set by [`classify_bidders`].
    pub type_k: u8,
    /// Bidder's winning-bid value as a fraction of all winning-bid value.
    pub revenue_share: f64,
    /// Fraction of auctions in which the bidder submitted a bid.
    pub participation_rate: f64,
    /// Maximum backlog carried during the sample, in currency millions.
    pub capacity: f64,
}

/// One bid in one auction, with bidder covariates at letting time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BidRecord {
    pub auction_id: String,
    pub bidder_id: String,
    /// Bid in currency millions; strictly positive.
    pub bid: f64,
    pub type_k: u8,
    /// Office-to-site great-circle distance in miles.
    pub distance: f64,
    pub backlog: f64,
    /// backlog / capacity, or 0 when capacity is 0.
    pub utilization: f64,
    pub won: bool,
}

/// A letting: one procured project with its attached bids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectAuction {
    pub id: String,
    pub letting_date: NaiveDate,
    /// Engineer's estimate, currency millions; strictly positive.
    pub engineer_estimate: f64,
    pub site_lat: f64,
    pub site_lon: f64,
    pub bids: Vec<BidRecord>,
    pub n0: u32,
    pub n1: u32,
}

impl ProjectAuction {
    pub fn n_bidders(&self) -> u32 {
        self.bids.len() as u32
    }

    /// The winning bid record.
    pub fn winner(&self) -> &BidRecord {
        self.bids
            .iter()
            .find(|b| b.won)
            .expect("every auction carries exactly one winner")
    }
}

/// Immutable view of a loaded market.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dataset {
    /// Keyed by bidder id; iteration order is the id order.
    pub bidders: BTreeMap<String, Bidder>,
    /// Sorted by (letting_date, id).
    pub auctions: Vec<ProjectAuction>,
}

impl Dataset {
    pub fn n_bids(&self) -> usize {
        self.auctions.iter().map(|a| a.bids.len()).sum()
    }

    pub fn auction(&self, id: &str) -> Option<&ProjectAuction> {
        self.auctions.iter().find(|a| a.id == id)
    }
}

/// Outcome of a load: the dataset plus row-level diagnostics.
#[derive(Debug)]
pub struct LoadReport {
    pub dataset: Dataset,
    /// Auctions dropped because they attracted a single bid.
    pub dropped_single_bidder: usize,
    /// Human-readable warnings with 1-based line numbers.
    pub warnings: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    auction_id: String,
    letting_date: String,
    engineer_estimate: f64,
    site_lat: f64,
    site_lon: f64,
    bidder_id: String,
    office_lat: f64,
    office_lon: f64,
    bid: f64,
    backlog: f64,
}

/// Load a bids CSV from a file path.
pub fn load_dataset(path: &Path) -> Result<LoadReport, MarketError> {
    let file = std::fs::File::open(path)?;
    load_dataset_from(file)
}

/// Load a bids CSV from any reader. See [`INPUT_COLUMNS`] for the schema.
pub fn load_dataset_from<R: Read>(reader: R) -> Result<LoadReport, MarketError> {
    let mut rdr = csv::Reader::from_reader(reader);
    {
        let headers = rdr.headers()?;
        for col in INPUT_COLUMNS {
            if !headers.iter().any(|h| h == col) {
                return Err(MarketError::MissingColumn(col.to_string()));
            }
        }
    }

    struct AuctionAcc {
        letting_date: NaiveDate,
        engineer_estimate: f64,
        site_lat: f64,
        site_lon: f64,
        rows: Vec<(String, f64, f64, u64)>, // bidder, bid, backlog, line
    }

    let mut warnings = Vec::new();
    let mut auctions: BTreeMap<String, AuctionAcc> = BTreeMap::new();
    let mut offices: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();

    for (idx, row) in rdr.deserialize::<RawRow>().enumerate() {
        let line = idx as u64 + 2; // 1-based, after the header
        let row = row.map_err(|e| MarketError::BadRow { line, msg: e.to_string() })?;
        let date = NaiveDate::parse_from_str(&row.letting_date, "%Y-%m-%d").map_err(|e| {
            MarketError::BadRow { line, msg: format!("letting_date `{}`: {e}", row.letting_date) }
        })?;
        if !(row.bid > 0.0) {
            return Err(MarketError::BadRow { line, msg: format!("bid {} must be > 0", row.bid) });
        }
        if !(row.engineer_estimate > 0.0) {
            return Err(MarketError::BadRow {
                line,
                msg: format!("engineer_estimate {} must be > 0", row.engineer_estimate),
            });
        }
        if row.backlog < 0.0 {
            return Err(MarketError::BadRow {
                line,
                msg: format!("backlog {} must be >= 0", row.backlog),
            });
        }
        // Coordinate validation up front so bad rows carry line numbers.
        haversine_miles(row.site_lat, row.site_lon, row.office_lat, row.office_lon)?;

        let key = (row.auction_id.clone(), row.bidder_id.clone());
        if !seen.insert(key) {
            return Err(MarketError::DuplicateBid {
                auction: row.auction_id,
                bidder: row.bidder_id,
            });
        }

        match offices.get(&row.bidder_id) {
            None => {
                offices.insert(row.bidder_id.clone(), (row.office_lat, row.office_lon));
            }
            Some(&(lat, lon)) if lat != row.office_lat || lon != row.office_lon => {
                warnings.push(format!(
                    "line {line}: bidder `{}` office coordinates differ from earlier rows; keeping the first",
                    row.bidder_id
                ));
            }
            _ => {}
        }

        let acc = auctions.entry(row.auction_id.clone()).or_insert_with(|| AuctionAcc {
            letting_date: date,
            engineer_estimate: row.engineer_estimate,
            site_lat: row.site_lat,
            site_lon: row.site_lon,
            rows: Vec::new(),
        });
        if acc.letting_date != date || acc.engineer_estimate != row.engineer_estimate {
            warnings.push(format!(
                "line {line}: auction `{}` attributes differ from earlier rows; keeping the first",
                row.auction_id
            ));
        }
        acc.rows.push((row.bidder_id, row.bid, row.backlog, line));
    }

    // Capacity is the maximum backlog observed for the bidder over the sample.
    let mut capacity: BTreeMap<String, f64> = BTreeMap::new();
    for acc in auctions.values() {
        for (bidder, _, backlog, _) in &acc.rows {
            let c = capacity.entry(bidder.clone()).or_insert(0.0);
            if *backlog > *c {
                *c = *backlog;
            }
        }
    }

    let mut dataset = Dataset::default();
    for (id, (lat, lon)) in &offices {
        dataset.bidders.insert(
            id.clone(),
            Bidder {
                id: id.clone(),
                office_lat: *lat,
                office_lon: *lon,
                type_k: 0,
                revenue_share: 0.0,
                participation_rate: 0.0,
                capacity: capacity.get(id).copied().unwrap_or(0.0),
            },
        );
    }

    let mut dropped = 0usize;
    for (id, acc) in auctions {
        if acc.rows.len() < 2 {
            dropped += 1;
            warnings.push(format!("auction `{id}` has a single bidder; dropped"));
            continue;
        }
        let mut bids: Vec<BidRecord> = Vec::with_capacity(acc.rows.len());
        for (bidder_id, bid, backlog, _line) in &acc.rows {
            let (olat, olon) = offices[bidder_id];
            let distance = haversine_miles(olat, olon, acc.site_lat, acc.site_lon)?;
            let cap = capacity[bidder_id];
            let utilization = if cap > 0.0 { backlog / cap } else { 0.0 };
            bids.push(BidRecord {
                auction_id: id.clone(),
                bidder_id: bidder_id.clone(),
                bid: *bid,
                type_k: 0,
                distance,
                backlog: *backlog,
                utilization,
                won: false,
            });
        }
        // Lowest bid wins; ties go to the lexicographically smallest bidder id.
        let winner = bids
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.bid
                    .partial_cmp(&b.bid)
                    .unwrap()
                    .then_with(|| a.bidder_id.cmp(&b.bidder_id))
            })
            .map(|(i, _)| i)
            .unwrap();
        bids[winner].won = true;
        bids.sort_by(|a, b| a.bidder_id.cmp(&b.bidder_id));
        dataset.auctions.push(ProjectAuction {
            id,
            letting_date: acc.letting_date,
            engineer_estimate: acc.engineer_estimate,
            site_lat: acc.site_lat,
            site_lon: acc.site_lon,
            n0: bids.len() as u32,
            n1: 0,
            bids,
        });
    }
    dataset
        .auctions
        .sort_by(|a, b| a.letting_date.cmp(&b.letting_date).then_with(|| a.id.cmp(&b.id)));

    Ok(LoadReport { dataset, dropped_single_bidder: dropped, warnings })
}

/// Classify bidders into types and recompute per-auction type counts.
///
/// A bidder is regular (type 1) iff `revenue_share >= rev_threshold` and
/// `participation_rate >= part_threshold`. Revenue share is the bidder's
/// winning-bid value over all winning-bid value; participation rate is the
/// fraction of auctions entered.
pub fn classify_bidders(
    mut d: Dataset,
    rev_threshold: f64,
    part_threshold: f64,
) -> Result<Dataset, MarketError> {
    for t in [rev_threshold, part_threshold] {
        if !(t > 0.0 && t < 1.0) {
            return Err(MarketError::BadThreshold(t));
        }
    }

    let total_auctions = d.auctions.len() as f64;
    let mut won_value: BTreeMap<&str, f64> = BTreeMap::new();
    let mut entered: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total_winning = 0.0;
    for a in &d.auctions {
        for b in &a.bids {
            *entered.entry(&b.bidder_id).or_insert(0) += 1;
            if b.won {
                *won_value.entry(&b.bidder_id).or_insert(0.0) += b.bid;
                total_winning += b.bid;
            }
        }
    }
    if total_winning <= 0.0 {
        return Err(MarketError::ZeroWinningRevenue);
    }

    let mut types: BTreeMap<String, u8> = BTreeMap::new();
    for (id, bidder) in d.bidders.iter_mut() {
        let share = won_value.get(id.as_str()).copied().unwrap_or(0.0) / total_winning;
        let rate = entered.get(id.as_str()).copied().unwrap_or(0) as f64 / total_auctions;
        bidder.revenue_share = share;
        bidder.participation_rate = rate;
        bidder.type_k = u8::from(share >= rev_threshold && rate >= part_threshold);
        types.insert(id.clone(), bidder.type_k);
    }

    for a in &mut d.auctions {
        let mut n1 = 0u32;
        for b in &mut a.bids {
            b.type_k = *types.get(&b.bidder_id).unwrap_or(&0);
            n1 += u32::from(b.type_k == 1);
        }
        a.n1 = n1;
        a.n0 = a.bids.len() as u32 - n1;
    }
    Ok(d)
}

/// Great-circle distance in miles from a bidder's office to an auction site.
pub fn compute_distance(bidder: &Bidder, auction: &ProjectAuction) -> Result<f64, MarketError> {
    Ok(haversine_miles(
        bidder.office_lat,
        bidder.office_lon,
        auction.site_lat,
        auction.site_lon,
    )?)
}

/// Expected number of wins for a bidder: the sum of 1/N over entered auctions.
pub fn expected_wins(d: &Dataset, bidder_id: &str) -> Result<f64, MarketError> {
    if !d.bidders.contains_key(bidder_id) {
        return Err(MarketError::UnknownBidder(bidder_id.to_string()));
    }
    let mut sum = 0.0;
    let mut any = false;
    for a in &d.auctions {
        if a.bids.iter().any(|b| b.bidder_id == bidder_id) {
            sum += 1.0 / a.n_bidders() as f64;
            any = true;
        }
    }
    if !any {
        return Err(MarketError::NoParticipation(bidder_id.to_string()));
    }
    Ok(sum)
}

/// Chronologically sorted participation events for the given bidders.
///
/// One `(letting_date, bidder_id)` row per entry; rows are ordered by date
/// then bidder id so the export is deterministic.
pub fn participation_timeline(
    d: &Dataset,
    bidder_ids: &BTreeSet<String>,
) -> Vec<(NaiveDate, String)> {
    let mut events = Vec::new();
    for a in &d.auctions {
        for b in &a.bids {
            if bidder_ids.contains(&b.bidder_id) {
                events.push((a.letting_date, b.bidder_id.clone()));
            }
        }
    }
    events.sort();
    events
}

/// Format a currency amount in millions, fixed-point 6 decimals.
pub fn fmt_currency(x: f64) -> String {
    format!("{x:.6}")
}

/// Write the enriched bids CSV (input columns plus derived fields).
pub fn write_enriched_csv<W: std::io::Write>(d: &Dataset, out: W) -> Result<(), MarketError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "auction_id",
        "letting_date",
        "engineer_estimate",
        "site_lat",
        "site_lon",
        "bidder_id",
        "office_lat",
        "office_lon",
        "bid",
        "backlog",
        "type_k",
        "distance",
        "capacity",
        "utilization",
        "won",
    ])?;
    for a in &d.auctions {
        for b in &a.bids {
            let bidder = &d.bidders[&b.bidder_id];
            w.write_record([
                a.id.as_str(),
                &a.letting_date.format("%Y-%m-%d").to_string(),
                &fmt_currency(a.engineer_estimate),
                &format!("{:.6}", a.site_lat),
                &format!("{:.6}", a.site_lon),
                b.bidder_id.as_str(),
                &format!("{:.6}", bidder.office_lat),
                &format!("{:.6}", bidder.office_lon),
                &fmt_currency(b.bid),
                &fmt_currency(b.backlog),
                &b.type_k.to_string(),
                &format!("{:.6}", b.distance),
                &fmt_currency(bidder.capacity),
                &format!("{:.6}", b.utilization),
                if b.won { "true" } else { "false" },
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
