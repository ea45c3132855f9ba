//! Seeded generation of equilibrium bid data with retained ground truth.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use chrono::NaiveDate;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::equilibrium::{
    asymmetric_equilibrium_solve, AsymmetricSolution, EquilibriumError, SymmetricStrategy,
};
use super::family::{CostFamily, FamilyError};
use crate::gpv::{GpvError, HazardEval, HazardModel, HazardPair};
use crate::market::{BidRecord, Dataset, ProjectAuction};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("family error: {0}")]
    Family(#[from] FamilyError),
    #[error("equilibrium error: {0}")]
    Equilibrium(#[from] EquilibriumError),
    #[error("need at least 2 bidders per auction, got n_lo = {0}")]
    TooFewBidders(u32),
    #[error("participant counts ({n0}, {n1}) exceed pools ({pool0}, {pool1})")]
    PoolTooSmall { n0: u32, n1: u32, pool0: usize, pool1: usize },
    #[error("cartel member set is empty")]
    EmptyCartel,
    #[error("cartel member `{0}` does not exist in the dataset")]
    UnknownCartelMember(String),
    #[error("auction count must be positive")]
    NoAuctions,
}

/// Distribution of the project-size index X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum XDistribution {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl XDistribution {
    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            XDistribution::Constant { value } => value,
            XDistribution::Uniform { lo, hi } => rng.gen_range(lo..hi),
        }
    }
}

/// How many bidders of each type enter an auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParticipantsSpec {
    /// Every auction gets exactly these counts.
    FixedCounts { n0: u32, n1: u32 },
    /// Total N uniform on `[n_lo, n_hi]`, each slot type 1 with `type1_prob`.
    Random { n_lo: u32, n_hi: u32, type1_prob: f64 },
}

/// Conduct rule for a planted cartel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CartelConduct {
    /// The member with the lowest equilibrium bid keeps it; the others bid
    /// cover bids scaled up by a uniform draw from `[margin_lo, margin_hi]`.
    DesignatedLow { margin_lo: f64, margin_hi: f64 },
    /// Every member bid is scaled by `1 + markup` where members co-bid.
    UniformMarkup { markup: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartelSpec {
    pub members: BTreeSet<String>,
    pub conduct: CartelConduct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarketConfig {
    /// Number of auctions L.
    pub auctions: usize,
    /// Bidder pool sizes per type.
    pub pool0: usize,
    pub pool1: usize,
    pub participants: ParticipantsSpec,
    pub cost0: CostFamily,
    pub cost1: CostFamily,
    pub x_dist: XDistribution,
    pub seed: u64,
    pub cartel: Option<CartelSpec>,
    /// Lettings are spaced this many days apart starting at `start_date`.
    pub start_date: NaiveDate,
    pub days_between: u32,
    /// Winners work off backlog at a constant rate over this horizon.
    pub project_duration_days: u32,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self::example()
    }
}

impl MarketConfig {
    /// A small symmetric uniform market; fields are meant to be overridden.
    pub fn example() -> Self {
        Self {
            auctions: 100,
            pool0: 12,
            pool1: 6,
            participants: ParticipantsSpec::FixedCounts { n0: 2, n1: 2 },
            cost0: CostFamily::Uniform { lo: 0.5, hi: 1.0 },
            cost1: CostFamily::Uniform { lo: 0.5, hi: 1.0 },
            x_dist: XDistribution::Uniform { lo: 1.0, hi: 5.0 },
            seed: 1,
            cartel: None,
            start_date: NaiveDate::from_ymd_opt(2002, 1, 7).unwrap(),
            days_between: 3,
            project_duration_days: 183,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.auctions == 0 {
            return Err(SynthError::NoAuctions);
        }
        self.cost0.validate()?;
        self.cost1.validate()?;
        match self.participants {
            ParticipantsSpec::FixedCounts { n0, n1 } => {
                if n0 + n1 < 2 {
                    return Err(SynthError::TooFewBidders(n0 + n1));
                }
                if n0 as usize > self.pool0 || n1 as usize > self.pool1 {
                    return Err(SynthError::PoolTooSmall {
                        n0,
                        n1,
                        pool0: self.pool0,
                        pool1: self.pool1,
                    });
                }
            }
            ParticipantsSpec::Random { n_lo, n_hi, .. } => {
                if n_lo < 2 {
                    return Err(SynthError::TooFewBidders(n_lo));
                }
                if n_hi as usize > self.pool0 + self.pool1 {
                    return Err(SynthError::PoolTooSmall {
                        n0: n_hi,
                        n1: 0,
                        pool0: self.pool0,
                        pool1: self.pool1,
                    });
                }
            }
        }
        Ok(())
    }
}

/// True generating state for one bid, written to the `truth.csv` sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthRecord {
    pub auction_id: String,
    pub bidder_id: String,
    pub true_cost: f64,
    pub ring_member: bool,
    pub cover_bid: bool,
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub dataset: Dataset,
    pub truth: Vec<TruthRecord>,
}

/// Independent RNG stream for `(seed, tag, index)`.
pub fn derive_rng(seed: u64, tag: &str, index: u64) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(tag.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}

enum Strategy {
    Symmetric(SymmetricStrategy),
    Asymmetric(AsymmetricSolution),
}

impl Strategy {
    fn bid(&self, type_k: u8, c: f64) -> Result<f64, EquilibriumError> {
        match self {
            Strategy::Symmetric(s) => s.bid(c),
            Strategy::Asymmetric(a) => a.bid(type_k as usize, c),
        }
    }
}

const ASYM_GRID: usize = 2000;
// Shooting rebuilds the inverse strategies to ~1e-7 over the bulk of the
// support, but the layer below the singular top endpoint is closed by a
// series expansion whose residual grows with the bidder count; 2e-3 on
// unit-scale supports admits extreme splits like (1, 6) whose layer error
// peaks near 1.4e-3 while still rejecting genuinely failed solves.
const ASYM_TOL: f64 = 2e-3;

fn achievable_counts(cfg: &MarketConfig) -> Vec<(u32, u32)> {
    match cfg.participants {
        ParticipantsSpec::FixedCounts { n0, n1 } => vec![(n0, n1)],
        ParticipantsSpec::Random { n_lo, n_hi, .. } => {
            let mut v = Vec::new();
            for n in n_lo..=n_hi {
                for n1 in 0..=n {
                    let n0 = n - n1;
                    if n0 as usize <= cfg.pool0 && n1 as usize <= cfg.pool1 {
                        v.push((n0, n1));
                    }
                }
            }
            v
        }
    }
}

/// Generate L auctions of equilibrium bids; deterministic in the seed and
/// independent of thread scheduling. Applies the configured cartel, if any.
pub fn generate_dataset(cfg: &MarketConfig) -> Result<SyntheticMarket, SynthError> {
    cfg.validate()?;
    let symmetric = cfg.cost0 == cfg.cost1;

    // Equilibrium strategies per participant profile, solved up front.
    let mut strategies: BTreeMap<(u32, u32), Strategy> = BTreeMap::new();
    for (n0, n1) in achievable_counts(cfg) {
        if n0 + n1 < 2 {
            continue;
        }
        let strat = if symmetric {
            Strategy::Symmetric(SymmetricStrategy::new(cfg.cost0.clone(), n0 + n1)?)
        } else if n0 == 0 {
            Strategy::Symmetric(SymmetricStrategy::new(cfg.cost1.clone(), n1)?)
        } else if n1 == 0 {
            Strategy::Symmetric(SymmetricStrategy::new(cfg.cost0.clone(), n0)?)
        } else {
            Strategy::Asymmetric(asymmetric_equilibrium_solve(
                &cfg.cost0, &cfg.cost1, n0, n1, ASYM_GRID, ASYM_TOL,
            )?)
        };
        strategies.insert((n0, n1), strat);
    }
    // Degenerate-symmetric case: one type may enter alone under FixedCounts.
    if symmetric {
        if let ParticipantsSpec::FixedCounts { n0, n1 } = cfg.participants {
            strategies
                .entry((n0, n1))
                .or_insert(Strategy::Symmetric(SymmetricStrategy::new(cfg.cost0.clone(), n0 + n1)?));
        }
    }

    // Bidder pool with fixed ids and seeded office coordinates.
    let mut pool_rng = derive_rng(cfg.seed, "bidders", 0);
    let mut bidder_ids: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    let mut offices: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for k in 0..2usize {
        let n = if k == 0 { cfg.pool0 } else { cfg.pool1 };
        for i in 0..n {
            let id = format!("{}{i:03}", if k == 0 { "f" } else { "r" });
            let lat = pool_rng.gen_range(32.5..42.0);
            let lon = pool_rng.gen_range(-124.4..-114.1);
            offices.insert(id.clone(), (lat, lon));
            bidder_ids[k].push(id);
        }
    }

    struct RawAuction {
        id: String,
        date: NaiveDate,
        x: f64,
        site: (f64, f64),
        n0: u32,
        n1: u32,
        // (bidder id, type, true cost, bid)
        entries: Vec<(String, u8, f64, f64)>,
    }

    let raw: Vec<Result<RawAuction, SynthError>> = (0..cfg.auctions)
        .into_par_iter()
        .map(|l| {
            let mut rng = derive_rng(cfg.seed, "auction", l as u64);
            let x = cfg.x_dist.draw(&mut rng);
            let (n0, n1) = match cfg.participants {
                ParticipantsSpec::FixedCounts { n0, n1 } => (n0, n1),
                ParticipantsSpec::Random { n_lo, n_hi, type1_prob } => loop {
                    let n = rng.gen_range(n_lo..=n_hi);
                    let mut n1 = 0u32;
                    for _ in 0..n {
                        n1 += u32::from(rng.gen::<f64>() < type1_prob);
                    }
                    let n0 = n - n1;
                    if n0 as usize <= cfg.pool0 && n1 as usize <= cfg.pool1 {
                        break (n0, n1);
                    }
                },
            };
            let strat = &strategies[&(n0, n1)];

            let mut entries = Vec::with_capacity((n0 + n1) as usize);
            for (k, need) in [(0usize, n0), (1usize, n1)] {
                let mut idx: Vec<usize> = (0..bidder_ids[k].len()).collect();
                // Partial Fisher-Yates: the first `need` slots are the draw.
                for i in 0..need as usize {
                    let j = rng.gen_range(i..idx.len());
                    idx.swap(i, j);
                }
                let family = if k == 0 { &cfg.cost0 } else { &cfg.cost1 };
                for &slot in idx.iter().take(need as usize) {
                    let c_base = family.quantile(rng.gen::<f64>());
                    let bid_base = strat.bid(k as u8, c_base)?;
                    entries.push((
                        bidder_ids[k][slot].clone(),
                        k as u8,
                        x * c_base,
                        x * bid_base,
                    ));
                }
            }
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let date = cfg.start_date + chrono::Days::new(cfg.days_between as u64 * l as u64);
            let site =
                (rng.gen_range(32.5..42.0), rng.gen_range(-124.4..-114.1));
            Ok(RawAuction { id: format!("S{l:05}"), date, x, site, n0, n1, entries })
        })
        .collect();

    let mut raws = Vec::with_capacity(cfg.auctions);
    for r in raw {
        raws.push(r?);
    }

    // Sequential pass in letting order: winners and backlog trajectories.
    let mut active: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new(); // win date, value
    let duration = cfg.project_duration_days as f64;
    let mut auctions = Vec::with_capacity(raws.len());
    let mut truth = Vec::new();
    for ra in &raws {
        let mut bids = Vec::with_capacity(ra.entries.len());
        for (bidder, type_k, _cost, bid) in &ra.entries {
            let backlog = active
                .get(bidder)
                .map(|projects| {
                    projects
                        .iter()
                        .map(|(won, value)| {
                            let elapsed = (ra.date - *won).num_days() as f64;
                            (value * (1.0 - elapsed / duration)).max(0.0)
                        })
                        .sum::<f64>()
                })
                .unwrap_or(0.0);
            bids.push(BidRecord {
                auction_id: ra.id.clone(),
                bidder_id: bidder.clone(),
                bid: *bid,
                type_k: *type_k,
                distance: 0.0,    // filled below
                backlog,
                utilization: 0.0, // filled below
                won: false,
            });
        }
        let w = bids
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.bid.partial_cmp(&b.bid).unwrap().then_with(|| a.bidder_id.cmp(&b.bidder_id))
            })
            .map(|(i, _)| i)
            .unwrap();
        bids[w].won = true;
        active.entry(bids[w].bidder_id.clone()).or_default().push((ra.date, bids[w].bid));

        for ((bidder, _, cost, _), _) in ra.entries.iter().zip(&bids) {
            truth.push(TruthRecord {
                auction_id: ra.id.clone(),
                bidder_id: bidder.clone(),
                true_cost: *cost,
                ring_member: false,
                cover_bid: false,
            });
        }
        auctions.push(ProjectAuction {
            id: ra.id.clone(),
            letting_date: ra.date,
            engineer_estimate: ra.x,
            site_lat: ra.site.0,
            site_lon: ra.site.1,
            n0: ra.n0,
            n1: ra.n1,
            bids,
        });
    }

    // Capacity, utilization and distances now that backlogs are final.
    let mut capacity: BTreeMap<String, f64> = BTreeMap::new();
    for a in &auctions {
        for b in &a.bids {
            let c = capacity.entry(b.bidder_id.clone()).or_insert(0.0);
            if b.backlog > *c {
                *c = b.backlog;
            }
        }
    }
    let mut dataset = Dataset::default();
    for (k, ids) in bidder_ids.iter().enumerate() {
        for id in ids {
            let (lat, lon) = offices[id];
            dataset.bidders.insert(
                id.clone(),
                crate::market::Bidder {
                    id: id.clone(),
                    office_lat: lat,
                    office_lon: lon,
                    type_k: k as u8,
                    revenue_share: 0.0,
                    participation_rate: 0.0,
                    capacity: capacity.get(id).copied().unwrap_or(0.0),
                },
            );
        }
    }
    for mut a in auctions {
        for b in &mut a.bids {
            let (lat, lon) = offices[&b.bidder_id];
            b.distance = crate::geo::haversine_miles(lat, lon, a.site_lat, a.site_lon)
                .expect("generated coordinates are valid");
            let cap = capacity[&b.bidder_id];
            b.utilization = if cap > 0.0 { b.backlog / cap } else { 0.0 };
        }
        dataset.auctions.push(a);
    }

    let mut market = SyntheticMarket { dataset, truth };
    if let Some(cartel) = &cfg.cartel {
        plant_cartel(&mut market, &cartel.members, &cartel.conduct, cfg.seed)?;
    }
    Ok(market)
}

/// Overwrite member bids with collusive conduct in every auction where at
/// least two members are present, re-marking winners and the truth sidecar.
pub fn plant_cartel(
    market: &mut SyntheticMarket,
    members: &BTreeSet<String>,
    conduct: &CartelConduct,
    seed: u64,
) -> Result<(), SynthError> {
    if members.is_empty() {
        return Err(SynthError::EmptyCartel);
    }
    for m in members {
        if !market.dataset.bidders.contains_key(m) {
            return Err(SynthError::UnknownCartelMember(m.clone()));
        }
    }
    let mut covered: BTreeSet<(String, String)> = BTreeSet::new();
    for (l, a) in market.dataset.auctions.iter_mut().enumerate() {
        let member_idx: Vec<usize> = a
            .bids
            .iter()
            .enumerate()
            .filter(|(_, b)| members.contains(&b.bidder_id))
            .map(|(i, _)| i)
            .collect();
        if member_idx.len() < 2 {
            continue;
        }
        let mut rng = derive_rng(seed, "cartel", l as u64);
        match conduct {
            CartelConduct::DesignatedLow { margin_lo, margin_hi } => {
                let designated = *member_idx
                    .iter()
                    .min_by(|&&i, &&j| {
                        a.bids[i]
                            .bid
                            .partial_cmp(&a.bids[j].bid)
                            .unwrap()
                            .then_with(|| a.bids[i].bidder_id.cmp(&a.bids[j].bidder_id))
                    })
                    .unwrap();
                let base = a.bids[designated].bid;
                for &i in &member_idx {
                    if i != designated {
                        let u = rng.gen_range(*margin_lo..*margin_hi);
                        a.bids[i].bid = base * (1.0 + u);
                        covered.insert((a.id.clone(), a.bids[i].bidder_id.clone()));
                    }
                }
            }
            CartelConduct::UniformMarkup { markup } => {
                for &i in &member_idx {
                    a.bids[i].bid *= 1.0 + markup;
                    covered.insert((a.id.clone(), a.bids[i].bidder_id.clone()));
                }
            }
        }
        for b in &mut a.bids {
            b.won = false;
        }
        let w = a
            .bids
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| {
                x.bid.partial_cmp(&y.bid).unwrap().then_with(|| x.bidder_id.cmp(&y.bidder_id))
            })
            .map(|(i, _)| i)
            .unwrap();
        a.bids[w].won = true;
    }
    for t in &mut market.truth {
        t.ring_member = members.contains(&t.bidder_id);
        t.cover_bid = covered.contains(&(t.auction_id.clone(), t.bidder_id.clone()));
    }
    Ok(())
}

/// Exact hazards for symmetric markets with multiplicative size scaling.
///
/// Costs and bids scale with X, so the conditional bid distribution is the
/// base pushforward evaluated at `b / x` and the bid-domain hazard scales by
/// `1 / x`.
pub struct TrueSymmetricHazards {
    strategy: SymmetricStrategy,
}

impl TrueSymmetricHazards {
    pub fn new(family: CostFamily, n: u32) -> Result<Self, EquilibriumError> {
        Ok(Self { strategy: SymmetricStrategy::new(family, n)? })
    }
}

impl HazardModel for TrueSymmetricHazards {
    fn hazards(&self, bid: f64, x: f64, _n0: u32, _n1: u32) -> Result<HazardEval, GpvError> {
        let psi = self
            .strategy
            .bid_hazard(bid / x)
            .map_err(|e| GpvError::Model(e.to_string()))?
            / x;
        Ok(HazardEval {
            pair: HazardPair { psi_0: psi, psi_1: psi },
            clamped: false,
            extrapolated: false,
        })
    }
}

/// Write the market-data input CSV for a generated dataset.
pub fn write_bids_csv<W: std::io::Write>(d: &Dataset, out: W) -> Result<(), csv::Error> {
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
    ])?;
    for a in &d.auctions {
        for b in &a.bids {
            let bidder = &d.bidders[&b.bidder_id];
            w.write_record([
                a.id.as_str(),
                &a.letting_date.format("%Y-%m-%d").to_string(),
                &format!("{:.6}", a.engineer_estimate),
                &format!("{:.6}", a.site_lat),
                &format!("{:.6}", a.site_lon),
                b.bidder_id.as_str(),
                &format!("{:.6}", bidder.office_lat),
                &format!("{:.6}", bidder.office_lon),
                &format!("{:.6}", b.bid),
                &format!("{:.6}", b.backlog),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Write the ground-truth sidecar CSV.
pub fn write_truth_csv<W: std::io::Write>(truth: &[TruthRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["auction_id", "bidder_id", "true_cost", "ring_member", "cover_bid"])?;
    for t in truth {
        w.write_record([
            t.auction_id.as_str(),
            t.bidder_id.as_str(),
            &format!("{:.12}", t.true_cost),
            if t.ring_member { "true" } else { "false" },
            if t.cover_bid { "true" } else { "false" },
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpv::invert_dataset;

    fn base_cfg() -> MarketConfig {
        MarketConfig {
            auctions: 60,
            pool0: 10,
            pool1: 5,
            participants: ParticipantsSpec::FixedCounts { n0: 2, n1: 1 },
            cost0: CostFamily::Uniform { lo: 0.0, hi: 1.0 },
            cost1: CostFamily::Uniform { lo: 0.0, hi: 1.0 },
            x_dist: XDistribution::Uniform { lo: 1.0, hi: 3.0 },
            seed: 42,
            cartel: None,
            start_date: NaiveDate::from_ymd_opt(2002, 1, 7).unwrap(),
            days_between: 3,
            project_duration_days: 183,
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = base_cfg();
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_bids_csv(&a.dataset, &mut csv_a).unwrap();
        write_bids_csv(&b.dataset, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = base_cfg();
        let run = |threads: usize| {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let m = generate_dataset(&cfg).unwrap();
                let mut buf = Vec::new();
                write_bids_csv(&m.dataset, &mut buf).unwrap();
                buf
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn no_cartel_means_clean_sidecar() {
        let m = generate_dataset(&base_cfg()).unwrap();
        assert!(m.truth.iter().all(|t| !t.ring_member && !t.cover_bid));
        assert_eq!(m.truth.len(), m.dataset.n_bids());
    }

    #[test]
    fn bids_exceed_costs_and_lowest_wins() {
        let m = generate_dataset(&base_cfg()).unwrap();
        let costs: BTreeMap<(String, String), f64> = m
            .truth
            .iter()
            .map(|t| ((t.auction_id.clone(), t.bidder_id.clone()), t.true_cost))
            .collect();
        for a in &m.dataset.auctions {
            let min = a.bids.iter().map(|b| b.bid).fold(f64::INFINITY, f64::min);
            let w = a.winner();
            assert_eq!(w.bid, min);
            for b in &a.bids {
                let c = costs[&(a.id.clone(), b.bidder_id.clone())];
                assert!(b.bid >= c - 1e-12, "bid {} below cost {c}", b.bid);
            }
        }
    }

    #[test]
    fn empirical_bid_cdf_close_to_pushforward() {
        // Symmetric uniform base market with constant X: the base bids are
        // iid with CDF G(b) = (n b - 1)/(n - 1) on [1/n, 1] for n = 3.
        let mut cfg = base_cfg();
        cfg.auctions = 1000;
        cfg.x_dist = XDistribution::Constant { value: 1.0 };
        cfg.participants = ParticipantsSpec::FixedCounts { n0: 3, n1: 0 };
        let m = generate_dataset(&cfg).unwrap();
        let mut bids: Vec<f64> = m
            .dataset
            .auctions
            .iter()
            .flat_map(|a| a.bids.iter().map(|b| b.bid))
            .collect();
        bids.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = bids.len() as f64;
        let mut ks: f64 = 0.0;
        for (i, b) in bids.iter().enumerate() {
            let g = ((3.0 * b - 1.0) / 2.0).clamp(0.0, 1.0);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            ks = ks.max((g - lo).abs()).max((g - hi).abs());
        }
        assert!(ks < 0.05, "Kolmogorov distance {ks}");
    }

    #[test]
    fn true_hazard_round_trip_is_analytic() {
        let mut cfg = base_cfg();
        cfg.auctions = 150;
        cfg.participants = ParticipantsSpec::FixedCounts { n0: 3, n1: 0 };
        let m = generate_dataset(&cfg).unwrap();
        let model =
            TrueSymmetricHazards::new(CostFamily::Uniform { lo: 0.0, hi: 1.0 }, 3).unwrap();
        let costs: BTreeMap<(String, String), f64> = m
            .truth
            .iter()
            .map(|t| ((t.auction_id.clone(), t.bidder_id.clone()), t.true_cost))
            .collect();
        let rows = invert_dataset(&m.dataset, &model);
        let mut worst: f64 = 0.0;
        for r in &rows {
            let truth = costs[&(r.auction_id.clone(), r.bidder_id.clone())];
            worst = worst.max((r.c_hat - truth).abs());
        }
        assert!(worst < 1e-10, "worst inversion error {worst}");
    }

    #[test]
    fn plant_cartel_empty_members_rejected() {
        let mut m = generate_dataset(&base_cfg()).unwrap();
        let empty = BTreeSet::new();
        assert!(matches!(
            plant_cartel(
                &mut m,
                &empty,
                &CartelConduct::UniformMarkup { markup: 0.1 },
                7
            ),
            Err(SynthError::EmptyCartel)
        ));
    }

    #[test]
    fn designated_low_keeps_one_bid_and_raises_the_rest() {
        let mut cfg = base_cfg();
        cfg.auctions = 80;
        cfg.pool1 = 3;
        cfg.participants = ParticipantsSpec::FixedCounts { n0: 2, n1: 2 };
        let clean = generate_dataset(&cfg).unwrap();
        let mut planted = clean.clone();
        let members: BTreeSet<String> =
            ["r000", "r001"].iter().map(|s| s.to_string()).collect();
        plant_cartel(
            &mut planted,
            &members,
            &CartelConduct::DesignatedLow { margin_lo: 0.05, margin_hi: 0.15 },
            9,
        )
        .unwrap();
        let mut joint = 0;
        for (ca, pa) in clean.dataset.auctions.iter().zip(&planted.dataset.auctions) {
            let both: Vec<usize> = ca
                .bids
                .iter()
                .enumerate()
                .filter(|(_, b)| members.contains(&b.bidder_id))
                .map(|(i, _)| i)
                .collect();
            if both.len() < 2 {
                continue;
            }
            joint += 1;
            let unchanged: Vec<usize> = both
                .iter()
                .copied()
                .filter(|&i| (pa.bids[i].bid - ca.bids[i].bid).abs() < 1e-12)
                .collect();
            assert_eq!(unchanged.len(), 1, "exactly the designated bid stays");
            let designated_bid = pa.bids[unchanged[0]].bid;
            for &i in &both {
                if i != unchanged[0] {
                    assert!(
                        pa.bids[i].bid > designated_bid,
                        "cover bid must sit strictly above the designated bid"
                    );
                }
            }
        }
        assert!(joint > 10, "fixture needs joint participation, got {joint}");
    }

    #[test]
    fn uniform_markup_scales_member_bids() {
        let mut cfg = base_cfg();
        cfg.pool1 = 2;
        cfg.participants = ParticipantsSpec::FixedCounts { n0: 2, n1: 2 };
        let clean = generate_dataset(&cfg).unwrap();
        let mut planted = clean.clone();
        let members: BTreeSet<String> =
            ["r000", "r001"].iter().map(|s| s.to_string()).collect();
        plant_cartel(&mut planted, &members, &CartelConduct::UniformMarkup { markup: 0.1 }, 3)
            .unwrap();
        for (ca, pa) in clean.dataset.auctions.iter().zip(&planted.dataset.auctions) {
            for (cb, pb) in ca.bids.iter().zip(&pa.bids) {
                if members.contains(&cb.bidder_id) {
                    assert!((pb.bid - 1.1 * cb.bid).abs() < 1e-12);
                } else {
                    assert_eq!(pb.bid, cb.bid);
                }
            }
        }
    }
}
