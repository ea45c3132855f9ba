//! Competitive-bidding screens.
//!
//! Bids normalized by the engineer's estimate are regressed on cost shifters
//! (log own distance, capacity, utilization, log closest-competitor
//! distance) with project fixed effects. Screened bidders carry their own
//! four-slope blocks; everyone else shares a pooled block. Blocks carry no
//! separate bidder dummy: capacity is constant within a bidder, so each
//! screened bidder's capacity column already spans its intercept direction
//! and a dummy would be exactly collinear with it.
//! Competitive bidding implies two testable restrictions: residuals of
//! different bidders are independent (tested pairwise with Pearson
//! correlations), and cost coefficients are exchangeable across bidders
//! (tested with F statistics on nested models).
//!
//! Restriction counts follow the source conventions: the market-level test
//! pools all screened bidders into one shared block (4 restrictions per
//! collapsed block), while a pairwise test drops both pair members' slope
//! blocks into the pooled rest (2 x 4 = 8 restrictions) and keeps the
//! market model's denominator degrees of freedom.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use thiserror::Error;

use crate::market::Dataset;

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error("no observations to regress")]
    NoData,
    #[error("design is rank deficient; collinear columns: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("fewer observations ({t}) than parameters ({m})")]
    TooFewObservations { t: usize, m: usize },
    #[error("pair ({0}, {1}) has {2} joint observations, need at least 3")]
    TooFewJointObs(String, String, usize),
    #[error("residuals of `{0}` have zero variance; correlation undefined")]
    ZeroResidualVariance(String),
    #[error("bidder `{0}` not in the screened set")]
    NotScreened(String),
    #[error("invalid degrees of freedom (r={0}, denominator={1})")]
    BadDof(usize, i64),
}

/// Assignment of slope blocks to the screened bidders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlopeBlocks {
    /// Every screened bidder has its own four-slope block (unrestricted).
    PerBidder,
    /// All screened bidders share one ring block (market-level null).
    SharedRing,
    /// Like `PerBidder`, except these bidders' slopes are pooled with the
    /// rest (pairwise null).
    PooledInto(BTreeSet<String>),
}

/// Pooled regression layout: response is BID/EE, regressors are the four
/// cost shifters, with project fixed effects and bidder-specific blocks.
#[derive(Debug, Clone)]
pub struct RegressionSpec {
    /// Bidders receiving their own slope blocks (subject to `blocks`).
    pub screened: Vec<String>,
    pub blocks: SlopeBlocks,
    /// Project fixed effects, absorbed by within-auction demeaning.
    pub project_fixed_effects: bool,
}

impl RegressionSpec {
    pub fn unrestricted(screened: Vec<String>) -> Self {
        Self { screened, blocks: SlopeBlocks::PerBidder, project_fixed_effects: true }
    }
}

const SLOPE_NAMES: [&str; 4] = ["ldist", "cap", "util", "lmdist"];

/// A fitted pooled regression.
#[derive(Debug, Clone)]
pub struct PooledFit {
    /// Column names aligned with `coefficients`.
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Per-bid residuals aligned with `rows`.
    pub residuals: Vec<f64>,
    /// `(auction_id, bidder_id)` key per residual row.
    pub rows: Vec<(String, String)>,
    pub ssr: f64,
    /// Observation count T.
    pub t_obs: usize,
    /// Parameter count m, including absorbed fixed effects.
    pub m_params: usize,
}

struct RawRow {
    auction_idx: usize,
    auction_id: String,
    bidder_id: String,
    y: f64,
    slopes: [f64; 4],
}

fn build_rows(d: &Dataset) -> Vec<RawRow> {
    let mut rows = Vec::with_capacity(d.n_bids());
    for (ai, a) in d.auctions.iter().enumerate() {
        for bid in &a.bids {
            let closest = a
                .bids
                .iter()
                .filter(|other| other.bidder_id != bid.bidder_id)
                .map(|other| other.distance)
                .fold(f64::INFINITY, f64::min);
            let bidder = &d.bidders[&bid.bidder_id];
            rows.push(RawRow {
                auction_idx: ai,
                auction_id: a.id.clone(),
                bidder_id: bid.bidder_id.clone(),
                y: bid.bid / a.engineer_estimate,
                slopes: [
                    (1.0 + bid.distance).ln(),
                    bidder.capacity,
                    bid.utilization,
                    (1.0 + closest).ln(),
                ],
            });
        }
    }
    rows
}

/// Least squares over the pooled system.
///
/// With project fixed effects the per-auction means are absorbed by
/// demeaning; the reported parameter count still includes one mean per
/// auction, so `t_obs - m_params` is the honest residual degrees of freedom.
pub fn fit_pooled_regression(d: &Dataset, spec: &RegressionSpec) -> Result<PooledFit, ScreenError> {
    let rows = build_rows(d);
    if rows.is_empty() {
        return Err(ScreenError::NoData);
    }
    let t = rows.len();
    let screened_set: BTreeSet<&str> = spec.screened.iter().map(|s| s.as_str()).collect();

    // Column layout.
    let mut columns: Vec<String> = Vec::new();
    if !spec.project_fixed_effects {
        columns.push("intercept".to_string());
    }
    let block_of = |bidder: &str| -> String {
        if !screened_set.contains(bidder) {
            return "pooled".to_string();
        }
        match &spec.blocks {
            SlopeBlocks::PerBidder => format!("block::{bidder}"),
            SlopeBlocks::SharedRing => "ring".to_string(),
            SlopeBlocks::PooledInto(absorbed) => {
                if absorbed.contains(bidder) {
                    "pooled".to_string()
                } else {
                    format!("block::{bidder}")
                }
            }
        }
    };
    let mut block_keys: Vec<String> = Vec::new();
    match &spec.blocks {
        SlopeBlocks::PerBidder => {
            block_keys.extend(spec.screened.iter().map(|s| format!("block::{s}")));
        }
        SlopeBlocks::SharedRing => {
            if !spec.screened.is_empty() {
                block_keys.push("ring".to_string());
            }
        }
        SlopeBlocks::PooledInto(absorbed) => {
            block_keys.extend(
                spec.screened
                    .iter()
                    .filter(|s| !absorbed.contains(*s))
                    .map(|s| format!("block::{s}")),
            );
        }
    }
    block_keys.push("pooled".to_string());
    for key in &block_keys {
        for slope in SLOPE_NAMES {
            columns.push(format!("{key}::{slope}"));
        }
    }
    let p = columns.len();
    let col_index: BTreeMap<&str, usize> =
        columns.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let n_auctions = d.auctions.len();
    let absorbed_params = if spec.project_fixed_effects { n_auctions } else { 0 };
    let m = absorbed_params + p;
    if t <= m {
        return Err(ScreenError::TooFewObservations { t, m });
    }

    let mut design = DMatrix::zeros(t, p);
    let mut y = DVector::zeros(t);
    for (r, row) in rows.iter().enumerate() {
        y[r] = row.y;
        if let Some(&c) = col_index.get("intercept") {
            design[(r, c)] = 1.0;
        }
        let block = block_of(&row.bidder_id);
        for (s, slope) in SLOPE_NAMES.iter().enumerate() {
            let c = col_index[format!("{block}::{slope}").as_str()];
            design[(r, c)] = row.slopes[s];
        }
    }

    if spec.project_fixed_effects {
        // Absorb project means from the response and every column.
        let mut counts = vec![0usize; n_auctions];
        for row in &rows {
            counts[row.auction_idx] += 1;
        }
        let mut y_means = vec![0.0; n_auctions];
        for (r, row) in rows.iter().enumerate() {
            y_means[row.auction_idx] += y[r];
        }
        for (a, mean) in y_means.iter_mut().enumerate() {
            *mean /= counts[a] as f64;
        }
        for (r, row) in rows.iter().enumerate() {
            y[r] -= y_means[row.auction_idx];
        }
        for c in 0..p {
            let mut means = vec![0.0; n_auctions];
            for (r, row) in rows.iter().enumerate() {
                means[row.auction_idx] += design[(r, c)];
            }
            for (a, mean) in means.iter_mut().enumerate() {
                *mean /= counts[a] as f64;
            }
            for (r, row) in rows.iter().enumerate() {
                design[(r, c)] -= means[row.auction_idx];
            }
        }
    }

    // Column-pivoted QR detects rank loss and names the collinear columns;
    // the least-squares solve itself runs through the SVD.
    let qr = design.clone().col_piv_qr();
    let rdiag: Vec<f64> = (0..p).map(|i| qr.r()[(i, i)].abs()).collect();
    let tol = rdiag.iter().cloned().fold(0.0_f64, f64::max) * 1e-10 * (t as f64).sqrt();
    let rank = rdiag.iter().take_while(|&&v| v > tol).count();
    if rank < p {
        let mut seq = DVector::from_iterator(p, 0..p);
        qr.p().permute_rows(&mut seq);
        let mut collinear: Vec<String> =
            seq.iter().skip(rank).map(|&orig| columns[orig].clone()).collect();
        collinear.sort();
        return Err(ScreenError::RankDeficient(collinear));
    }
    let svd = design.clone().svd(true, true);
    let svd_eps = svd.singular_values.max() * 1e-13;
    let beta = svd
        .solve(&y, svd_eps)
        .map_err(|_| ScreenError::RankDeficient(vec!["<unsolvable>".to_string()]))?;

    let fitted = &design * &beta;
    let mut residuals = Vec::with_capacity(t);
    let mut ssr = 0.0;
    for r in 0..t {
        let e = y[r] - fitted[r];
        residuals.push(e);
        ssr += e * e;
    }

    Ok(PooledFit {
        columns,
        coefficients: beta.iter().cloned().collect(),
        residuals,
        rows: rows.into_iter().map(|r| (r.auction_id, r.bidder_id)).collect(),
        ssr,
        t_obs: t,
        m_params: m,
    })
}

/// Result of a pairwise residual-independence test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairTestResult {
    pub pair: (String, String),
    /// Sample correlation of the paired residuals.
    pub statistic: f64,
    pub p_value: f64,
    pub n_joint: usize,
    pub dof: usize,
}

/// Two-sided p-value for a Student-t statistic.
pub fn student_t_two_sided(t_stat: f64, dof: usize) -> f64 {
    if !t_stat.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, dof as f64).expect("dof >= 1");
    2.0 * (1.0 - dist.cdf(t_stat.abs()))
}

/// Upper tail area of the F(r, denominator) distribution.
pub fn f_upper_tail(f_stat: f64, r: usize, denom_dof: usize) -> f64 {
    if f_stat <= 0.0 {
        return 1.0;
    }
    let dist = FisherSnedecor::new(r as f64, denom_dof as f64).expect("positive dof");
    1.0 - dist.cdf(f_stat)
}

/// Pearson correlation test on paired residual vectors.
pub fn independence_from_residuals(
    pair: (String, String),
    res_i: &[f64],
    res_j: &[f64],
) -> Result<PairTestResult, ScreenError> {
    assert_eq!(res_i.len(), res_j.len());
    let n = res_i.len();
    if n < 3 {
        return Err(ScreenError::TooFewJointObs(pair.0, pair.1, n));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mi, mj) = (mean(res_i), mean(res_j));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in res_i.iter().zip(res_j) {
        sxy += (a - mi) * (b - mj);
        sxx += (a - mi) * (a - mi);
        syy += (b - mj) * (b - mj);
    }
    if sxx <= 0.0 {
        return Err(ScreenError::ZeroResidualVariance(pair.0));
    }
    if syy <= 0.0 {
        return Err(ScreenError::ZeroResidualVariance(pair.1));
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let dof = n - 2;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t_stat = rho * ((dof as f64) / (1.0 - rho * rho)).sqrt();
        student_t_two_sided(t_stat, dof)
    };
    Ok(PairTestResult { pair, statistic: rho, p_value, n_joint: n, dof })
}

/// Conditional-independence test for a bidder pair from a pooled fit:
/// residuals are paired over the auctions both entered.
pub fn independence_test(
    fit: &PooledFit,
    bidder_i: &str,
    bidder_j: &str,
) -> Result<PairTestResult, ScreenError> {
    let mut by_auction: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for ((auction, bidder), res) in fit.rows.iter().zip(&fit.residuals) {
        if bidder == bidder_i {
            by_auction.entry(auction).or_default().0 = Some(*res);
        } else if bidder == bidder_j {
            by_auction.entry(auction).or_default().1 = Some(*res);
        }
    }
    let mut res_i = Vec::new();
    let mut res_j = Vec::new();
    for (ri, rj) in by_auction.values() {
        if let (Some(a), Some(b)) = (ri, rj) {
            res_i.push(*a);
            res_j.push(*b);
        }
    }
    independence_from_residuals((bidder_i.to_string(), bidder_j.to_string()), &res_i, &res_j)
}

/// Scope of an exchangeability test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestScope {
    /// All screened bidders against one shared block.
    Market,
    /// One pair's blocks against the pooled rest.
    Pair(String, String),
}

/// Result of an exchangeability F-test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExchangeabilityResult {
    pub scope: TestScope,
    pub f_stat: f64,
    /// Number of restrictions.
    pub r: usize,
    pub t_obs: usize,
    /// Unrestricted parameter count (including absorbed fixed effects).
    pub m_params: usize,
    pub upper_tail_area: f64,
}

/// F-test of nested pooled fits: `((SSR_C - SSR_U)/r) / (SSR_U/(T - m))`.
pub fn exchangeability_from_fits(
    scope: TestScope,
    unrestricted: &PooledFit,
    restricted: &PooledFit,
) -> Result<ExchangeabilityResult, ScreenError> {
    let r = unrestricted.m_params.saturating_sub(restricted.m_params);
    let denom = unrestricted.t_obs as i64 - unrestricted.m_params as i64;
    if r == 0 || denom <= 0 {
        return Err(ScreenError::BadDof(r, denom));
    }
    let ssr_u = unrestricted.ssr;
    let ssr_c = restricted.ssr;
    let f_stat = ((ssr_c - ssr_u).max(0.0) / r as f64) / (ssr_u / denom as f64);
    let upper_tail_area = f_upper_tail(f_stat, r, denom as usize);
    Ok(ExchangeabilityResult {
        scope,
        f_stat,
        r,
        t_obs: unrestricted.t_obs,
        m_params: unrestricted.m_params,
        upper_tail_area,
    })
}

/// Convenience wrapper fitting both models for the requested scope.
pub fn exchangeability_test(
    d: &Dataset,
    screened: &[String],
    scope: TestScope,
    project_fixed_effects: bool,
) -> Result<ExchangeabilityResult, ScreenError> {
    let unrestricted = fit_pooled_regression(
        d,
        &RegressionSpec {
            screened: screened.to_vec(),
            blocks: SlopeBlocks::PerBidder,
            project_fixed_effects,
        },
    )?;
    let restricted_blocks = match &scope {
        TestScope::Market => SlopeBlocks::SharedRing,
        TestScope::Pair(i, j) => {
            for b in [i, j] {
                if !screened.contains(b) {
                    return Err(ScreenError::NotScreened(b.clone()));
                }
            }
            let mut set = BTreeSet::new();
            set.insert(i.clone());
            set.insert(j.clone());
            SlopeBlocks::PooledInto(set)
        }
    };
    let restricted = fit_pooled_regression(
        d,
        &RegressionSpec {
            screened: screened.to_vec(),
            blocks: restricted_blocks,
            project_fixed_effects,
        },
    )?;
    exchangeability_from_fits(scope, &unrestricted, &restricted)
}

/// All unordered regular-bidder pairs with at least `min_joint` simultaneous
/// bids, sorted by count descending then pair id.
pub fn find_frequent_pairs(d: &Dataset, min_joint: usize) -> Vec<((String, String), usize)> {
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for a in &d.auctions {
        let mut type1: Vec<&str> =
            a.bids.iter().filter(|b| b.type_k == 1).map(|b| b.bidder_id.as_str()).collect();
        type1.sort();
        for i in 0..type1.len() {
            for j in i + 1..type1.len() {
                *counts.entry((type1[i].to_string(), type1[j].to_string())).or_insert(0) += 1;
            }
        }
    }
    let mut out: Vec<((String, String), usize)> =
        counts.into_iter().filter(|(_, c)| *c >= min_joint).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// One screened pair with its simultaneous-bid summary and test outcomes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairScreenRecord {
    pub pair: (String, String),
    pub n_joint: usize,
    /// Expected number of wins over the joint auctions (sum of 1/N).
    pub expected_joint_wins: f64,
    pub first_wins: usize,
    pub second_wins: usize,
    pub independence: Option<PairTestResult>,
    pub exchangeability: Option<ExchangeabilityResult>,
}

impl PairScreenRecord {
    /// A pair fails competitive bidding if either test rejects at `alpha`.
    pub fn fails_at(&self, alpha: f64) -> bool {
        let indep = self.independence.as_ref().map(|t| t.p_value < alpha).unwrap_or(false);
        let exch =
            self.exchangeability.as_ref().map(|t| t.upper_tail_area < alpha).unwrap_or(false);
        indep || exch
    }
}

/// Ring-flagging policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlagPolicy {
    pub alpha: f64,
    /// The tight ring unions the members of this many top failing pairs,
    /// ranked by simultaneous-bid count.
    pub tight_pair_count: usize,
}

impl Default for FlagPolicy {
    fn default() -> Self {
        Self { alpha: 0.05, tight_pair_count: 3 }
    }
}

/// Flagged ring membership at two levels of strictness.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RingFlags {
    /// Members of any pair failing at least one test.
    pub broad: BTreeSet<String>,
    /// Members of the most frequently co-bidding failing pairs.
    pub tight: BTreeSet<String>,
}

/// Union the members of failing pairs into broad and tight rings.
pub fn flag_ring(records: &[PairScreenRecord], policy: &FlagPolicy) -> RingFlags {
    let mut failing: Vec<&PairScreenRecord> =
        records.iter().filter(|r| r.fails_at(policy.alpha)).collect();
    let mut broad = BTreeSet::new();
    for r in &failing {
        broad.insert(r.pair.0.clone());
        broad.insert(r.pair.1.clone());
    }
    failing.sort_by(|a, b| b.n_joint.cmp(&a.n_joint).then_with(|| a.pair.cmp(&b.pair)));
    let mut tight = BTreeSet::new();
    for r in failing.iter().take(policy.tight_pair_count) {
        tight.insert(r.pair.0.clone());
        tight.insert(r.pair.1.clone());
    }
    RingFlags { broad, tight }
}

/// Full screen output, serialized as `screens.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScreenReport {
    pub alpha: f64,
    pub min_joint: usize,
    /// Bidders appearing in at least one frequent pair, in id order.
    pub screened: Vec<String>,
    pub market_exchangeability: Option<ExchangeabilityResult>,
    pub pairs: Vec<PairScreenRecord>,
    pub broad_ring: BTreeSet<String>,
    pub tight_ring: BTreeSet<String>,
}

/// Screen configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenConfig {
    pub alpha: f64,
    pub min_joint: usize,
    pub tight_pair_count: usize,
    pub project_fixed_effects: bool,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        Self { alpha: 0.05, min_joint: 15, tight_pair_count: 3, project_fixed_effects: true }
    }
}

/// Run the whole screen battery on a classified dataset.
pub fn run_screens(d: &Dataset, cfg: &ScreenConfig) -> Result<ScreenReport, ScreenError> {
    let pairs = find_frequent_pairs(d, cfg.min_joint);
    let mut screened: BTreeSet<String> = BTreeSet::new();
    for ((i, j), _) in &pairs {
        screened.insert(i.clone());
        screened.insert(j.clone());
    }
    let screened: Vec<String> = screened.into_iter().collect();

    let market_fit = if screened.is_empty() {
        None
    } else {
        Some(fit_pooled_regression(
            d,
            &RegressionSpec {
                screened: screened.clone(),
                blocks: SlopeBlocks::PerBidder,
                project_fixed_effects: cfg.project_fixed_effects,
            },
        )?)
    };

    let market_exchangeability = match &market_fit {
        Some(fit) if screened.len() >= 2 => {
            let restricted = fit_pooled_regression(
                d,
                &RegressionSpec {
                    screened: screened.clone(),
                    blocks: SlopeBlocks::SharedRing,
                    project_fixed_effects: cfg.project_fixed_effects,
                },
            )?;
            Some(exchangeability_from_fits(TestScope::Market, fit, &restricted)?)
        }
        _ => None,
    };

    let joint_stats = |i: &str, j: &str| {
        let mut n = 0usize;
        let mut exp = 0.0;
        let mut first = 0usize;
        let mut second = 0usize;
        for a in &d.auctions {
            let has_i = a.bids.iter().any(|b| b.bidder_id == i);
            let has_j = a.bids.iter().any(|b| b.bidder_id == j);
            if has_i && has_j {
                n += 1;
                exp += 1.0 / a.n_bidders() as f64;
                let w = a.winner();
                if w.bidder_id == i {
                    first += 1;
                }
                if w.bidder_id == j {
                    second += 1;
                }
            }
        }
        (n, exp, first, second)
    };

    let records: Vec<PairScreenRecord> = pairs
        .par_iter()
        .map(|((i, j), n_joint)| {
            let (n, exp, first, second) = joint_stats(i, j);
            debug_assert_eq!(n, *n_joint);
            let independence =
                market_fit.as_ref().and_then(|fit| independence_test(fit, i, j).ok());
            let exchangeability = market_fit.as_ref().and_then(|fit| {
                let mut set = BTreeSet::new();
                set.insert(i.clone());
                set.insert(j.clone());
                let restricted = fit_pooled_regression(
                    d,
                    &RegressionSpec {
                        screened: screened.clone(),
                        blocks: SlopeBlocks::PooledInto(set),
                        project_fixed_effects: cfg.project_fixed_effects,
                    },
                )
                .ok()?;
                exchangeability_from_fits(
                    TestScope::Pair(i.clone(), j.clone()),
                    fit,
                    &restricted,
                )
                .ok()
            });
            PairScreenRecord {
                pair: (i.clone(), j.clone()),
                n_joint: *n_joint,
                expected_joint_wins: exp,
                first_wins: first,
                second_wins: second,
                independence,
                exchangeability,
            }
        })
        .collect();

    let flags = flag_ring(
        &records,
        &FlagPolicy { alpha: cfg.alpha, tight_pair_count: cfg.tight_pair_count },
    );

    Ok(ScreenReport {
        alpha: cfg.alpha,
        min_joint: cfg.min_joint,
        screened,
        market_exchangeability,
        pairs: records,
        broad_ring: flags.broad,
        tight_ring: flags.tight,
    })
}
