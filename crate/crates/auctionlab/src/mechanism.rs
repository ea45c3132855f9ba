//! Coalition-reporting collusion-proof procurement auction.
//!
//! Every bidder reports a cost and the coalition it claims to belong to.
//! A disagreement is an ordered pair (i, j) where i claims j but j does not
//! reciprocate; any disagreement triggers the punishment phase (no award,
//! the accuser is charged 2t, the named party receives t, the seller keeps
//! t per disagreement). With consistent claims the standard phase runs: the
//! lowest reported cost wins, and the winner is paid the lowest reported
//! cost among bidders outside the winning coalition. Paying the winner
//! (rather than charging it) is what makes coalition utilities
//! `sum (received_i - C_i) A_i` nonnegative in a procurement setting.
//!
//! Price sign convention in [`MechanismOutcome::prices`]: positive amounts
//! are paid by the bidder to the seller, negative amounts are received.
//! The standard-phase award is also reported as the positive
//! [`MechanismOutcome::award_price`].
//!
//! [`verify_theorem`] checks dominant-strategy truthfulness, coalitional
//! rationality and efficiency by brute force over all coalition partitions,
//! all cost profiles from a grid, and all coordinated deviations by one
//! coalition (joint misreports of both costs and claimed membership),
//! emitting any counterexample it finds.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error("need at least two bidders, got {0}")]
    TooFewBidders(usize),
    #[error("punishment transfer t = {0} must be positive")]
    BadTransfer(f64),
    #[error("report for `{0}` names unknown bidder `{1}`")]
    UnknownBidder(String, String),
    #[error("duplicate report for bidder `{0}`")]
    DuplicateReport(String),
    #[error("report for `{0}` does not include itself in its coalition")]
    SelfMissing(String),
    #[error("enumeration budget exceeded: {0} cost profiles > {1}")]
    BudgetExceeded(u64, u64),
    #[error("verification needs 2..=8 bidders, got {0}")]
    BadBidderCount(u32),
    #[error("cost grid is empty")]
    EmptyGrid,
}

/// One bidder's report: a cost and a claimed coalition (including itself).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoalitionReport {
    pub bidder: String,
    pub cost: f64,
    pub coalition: BTreeSet<String>,
}

impl CoalitionReport {
    pub fn new(bidder: &str, cost: f64, coalition: &[&str]) -> Self {
        let mut set: BTreeSet<String> = coalition.iter().map(|s| s.to_string()).collect();
        set.insert(bidder.to_string());
        Self { bidder: bidder.to_string(), cost, coalition: set }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Punish,
    Standard,
}

/// Outcome of one mechanism run. Vectors align with `bidders`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub phase: Phase,
    pub bidders: Vec<String>,
    pub allocation: Vec<u8>,
    /// Signed transfers: positive = pays the seller, negative = receives.
    pub prices: Vec<f64>,
    pub seller_retained: f64,
    pub winning_coalition: Option<BTreeSet<String>>,
    /// Positive payment the winner receives in the standard phase.
    pub award_price: Option<f64>,
    /// The award fell back to the reserve because no outsider existed.
    pub reserve_capped: bool,
}

fn validate_reports(reports: &[CoalitionReport]) -> Result<Vec<String>, MechanismError> {
    let mut ids = Vec::with_capacity(reports.len());
    let mut seen = BTreeSet::new();
    for r in reports {
        if !seen.insert(r.bidder.clone()) {
            return Err(MechanismError::DuplicateReport(r.bidder.clone()));
        }
        ids.push(r.bidder.clone());
    }
    for r in reports {
        if !r.coalition.contains(&r.bidder) {
            return Err(MechanismError::SelfMissing(r.bidder.clone()));
        }
        for member in &r.coalition {
            if !seen.contains(member) {
                return Err(MechanismError::UnknownBidder(r.bidder.clone(), member.clone()));
            }
        }
    }
    Ok(ids)
}

/// All ordered pairs (i, j) where i claims j but j does not claim i.
pub fn detect_disagreements(
    reports: &[CoalitionReport],
) -> Result<BTreeSet<(String, String)>, MechanismError> {
    validate_reports(reports)?;
    let by_id: BTreeMap<&str, &CoalitionReport> =
        reports.iter().map(|r| (r.bidder.as_str(), r)).collect();
    let mut out = BTreeSet::new();
    for r in reports {
        for named in &r.coalition {
            if *named == r.bidder {
                continue;
            }
            if !by_id[named.as_str()].coalition.contains(&r.bidder) {
                out.insert((r.bidder.clone(), named.clone()));
            }
        }
    }
    Ok(out)
}

/// Run the mechanism with no reserve: if every bidder sits in the winning
/// coalition there is nobody to price against and no award is made.
pub fn run_mechanism(
    reports: &[CoalitionReport],
    t: f64,
) -> Result<MechanismOutcome, MechanismError> {
    run_mechanism_with_reserve(reports, t, None)
}

/// Run the mechanism; `reserve` caps the standard-phase price when the
/// winning coalition spans every bidder (market data runs pass the
/// engineer's estimate here).
pub fn run_mechanism_with_reserve(
    reports: &[CoalitionReport],
    t: f64,
    reserve: Option<f64>,
) -> Result<MechanismOutcome, MechanismError> {
    if reports.len() < 2 {
        return Err(MechanismError::TooFewBidders(reports.len()));
    }
    if !(t > 0.0) {
        return Err(MechanismError::BadTransfer(t));
    }
    let ids = validate_reports(reports)?;
    let n = ids.len();
    let index: BTreeMap<&str, usize> =
        ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let disagreements = detect_disagreements(reports)?;
    if !disagreements.is_empty() {
        let mut prices = vec![0.0; n];
        let mut retained = 0.0;
        for (accuser, named) in &disagreements {
            prices[index[accuser.as_str()]] += 2.0 * t;
            prices[index[named.as_str()]] -= t;
            retained += t;
        }
        return Ok(MechanismOutcome {
            phase: Phase::Punish,
            bidders: ids,
            allocation: vec![0; n],
            prices,
            seller_retained: retained,
            winning_coalition: None,
            award_price: None,
            reserve_capped: false,
        });
    }

    // No disagreements: mutual claims are symmetric, so their transitive
    // closure partitions the bidders.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for r in reports {
        let i = index[r.bidder.as_str()];
        for named in &r.coalition {
            let j = index[named.as_str()];
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }

    let winner = (0..n)
        .min_by(|&a, &b| {
            reports[a]
                .cost
                .partial_cmp(&reports[b].cost)
                .unwrap()
                .then_with(|| ids[a].cmp(&ids[b]))
        })
        .unwrap();
    let winner_root = find(&mut parent, winner);
    let coalition: BTreeSet<String> = (0..n)
        .filter(|&i| find(&mut parent, i) == winner_root)
        .map(|i| ids[i].clone())
        .collect();
    let outside_min = (0..n)
        .filter(|&i| find(&mut parent, i) != winner_root)
        .map(|i| reports[i].cost)
        .fold(f64::INFINITY, f64::min);

    let (award, reserve_capped) = if outside_min.is_finite() {
        (Some(outside_min), false)
    } else {
        (reserve, reserve.is_some())
    };

    let mut allocation = vec![0u8; n];
    let mut prices = vec![0.0; n];
    if let Some(price) = award {
        allocation[winner] = 1;
        prices[winner] = -price;
    }
    Ok(MechanismOutcome {
        phase: Phase::Standard,
        bidders: ids,
        allocation,
        prices,
        seller_retained: 0.0,
        winning_coalition: Some(coalition),
        award_price: award,
        reserve_capped,
    })
}

/// Pricing rule for verification runs; the buggy variant exists so the
/// verifier can demonstrate it catches broken mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriceRule {
    /// Lowest reported cost outside the winning coalition (the real rule).
    LowestOutside,
    /// The winner is paid its own reported cost (deliberately broken).
    WinnerOwnCost,
}

/// A violated property, with the full scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Counterexample {
    pub property: String,
    /// Coalition partition as sorted index sets.
    pub partition: Vec<Vec<u32>>,
    pub true_costs: Vec<f64>,
    /// The deviating coalition (empty for rationality/efficiency failures
    /// under truth-telling).
    pub coalition: Vec<u32>,
    /// Reported costs and claim sets of the deviation, when applicable.
    pub deviation_costs: Option<Vec<f64>>,
    pub deviation_claims: Option<Vec<Vec<u32>>>,
    pub utility_truth: f64,
    pub utility_deviation: f64,
}

/// Verification summary over the full enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremReport {
    pub n: u32,
    pub grid: Vec<f64>,
    pub t: f64,
    pub price_rule: PriceRule,
    pub partitions_checked: u64,
    pub cost_profiles_checked: u64,
    pub deviations_checked: u64,
    pub truthfulness_violations: u64,
    pub rationality_violations: u64,
    pub efficiency_violations: u64,
    /// First counterexamples found, in deterministic enumeration order.
    pub counterexamples: Vec<Counterexample>,
}

impl TheoremReport {
    pub fn holds(&self) -> bool {
        self.truthfulness_violations == 0
            && self.rationality_violations == 0
            && self.efficiency_violations == 0
    }
}

const MAX_STORED_COUNTEREXAMPLES: usize = 100;
const PROFILE_BUDGET: u64 = 1_000_000;
const MAX_VERIFY_N: u32 = 8;

/// Evaluation of one report profile on index-based bidders.
/// Returns (punish, winner, award, net transfers pays-positive).
fn eval_reports(
    costs: &[f64],
    claims: &[u16],
    n: usize,
    t: f64,
    reserve: f64,
    rule: PriceRule,
) -> (bool, usize, f64, [f64; MAX_VERIFY_N as usize]) {
    let mut net = [0.0; MAX_VERIFY_N as usize];
    let mut punish = false;
    for i in 0..n {
        for j in 0..n {
            if i != j && claims[i] >> j & 1 == 1 && claims[j] >> i & 1 == 0 {
                punish = true;
                net[i] += 2.0 * t;
                net[j] -= t;
            }
        }
    }
    if punish {
        return (true, usize::MAX, 0.0, net);
    }
    // Mutual claims only; close transitively with a tiny union-find.
    let mut parent = [0usize; MAX_VERIFY_N as usize];
    for (i, p) in parent.iter_mut().enumerate().take(n) {
        *p = i;
    }
    let root = |parent: &mut [usize; MAX_VERIFY_N as usize], mut i: usize| {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    };
    for i in 0..n {
        for j in i + 1..n {
            if claims[i] >> j & 1 == 1 && claims[j] >> i & 1 == 1 {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut winner = 0usize;
    for i in 1..n {
        if costs[i] < costs[winner] {
            winner = i;
        }
    }
    let wroot = root(&mut parent, winner);
    let mut outside_min = f64::INFINITY;
    for i in 0..n {
        if root(&mut parent, i) != wroot && costs[i] < outside_min {
            outside_min = costs[i];
        }
    }
    let price = match rule {
        PriceRule::LowestOutside => {
            if outside_min.is_finite() {
                outside_min
            } else {
                reserve
            }
        }
        PriceRule::WinnerOwnCost => costs[winner],
    };
    (false, winner, price, net)
}

/// Coalition utility given true costs: award minus the winner's true cost if
/// the winner belongs to the coalition, minus any net punishment transfers.
fn coalition_utility(
    mask: u16,
    true_costs: &[f64],
    punish: bool,
    winner: usize,
    award: f64,
    net: &[f64; MAX_VERIFY_N as usize],
    n: usize,
) -> f64 {
    if punish {
        let mut u = 0.0;
        for (i, v) in net.iter().enumerate().take(n) {
            if mask >> i & 1 == 1 {
                u -= v;
            }
        }
        return u;
    }
    if winner != usize::MAX && mask >> winner & 1 == 1 {
        award - true_costs[winner]
    } else {
        0.0
    }
}

fn set_partitions(n: usize) -> Vec<Vec<u16>> {
    // Restricted-growth strings: block index of element i is at most
    // 1 + max block index among elements 0..i.
    let mut out = Vec::new();
    let mut assignment = vec![0usize; n];
    fn rec(i: usize, n: usize, max_block: usize, assignment: &mut Vec<usize>, out: &mut Vec<Vec<u16>>) {
        if i == n {
            let blocks = assignment.iter().max().unwrap() + 1;
            let mut masks = vec![0u16; blocks];
            for (elem, &b) in assignment.iter().enumerate() {
                masks[b] |= 1 << elem;
            }
            out.push(masks);
            return;
        }
        for b in 0..=max_block + 1 {
            assignment[i] = b;
            rec(i + 1, n, max_block.max(b), assignment, out);
        }
    }
    if n > 0 {
        assignment[0] = 0;
        rec(1, n, 0, &mut assignment, &mut out);
    }
    out
}

/// Exhaustively verify truthfulness, rationality and efficiency on a grid.
pub fn verify_theorem(grid: &[f64], n: u32, t: f64) -> Result<TheoremReport, MechanismError> {
    verify_theorem_with_rule(grid, n, t, PriceRule::LowestOutside)
}

/// As [`verify_theorem`], with a selectable pricing rule so broken rules can
/// be shown to produce counterexamples.
pub fn verify_theorem_with_rule(
    grid: &[f64],
    n: u32,
    t: f64,
    rule: PriceRule,
) -> Result<TheoremReport, MechanismError> {
    if !(2..=MAX_VERIFY_N).contains(&n) {
        return Err(MechanismError::BadBidderCount(n));
    }
    if grid.is_empty() {
        return Err(MechanismError::EmptyGrid);
    }
    if !(t > 0.0) {
        return Err(MechanismError::BadTransfer(t));
    }
    let g = grid.len() as u64;
    let profiles = g.checked_pow(n).filter(|&p| p <= PROFILE_BUDGET);
    let n_profiles = profiles.ok_or(MechanismError::BudgetExceeded(
        g.saturating_pow(n),
        PROFILE_BUDGET,
    ))?;
    let n = n as usize;
    // Reserve above the grid top keeps the all-inclusive coalition awardable,
    // so efficiency stays checkable when every bidder reports one ring.
    let reserve = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;

    let partitions = set_partitions(n);
    // Claim options per bidder: any subset containing itself.
    let claim_options: Vec<Vec<u16>> = (0..n)
        .map(|i| (0..1u16 << n).filter(|m| m >> i & 1 == 1).collect())
        .collect();

    struct TaskResult {
        deviations: u64,
        truth_viol: u64,
        rat_viol: u64,
        eff_viol: u64,
        examples: Vec<Counterexample>,
    }

    let mask_to_vec = |mask: u16| -> Vec<u32> {
        (0..n as u32).filter(|&i| mask >> i & 1 == 1).collect()
    };

    // One task per (partition, cost profile); deviations enumerated inside.
    let tasks: Vec<(usize, u64)> = (0..partitions.len())
        .flat_map(|p| (0..n_profiles).map(move |c| (p, c)))
        .collect();

    let results: Vec<TaskResult> = tasks
        .par_iter()
        .map(|&(p_idx, profile_idx)| {
            let partition = &partitions[p_idx];
            let mut true_costs = [0.0; MAX_VERIFY_N as usize];
            let mut rem = profile_idx;
            for c in true_costs.iter_mut().take(n) {
                *c = grid[(rem % g) as usize];
                rem /= g;
            }
            // Truthful claims: each bidder claims its true coalition.
            let mut truth_claims = [0u16; MAX_VERIFY_N as usize];
            for &block in partition {
                for i in 0..n {
                    if block >> i & 1 == 1 {
                        truth_claims[i] = block;
                    }
                }
            }
            let mut res = TaskResult {
                deviations: 0,
                truth_viol: 0,
                rat_viol: 0,
                eff_viol: 0,
                examples: Vec::new(),
            };
            let partition_vec: Vec<Vec<u32>> =
                partition.iter().map(|&m| mask_to_vec(m)).collect();

            let (punish, winner, award, net) = eval_reports(
                &true_costs[..n],
                &truth_claims[..n],
                n,
                t,
                reserve,
                rule,
            );
            debug_assert!(!punish, "truthful reports never disagree");

            // Efficiency: the winner must carry the lowest true cost.
            let min_cost =
                true_costs[..n].iter().cloned().fold(f64::INFINITY, f64::min);
            if winner == usize::MAX || true_costs[winner] > min_cost {
                res.eff_viol += 1;
                if res.examples.len() < MAX_STORED_COUNTEREXAMPLES {
                    res.examples.push(Counterexample {
                        property: "efficiency".to_string(),
                        partition: partition_vec.clone(),
                        true_costs: true_costs[..n].to_vec(),
                        coalition: vec![],
                        deviation_costs: None,
                        deviation_claims: None,
                        utility_truth: 0.0,
                        utility_deviation: 0.0,
                    });
                }
            }

            for &coalition_mask in partition {
                let u_truth = coalition_utility(
                    coalition_mask,
                    &true_costs[..n],
                    punish,
                    winner,
                    award,
                    &net,
                    n,
                );
                if u_truth < -1e-12 {
                    res.rat_viol += 1;
                    if res.examples.len() < MAX_STORED_COUNTEREXAMPLES {
                        res.examples.push(Counterexample {
                            property: "coalitional-rationality".to_string(),
                            partition: partition_vec.clone(),
                            true_costs: true_costs[..n].to_vec(),
                            coalition: mask_to_vec(coalition_mask),
                            deviation_costs: None,
                            deviation_claims: None,
                            utility_truth: u_truth,
                            utility_deviation: u_truth,
                        });
                    }
                }

                // Joint deviations: every member picks any cost and any
                // claim set containing itself; outsiders stay truthful.
                let members: Vec<usize> =
                    (0..n).filter(|&i| coalition_mask >> i & 1 == 1).collect();
                let mut dev_costs = true_costs;
                let mut dev_claims = truth_claims;
                let mut odometer = vec![0usize; members.len()];
                loop {
                    for (slot, &member) in members.iter().enumerate() {
                        let opt = odometer[slot];
                        let n_claims = claim_options[member].len();
                        dev_costs[member] = grid[opt / n_claims];
                        dev_claims[member] = claim_options[member][opt % n_claims];
                    }
                    res.deviations += 1;
                    let (p2, w2, a2, net2) =
                        eval_reports(&dev_costs[..n], &dev_claims[..n], n, t, reserve, rule);
                    let u_dev = coalition_utility(
                        coalition_mask,
                        &true_costs[..n],
                        p2,
                        w2,
                        a2,
                        &net2,
                        n,
                    );
                    if u_dev > u_truth + 1e-9 {
                        res.truth_viol += 1;
                        if res.examples.len() < MAX_STORED_COUNTEREXAMPLES {
                            res.examples.push(Counterexample {
                                property: "truthfulness".to_string(),
                                partition: partition_vec.clone(),
                                true_costs: true_costs[..n].to_vec(),
                                coalition: mask_to_vec(coalition_mask),
                                deviation_costs: Some(dev_costs[..n].to_vec()),
                                deviation_claims: Some(
                                    dev_claims[..n].iter().map(|&m| mask_to_vec(m)).collect(),
                                ),
                                utility_truth: u_truth,
                                utility_deviation: u_dev,
                            });
                        }
                    }
                    // Advance the odometer.
                    let mut slot = 0;
                    loop {
                        if slot == members.len() {
                            break;
                        }
                        odometer[slot] += 1;
                        let cap = grid.len() * claim_options[members[slot]].len();
                        if odometer[slot] < cap {
                            break;
                        }
                        odometer[slot] = 0;
                        slot += 1;
                    }
                    if slot == members.len() {
                        break;
                    }
                }
            }
            res
        })
        .collect();

    let mut report = TheoremReport {
        n: n as u32,
        grid: grid.to_vec(),
        t,
        price_rule: rule,
        partitions_checked: partitions.len() as u64,
        cost_profiles_checked: n_profiles * partitions.len() as u64,
        deviations_checked: 0,
        truthfulness_violations: 0,
        rationality_violations: 0,
        efficiency_violations: 0,
        counterexamples: Vec::new(),
    };
    for r in results {
        report.deviations_checked += r.deviations;
        report.truthfulness_violations += r.truth_viol;
        report.rationality_violations += r.rat_viol;
        report.efficiency_violations += r.eff_viol;
        for ex in r.examples {
            if report.counterexamples.len() < MAX_STORED_COUNTEREXAMPLES {
                report.counterexamples.push(ex);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn singleton(bidder: &str, cost: f64) -> CoalitionReport {
        CoalitionReport::new(bidder, cost, &[])
    }

    #[test]
    fn no_disagreement_among_singletons() {
        let reports = vec![singleton("1", 10.0), singleton("2", 12.0), singleton("3", 15.0)];
        assert!(detect_disagreements(&reports).unwrap().is_empty());
    }

    #[test]
    fn one_sided_claim_is_a_disagreement() {
        let reports = vec![
            CoalitionReport::new("1", 10.0, &["2"]),
            singleton("2", 12.0),
        ];
        let d = detect_disagreements(&reports).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.contains(&("1".to_string(), "2".to_string())));
    }

    #[test]
    fn mutual_claims_are_consistent() {
        let reports = vec![
            CoalitionReport::new("1", 10.0, &["2"]),
            CoalitionReport::new("2", 12.0, &["1"]),
        ];
        assert!(detect_disagreements(&reports).unwrap().is_empty());
    }

    #[test]
    fn unknown_bidder_in_claim_errors() {
        let reports = vec![CoalitionReport::new("1", 10.0, &["ghost"]), singleton("2", 1.0)];
        assert!(matches!(
            detect_disagreements(&reports),
            Err(MechanismError::UnknownBidder(_, _))
        ));
    }

    #[test]
    fn singletons_collapse_to_second_price() {
        let reports = vec![singleton("1", 10.0), singleton("2", 12.0), singleton("3", 15.0)];
        let out = run_mechanism(&reports, 1.0).unwrap();
        assert_eq!(out.phase, Phase::Standard);
        assert_eq!(out.allocation, vec![1, 0, 0]);
        assert_eq!(out.award_price, Some(12.0));
        assert_eq!(out.prices[0], -12.0);
        assert_eq!(out.seller_retained, 0.0);
    }

    #[test]
    fn winning_coalition_prices_against_outsiders() {
        // Partition {{1,2},{3}}: bidder 1 wins and the only outsider is 3,
        // so the award is 15 even though 2 reported 12.
        let reports = vec![
            CoalitionReport::new("1", 10.0, &["2"]),
            CoalitionReport::new("2", 12.0, &["1"]),
            singleton("3", 15.0),
        ];
        let out = run_mechanism(&reports, 1.0).unwrap();
        assert_eq!(out.phase, Phase::Standard);
        assert_eq!(out.award_price, Some(15.0));
        let coalition = out.winning_coalition.unwrap();
        assert!(coalition.contains("1") && coalition.contains("2") && !coalition.contains("3"));
    }

    #[test]
    fn punishment_transfers_and_balance() {
        // 1 claims 2 without reciprocation: 1 pays 2t, 2 receives t, the
        // seller keeps t.
        let reports = vec![
            CoalitionReport::new("1", 10.0, &["2"]),
            singleton("2", 12.0),
            singleton("3", 15.0),
        ];
        let out = run_mechanism(&reports, 1.0).unwrap();
        assert_eq!(out.phase, Phase::Punish);
        assert_eq!(out.allocation, vec![0, 0, 0]);
        assert_eq!(out.prices, vec![2.0, -1.0, 0.0]);
        assert_eq!(out.seller_retained, 1.0);
        // Net money flow balances: sum of transfers equals what the seller keeps.
        let net: f64 = out.prices.iter().sum();
        assert!((net - out.seller_retained).abs() < 1e-12);
    }

    #[test]
    fn multi_disagreement_balance() {
        let reports = vec![
            CoalitionReport::new("1", 10.0, &["2"]),
            CoalitionReport::new("2", 12.0, &["3"]),
            singleton("3", 15.0),
        ];
        let out = run_mechanism(&reports, 2.0).unwrap();
        assert_eq!(out.phase, Phase::Punish);
        let net: f64 = out.prices.iter().sum();
        assert!((net - out.seller_retained).abs() < 1e-12);
        assert_eq!(out.seller_retained, 4.0);
    }

    #[test]
    fn grand_coalition_without_reserve_makes_no_award() {
        let reports = vec![
            CoalitionReport::new("1", 10.0, &["2"]),
            CoalitionReport::new("2", 12.0, &["1"]),
        ];
        let out = run_mechanism(&reports, 1.0).unwrap();
        assert_eq!(out.phase, Phase::Standard);
        assert_eq!(out.allocation, vec![0, 0]);
        assert_eq!(out.award_price, None);

        let capped = run_mechanism_with_reserve(&reports, 1.0, Some(20.0)).unwrap();
        assert_eq!(capped.award_price, Some(20.0));
        assert!(capped.reserve_capped);
        assert_eq!(capped.allocation, vec![1, 0]);
    }

    #[test]
    fn outcome_invariant_to_report_order() {
        let reports = vec![
            CoalitionReport::new("1", 10.0, &["2"]),
            CoalitionReport::new("2", 12.0, &["1"]),
            singleton("3", 15.0),
        ];
        let mut reversed = reports.clone();
        reversed.reverse();
        let a = run_mechanism(&reports, 1.0).unwrap();
        let b = run_mechanism(&reversed, 1.0).unwrap();
        assert_eq!(a.award_price, b.award_price);
        assert_eq!(a.winning_coalition, b.winning_coalition);
        let wa = a.bidders.iter().zip(&a.allocation).find(|(_, &x)| x == 1).unwrap().0;
        let wb = b.bidders.iter().zip(&b.allocation).find(|(_, &x)| x == 1).unwrap().0;
        assert_eq!(wa, wb);
    }

    #[test]
    fn lowest_cost_tie_breaks_lexicographically() {
        let reports = vec![singleton("zed", 10.0), singleton("abe", 10.0), singleton("mid", 11.0)];
        let out = run_mechanism(&reports, 1.0).unwrap();
        let widx = out.allocation.iter().position(|&a| a == 1).unwrap();
        assert_eq!(out.bidders[widx], "abe");
    }

    #[test]
    fn standard_phase_singletons_is_second_price_on_all_profiles() {
        // Exhaustive over the 5^3 profiles: lowest cost wins, pays the
        // second lowest.
        let grid = [1.0, 2.0, 3.0, 4.0, 5.0];
        for a in grid {
            for b in grid {
                for c in grid {
                    let reports =
                        vec![singleton("x", a), singleton("y", b), singleton("z", c)];
                    let out = run_mechanism(&reports, 1.0).unwrap();
                    let mut sorted = [a, b, c];
                    sorted.sort_by(|u, v| u.partial_cmp(v).unwrap());
                    assert_eq!(out.award_price, Some(sorted[1]));
                    let widx = out.allocation.iter().position(|&x| x == 1).unwrap();
                    let wcost = [a, b, c][widx];
                    assert_eq!(wcost, sorted[0]);
                }
            }
        }
    }

    #[test]
    fn theorem_holds_for_three_bidders() {
        let grid = [1.0, 2.0, 3.0, 4.0, 5.0];
        let rep = verify_theorem(&grid, 3, 1.0).unwrap();
        assert!(rep.holds(), "counterexamples: {:?}", rep.counterexamples.first());
        assert_eq!(rep.partitions_checked, 5);
        assert!(rep.deviations_checked > 0);
    }

    #[test]
    fn theorem_holds_for_two_bidders_vickrey() {
        let grid = [1.0, 2.0, 3.0, 4.0, 5.0];
        let rep = verify_theorem(&grid, 2, 1.0).unwrap();
        assert!(rep.holds());
    }

    #[test]
    fn broken_price_rule_is_caught() {
        let grid = [1.0, 2.0, 3.0, 4.0, 5.0];
        let rep = verify_theorem_with_rule(&grid, 3, 1.0, PriceRule::WinnerOwnCost).unwrap();
        assert!(rep.truthfulness_violations > 0);
        let ex = rep
            .counterexamples
            .iter()
            .find(|e| e.property == "truthfulness")
            .expect("stored counterexample");
        assert!(ex.utility_deviation > ex.utility_truth);
    }

    #[test]
    fn budget_guard_fires() {
        let grid: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert!(matches!(
            verify_theorem(&grid, 4, 1.0),
            Err(MechanismError::BudgetExceeded(_, _))
        ));
    }

    proptest::proptest! {
        #[test]
        fn singletons_always_collapse_to_second_price(
            costs in proptest::collection::vec(0.01f64..100.0, 2..6)
        ) {
            let reports: Vec<CoalitionReport> = costs
                .iter()
                .enumerate()
                .map(|(i, &c)| singleton(&format!("b{i:02}"), c))
                .collect();
            let out = run_mechanism(&reports, 1.0).unwrap();
            let mut sorted = costs.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            proptest::prop_assert_eq!(out.phase, Phase::Standard);
            proptest::prop_assert_eq!(out.award_price, Some(sorted[1]));
            let widx = out.allocation.iter().position(|&x| x == 1).unwrap();
            proptest::prop_assert_eq!(costs[widx], sorted[0]);
        }
    }

    #[test]
    fn standard_phase_price_covers_winner_report() {
        // Whenever an outsider with a higher report exists, the winner's
        // award covers its reported cost.
        let grid = [1.0, 2.5, 4.0];
        for a in grid {
            for b in grid {
                for c in grid {
                    let reports = vec![
                        CoalitionReport::new("1", a, &["2"]),
                        CoalitionReport::new("2", b, &["1"]),
                        singleton("3", c),
                    ];
                    let out = run_mechanism(&reports, 1.0).unwrap();
                    let widx = out.allocation.iter().position(|&x| x == 1).unwrap();
                    let wcost = [a, b, c][widx];
                    if widx != 2 && c >= wcost {
                        assert!(out.award_price.unwrap() >= wcost);
                    }
                }
            }
        }
    }
}
