//! Equilibrium bidding strategies for low-bid auctions.
//!
//! Symmetric markets use the closed-form strategy
//! `s(c) = c + integral_c^chi (1-F(u))^(n-1) du / (1-F(c))^(n-1)`,
//! evaluated with Gauss-Legendre quadrature. Asymmetric two-type markets are
//! solved as the coupled ODE system in the inverse bid functions, integrated
//! with fixed-step RK4 from the (unknown) common lowest bid up to the pinned
//! upper endpoint where both inverse strategies meet the top cost.

use std::sync::OnceLock;

use thiserror::Error;

use super::family::CostFamily;

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("cost {0} outside support [{1}, {2}]")]
    OutOfSupport(f64, f64, f64),
    #[error("need at least two bidders, got {0}")]
    TooFewBidders(u32),
    #[error("supports do not share an upper endpoint: {0} vs {1}")]
    MismatchedUpperSupport(f64, f64),
    #[error("supports do not overlap")]
    DisjointSupports,
    #[error("density vanishes at {0}; the inverse-strategy system is not integrable there")]
    VanishingDensity(f64),
    #[error("grid size {0} too small, need at least 16")]
    GridTooSmall(usize),
    #[error(
        "failed to bracket the common bid endpoint after {iterations} bisections; best residual {best_residual:.3e}"
    )]
    NoBracket { iterations: usize, best_residual: f64 },
    #[error("bid {0} outside the solved bid range [{1}, {2}]")]
    BidOutOfRange(f64, f64, f64),
}

const GL_POINTS: usize = 64;

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Nodes are roots of P_n found by Newton iteration from the Chebyshev
        // initial guess; weights are 2 / ((1-x^2) P_n'(x)^2).
        let n = GL_POINTS;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            nodes[i] = x;
            weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        (nodes, weights)
    })
}

fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

/// Equilibrium bid for a single-type market with `n >= 2` bidders.
pub fn symmetric_equilibrium_bid(
    c: f64,
    n: u32,
    family: &CostFamily,
) -> Result<f64, EquilibriumError> {
    SymmetricStrategy::new(family.clone(), n)?.bid(c)
}

/// Closed-form symmetric strategy with its inverse and bid-distribution math.
#[derive(Debug, Clone)]
pub struct SymmetricStrategy {
    family: CostFamily,
    n: u32,
}

impl SymmetricStrategy {
    pub fn new(family: CostFamily, n: u32) -> Result<Self, EquilibriumError> {
        if n < 2 {
            return Err(EquilibriumError::TooFewBidders(n));
        }
        Ok(Self { family, n })
    }

    pub fn family(&self) -> &CostFamily {
        &self.family
    }

    fn survival_pow(&self, c: f64) -> f64 {
        (1.0 - self.family.cdf(c)).powi(self.n as i32 - 1)
    }

    /// Integral of the survival power from `c` to the top of the support.
    fn survival_integral(&self, c: f64) -> f64 {
        let (_, hi) = self.family.support();
        integrate(|u| self.survival_pow(u), c, hi)
    }

    /// The bid assigned to cost `c`; strictly increasing, with `s(hi) = hi`.
    pub fn bid(&self, c: f64) -> Result<f64, EquilibriumError> {
        let (lo, hi) = self.family.support();
        if c < lo - 1e-12 || c > hi + 1e-12 {
            return Err(EquilibriumError::OutOfSupport(c, lo, hi));
        }
        let c = c.clamp(lo, hi);
        let denom = self.survival_pow(c);
        if denom <= f64::MIN_POSITIVE {
            return Ok(hi);
        }
        Ok(c + self.survival_integral(c) / denom)
    }

    /// Markup slope `s'(c) = (n-1) f(c) I(c) / (1-F(c))^n`.
    pub fn bid_derivative(&self, c: f64) -> f64 {
        let (_, hi) = self.family.support();
        let surv = 1.0 - self.family.cdf(c);
        if surv <= f64::MIN_POSITIVE || c >= hi {
            // Limit value; exact for families with positive density at the top.
            return (self.n as f64 - 1.0) / self.n as f64;
        }
        (self.n as f64 - 1.0) * self.family.pdf(c) * self.survival_integral(c)
            / surv.powi(self.n as i32)
    }

    /// Inverse strategy: recover the cost that bids `b`.
    pub fn inverse(&self, b: f64) -> Result<f64, EquilibriumError> {
        let (lo, hi) = self.family.support();
        let b_low = self.bid(lo)?;
        if b < b_low - 1e-9 || b > hi + 1e-9 {
            return Err(EquilibriumError::BidOutOfRange(b, b_low, hi));
        }
        let b = b.clamp(b_low, hi);
        // Safeguarded Newton on s(c) = b.
        let (mut clo, mut chi) = (lo, hi);
        let mut c = b.clamp(lo, hi);
        for _ in 0..200 {
            let s = self.bid(c)?;
            let err = s - b;
            if err.abs() < 1e-15 * (1.0 + b.abs()) {
                return Ok(c);
            }
            if err > 0.0 {
                chi = c;
            } else {
                clo = c;
            }
            let slope = self.bid_derivative(c).max(1e-12);
            let mut next = c - err / slope;
            if !(next > clo && next < chi) {
                next = 0.5 * (clo + chi);
            }
            if (next - c).abs() < 1e-16 * (1.0 + c.abs()) {
                return Ok(next);
            }
            c = next;
        }
        Ok(c)
    }

    /// CDF of the bid distribution implied by pushing costs through `s`.
    pub fn bid_cdf(&self, b: f64) -> Result<f64, EquilibriumError> {
        Ok(self.family.cdf(self.inverse(b)?))
    }

    /// Density of the bid distribution: `f(phi(b)) / s'(phi(b))`.
    pub fn bid_pdf(&self, b: f64) -> Result<f64, EquilibriumError> {
        let c = self.inverse(b)?;
        Ok(self.family.pdf(c) / self.bid_derivative(c))
    }

    /// Bid-domain hazard `g(b) / (1 - G(b))`.
    pub fn bid_hazard(&self, b: f64) -> Result<f64, EquilibriumError> {
        let c = self.inverse(b)?;
        let surv = 1.0 - self.family.cdf(c);
        Ok(self.family.pdf(c) / self.bid_derivative(c) / surv)
    }
}

/// Tabulated inverse strategies for a two-type market on a common bid grid.
#[derive(Debug, Clone)]
pub struct AsymmetricSolution {
    /// Common bid grid from the lowest equilibrium bid to the top cost.
    pub bid_grid: Vec<f64>,
    /// Inverse strategies `phi_k` tabulated on `bid_grid`, k = 0, 1.
    pub phi: [Vec<f64>; 2],
    /// Largest first-order-condition residual over interior grid points.
    pub max_foc_residual: f64,
}

impl AsymmetricSolution {
    pub fn b_low(&self) -> f64 {
        self.bid_grid[0]
    }

    pub fn b_high(&self) -> f64 {
        *self.bid_grid.last().unwrap()
    }

    /// Inverse strategy by linear interpolation on the grid.
    pub fn inverse_bid(&self, type_k: usize, b: f64) -> Result<f64, EquilibriumError> {
        let (lo, hi) = (self.b_low(), self.b_high());
        if b < lo - 1e-9 || b > hi + 1e-9 {
            return Err(EquilibriumError::BidOutOfRange(b, lo, hi));
        }
        let b = b.clamp(lo, hi);
        let idx = match self.bid_grid.binary_search_by(|x| x.partial_cmp(&b).unwrap()) {
            Ok(i) => return Ok(self.phi[type_k][i]),
            Err(i) => i.clamp(1, self.bid_grid.len() - 1),
        };
        let (b0, b1) = (self.bid_grid[idx - 1], self.bid_grid[idx]);
        let (p0, p1) = (self.phi[type_k][idx - 1], self.phi[type_k][idx]);
        let t = (b - b0) / (b1 - b0);
        Ok(p0 + t * (p1 - p0))
    }

    /// Forward strategy: the bid a type-`k` bidder with cost `c` submits.
    pub fn bid(&self, type_k: usize, c: f64) -> Result<f64, EquilibriumError> {
        let phi = &self.phi[type_k];
        let (clo, chi) = (phi[0], *phi.last().unwrap());
        if c < clo - 1e-9 || c > chi + 1e-9 {
            return Err(EquilibriumError::OutOfSupport(c, clo, chi));
        }
        let c = c.clamp(clo, chi);
        // phi is strictly increasing, so invert by binary search.
        let mut lo = 0usize;
        let mut hi = phi.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if phi[mid] <= c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = if phi[hi] > phi[lo] { (c - phi[lo]) / (phi[hi] - phi[lo]) } else { 0.0 };
        Ok(self.bid_grid[lo] + t * (self.bid_grid[hi] - self.bid_grid[lo]))
    }
}

/// Inverse-strategy slopes from the first-order conditions at bid `b`.
///
/// With `r_k = 1/(b - phi_k)` the two conditions are linear in the
/// log-survival derivatives `u_k = f_k(phi_k) phi_k' / (1 - F_k(phi_k))`:
/// `(n_k - 1) u_k + n_k' u_k' = r_k`. Solving the 2x2 system gives the
/// slopes. Returns `None` when a markup closes or a density vanishes.
fn inverse_slopes(
    families: [&CostFamily; 2],
    counts: [f64; 2],
    b: f64,
    p: [f64; 2],
    markup_floor: f64,
) -> Option<[f64; 2]> {
    let n_total = counts[0] + counts[1];
    let mut r = [0.0; 2];
    for k in 0..2 {
        let m = b - p[k];
        if m <= markup_floor {
            return None;
        }
        r[k] = 1.0 / m;
    }
    let u0 = (counts[1] * r[1] - (counts[1] - 1.0) * r[0]) / (n_total - 1.0);
    let u1 = (counts[0] * r[0] - (counts[0] - 1.0) * r[1]) / (n_total - 1.0);
    let mut d = [0.0; 2];
    for (k, u) in [u0, u1].into_iter().enumerate() {
        // Stage evaluations may poke just past the support ends near the
        // bottom crossing; extend the density continuously so the step that
        // detects the crossing stays integrable.
        let (lo, hi) = families[k].support();
        let f = families[k].pdf(p[k].clamp(lo, hi));
        if f <= 0.0 {
            return None;
        }
        d[k] = u * (1.0 - families[k].cdf(p[k])) / f;
    }
    Some(d)
}

/// Least squares of `y - anchor = b x + c x^2` (intercept fixed at the
/// known limit), returning `[anchor, b, c]`. The anchor turns the closure
/// into interpolation between the data window and the exact endpoint.
fn fit_anchored_quadratic(pts: &[(f64, f64)], anchor: f64) -> [f64; 3] {
    if pts.is_empty() {
        return [anchor, 0.0, 0.0];
    }
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(x, y) in pts {
        let d = y - anchor;
        s11 += x * x;
        s12 += x * x * x;
        s22 += x * x * x * x;
        r1 += x * d;
        r2 += x * x * d;
    }
    let det = s11 * s22 - s12 * s12;
    if pts.len() < 3 || det.abs() < 1e-300 {
        let b = if s11 > 0.0 { r1 / s11 } else { 0.0 };
        return [anchor, b, 0.0];
    }
    let b = (r1 * s22 - r2 * s12) / det;
    let c = (s11 * r2 - s12 * r1) / det;
    [anchor, b, c]
}

/// One forward RK4 step from `b` to `b + h`.
fn rk4_up(
    families: [&CostFamily; 2],
    counts: [f64; 2],
    b: f64,
    p: [f64; 2],
    h: f64,
    markup_floor: f64,
) -> Option<[f64; 2]> {
    let f = |bb: f64, pp: [f64; 2]| inverse_slopes(families, counts, bb, pp, markup_floor);
    let k1 = f(b, p)?;
    let k2 = f(b + 0.5 * h, [p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]])?;
    let k3 = f(b + 0.5 * h, [p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]])?;
    let k4 = f(b + h, [p[0] + h * k3[0], p[1] + h * k3[1]])?;
    let mut out = [0.0; 2];
    for k in 0..2 {
        out[k] = p[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    Some(out)
}

/// Integrate upward from a candidate lowest bid to the guard index.
///
/// Returns the trajectory values at every grid point up to `j_stop`, or
/// `None` if a markup closed (the candidate was too aggressive).
fn integrate_candidate(
    families: [&CostFamily; 2],
    counts: [f64; 2],
    lows: [f64; 2],
    grid: &[f64],
    j_stop: usize,
    phi: &mut [Vec<f64>; 2],
) -> bool {
    let h = grid[1] - grid[0];
    let markup_floor = h * 1e-6;
    let mut p = lows;
    phi[0][0] = p[0];
    phi[1][0] = p[1];
    for j in 0..j_stop {
        p = match rk4_up(families, counts, grid[j], p, h, markup_floor) {
            Some(v) => v,
            None => return false,
        };
        let b_next = grid[j + 1];
        if !(p[0].is_finite() && p[1].is_finite())
            || p[0] > b_next - markup_floor
            || p[1] > b_next - markup_floor
        {
            return false;
        }
        phi[0][j + 1] = p[0];
        phi[1][j + 1] = p[1];
    }
    true
}

/// Solve the two-type inverse-strategy system.
///
/// Both families must share the upper support endpoint: hazards explode
/// there, so markups vanish, every strategy meets the top cost, and the
/// common upper bid is pinned at that cost. The system is singular there
/// (the markup equations degenerate to 0/0), so the tables are produced in
/// two pieces. The bulk comes from shooting: the common lowest bid is the
/// one unknown, found by bisection on forward RK4 passes — candidates that
/// are too aggressive drive a markup to zero mid-run, soft ones pass above
/// the local expansion at the guard point. The thin guard band below the
/// top is closed with the expansion `phi_k(b) = b - gamma_k (b_top - b)`,
/// with `gamma_k` matched to the trajectory at the junction (its limit value
/// is `1/(N-1)`).
pub fn asymmetric_equilibrium_solve(
    family0: &CostFamily,
    family1: &CostFamily,
    n0: u32,
    n1: u32,
    grid_size: usize,
    tol: f64,
) -> Result<AsymmetricSolution, EquilibriumError> {
    if n0 + n1 < 2 {
        return Err(EquilibriumError::TooFewBidders(n0 + n1));
    }
    if grid_size < 16 {
        return Err(EquilibriumError::GridTooSmall(grid_size));
    }
    let (lo0, hi0) = family0.support();
    let (lo1, hi1) = family1.support();
    if (hi0 - hi1).abs() > 1e-12 * (1.0 + hi0.abs()) {
        return Err(EquilibriumError::MismatchedUpperSupport(hi0, hi1));
    }
    if lo0 >= hi1 || lo1 >= hi0 {
        return Err(EquilibriumError::DisjointSupports);
    }
    for (fam, lo) in [(family0, lo0), (family1, lo1)] {
        if fam.pdf(lo) <= 0.0 || fam.pdf(hi0) <= 0.0 {
            return Err(EquilibriumError::VanishingDensity(if fam.pdf(lo) <= 0.0 {
                lo
            } else {
                hi0
            }));
        }
    }

    let b_top = hi0;
    let families = [family0, family1];
    let counts = [n0 as f64, n1 as f64];
    let n_total = counts[0] + counts[1];
    let lows = [lo0, lo1];
    let floor = lo0.max(lo1);
    let range = b_top - floor;
    let target_phi = |b: f64| b - (b_top - b) / (n_total - 1.0);

    let mut phi = [vec![0.0; grid_size], vec![0.0; grid_size]];
    let mut lo_guess = floor + 1e-9 * range;
    let mut hi_guess = b_top - 1e-6 * range;
    let max_iters = 200usize;
    let mut best_gap = f64::INFINITY;
    let mut converged = false;
    let mut b_low = f64::NAN;
    let mut j_stop = 0usize;
    for _ in 0..max_iters {
        let mid = 0.5 * (lo_guess + hi_guess);
        let h = (b_top - mid) / (grid_size - 1) as f64;
        let grid: Vec<f64> = (0..grid_size).map(|j| mid + j as f64 * h).collect();
        // Guard band: stop short of the singular endpoint.
        let eps_guard = (4.0 * h).max(1e-3 * range);
        let stop = grid_size - 1 - (eps_guard / h).ceil() as usize;
        let completed = integrate_candidate(families, counts, lows, &grid, stop, &mut phi);
        let aggressive = if completed {
            let mean = 0.5 * (phi[0][stop] + phi[1][stop]);
            let gap = (mean - target_phi(grid[stop])).abs();
            best_gap = best_gap.min(gap);
            mean > target_phi(grid[stop])
        } else {
            true
        };
        if aggressive {
            lo_guess = mid;
        } else {
            hi_guess = mid;
        }
        if hi_guess - lo_guess < 1e-13 * (1.0 + b_top.abs()) {
            b_low = hi_guess;
            j_stop = stop;
            converged = completed || {
                // Re-run at the soft endpoint, which always completes.
                let h = (b_top - b_low) / (grid_size - 1) as f64;
                let grid: Vec<f64> = (0..grid_size).map(|j| b_low + j as f64 * h).collect();
                integrate_candidate(families, counts, lows, &grid, stop, &mut phi)
            };
            break;
        }
    }
    if !converged || !b_low.is_finite() {
        return Err(EquilibriumError::NoBracket { iterations: max_iters, best_residual: best_gap });
    }

    // Final pass at the converged lowest bid.
    let h = (b_top - b_low) / (grid_size - 1) as f64;
    let bid_grid: Vec<f64> = (0..grid_size).map(|j| b_low + j as f64 * h).collect();
    if !integrate_candidate(families, counts, lows, &bid_grid, j_stop, &mut phi) {
        return Err(EquilibriumError::NoBracket { iterations: max_iters, best_residual: best_gap });
    }

    // Shooting cannot resolve the boundary layer below the singular top in
    // finite precision: past some point the computed trajectory slides onto
    // a neighbouring ODE solution that misses the corner. That branch is
    // detectable because its markup-to-distance ratio departs from the limit
    // 1/(N-1). Find the last grid point where both ratios are still near the
    // limit, then close the layer with the expansion
    // `phi_k(b) = b - (a_k + b_k eps) eps` calibrated on two clean points.
    let target = 1.0 / (n_total - 1.0);
    let ratio = |k: usize, j: usize, phi: &[Vec<f64>; 2]| -> f64 {
        (bid_grid[j] - phi[k][j]) / (b_top - bid_grid[j])
    };
    let clean = |j: usize, phi: &[Vec<f64>; 2]| -> bool {
        (0..2).all(|k| {
            let rho = ratio(k, j, phi);
            rho > 0.90 * target && rho < 1.10 * target
        })
    };
    let streak = 5usize;
    let mut junction = None;
    for j in (grid_size / 2..=j_stop.saturating_sub(0)).rev() {
        if j >= streak && (j - streak + 1..=j).all(|i| clean(i, &phi)) {
            junction = Some(j);
            break;
        }
    }
    let junction = junction.ok_or(EquilibriumError::NoBracket {
        iterations: max_iters,
        best_residual: best_gap,
    })?;
    // Weighted least squares of the markup ratio on a window of clean
    // points: rho(eps) = a + b eps + c eps^2. The expansion then continues
    // the markup smoothly through the unresolvable layer and lands exactly
    // on the corner.
    let window = (grid_size / 40).max(12).min(junction);
    for k in 0..2 {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(window);
        for j in (junction + 1 - window)..=junction {
            if clean(j, &phi) {
                pts.push((b_top - bid_grid[j], ratio(k, j, &phi)));
            }
        }
        let coef = fit_anchored_quadratic(&pts, target);
        // Pin the patch to the junction value so the tables stay continuous;
        // the offset fades linearly toward the corner.
        let eps_j = b_top - bid_grid[junction];
        let rho_j = ratio(k, junction, &phi);
        let fit_j = coef[0] + coef[1] * eps_j + coef[2] * eps_j * eps_j;
        let offset = rho_j - fit_j;
        for j in junction + 1..grid_size {
            let eps = b_top - bid_grid[j];
            let rho = coef[0] + coef[1] * eps + coef[2] * eps * eps + offset * eps / eps_j;
            phi[k][j] = bid_grid[j] - rho * eps;
        }
        phi[k][grid_size - 1] = b_top;
    }

    // First-order-condition residual from centered finite differences.
    let mut max_res: f64 = 0.0;
    for j in 1..grid_size - 2 {
        let b = bid_grid[j];
        let mut u = [0.0; 2];
        for k in 0..2 {
            let slope = (phi[k][j + 1] - phi[k][j - 1]) / (2.0 * h);
            let c = phi[k][j];
            u[k] = families[k].pdf(c) * slope / (1.0 - families[k].cdf(c));
        }
        for k in 0..2 {
            let other = 1 - k;
            let denom = (counts[k] - 1.0) * u[k] + counts[other] * u[other];
            if denom > 0.0 {
                max_res = max_res.max(((b - phi[k][j]) - 1.0 / denom).abs());
            } else {
                max_res = f64::INFINITY;
            }
        }
    }
    if max_res > tol {
        return Err(EquilibriumError::NoBracket { iterations: grid_size, best_residual: max_res });
    }

    Ok(AsymmetricSolution { bid_grid, phi, max_foc_residual: max_res })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_uniform() -> CostFamily {
        CostFamily::Uniform { lo: 0.0, hi: 1.0 }
    }

    #[test]
    fn uniform_closed_form_bids() {
        // s(c) = c + (1 - c)/n for uniform[0, 1].
        let f = unit_uniform();
        assert!((symmetric_equilibrium_bid(0.5, 2, &f).unwrap() - 0.75).abs() < 1e-12);
        assert!((symmetric_equilibrium_bid(0.2, 4, &f).unwrap() - 0.4).abs() < 1e-12);
        for n in [2u32, 3, 5] {
            assert!((symmetric_equilibrium_bid(1.0, n, &f).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bid_strictly_increasing_and_above_cost() {
        for fam in [
            unit_uniform(),
            CostFamily::TruncatedNormal { lo: 0.0, hi: 1.0, mu: 0.4, sigma: 0.4 },
            CostFamily::Power { lo: 0.0, hi: 1.0, shape: 2.0 },
        ] {
            let s = SymmetricStrategy::new(fam, 3).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=50 {
                let c = i as f64 / 50.0;
                let b = s.bid(c).unwrap();
                assert!(b >= c - 1e-12, "bid {b} below cost {c}");
                assert!(b > prev, "not increasing at c={c}");
                prev = b;
            }
        }
    }

    #[test]
    fn inverse_round_trips() {
        let s = SymmetricStrategy::new(
            CostFamily::TruncatedNormal { lo: 0.0, hi: 1.0, mu: 0.5, sigma: 0.3 },
            4,
        )
        .unwrap();
        for i in 0..=20 {
            let c = i as f64 / 20.0;
            let b = s.bid(c).unwrap();
            let c2 = s.inverse(b).unwrap();
            assert!((c - c2).abs() < 1e-10, "c={c} c2={c2}");
        }
    }

    #[test]
    fn cost_outside_support_errors() {
        let s = SymmetricStrategy::new(unit_uniform(), 2).unwrap();
        assert!(s.bid(1.5).is_err());
        assert!(s.bid(-0.1).is_err());
    }

    #[test]
    fn uniform_bid_hazard_matches_closed_form() {
        // Uniform[0,1], n bidders: G(b) = (n b - 1)/(n - 1) on [1/n, 1],
        // g = n/(n-1); hazard = g / (1 - G).
        let n = 3u32;
        let s = SymmetricStrategy::new(unit_uniform(), n).unwrap();
        for b in [0.4, 0.6, 0.8] {
            let g_true = n as f64 / (n as f64 - 1.0);
            let cdf_true = (n as f64 * b - 1.0) / (n as f64 - 1.0);
            let hz = s.bid_hazard(b).unwrap();
            assert!((hz - g_true / (1.0 - cdf_true)).abs() < 1e-9, "b={b}");
        }
    }

    #[test]
    fn symmetric_pair_reduces_to_symmetric_solution() {
        let f = unit_uniform();
        let sol = asymmetric_equilibrium_solve(&f, &f, 1, 1, 2000, 1e-5).unwrap();
        // phi_0 == phi_1 everywhere.
        let max_gap = sol
            .phi[0]
            .iter()
            .zip(&sol.phi[1])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(max_gap < 1e-10, "types diverge by {max_gap}");
        // And matches the closed-form symmetric inverse phi(b) = 2b - 1.
        for j in (0..sol.bid_grid.len()).step_by(97) {
            let b = sol.bid_grid[j];
            assert!((sol.phi[0][j] - (2.0 * b - 1.0)).abs() < 1e-6, "b={b}");
        }
    }

    #[test]
    fn asymmetric_uniform_matches_symmetric_oracle() {
        // Identical uniform families with n0 = 2, n1 = 1 must match the
        // n = 3 symmetric strategy: phi(b) = (3b - 1)/2, b in [1/3, 1].
        let f = unit_uniform();
        let sol = asymmetric_equilibrium_solve(&f, &f, 2, 1, 2000, 1e-5).unwrap();
        assert!((sol.b_low() - 1.0 / 3.0).abs() < 1e-6, "b_low={}", sol.b_low());
        for i in 0..20 {
            let b = 1.0 / 3.0 + (i as f64 + 0.5) / 20.0 * (1.0 - 1.0 / 3.0);
            for k in 0..2 {
                let phi = sol.inverse_bid(k, b).unwrap();
                let oracle = (3.0 * b - 1.0) / 2.0;
                assert!((phi - oracle).abs() < 1e-4, "k={k} b={b} phi={phi} oracle={oracle}");
            }
        }
    }

    #[test]
    fn dominated_type_has_lower_inverse() {
        // Type-0 costs first-order stochastically dominated by type-1 costs
        // (F0 >= F1 pointwise, so type 0 is cheap and strong): at any bid the
        // strong type's implied cost sits weakly below, i.e. it shades more.
        let f0 = CostFamily::TruncatedNormal { lo: 0.0, hi: 1.0, mu: 0.3, sigma: 0.35 };
        let f1 = CostFamily::TruncatedNormal { lo: 0.0, hi: 1.0, mu: 0.7, sigma: 0.35 };
        for c in [0.2, 0.5, 0.8] {
            assert!(f0.cdf(c) >= f1.cdf(c));
        }
        let sol = asymmetric_equilibrium_solve(&f0, &f1, 2, 2, 2000, 1e-4).unwrap();
        for j in 1..sol.bid_grid.len() - 1 {
            assert!(
                sol.phi[0][j] <= sol.phi[1][j] + 1e-6,
                "at b={} phi0={} phi1={}",
                sol.bid_grid[j],
                sol.phi[0][j],
                sol.phi[1][j]
            );
        }
    }

    #[test]
    fn solved_inverses_strictly_increase() {
        let f0 = unit_uniform();
        let f1 = CostFamily::TruncatedNormal { lo: 0.0, hi: 1.0, mu: 0.4, sigma: 0.4 };
        let sol = asymmetric_equilibrium_solve(&f0, &f1, 2, 2, 1500, 1e-4).unwrap();
        for k in 0..2 {
            for j in 1..sol.bid_grid.len() {
                assert!(sol.phi[k][j] > sol.phi[k][j - 1], "k={k} j={j}");
            }
        }
        assert!(sol.max_foc_residual < 1e-4);
    }

    #[test]
    fn forward_bid_inverts_tabulated_inverse() {
        let f = unit_uniform();
        let sol = asymmetric_equilibrium_solve(&f, &f, 2, 2, 2000, 1e-5).unwrap();
        for c in [0.05, 0.3, 0.6, 0.95] {
            let b = sol.bid(0, c).unwrap();
            let c2 = sol.inverse_bid(0, b).unwrap();
            assert!((c - c2).abs() < 1e-6, "c={c} c2={c2}");
        }
    }

    #[test]
    fn vanishing_endpoint_density_rejected() {
        // A power family with shape 2 has zero density at the bottom of its
        // support; the inverse-strategy system cannot start there.
        let f0 = CostFamily::Power { lo: 0.0, hi: 1.0, shape: 2.0 };
        let f1 = unit_uniform();
        assert!(matches!(
            asymmetric_equilibrium_solve(&f0, &f1, 1, 1, 100, 1e-4),
            Err(EquilibriumError::VanishingDensity(_))
        ));
    }

    #[test]
    fn mismatched_upper_support_rejected() {
        let f0 = CostFamily::Uniform { lo: 0.0, hi: 1.0 };
        let f1 = CostFamily::Uniform { lo: 0.0, hi: 2.0 };
        assert!(matches!(
            asymmetric_equilibrium_solve(&f0, &f1, 1, 1, 100, 1e-4),
            Err(EquilibriumError::MismatchedUpperSupport(_, _))
        ));
    }
}
