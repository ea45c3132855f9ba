//! Local polynomial estimation of conditional bid distributions and densities.
//!
//! The conditional CDF `G(b | x, n0, n1)` is a local quadratic (LPE(2)) fit of
//! the indicator `1(B <= b)` over the three conditioning covariates, with an
//! Epanechnikov kernel on the continuous project-size index and Gaussian
//! kernels on the two discrete bidder counts. The conditional density is the
//! bid-direction slope of a local linear (LPE(1)) fit to first-stage
//! conditional-CDF values, which keeps the estimator consistent at the
//! boundaries of the bid support where plain kernel density estimates
//! collapse. Bandwidths follow the rule of thumb
//! `1.06 * 2.214 * sigma * T^(-1/(2R+3))` for the CDF direction and
//! `1.06 * 2.214 * sigma * T^(-1/(2R+1))` for the density direction.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::Dataset;

#[derive(Debug, Error)]
pub enum LpeError {
    #[error("nonpositive dispersion {0} for a bandwidth")]
    BadSigma(f64),
    #[error("sample size {0} too small")]
    SampleTooSmall(usize),
    #[error("no local mass at evaluation point (b={b}, x={x}, n0={n0}, n1={n1})")]
    NoLocalMass { b: f64, x: f64, n0: f64, n1: f64 },
    #[error("rank-deficient local design at (b={b}, x={x}, n0={n0}, n1={n1})")]
    RankDeficient { b: f64, x: f64, n0: f64, n1: f64 },
    #[error("no observations of type {0}")]
    EmptyTypeSample(u8),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Epanechnikov kernel `K(u) = 3/4 (1 - u^2)` on `[-1, 1]`.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Standard normal kernel for the discrete covariates.
pub fn gaussian_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

const ROT_CONSTANT: f64 = 1.06 * 2.214;

/// Rule-of-thumb bandwidth for CDF estimation: `1.06*2.214*sigma*T^(-1/(2R+3))`.
pub fn bandwidth_cdf(sigma_hat: f64, t: usize, r: u32) -> Result<f64, LpeError> {
    if !(sigma_hat > 0.0) {
        return Err(LpeError::BadSigma(sigma_hat));
    }
    if t < 2 {
        return Err(LpeError::SampleTooSmall(t));
    }
    Ok(ROT_CONSTANT * sigma_hat * (t as f64).powf(-1.0 / (2.0 * r as f64 + 3.0)))
}

/// Rule-of-thumb bandwidth for density estimation: `1.06*2.214*sigma*T^(-1/(2R+1))`.
pub fn bandwidth_pdf(sigma_hat: f64, t: usize, r: u32) -> Result<f64, LpeError> {
    if !(sigma_hat > 0.0) {
        return Err(LpeError::BadSigma(sigma_hat));
    }
    if t < 2 {
        return Err(LpeError::SampleTooSmall(t));
    }
    Ok(ROT_CONSTANT * sigma_hat * (t as f64).powf(-1.0 / (2.0 * r as f64 + 1.0)))
}

/// Bandwidths for one estimation sample.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BandwidthSet {
    /// Continuous-covariate bandwidth (the CDF-rate `h_G`).
    pub h_cov: f64,
    /// Bid-direction bandwidth (the density-rate `h_g`).
    pub h_bid: f64,
    /// Discrete-covariate bandwidth for the Gaussian kernels.
    pub h_n: f64,
    /// Smoothness order R; the default 2 gives LPE(2)/LPE(1).
    pub smoothness: u32,
}

impl BandwidthSet {
    pub fn validate(&self) -> Result<(), LpeError> {
        for h in [self.h_cov, self.h_bid, self.h_n] {
            if !(h > 0.0) {
                return Err(LpeError::BadSigma(h));
            }
        }
        Ok(())
    }
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt()
}

/// One observation: a (possibly log-transformed) bid with its conditioning
/// covariates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obs {
    pub b: f64,
    pub x: f64,
    pub n0: f64,
    pub n1: f64,
}

/// A point at which the conditional CDF or density is requested.
#[derive(Debug, Clone, Copy)]
pub struct EvalPoint {
    pub b: f64,
    pub x: f64,
    pub n0: f64,
    pub n1: f64,
}

/// Rule-of-thumb bandwidths from a sample. Degenerate directions (zero
/// dispersion) get a unit bandwidth; their kernel factors are then constant.
pub fn rule_of_thumb_bandwidths(sample: &[Obs], r: u32, h_n: f64) -> Result<BandwidthSet, LpeError> {
    if sample.len() < 2 {
        return Err(LpeError::SampleTooSmall(sample.len()));
    }
    let sig_x = sample_std(sample.iter().map(|o| o.x));
    let sig_b = sample_std(sample.iter().map(|o| o.b));
    let t = sample.len();
    let h_cov = if sig_x > 0.0 { bandwidth_cdf(sig_x, t, r)? } else { 1.0 };
    let h_bid = if sig_b > 0.0 { bandwidth_pdf(sig_b, t, r)? } else { 1.0 };
    Ok(BandwidthSet { h_cov, h_bid, h_n, smoothness: r })
}

/// Product kernel weight over the conditioning covariates, scaled by the
/// bandwidth product as in `K_H(u) = |H|^-1 K(H^-1 u)`.
pub fn product_weight(z: &EvalPoint, obs: &Obs, bw: &BandwidthSet) -> f64 {
    let wx = epanechnikov((obs.x - z.x) / bw.h_cov) / bw.h_cov;
    let w0 = gaussian_kernel((obs.n0 - z.n0) / bw.h_n) / bw.h_n;
    let w1 = gaussian_kernel((obs.n1 - z.n1) / bw.h_n) / bw.h_n;
    wx * w0 * w1
}

const RIDGE_SCALE: f64 = 1e-10;

fn solve_ridged(
    xtx: &mut DMatrix<f64>,
    xty: &DVector<f64>,
    z: &EvalPoint,
) -> Result<DVector<f64>, LpeError> {
    let p = xtx.nrows();
    let ridge = RIDGE_SCALE * xtx.trace() / p as f64;
    for i in 0..p {
        xtx[(i, i)] += ridge;
    }
    Cholesky::new(xtx.clone())
        .map(|ch| ch.solve(xty))
        .ok_or(LpeError::RankDeficient { b: z.b, x: z.x, n0: z.n0, n1: z.n1 })
}

/// Local quadratic (LPE(2)) weighted least squares over the covariates.
///
/// Returns the fitted level at `z` (the intercept of the local fit). The
/// design carries the intercept, three linear offsets and all six quadratic
/// and cross terms. Exact for responses that are quadratic polynomials in the
/// covariate offsets.
pub fn local_quadratic_fit(
    sample: &[Obs],
    responses: &[f64],
    z: &EvalPoint,
    bw: &BandwidthSet,
) -> Result<f64, LpeError> {
    bw.validate()?;
    assert_eq!(sample.len(), responses.len());
    let p = 10;
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    let mut total_w = 0.0;
    let mut row = [0.0; 10];
    for (obs, y) in sample.iter().zip(responses) {
        let w = product_weight(z, obs, bw);
        if w <= 0.0 {
            continue;
        }
        total_w += w;
        let dx = obs.x - z.x;
        let d0 = obs.n0 - z.n0;
        let d1 = obs.n1 - z.n1;
        row[0] = 1.0;
        row[1] = dx;
        row[2] = d0;
        row[3] = d1;
        row[4] = dx * dx;
        row[5] = dx * d0;
        row[6] = dx * d1;
        row[7] = d0 * d1;
        row[8] = d0 * d0;
        row[9] = d1 * d1;
        for i in 0..p {
            let wi = w * row[i];
            xty[i] += wi * y;
            for j in i..p {
                xtx[(i, j)] += wi * row[j];
            }
        }
    }
    if total_w <= 0.0 {
        return Err(LpeError::NoLocalMass { b: z.b, x: z.x, n0: z.n0, n1: z.n1 });
    }
    for i in 0..p {
        for j in 0..i {
            xtx[(i, j)] = xtx[(j, i)];
        }
    }
    let beta = solve_ridged(&mut xtx, &xty, z)?;
    Ok(beta[0])
}

/// Level and bid-direction slope of a local linear (LPE(1)) fit.
#[derive(Debug, Clone, Copy)]
pub struct LocalLinearFit {
    /// Fitted level at `z`.
    pub level: f64,
    /// Fitted derivative in the bid direction at `z`.
    pub bid_slope: f64,
}

/// Local linear (LPE(1)) weighted least squares in the bid direction and the
/// covariates. The weight adds an Epanechnikov factor `K((B - b)/h_bid)/h_bid`
/// to the covariate product kernel. Exact for responses linear in the offsets.
pub fn local_linear_fit(
    sample: &[Obs],
    responses: &[f64],
    z: &EvalPoint,
    bw: &BandwidthSet,
) -> Result<LocalLinearFit, LpeError> {
    bw.validate()?;
    assert_eq!(sample.len(), responses.len());
    let p = 5;
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    let mut total_w = 0.0;
    let mut row = [0.0; 5];
    for (obs, y) in sample.iter().zip(responses) {
        let db = obs.b - z.b;
        let w = product_weight(z, obs, bw) * epanechnikov(db / bw.h_bid) / bw.h_bid;
        if w <= 0.0 {
            continue;
        }
        total_w += w;
        row[0] = 1.0;
        row[1] = db;
        row[2] = obs.x - z.x;
        row[3] = obs.n0 - z.n0;
        row[4] = obs.n1 - z.n1;
        for i in 0..p {
            let wi = w * row[i];
            xty[i] += wi * y;
            for j in i..p {
                xtx[(i, j)] += wi * row[j];
            }
        }
    }
    if total_w <= 0.0 {
        return Err(LpeError::NoLocalMass { b: z.b, x: z.x, n0: z.n0, n1: z.n1 });
    }
    for i in 0..p {
        for j in 0..i {
            xtx[(i, j)] = xtx[(j, i)];
        }
    }
    let beta = solve_ridged(&mut xtx, &xty, z)?;
    Ok(LocalLinearFit { level: beta[0], bid_slope: beta[1] })
}

/// Conditional CDF estimate at `z`, clamped to `[0, 1]`.
pub fn fit_cdf_point(sample: &[Obs], z: &EvalPoint, bw: &BandwidthSet) -> Result<f64, LpeError> {
    let responses: Vec<f64> = sample.iter().map(|o| f64::from(o.b <= z.b)).collect();
    Ok(local_quadratic_fit(sample, &responses, z, bw)?.clamp(0.0, 1.0))
}

/// Conditional density estimate at `z` given precomputed first-stage CDF
/// values at each observation's own point; clamped below at 0.
pub fn fit_pdf_point_given_cdf(
    sample: &[Obs],
    cdf_at_obs: &[f64],
    z: &EvalPoint,
    bw: &BandwidthSet,
) -> Result<f64, LpeError> {
    Ok(local_linear_fit(sample, cdf_at_obs, z, bw)?.bid_slope.max(0.0))
}

/// Conditional density estimate at `z`. Computes the first stage internally;
/// use [`fit_pdf_point_given_cdf`] when evaluating many points on one sample.
pub fn fit_pdf_point(sample: &[Obs], z: &EvalPoint, bw: &BandwidthSet) -> Result<f64, LpeError> {
    let cdf_at_obs = first_stage_cdf(sample, bw)?;
    fit_pdf_point_given_cdf(sample, &cdf_at_obs, z, bw)
}

/// First-stage conditional CDF evaluated at every observation's own point.
pub fn first_stage_cdf(sample: &[Obs], bw: &BandwidthSet) -> Result<Vec<f64>, LpeError> {
    sample
        .par_iter()
        .map(|o| {
            let z = EvalPoint { b: o.b, x: o.x, n0: o.n0, n1: o.n1 };
            fit_cdf_point(sample, &z, bw)
        })
        .collect()
}

/// Monotone rearrangement: sorting the values of a CDF estimated on an
/// increasing grid restores monotonicity without changing the value set.
pub fn monotone_rearrange(values: &mut [f64]) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
}

/// Plain Epanechnikov kernel density estimate, the boundary-biased baseline.
pub fn naive_kde(sample: &[f64], b: f64, h: f64) -> f64 {
    let t = sample.len() as f64;
    sample.iter().map(|&v| epanechnikov((v - b) / h)).sum::<f64>() / (t * h)
}

/// Options for fitting the two-type LPE on a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LpeConfig {
    /// Discrete-covariate bandwidth; the rule of thumb has no counterpart
    /// for the Gaussian factors, so this is a plain knob.
    pub h_n: f64,
    /// Smoothness order R.
    pub smoothness: u32,
    /// Optional overrides for the continuous bandwidths (applied per type).
    pub h_cov_override: Option<f64>,
    pub h_bid_override: Option<f64>,
}

impl Default for LpeConfig {
    fn default() -> Self {
        Self { h_n: 1.0, smoothness: 2, h_cov_override: None, h_bid_override: None }
    }
}

/// Per-type direction ranges used to flag extrapolating evaluation points.
#[derive(Debug, Clone, Copy)]
struct Ranges {
    b: (f64, f64),
    x: (f64, f64),
}

/// Fitted two-type local polynomial estimator over a dataset's log-bids.
///
/// Type-k bids form sample k with covariates (X, n0, n1); estimates of the
/// conditional log-bid distribution and density are served per type by
/// [`FittedLpe::cdf_hat`]/[`FittedLpe::pdf_hat`].
pub struct FittedLpe {
    samples: [Vec<Obs>; 2],
    refs: [Vec<(String, String)>; 2], // (auction_id, bidder_id) per observation
    cdf_at_obs: [Vec<f64>; 2],
    bandwidths: [Option<BandwidthSet>; 2],
    ranges: [Option<Ranges>; 2],
}

impl FittedLpe {
    /// Build per-type samples in log-bid space and run the first stage.
    pub fn fit(d: &Dataset, cfg: &LpeConfig) -> Result<Self, LpeError> {
        let mut samples: [Vec<Obs>; 2] = [Vec::new(), Vec::new()];
        let mut refs: [Vec<(String, String)>; 2] = [Vec::new(), Vec::new()];
        for a in &d.auctions {
            for bid in &a.bids {
                let k = bid.type_k as usize;
                samples[k].push(Obs {
                    b: bid.bid.ln(),
                    x: a.engineer_estimate,
                    n0: a.n0 as f64,
                    n1: a.n1 as f64,
                });
                refs[k].push((a.id.clone(), bid.bidder_id.clone()));
            }
        }
        let mut bandwidths = [None, None];
        let mut cdf_at_obs: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        let mut ranges = [None, None];
        for k in 0..2 {
            if samples[k].len() < 2 {
                continue;
            }
            let mut bw = rule_of_thumb_bandwidths(&samples[k], cfg.smoothness, cfg.h_n)?;
            if let Some(h) = cfg.h_cov_override {
                bw.h_cov = h;
            }
            if let Some(h) = cfg.h_bid_override {
                bw.h_bid = h;
            }
            bw.validate()?;
            cdf_at_obs[k] = first_stage_cdf(&samples[k], &bw)?;
            let bmin = samples[k].iter().map(|o| o.b).fold(f64::INFINITY, f64::min);
            let bmax = samples[k].iter().map(|o| o.b).fold(f64::NEG_INFINITY, f64::max);
            let xmin = samples[k].iter().map(|o| o.x).fold(f64::INFINITY, f64::min);
            let xmax = samples[k].iter().map(|o| o.x).fold(f64::NEG_INFINITY, f64::max);
            ranges[k] = Some(Ranges { b: (bmin, bmax), x: (xmin, xmax) });
            bandwidths[k] = Some(bw);
        }
        Ok(Self { samples, refs, cdf_at_obs, bandwidths, ranges })
    }

    pub fn sample_size(&self, type_k: u8) -> usize {
        self.samples[type_k as usize].len()
    }

    pub fn bandwidths(&self, type_k: u8) -> Option<&BandwidthSet> {
        self.bandwidths[type_k as usize].as_ref()
    }

    fn require(&self, k: usize) -> Result<&BandwidthSet, LpeError> {
        self.bandwidths[k].as_ref().ok_or(LpeError::EmptyTypeSample(k as u8))
    }

    /// Conditional CDF of the type-k log-bid at `(d, x, n0, n1)`.
    pub fn cdf_hat(&self, type_k: u8, d: f64, x: f64, n0: f64, n1: f64) -> Result<f64, LpeError> {
        let k = type_k as usize;
        let bw = self.require(k)?;
        fit_cdf_point(&self.samples[k], &EvalPoint { b: d, x, n0, n1 }, bw)
    }

    /// Conditional density of the type-k log-bid at `(d, x, n0, n1)`.
    pub fn pdf_hat(&self, type_k: u8, d: f64, x: f64, n0: f64, n1: f64) -> Result<f64, LpeError> {
        let k = type_k as usize;
        let bw = self.require(k)?;
        fit_pdf_point_given_cdf(
            &self.samples[k],
            &self.cdf_at_obs[k],
            &EvalPoint { b: d, x, n0, n1 },
            bw,
        )
    }

    /// Whether `(d, x)` falls outside the type-k sample's observed ranges.
    pub fn extrapolates(&self, type_k: u8, d: f64, x: f64) -> bool {
        match self.ranges[type_k as usize] {
            Some(r) => d < r.b.0 || d > r.b.1 || x < r.x.0 || x > r.x.1,
            None => true,
        }
    }

    /// Audit dump: per-observation CDF and density estimates at the
    /// observation's own point.
    pub fn dump_csv<W: std::io::Write>(&self, out: W) -> Result<(), LpeError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bidder_id", "auction_id", "b", "G_hat", "g_hat"])?;
        for k in 0..2 {
            if self.bandwidths[k].is_none() {
                continue;
            }
            let rows: Vec<(usize, f64)> = (0..self.samples[k].len())
                .into_par_iter()
                .map(|i| {
                    let o = self.samples[k][i];
                    let g = self
                        .pdf_hat(k as u8, o.b, o.x, o.n0, o.n1)
                        .unwrap_or(f64::NAN);
                    (i, g)
                })
                .collect();
            for (i, g_hat) in rows {
                let o = self.samples[k][i];
                let (auction, bidder) = &self.refs[k][i];
                w.write_record([
                    bidder.as_str(),
                    auction.as_str(),
                    &format!("{:.6}", o.b.exp()),
                    &format!("{:.6}", self.cdf_at_obs[k][i]),
                    &format!("{g_hat:.6}"),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn flat_point(b: f64) -> EvalPoint {
        EvalPoint { b, x: 1.0, n0: 2.0, n1: 0.0 }
    }

    fn uniform_sample(t: usize, seed: u64) -> Vec<Obs> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..t)
            .map(|_| Obs { b: rng.gen::<f64>(), x: 1.0, n0: 2.0, n1: 0.0 })
            .collect()
    }

    fn flat_bw(sample: &[Obs]) -> BandwidthSet {
        rule_of_thumb_bandwidths(sample, 2, 1.0).unwrap()
    }

    #[test]
    fn epanechnikov_values() {
        assert_eq!(epanechnikov(0.0), 0.75);
        assert_eq!(epanechnikov(1.0), 0.0);
        assert_eq!(epanechnikov(-1.0), 0.0);
        assert!((epanechnikov(0.5) - 0.5625).abs() < 1e-15);
        assert_eq!(epanechnikov(1.2), 0.0);
    }

    #[test]
    fn rule_of_thumb_reference_values() {
        // 1.06 * 2.214 = 2.34684; at sigma 1, T = 1000, R = 2:
        // h_g = 2.34684 * 1000^(-1/5) ~ 0.58950 and h_G = 2.34684 * 1000^(-1/7) ~ 0.87487.
        let h_g = bandwidth_pdf(1.0, 1000, 2).unwrap();
        let h_cdf = bandwidth_cdf(1.0, 1000, 2).unwrap();
        assert!((h_g - 0.5895).abs() < 2e-4, "h_g={h_g}");
        assert!((h_cdf - 0.8749).abs() < 2e-4, "h_G={h_cdf}");
        // Linear in sigma.
        assert!((bandwidth_pdf(2.0, 1000, 2).unwrap() - 2.0 * h_g).abs() < 1e-12);
        assert!((bandwidth_cdf(2.0, 1000, 2).unwrap() - 2.0 * h_cdf).abs() < 1e-12);
        assert!(bandwidth_pdf(0.0, 1000, 2).is_err());
    }

    #[test]
    fn product_weight_factors() {
        let bw = BandwidthSet { h_cov: 0.5, h_bid: 0.3, h_n: 1.0, smoothness: 2 };
        let z = EvalPoint { b: 0.5, x: 2.0, n0: 3.0, n1: 1.0 };
        let at_z = Obs { b: 0.9, x: 2.0, n0: 3.0, n1: 1.0 };
        let peak = product_weight(&z, &at_z, &bw);
        let expected = 0.75 / 0.5 * (gaussian_kernel(0.0) / 1.0).powi(2);
        assert!((peak - expected).abs() < 1e-12);

        // Continuous offset beyond the bandwidth kills the weight.
        let far = Obs { x: 2.0 + 0.51, ..at_z };
        assert_eq!(product_weight(&z, &far, &bw), 0.0);

        // Offset of h/2 scales the continuous factor by K(1/2)/K(0) = 0.75.
        let half = Obs { x: 2.0 + 0.25, ..at_z };
        assert!((product_weight(&z, &half, &bw) / peak - 0.75).abs() < 1e-12);
    }

    #[test]
    fn lpe2_reproduces_quadratics_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let sample: Vec<Obs> = (0..400)
            .map(|_| Obs {
                b: rng.gen::<f64>(),
                x: 1.0 + rng.gen::<f64>(),
                n0: (2 + rng.gen_range(0..3)) as f64,
                n1: (1 + rng.gen_range(0..2)) as f64,
            })
            .collect();
        let z = EvalPoint { b: 0.4, x: 1.5, n0: 3.0, n1: 1.0 };
        let target = |o: &Obs| {
            let dx = o.x - z.x;
            let d0 = o.n0 - z.n0;
            let d1 = o.n1 - z.n1;
            0.3 + 0.2 * dx - 0.1 * d0 + 0.05 * d1 + 0.4 * dx * dx - 0.2 * dx * d0
                + 0.1 * d0 * d1
                + 0.07 * d1 * d1
        };
        let responses: Vec<f64> = sample.iter().map(target).collect();
        let bw = BandwidthSet { h_cov: 0.6, h_bid: 0.3, h_n: 1.0, smoothness: 2 };
        let fitted = local_quadratic_fit(&sample, &responses, &z, &bw).unwrap();
        assert!((fitted - 0.3).abs() < 1e-8, "fitted={fitted}");
    }

    #[test]
    fn lpe1_reproduces_linear_targets_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let sample: Vec<Obs> = (0..400)
            .map(|_| Obs {
                b: rng.gen::<f64>(),
                x: 1.0 + rng.gen::<f64>(),
                n0: (2 + rng.gen_range(0..3)) as f64,
                n1: 1.0,
            })
            .collect();
        let z = EvalPoint { b: 0.5, x: 1.5, n0: 3.0, n1: 1.0 };
        let responses: Vec<f64> = sample
            .iter()
            .map(|o| 0.2 + 1.7 * (o.b - z.b) - 0.3 * (o.x - z.x) + 0.1 * (o.n0 - z.n0))
            .collect();
        let bw = BandwidthSet { h_cov: 0.6, h_bid: 0.4, h_n: 1.0, smoothness: 2 };
        let fit = local_linear_fit(&sample, &responses, &z, &bw).unwrap();
        assert!((fit.level - 0.2).abs() < 1e-8);
        assert!((fit.bid_slope - 1.7).abs() < 1e-8);
    }

    #[test]
    fn cdf_zero_below_all_observations() {
        let sample = uniform_sample(200, 1);
        let bw = flat_bw(&sample);
        let g = fit_cdf_point(&sample, &flat_point(-0.5), &bw).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn cdf_interior_uniform_monte_carlo() {
        let sample = uniform_sample(5000, 2);
        let bw = flat_bw(&sample);
        let g = fit_cdf_point(&sample, &flat_point(0.5), &bw).unwrap();
        assert!((g - 0.5).abs() < 0.03, "G(0.5)={g}");
    }

    #[test]
    fn pdf_interior_uniform_monte_carlo() {
        let sample = uniform_sample(5000, 3);
        let bw = flat_bw(&sample);
        let cdfs = first_stage_cdf(&sample, &bw).unwrap();
        let g = fit_pdf_point_given_cdf(&sample, &cdfs, &flat_point(0.5), &bw).unwrap();
        assert!((g - 1.0).abs() < 0.1, "g(0.5)={g}");
    }

    #[test]
    fn pdf_no_boundary_collapse_but_kde_halves() {
        let sample = uniform_sample(5000, 4);
        let bw = flat_bw(&sample);
        let cdfs = first_stage_cdf(&sample, &bw).unwrap();
        let g0 = fit_pdf_point_given_cdf(&sample, &cdfs, &flat_point(0.0), &bw).unwrap();
        assert!((g0 - 1.0).abs() < 0.15, "boundary g(0)={g0}");
        let raw: Vec<f64> = sample.iter().map(|o| o.b).collect();
        let kde = naive_kde(&raw, 0.0, bw.h_bid);
        assert!((kde - 1.0).abs() >= 0.40, "kde(0)={kde}");
    }

    #[test]
    fn concentrated_weight_returns_the_single_indicator() {
        // One observation inside the kernel window; everything else outside.
        let mut sample = vec![Obs { b: 0.4, x: 1.0, n0: 2.0, n1: 0.0 }];
        sample.extend((0..50).map(|i| Obs { b: 0.9, x: 50.0 + i as f64, n0: 2.0, n1: 0.0 }));
        let bw = BandwidthSet { h_cov: 0.5, h_bid: 0.2, h_n: 1.0, smoothness: 2 };
        let z = EvalPoint { b: 0.5, x: 1.0, n0: 2.0, n1: 0.0 };
        let g = fit_cdf_point(&sample, &z, &bw).unwrap();
        assert!((g - 1.0).abs() < 1e-6, "G={g}");
        let z_low = EvalPoint { b: 0.3, ..z };
        let g = fit_cdf_point(&sample, &z_low, &bw).unwrap();
        assert!(g.abs() < 1e-6, "G={g}");
    }

    #[test]
    fn estimates_invariant_to_observation_order() {
        let mut sample = uniform_sample(800, 7);
        let bw = flat_bw(&sample);
        let z = flat_point(0.37);
        let a = fit_cdf_point(&sample, &z, &bw).unwrap();
        sample.reverse();
        sample.swap(0, 400);
        let b = fit_cdf_point(&sample, &z, &bw).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn monotone_rearrangement_restores_monotonicity() {
        let mut v = vec![0.1, 0.3, 0.25, 0.6, 0.55, 0.9];
        monotone_rearrange(&mut v);
        for w in v.windows(2) {
            assert!(w[0] <= w[1]);
        }
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn rmse_decreases_with_sample_size() {
        // Fixed smooth DGP: uniform bids; truth G(b) = b, g(b) = 1.
        let points: Vec<f64> = (0..50).map(|i| 0.1 + 0.8 * i as f64 / 49.0).collect();
        let mut rmse_g = Vec::new();
        let mut rmse_d = Vec::new();
        for (t, seed) in [(500usize, 11u64), (2000, 12), (8000, 13)] {
            let sample = uniform_sample(t, seed);
            let bw = flat_bw(&sample);
            let cdfs = first_stage_cdf(&sample, &bw).unwrap();
            let mut se_g = 0.0;
            let mut se_d = 0.0;
            for &b in &points {
                let z = flat_point(b);
                se_g += (fit_cdf_point(&sample, &z, &bw).unwrap() - b).powi(2);
                se_d +=
                    (fit_pdf_point_given_cdf(&sample, &cdfs, &z, &bw).unwrap() - 1.0).powi(2);
            }
            rmse_g.push((se_g / 50.0).sqrt());
            rmse_d.push((se_d / 50.0).sqrt());
        }
        assert!(rmse_g[0] > rmse_g[1] && rmse_g[1] > rmse_g[2], "G rmse {rmse_g:?}");
        assert!(rmse_d[0] > rmse_d[1] && rmse_d[1] > rmse_d[2], "g rmse {rmse_d:?}");
    }

    #[test]
    fn log_domain_density_maps_back_by_chain_rule() {
        // Bids uniform on [0.5, 1.5]; estimate the density at b in raw space
        // and at ln b in log space: g_b(b) must match g_d(ln b)/b.
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let raw: Vec<Obs> = (0..4000)
            .map(|_| Obs { b: 0.5 + rng.gen::<f64>(), x: 1.0, n0: 2.0, n1: 0.0 })
            .collect();
        let logs: Vec<Obs> = raw.iter().map(|o| Obs { b: o.b.ln(), ..*o }).collect();
        let b0 = 1.1_f64;
        let bw_raw = flat_bw(&raw);
        let bw_log = flat_bw(&logs);
        let g_raw = fit_pdf_point(&raw, &flat_point(b0), &bw_raw).unwrap();
        let g_log = fit_pdf_point(&logs, &flat_point(b0.ln()), &bw_log).unwrap();
        let mapped = g_log / b0;
        assert!(
            (g_raw - mapped).abs() < 0.1,
            "raw {g_raw} vs mapped {mapped} (log {g_log})"
        );
    }
}
