//! Parametric cost distributions on a bounded support.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FamilyError {
    #[error("support [{0}, {1}] is empty or non-finite")]
    BadSupport(f64, f64),
    #[error("power shape {0} must be positive")]
    BadShape(f64),
    #[error("truncated-normal sigma {0} must be positive")]
    BadSigma(f64),
    #[error("cost {0} outside support [{1}, {2}]")]
    OutOfSupport(f64, f64, f64),
}

/// A cost distribution family on `[lo, hi]`.
///
/// Costs scale multiplicatively with the project size index: a project with
/// engineer's estimate `x` draws costs as `x * c_base` with `c_base` from the
/// base family, so conditional-on-size estimation is exercised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostFamily {
    Uniform { lo: f64, hi: f64 },
    /// CDF `((c - lo)/(hi - lo))^shape`; shape 1 recovers the uniform.
    Power { lo: f64, hi: f64, shape: f64 },
    /// Normal(mu, sigma) truncated to `[lo, hi]`.
    TruncatedNormal { lo: f64, hi: f64, mu: f64, sigma: f64 },
}

impl CostFamily {
    pub fn validate(&self) -> Result<(), FamilyError> {
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FamilyError::BadSupport(lo, hi));
        }
        match *self {
            CostFamily::Power { shape, .. } if !(shape > 0.0) => Err(FamilyError::BadShape(shape)),
            CostFamily::TruncatedNormal { sigma, .. } if !(sigma > 0.0) => {
                Err(FamilyError::BadSigma(sigma))
            }
            _ => Ok(()),
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            CostFamily::Uniform { lo, hi }
            | CostFamily::Power { lo, hi, .. }
            | CostFamily::TruncatedNormal { lo, hi, .. } => (lo, hi),
        }
    }

    fn unit(&self, c: f64) -> f64 {
        let (lo, hi) = self.support();
        (c - lo) / (hi - lo)
    }

    /// CDF at `c`, clamped to the support.
    pub fn cdf(&self, c: f64) -> f64 {
        let (lo, hi) = self.support();
        if c <= lo {
            return 0.0;
        }
        if c >= hi {
            return 1.0;
        }
        match *self {
            CostFamily::Uniform { .. } => self.unit(c),
            CostFamily::Power { shape, .. } => self.unit(c).powf(shape),
            CostFamily::TruncatedNormal { lo, hi, mu, sigma } => {
                let n = Normal::new(mu, sigma).expect("validated");
                let (a, b) = (n.cdf(lo), n.cdf(hi));
                (n.cdf(c) - a) / (b - a)
            }
        }
    }

    /// Density at `c`; zero outside the support.
    pub fn pdf(&self, c: f64) -> f64 {
        let (lo, hi) = self.support();
        if c < lo || c > hi {
            return 0.0;
        }
        match *self {
            CostFamily::Uniform { lo, hi } => 1.0 / (hi - lo),
            CostFamily::Power { lo, hi, shape } => {
                let u = self.unit(c);
                if u == 0.0 && shape < 1.0 {
                    f64::INFINITY
                } else {
                    shape * u.powf(shape - 1.0) / (hi - lo)
                }
            }
            CostFamily::TruncatedNormal { lo, hi, mu, sigma } => {
                let n = Normal::new(mu, sigma).expect("validated");
                let (a, b) = (n.cdf(lo), n.cdf(hi));
                n.pdf(c) / (b - a)
            }
        }
    }

    /// Inverse CDF; `p` is clamped to [0, 1].
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let (lo, hi) = self.support();
        match *self {
            CostFamily::Uniform { .. } => lo + p * (hi - lo),
            CostFamily::Power { shape, .. } => lo + (hi - lo) * p.powf(1.0 / shape),
            CostFamily::TruncatedNormal { lo, hi, mu, sigma } => {
                let n = Normal::new(mu, sigma).expect("validated");
                let (a, b) = (n.cdf(lo), n.cdf(hi));
                n.inverse_cdf(a + p * (b - a)).clamp(lo, hi)
            }
        }
    }
}
