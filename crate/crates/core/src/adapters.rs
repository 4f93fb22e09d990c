//! Tullock contests, innovation contests and patent races with a standard.
//!
//! With Gumbel noise and effort `e_hat = ln e`, a tournament with a standard
//! `rho_hat = ln rho` is a Tullock contest whose success function carries a
//! no-winner residual `exp(-sum e / rho)`. Efforts and standards are kept in
//! multiplicative units here.

use serde::Serialize;

use crate::dist::{find_modes, NoiseDistribution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TullockConfig {
    pub rho: f64,
    pub efforts: Vec<f64>,
}

impl TullockConfig {
    pub fn new(rho: f64, efforts: Vec<f64>) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("standard must be positive, got {rho}")));
        }
        if efforts.is_empty() || efforts.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return Err(Error::InvalidArgument(
                "efforts must be a nonempty list of nonnegative numbers".into(),
            ));
        }
        Ok(Self { rho, efforts })
    }

    pub fn n(&self) -> usize {
        self.efforts.len()
    }
}

/// `(e_i / sum e) (1 - exp(-sum e / rho))`.
pub fn tullock_csf_with_standard(cfg: &TullockConfig, i: usize) -> Result<f64> {
    let total: f64 = cfg.efforts.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroEfforts);
    }
    let e = *cfg
        .efforts
        .get(i)
        .ok_or(Error::RankOutOfRange { rank: i, n: cfg.n() })?;
    Ok(e / total * -(-total / cfg.rho).exp_m1())
}

/// Innovation-contest form: `(e_i / sum e) (1 - H(rho)^{sum e})`.
pub fn fm_csf(efforts: &[f64], i: usize, h_at_rho: f64) -> Result<f64> {
    let total: f64 = efforts.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroEfforts);
    }
    Ok(efforts[i] / total * (1.0 - h_at_rho.powf(total)))
}

/// Marginal winning probability of player 1 at a symmetric profile, minus the
/// unit marginal cost.
pub fn tullock_foc_residual(n: usize, e: f64, rho: f64) -> f64 {
    let nf = n as f64;
    let z = -nf * e / rho;
    (nf - 1.0) / (nf * nf * e) * -z.exp_m1() + z.exp() / (nf * rho) - 1.0
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Symmetric equilibrium effort for a fixed standard, unit prize and linear cost.
pub fn tullock_effort_for_standard(n: usize, rho: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two players".into()));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("standard must be positive, got {rho}")));
    }
    // the residual decreases in e from 1/rho - 1 at zero effort
    if rho >= 1.0 {
        return Ok(0.0);
    }
    Ok(bisect(|e| tullock_foc_residual(n, e, rho), 1e-300, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TullockOptimum {
    pub n: usize,
    pub effort: f64,
    pub standard: f64,
    /// Root of the symmetric first-order condition with `rho = e`.
    pub numeric_effort: f64,
    pub residual: f64,
}

/// Optimal standard and effort, linear cost and a unit prize.
pub fn tullock_optimal(n: usize) -> Result<TullockOptimum> {
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two players".into()));
    }
    let nf = n as f64;
    let effort = (nf - 1.0) / (nf * nf) + (-nf).exp() / (nf * nf);
    let numeric = bisect(|e| tullock_foc_residual(n, e, e), 1e-12, 1.0);
    Ok(TullockOptimum {
        n,
        effort,
        standard: effort,
        numeric_effort: numeric,
        residual: tullock_foc_residual(n, effort, effort),
    })
}

/// `e(rho)` on a grid; returns `(rho, e)` pairs.
pub fn tullock_standard_scan(n: usize, rhos: &[f64]) -> Result<Vec<(f64, f64)>> {
    rhos.iter()
        .map(|&r| tullock_effort_for_standard(n, r).map(|e| (r, e)))
        .collect()
}

/// Distribution of idea quality in an innovation contest.
pub trait IdeaDistribution {
    fn cdf(&self, x: f64) -> f64;
    /// Upper end of the support, possibly infinite.
    fn upper(&self) -> f64;
    fn inverse(&self, _p: f64) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UniformIdeas {
    pub upper: f64,
}

impl IdeaDistribution for UniformIdeas {
    fn cdf(&self, x: f64) -> f64 {
        (x / self.upper).clamp(0.0, 1.0)
    }

    fn upper(&self) -> f64 {
        self.upper
    }

    fn inverse(&self, p: f64) -> Option<f64> {
        Some(p * self.upper)
    }
}

/// `H(x) = exp(-1/x)`, which reproduces the Tullock contest.
#[derive(Debug, Clone, Copy)]
pub struct InverseExponentialIdeas;

impl IdeaDistribution for InverseExponentialIdeas {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (-1.0 / x).exp()
        }
    }

    fn upper(&self) -> f64 {
        f64::INFINITY
    }
}

/// Any cdf given as a closure, inverted numerically.
pub struct IdeaCdf<F> {
    pub cdf: F,
    pub upper: f64,
}

impl<F: Fn(f64) -> f64> IdeaDistribution for IdeaCdf<F> {
    fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }

    fn upper(&self) -> f64 {
        self.upper
    }
}

/// Smallest `x >= 0` with `H(x) >= p`, by bisection to 1e-12.
pub fn invert_idea_cdf(h: &dyn IdeaDistribution, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    let mut hi = h.upper();
    if !hi.is_finite() {
        hi = 1.0;
        while h.cdf(hi) < p {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::InvalidArgument("cdf never reaches target".into()));
            }
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if h.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `H^{-1}(exp(-1/e*))` with `e*` the optimal Tullock effort.
pub fn fm_optimal_standard(h: &dyn IdeaDistribution, n: usize) -> Result<f64> {
    let e = tullock_optimal(n)?.effort;
    let p = (-1.0 / e).exp();
    match h.inverse(p) {
        Some(x) => Ok(x),
        None => invert_idea_cdf(h, p),
    }
}

/// `exp(-x_m) / e*` with `x_m` the global mode of the log-time noise.
pub fn patent_race_deadline(d_hat: &NoiseDistribution, e_star: f64) -> Result<f64> {
    if !(e_star > 0.0) {
        return Err(Error::InvalidArgument(format!("effort must be positive, got {e_star}")));
    }
    let x_m = find_modes(d_hat)?.global_mode;
    Ok((-x_m).exp() / e_star)
}
