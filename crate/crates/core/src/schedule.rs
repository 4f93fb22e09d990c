//! Prize schedules and effort costs.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

const BUDGET_TOL: f64 = 1e-12;

/// Weakly decreasing nonnegative prizes `v_1 >= ... >= v_n >= 0` summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PrizeSchedule {
    prizes: Vec<f64>,
}

impl PrizeSchedule {
    pub fn new(prizes: Vec<f64>) -> Result<Self> {
        if prizes.is_empty() {
            return Err(Error::InvalidSchedule("at least one prize is required".into()));
        }
        if prizes.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidSchedule("prizes must be finite and nonnegative".into()));
        }
        if let Some(w) = prizes.windows(2).find(|w| w[1] > w[0] + BUDGET_TOL) {
            return Err(Error::InvalidSchedule(format!(
                "prizes must be weakly decreasing ({} before {})",
                w[0], w[1]
            )));
        }
        let total: f64 = prizes.iter().sum();
        if (total - 1.0).abs() > BUDGET_TOL {
            return Err(Error::InvalidSchedule(format!(
                "budget constraint violated: prizes sum to {total}, not 1"
            )));
        }
        Ok(Self { prizes })
    }

    /// `(1, 0, ..., 0)`.
    pub fn winner_take_all(n: usize) -> Self {
        Self::top_equal(1, n)
    }

    /// `(1/n, ..., 1/n)`.
    pub fn equal_sharing(n: usize) -> Self {
        Self::top_equal(n, n)
    }

    /// `s` equal prizes `1/s` at the top, zeros below.
    pub fn top_equal(s: usize, n: usize) -> Self {
        assert!(s >= 1 && s <= n, "need 1 <= s <= n");
        let mut prizes = vec![0.0; n];
        prizes[..s].fill(1.0 / s as f64);
        Self { prizes }
    }

    /// Schedule with the given prize differentials `d_r = v_r - v_{r+1}`.
    pub fn from_differentials(diffs: &[f64]) -> Result<Self> {
        let mut prizes = vec![0.0; diffs.len()];
        let mut acc = 0.0;
        for r in (0..diffs.len()).rev() {
            acc += diffs[r];
            prizes[r] = acc;
        }
        Self::new(prizes)
    }

    pub fn n(&self) -> usize {
        self.prizes.len()
    }

    pub fn prizes(&self) -> &[f64] {
        &self.prizes
    }

    /// `v_r - v_{r+1}` for `r = 1..n`, with `v_{n+1} = 0`.
    pub fn differentials(&self) -> Vec<f64> {
        (0..self.n())
            .map(|r| {
                let next = self.prizes.get(r + 1).copied().unwrap_or(0.0);
                (self.prizes[r] - next).max(0.0)
            })
            .collect()
    }

    /// Convex combination `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        if self.n() != other.n() || !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidSchedule("incompatible mixture".into()));
        }
        let prizes = self
            .prizes
            .iter()
            .zip(&other.prizes)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        Ok(Self { prizes })
    }

    /// Uniform draw from the schedule simplex, via uniform differentials on
    /// `sum r d_r = 1`.
    pub fn random<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        // Dirichlet(1,...,1) weights w_r, then d_r = w_r / r.
        let w: Vec<f64> = (0..n)
            .map(|_| -(1.0 - rng.random::<f64>()).ln())
            .collect();
        let total: f64 = w.iter().sum();
        let diffs: Vec<f64> = w
            .iter()
            .enumerate()
            .map(|(r, wr)| wr / total / (r + 1) as f64)
            .collect();
        let mut s = Self::from_differentials(&diffs).unwrap_or_else(|_| Self::equal_sharing(n));
        let sum: f64 = s.prizes.iter().sum();
        s.prizes.iter_mut().for_each(|v| *v /= sum);
        s
    }
}

impl fmt::Display for PrizeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.prizes.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v:.6}")?;
        }
        write!(f, ")")
    }
}

type Scalar = dyn Fn(f64) -> f64 + Send + Sync;

/// User-supplied cost with its derivative and derivative inverse.
pub struct CustomCost {
    pub cost: Box<Scalar>,
    pub marginal: Box<Scalar>,
    pub marginal_inverse: Box<Scalar>,
}

/// Strictly convex effort cost with `c(0) = c'(0) = 0`.
#[derive(Clone)]
pub enum CostFunction {
    /// `c(e) = kappa * e^beta / beta`.
    Power { kappa: f64, beta: f64 },
    Custom(Arc<CustomCost>),
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFunction::Power { kappa, beta } => f
                .debug_struct("Power")
                .field("kappa", kappa)
                .field("beta", beta)
                .finish(),
            CostFunction::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Default for CostFunction {
    fn default() -> Self {
        CostFunction::Power {
            kappa: 1.0,
            beta: 2.0,
        }
    }
}

impl CostFunction {
    pub fn power(kappa: f64, beta: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite() && beta > 1.0 && beta.is_finite()) {
            return Err(Error::InvalidCost(format!(
                "power cost needs kappa > 0 and beta > 1, got kappa={kappa}, beta={beta}"
            )));
        }
        Ok(CostFunction::Power { kappa, beta })
    }

    pub fn quadratic() -> Self {
        Self::default()
    }

    pub fn custom(cost: CustomCost) -> Result<Self> {
        let c = CostFunction::Custom(Arc::new(cost));
        if c.cost(0.0).abs() > 1e-12 || c.marginal(0.0).abs() > 1e-12 {
            return Err(Error::InvalidCost("custom cost must satisfy c(0) = c'(0) = 0".into()));
        }
        if !c.max_effort().is_finite() {
            return Err(Error::InvalidCost("custom cost never reaches 1".into()));
        }
        Ok(c)
    }

    pub fn cost(&self, e: f64) -> f64 {
        match self {
            CostFunction::Power { kappa, beta } => kappa * e.max(0.0).powf(*beta) / beta,
            CostFunction::Custom(c) => (c.cost)(e),
        }
    }

    pub fn marginal(&self, e: f64) -> f64 {
        match self {
            CostFunction::Power { kappa, beta } => kappa * e.max(0.0).powf(beta - 1.0),
            CostFunction::Custom(c) => (c.marginal)(e),
        }
    }

    pub fn marginal_inverse(&self, y: f64) -> f64 {
        match self {
            CostFunction::Power { kappa, beta } => (y.max(0.0) / kappa).powf(1.0 / (beta - 1.0)),
            CostFunction::Custom(c) => (c.marginal_inverse)(y),
        }
    }

    /// Largest undominated effort `c^{-1}(1)`.
    pub fn max_effort(&self) -> f64 {
        match self {
            CostFunction::Power { kappa, beta } => (beta / kappa).powf(1.0 / beta),
            CostFunction::Custom(_) => {
                let mut hi = 1.0;
                while self.cost(hi) < 1.0 {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return f64::INFINITY;
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cost(mid) < 1.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}
