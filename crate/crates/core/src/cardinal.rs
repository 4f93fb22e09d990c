//! Cardinal pay schemes and the marginal-benefit bound.
//!
//! A pay scheme maps the output vector to nonnegative payments. Admissible
//! schemes are anonymous, monotone in own output and spend at most the unit
//! budget. For any such scheme the marginal benefit of effort is
//! `R(e; w) = E[1{X_1 > x_m} w_1(e + X) lambda(X_1)]`, bounded by
//! `g(x_m; WTA)` under log-concave noise and by `f(lower)/n` under
//! log-convex noise.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{classify_log, find_modes, LogClass, NoiseDistribution};
use crate::equilibrium::{total_marginal_benefit, TournamentDesign};
use crate::error::{Error, Result};
use crate::schedule::PrizeSchedule;

const BATCH: usize = 10_000;
pub const LAMBDA_CAP: f64 = 1e6;
const PROPERTY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DeclaredProperties {
    pub anonymous: bool,
    pub monotone: bool,
    pub budget_feasible: bool,
}

impl Default for DeclaredProperties {
    fn default() -> Self {
        Self {
            anonymous: true,
            monotone: true,
            budget_feasible: true,
        }
    }
}

pub trait PayScheme: Send + Sync {
    fn n(&self) -> usize;

    /// Payment to player `i` given outputs `y`.
    fn pay(&self, y: &[f64], i: usize) -> f64;

    fn payments(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| self.pay(y, i)).collect()
    }

    fn declared_properties(&self) -> DeclaredProperties {
        DeclaredProperties::default()
    }

    fn name(&self) -> String {
        "custom".into()
    }
}

/// Pays the prize schedule by rank among outputs at or above the standard.
#[derive(Debug, Clone)]
pub struct TournamentScheme {
    pub design: TournamentDesign,
}

pub fn tournament_as_payscheme(design: TournamentDesign) -> TournamentScheme {
    TournamentScheme { design }
}

impl PayScheme for TournamentScheme {
    fn n(&self) -> usize {
        self.design.n()
    }

    fn pay(&self, y: &[f64], i: usize) -> f64 {
        let yi = y[i];
        if yi < self.design.standard {
            return 0.0;
        }
        // ties broken by index
        let ahead = y
            .iter()
            .enumerate()
            .filter(|&(j, &z)| z > yi || (z == yi && j < i))
            .count();
        self.design.schedule.prizes()[ahead]
    }

    fn name(&self) -> String {
        format!("tournament(standard={}, v={})", self.design.standard, self.design.schedule)
    }
}

/// Same payment to everyone regardless of output.
#[derive(Debug, Clone)]
pub struct ConstantScheme {
    pub n: usize,
    pub amount: f64,
}

impl ConstantScheme {
    pub fn equal_split(n: usize) -> Self {
        Self { n, amount: 1.0 / n as f64 }
    }

    pub fn zero(n: usize) -> Self {
        Self { n, amount: 0.0 }
    }
}

impl PayScheme for ConstantScheme {
    fn n(&self) -> usize {
        self.n
    }

    fn pay(&self, _y: &[f64], _i: usize) -> f64 {
        self.amount
    }

    fn name(&self) -> String {
        format!("constant({})", self.amount)
    }
}

/// Splits the budget in proportion to `max(y_i - k, 0)`.
#[derive(Debug, Clone)]
pub struct ProportionalExcess {
    pub n: usize,
    pub k: f64,
}

impl PayScheme for ProportionalExcess {
    fn n(&self) -> usize {
        self.n
    }

    fn pay(&self, y: &[f64], i: usize) -> f64 {
        let total: f64 = y.iter().map(|z| (z - self.k).max(0.0)).sum();
        if total <= 0.0 {
            return 0.0;
        }
        (y[i] - self.k).max(0.0) / total
    }

    fn name(&self) -> String {
        format!("proportional(k={})", self.k)
    }
}

/// `min(slope * max(y_i - k, 0), 1/n)`.
#[derive(Debug, Clone)]
pub struct CappedLinear {
    pub n: usize,
    pub k: f64,
    pub slope: f64,
}

impl PayScheme for CappedLinear {
    fn n(&self) -> usize {
        self.n
    }

    fn pay(&self, y: &[f64], i: usize) -> f64 {
        (self.slope * (y[i] - self.k).max(0.0)).min(1.0 / self.n as f64)
    }

    fn name(&self) -> String {
        format!("capped-linear(k={}, slope={})", self.k, self.slope)
    }
}

/// Convex combination of schemes.
#[derive(Clone)]
pub struct Mixture {
    pub parts: Vec<(f64, Arc<dyn PayScheme>)>,
}

impl PayScheme for Mixture {
    fn n(&self) -> usize {
        self.parts[0].1.n()
    }

    fn pay(&self, y: &[f64], i: usize) -> f64 {
        self.parts.iter().map(|(a, w)| a * w.pay(y, i)).sum()
    }

    fn name(&self) -> String {
        let inner: Vec<String> = self
            .parts
            .iter()
            .map(|(a, w)| format!("{a:.3}*{}", w.name()))
            .collect();
        format!("mix[{}]", inner.join(" + "))
    }
}

/// A user scheme given by a single evaluation callback.
pub struct CallbackScheme<F> {
    pub n: usize,
    pub f: F,
}

impl<F> PayScheme for CallbackScheme<F>
where
    F: Fn(&[f64], usize) -> f64 + Send + Sync,
{
    fn n(&self) -> usize {
        self.n
    }

    fn pay(&self, y: &[f64], i: usize) -> f64 {
        (self.f)(y, i)
    }
}

fn violation(property: &'static str, detail: String) -> Error {
    Error::PropertyViolation { property, detail }
}

/// Random spot checks of anonymity, monotonicity and the budget.
pub fn check_properties(
    w: &dyn PayScheme,
    d: &NoiseDistribution,
    e: f64,
    trials: usize,
    seed: u64,
) -> Result<()> {
    let n = w.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = {
        let (lo, hi) = d.effective_support();
        (hi - lo).max(1e-3)
    };
    let mut y = vec![0.0; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..trials {
        for z in y.iter_mut() {
            *z = e + d.quantile(rng.random_range(1e-9..1.0 - 1e-9));
        }
        let pay = w.payments(&y);
        if let Some(p) = pay.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(violation("nonnegative", format!("payment {p} at y = {y:?}")));
        }
        let total: f64 = pay.iter().sum();
        if total > 1.0 + PROPERTY_TOL {
            return Err(violation("budget", format!("payments sum to {total} at y = {y:?}")));
        }

        perm.shuffle(&mut rng);
        let permuted: Vec<f64> = perm.iter().map(|&j| y[j]).collect();
        let pay_perm = w.payments(&permuted);
        for (k, &j) in perm.iter().enumerate() {
            // ties are measure zero, so exact equality is not required there
            if (pay_perm[k] - pay[j]).abs() > 1e-9 {
                return Err(violation(
                    "anonymity",
                    format!("player {j} paid {} but {} after permuting y = {y:?}", pay[j], pay_perm[k]),
                ));
            }
        }

        let i = rng.random_range(0..n);
        let mut up = y.clone();
        up[i] += rng.random::<f64>() * 0.5 * spread;
        let after = w.pay(&up, i);
        if after < pay[i] - PROPERTY_TOL {
            return Err(violation(
                "monotonicity",
                format!("player {i} paid {} then {after} after raising output from {} to {}", pay[i], y[i], up[i]),
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct REstimate {
    pub estimate: f64,
    pub se: f64,
    pub draws: usize,
    pub seed: u64,
}

/// Monte-Carlo estimate of `R(e; w)`.
pub fn evaluate_r(
    d: &NoiseDistribution,
    w: &dyn PayScheme,
    e: f64,
    draws: usize,
    seed: u64,
) -> Result<REstimate> {
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let (_, upper) = d.support();
    if upper.is_finite() && d.pdf(upper) > 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "density must vanish at the upper bound {upper}"
        )));
    }
    check_properties(w, d, e, 200, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let x_m = find_modes(d)?.global_mode;
    let n = w.n();
    let parts: Vec<Result<(f64, f64)>> = (0..draws.div_ceil(BATCH))
        .into_par_iter()
        .map(|k| {
            let size = BATCH.min(draws - k * BATCH);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut y = vec![0.0; n];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..size {
                let mut x1 = 0.0;
                for (i, z) in y.iter_mut().enumerate() {
                    let mut u: f64 = rng.random();
                    if u == 0.0 {
                        u = f64::MIN_POSITIVE;
                    }
                    let x = d.quantile(u);
                    if i == 0 {
                        x1 = x;
                    }
                    *z = e + x;
                }
                if x1 <= x_m {
                    continue;
                }
                let pay = w.pay(&y, 0);
                if pay == 0.0 {
                    continue;
                }
                let lambda = d.likelihood_ratio(x1)?;
                if lambda.abs() > LAMBDA_CAP {
                    return Err(Error::UnboundedLikelihoodRatio { x: x1, value: lambda });
                }
                let term = pay * lambda;
                s += term;
                s2 += term * term;
            }
            Ok((s, s2))
        })
        .collect();
    let (mut s, mut s2) = (0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        s += a;
        s2 += b;
    }
    let nd = draws as f64;
    let mean = s / nd;
    let var = (s2 / nd - mean * mean).max(0.0) * nd / (nd - 1.0);
    Ok(REstimate {
        estimate: mean,
        se: (var / nd).sqrt(),
        draws,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub bound: f64,
    pub estimate: f64,
    pub se: f64,
    pub satisfied: bool,
    pub log_class: LogClass,
}

/// The bound on `R` implied by the shape of `d`.
pub fn bound_value(d: &NoiseDistribution, n: usize) -> Result<(f64, LogClass)> {
    let class = classify_log(d);
    if class.is_log_concave() {
        let x_m = find_modes(d)?.global_mode;
        let g = total_marginal_benefit(d, &PrizeSchedule::winner_take_all(n), x_m)?;
        Ok((g, class))
    } else if class.is_log_convex() {
        let (lower, _) = d.support();
        if !lower.is_finite() {
            return Err(Error::NoBoundAvailable);
        }
        Ok((d.pdf(lower) / n as f64, class))
    } else {
        Err(Error::NoBoundAvailable)
    }
}

/// `R(e; w) <= bound + 4 SE`?
pub fn check_bound(
    d: &NoiseDistribution,
    w: &dyn PayScheme,
    e: f64,
    draws: usize,
    seed: u64,
) -> Result<BoundCheck> {
    let (bound, log_class) = bound_value(d, w.n())?;
    let est = evaluate_r(d, w, e, draws, seed)?;
    Ok(BoundCheck {
        bound,
        estimate: est.estimate,
        se: est.se,
        satisfied: est.estimate <= bound + 4.0 * est.se,
        log_class,
    })
}

/// Random admissible schemes: convex mixtures of tournaments with a
/// standard, proportional excess sharing and capped linear pay.
///
/// Thresholds are drawn from the central part of the noise distribution,
/// shifted by the effort level `e`.
pub fn random_battery(
    d: &NoiseDistribution,
    n: usize,
    e: f64,
    count: usize,
    seed: u64,
) -> Vec<Arc<dyn PayScheme>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let level = |rng: &mut ChaCha8Rng| e + d.quantile(rng.random_range(0.02..0.9));
    (0..count)
        .map(|_| {
            let parts = rng.random_range(1..=3);
            let mut weights: Vec<f64> = (0..parts).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            let members: Vec<(f64, Arc<dyn PayScheme>)> = weights
                .into_iter()
                .map(|a| {
                    let member: Arc<dyn PayScheme> = match rng.random_range(0..3) {
                        0 => {
                            let standard = if rng.random::<f64>() < 0.25 {
                                f64::NEG_INFINITY
                            } else {
                                level(&mut rng)
                            };
                            Arc::new(tournament_as_payscheme(TournamentDesign::new(
                                standard,
                                PrizeSchedule::random(n, &mut rng),
                            )))
                        }
                        1 => Arc::new(ProportionalExcess { n, k: level(&mut rng) }),
                        _ => {
                            let (lo, hi) = (d.quantile(0.05), d.quantile(0.95));
                            Arc::new(CappedLinear {
                                n,
                                k: level(&mut rng),
                                slope: rng.random_range(0.2..5.0) / (hi - lo),
                            })
                        }
                    };
                    (a, member)
                })
                .collect();
            Arc::new(Mixture { parts: members }) as Arc<dyn PayScheme>
        })
        .collect()
}
