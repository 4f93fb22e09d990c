//! Optimal prize schedule at the optimal standard.
//!
//! With `t` fixed, `g(t; v)` is linear in the differentials and the budget is
//! `sum_r r d_r = 1`, so the optimum is a corner `v^(r)`: `r` equal prizes of
//! `1/r`. The corner value is the rank score `B_r(t) / r`, which also equals
//! `(1/n) int h~(x; t) dF_(n-r:n)(x)` with the modified hazard
//! `h~(x; t) = f(max(x, t)) / (1 - F(x))`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::order::density_weight;
use crate::dist::{find_modes_with, NoiseDistribution};
use crate::equilibrium::{
    global_mode_sufficiency_with, marginal_benefit_rank_with, solve_at_threshold,
    solve_design_with, EquilibriumSolution, SolverOptions,
};
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::schedule::{CostFunction, PrizeSchedule};

/// Agreement required between the two rank-score computations.
pub const REPRESENTATION_TOL: f64 = 1e-7;
/// Scores closer than this are treated as tied.
pub const SCORE_TIE_TOL: f64 = 1e-9;

/// `f(max(x, t)) / (1 - F(x))`.
pub fn modified_hazard(d: &NoiseDistribution, t: f64, x: f64) -> Result<f64> {
    let s = d.sf(x);
    if s < 1e-300 {
        return Err(Error::SurvivalUnderflow { x, survival: s });
    }
    Ok(d.pdf(x.max(t)) / s)
}

fn hazard_route(d: &NoiseDistribution, n: usize, r: usize, t: f64, quad: QuadOptions) -> Result<f64> {
    let j = n - r;
    if j == 0 {
        // F_(0:n) puts all its mass at the lower end, where F = 0
        return Ok(d.pdf(t) / n as f64);
    }
    let (lo, hi) = d.effective_support();
    let mut breaks = d.quadrature_breaks().to_vec();
    breaks.push(t);
    let ft = d.pdf(t);
    let integral = integrate(
        |x| {
            let s = d.sf(x);
            if s <= 0.0 {
                return 0.0;
            }
            let f = d.pdf(x);
            let num = if x < t { ft } else { f };
            num / s * f * density_weight(d.cdf(x), s, j, n)
        },
        lo,
        hi,
        &breaks,
        quad,
    )?;
    Ok(integral.value / n as f64)
}

/// `B_r(t) / r`, computed directly and through the modified hazard.
pub fn rank_score(d: &NoiseDistribution, n: usize, r: usize, t: f64) -> Result<f64> {
    rank_score_with(d, n, r, t, QuadOptions::default())
}

pub fn rank_score_with(
    d: &NoiseDistribution,
    n: usize,
    r: usize,
    t: f64,
    quad: QuadOptions,
) -> Result<f64> {
    let direct = marginal_benefit_rank_with(d, n, r, t, quad)? / r as f64;
    let hazard = hazard_route(d, n, r, t, quad)?;
    if (direct - hazard).abs() > REPRESENTATION_TOL {
        return Err(Error::RepresentationMismatch {
            rank: r,
            direct,
            hazard,
        });
    }
    Ok(direct)
}

/// Rank scores for `r = 1..=n`, computed in parallel.
pub fn rank_scores(d: &NoiseDistribution, n: usize, t: f64, quad: QuadOptions) -> Result<Vec<f64>> {
    (1..=n)
        .into_par_iter()
        .map(|r| rank_score_with(d, n, r, t, quad))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Wta,
    Eps,
    Tie,
    InteriorCheck,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Wta => "wta",
            Regime::Eps => "eps",
            Regime::Tie => "tie",
            Regime::InteriorCheck => "interior-check",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrizeDesignReport {
    pub r_star: usize,
    pub schedule: PrizeSchedule,
    /// `B_r(t) / r` for `r = 1..=n`.
    pub scores: Vec<f64>,
    pub regime: Regime,
    /// Every `r` whose score is within the tie tolerance of the best.
    pub tie_set: Vec<usize>,
    /// Threshold at which the scores were evaluated.
    pub threshold: f64,
}

/// Picks the corner with the highest score; ties go to the smallest `r`.
pub fn corner_solution(scores: &[f64], threshold: f64) -> PrizeDesignReport {
    let n = scores.len();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tie_set: Vec<usize> = (1..=n)
        .filter(|&r| scores[r - 1] >= best - SCORE_TIE_TOL)
        .collect();
    let r_star = tie_set[0];
    let regime = if tie_set.len() > 1 {
        Regime::Tie
    } else if r_star == 1 {
        Regime::Wta
    } else if r_star == n {
        Regime::Eps
    } else {
        Regime::InteriorCheck
    };
    PrizeDesignReport {
        r_star,
        schedule: PrizeSchedule::top_equal(r_star, n),
        scores: scores.to_vec(),
        regime,
        tie_set,
        threshold,
    }
}

/// Optimal schedule and the resulting equilibrium.
///
/// Without `threshold` the global mode must be optimal for every schedule;
/// otherwise the schedule is optimized for the given threshold only.
pub fn optimal_prizes(
    d: &NoiseDistribution,
    n: usize,
    cost: &CostFunction,
    threshold: Option<f64>,
) -> Result<(PrizeDesignReport, EquilibriumSolution)> {
    optimal_prizes_with(d, n, cost, threshold, SolverOptions::default())
}

pub fn optimal_prizes_with(
    d: &NoiseDistribution,
    n: usize,
    cost: &CostFunction,
    threshold: Option<f64>,
    opts: SolverOptions,
) -> Result<(PrizeDesignReport, EquilibriumSolution)> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let t = match threshold {
        Some(t) => t,
        None => {
            let shape = find_modes_with(d, opts.modes)?;
            let suff = global_mode_sufficiency_with(d, &shape, n, opts)?;
            if !suff.holds {
                return Err(Error::SufficiencyViolated {
                    witness: suff.witness,
                });
            }
            suff.global_mode
        }
    };
    let scores = rank_scores(d, n, t, opts.quad)?;
    let report = corner_solution(&scores, t);
    let solution = match threshold {
        Some(t) => solve_at_threshold(d, &report.schedule, cost, t, opts)?,
        None => {
            let mut sol = solve_design_with(d, &report.schedule, cost, opts)?;
            if sol.threshold != t {
                let msg = format!(
                    "schedule optimum at t = {} differs from the global mode {t}",
                    sol.threshold
                );
                log::warn!("{msg}");
                sol.warnings.push(msg);
            }
            sol
        }
    };
    Ok((report, solution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::catalog;
    use crate::equilibrium::total_marginal_benefit;

    #[test]
    fn hazard_examples() {
        let e = NoiseDistribution::exponential(2.5).unwrap();
        for &x in &[0.0, 0.4, 3.0] {
            assert!((modified_hazard(&e, 0.0, x).unwrap() - 2.5).abs() < 1e-12);
        }
        let f2 = NoiseDistribution::erf_hazard();
        assert!((modified_hazard(&f2, 0.0, 0.0).unwrap() - 2.0).abs() < 1e-14);
        let g = NoiseDistribution::gumbel(0.0, 1.0).unwrap();
        assert_eq!(modified_hazard(&g, -1.0, 0.7).unwrap(), g.hazard(0.7).unwrap());
        assert!(matches!(
            modified_hazard(&e, 0.0, 1e4),
            Err(Error::SurvivalUnderflow { .. })
        ));
    }

    #[test]
    fn routes_agree_on_several_families() {
        let ds = [
            catalog::trimodal_red(),
            NoiseDistribution::gumbel(0.3, 0.8).unwrap(),
            NoiseDistribution::normal(0.0, 1.0).unwrap(),
            NoiseDistribution::erf_hazard(),
        ];
        for d in &ds {
            for r in 1..=4 {
                for &t in &[-0.3, 0.0, 0.5, 1.0] {
                    rank_score(d, 4, r, t).unwrap();
                }
            }
        }
    }

    #[test]
    fn exponential_scores_flat() {
        let d = NoiseDistribution::exponential(1.3).unwrap();
        let s = rank_scores(&d, 5, 0.0, QuadOptions::default()).unwrap();
        for v in s {
            assert!((v - 1.3 / 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gumbel_scores_decrease() {
        let d = NoiseDistribution::gumbel(0.0, 1.0).unwrap();
        let s = rank_scores(&d, 5, 0.0, QuadOptions::default()).unwrap();
        assert!(s.windows(2).all(|w| w[0] > w[1]), "{s:?}");
    }

    #[test]
    fn corner_matches_schedule_value() {
        let d = catalog::trimodal_green();
        let s = rank_scores(&d, 3, 0.5, QuadOptions::default()).unwrap();
        for r in 1..=3 {
            let g = total_marginal_benefit(&d, &PrizeSchedule::top_equal(r, 3), 0.5).unwrap();
            assert!((g - s[r - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn regimes() {
        let c = CostFunction::quadratic();
        let g = NoiseDistribution::gumbel(0.0, 1.0).unwrap();
        let (rep, sol) = optimal_prizes(&g, 3, &c, None).unwrap();
        assert_eq!((rep.regime, rep.r_star), (Regime::Wta, 1));
        assert!(sol.threshold.abs() < 1e-12);

        let f2 = NoiseDistribution::erf_hazard();
        let (rep, sol) = optimal_prizes(&f2, 3, &c, None).unwrap();
        assert_eq!((rep.regime, rep.r_star), (Regime::Eps, 3));
        assert!((sol.effort - 2.0 / 3.0).abs() < 1e-12);
        assert!(rep.scores.windows(2).all(|w| w[0] < w[1]));

        let e = NoiseDistribution::exponential(1.0).unwrap();
        let (rep, _) = optimal_prizes(&e, 4, &c, None).unwrap();
        assert_eq!(rep.regime, Regime::Tie);
        assert_eq!(rep.tie_set, vec![1, 2, 3, 4]);
        assert_eq!(rep.r_star, 1);
    }

    #[test]
    fn sufficiency_required_without_override() {
        let c = CostFunction::quadratic();
        let red = catalog::trimodal_red();
        assert_eq!(
            optimal_prizes(&red, 3, &c, None).unwrap_err(),
            Error::SufficiencyViolated { witness: 1.0 }
        );
        let (rep, sol) = optimal_prizes(&red, 3, &c, Some(1.0)).unwrap();
        assert_eq!(sol.threshold, 1.0);
        assert_eq!(rep.threshold, 1.0);
    }

    #[test]
    fn budget_identity_of_corner() {
        for n in 1..7 {
            let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64).collect();
            let rep = corner_solution(&scores, 0.0);
            let total: f64 = rep
                .schedule
                .differentials()
                .iter()
                .enumerate()
                .map(|(i, d)| (i + 1) as f64 * d)
                .sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }
}
