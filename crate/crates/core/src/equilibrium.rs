//! Symmetric equilibrium of the tournament with a standard.
//!
//! With rivals at effort `e*` and standard `rho`, write `t = rho - e*` for the
//! threshold in noise units. The marginal effect of effort on the probability
//! of winning at least the r-th prize is
//!
//! ```text
//! B_r(t) = f(t) F_(n-r:n-1)(t) + int_{x > t} f(x) dF_(n-r:n-1)(x)
//! ```
//!
//! and the first-order condition is `g(t; v) = sum_r B_r(t) (v_r - v_{r+1}) = c'(e*)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dist::order::{cdf_from, density_weight};
use crate::dist::shape::scan_grid;
use crate::dist::{find_modes_with, ModeOptions, NoiseDistribution, ShapeReport};
use crate::error::{Error, Result};
use crate::quad::{integrate, QuadOptions};
use crate::schedule::{CostFunction, PrizeSchedule};

/// Ties between candidate thresholds closer than this go to the smaller threshold.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub quad: QuadOptions,
    pub modes: ModeOptions,
    /// Points in the full-support scan that cross-checks the mode search.
    pub scan_points: usize,
    /// Effort grid of the deviation-payoff diagnostic.
    pub concavity_points: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            quad: QuadOptions::default(),
            modes: ModeOptions::default(),
            scan_points: 1001,
            concavity_points: 400,
        }
    }
}

/// A standard together with a prize schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TournamentDesign {
    pub standard: f64,
    pub schedule: PrizeSchedule,
}

impl TournamentDesign {
    pub fn new(standard: f64, schedule: PrizeSchedule) -> Self {
        Self { standard, schedule }
    }

    pub fn n(&self) -> usize {
        self.schedule.n()
    }
}

fn check_rank(n: usize, r: usize) -> Result<()> {
    if r == 0 || r > n || n < 1 {
        return Err(Error::RankOutOfRange { rank: r, n });
    }
    Ok(())
}

/// `B_r(t)` with the default quadrature settings.
pub fn marginal_benefit_rank(d: &NoiseDistribution, n: usize, r: usize, t: f64) -> Result<f64> {
    marginal_benefit_rank_with(d, n, r, t, QuadOptions::default())
}

pub fn marginal_benefit_rank_with(
    d: &NoiseDistribution,
    n: usize,
    r: usize,
    t: f64,
    quad: QuadOptions,
) -> Result<f64> {
    check_rank(n, r)?;
    let j = n - r;
    let m = n - 1;
    let ft = d.pdf(t);
    if j == 0 {
        return Ok(ft);
    }
    let boundary = ft * cdf_from(d.cdf(t), d.sf(t), j, m);
    let (lo, hi) = d.effective_support();
    let a = t.max(lo);
    let integral = integrate(
        |x| {
            let f = d.pdf(x);
            f * f * density_weight(d.cdf(x), d.sf(x), j, m)
        },
        a,
        hi,
        d.quadrature_breaks(),
        quad,
    )?;
    Ok(boundary + integral.value)
}

/// `[B_1(t), ..., B_n(t)]`, evaluated in parallel.
pub fn marginal_benefits(
    d: &NoiseDistribution,
    n: usize,
    t: f64,
    quad: QuadOptions,
) -> Result<Vec<f64>> {
    (1..=n)
        .into_par_iter()
        .map(|r| marginal_benefit_rank_with(d, n, r, t, quad))
        .collect()
}

/// `g(t; v)` with the default quadrature settings.
pub fn total_marginal_benefit(d: &NoiseDistribution, v: &PrizeSchedule, t: f64) -> Result<f64> {
    total_marginal_benefit_with(d, v, t, QuadOptions::default())
}

pub fn total_marginal_benefit_with(
    d: &NoiseDistribution,
    v: &PrizeSchedule,
    t: f64,
    quad: QuadOptions,
) -> Result<f64> {
    let n = v.n();
    let mut g = 0.0;
    for (i, dr) in v.differentials().into_iter().enumerate() {
        if dr > 0.0 {
            g += dr * marginal_benefit_rank_with(d, n, i + 1, t, quad)?;
        }
    }
    Ok(g)
}

/// Probability that the deviating player (effort `e`, rivals at `e_star`)
/// passes `rho` and wins at least the r-th prize.
pub fn prize_probability(
    d: &NoiseDistribution,
    n: usize,
    r: usize,
    e: f64,
    e_star: f64,
    rho: f64,
) -> Result<f64> {
    prize_probability_with(d, n, r, e, e_star, rho, QuadOptions::default())
}

pub fn prize_probability_with(
    d: &NoiseDistribution,
    n: usize,
    r: usize,
    e: f64,
    e_star: f64,
    rho: f64,
    quad: QuadOptions,
) -> Result<f64> {
    check_rank(n, r)?;
    let j = n - r;
    let m = n - 1;
    let own = d.sf(rho - e);
    if j == 0 {
        return Ok(own);
    }
    let t = rho - e_star;
    let first = own * cdf_from(d.cdf(t), d.sf(t), j, m);
    let (lo, hi) = d.effective_support();
    let shift = e_star - e;
    let mut breaks = d.quadrature_breaks().to_vec();
    breaks.extend(d.kinks().into_iter().map(|k| k - shift));
    let integral = integrate(
        |x| d.sf(shift + x) * d.pdf(x) * density_weight(d.cdf(x), d.sf(x), j, m),
        t.max(lo),
        hi,
        &breaks,
        quad,
    )?;
    Ok((first + integral.value).clamp(0.0, 1.0))
}

/// Expected deviation payoff `sum_r P^(r)(e, e*; rho) d_r - c(e)`.
pub fn deviation_payoff(
    d: &NoiseDistribution,
    design: &TournamentDesign,
    cost: &CostFunction,
    e: f64,
    e_star: f64,
    quad: QuadOptions,
) -> Result<f64> {
    let n = design.n();
    let mut total = 0.0;
    for (i, dr) in design.schedule.differentials().into_iter().enumerate() {
        if dr > 0.0 {
            total += dr * prize_probability_with(d, n, i + 1, e, e_star, design.standard, quad)?;
        }
    }
    Ok(total - cost.cost(e))
}

/// `c'^{-1}(g(t; v))`.
pub fn equilibrium_effort(
    d: &NoiseDistribution,
    v: &PrizeSchedule,
    t: f64,
    cost: &CostFunction,
) -> Result<f64> {
    let g = total_marginal_benefit(d, v, t)?;
    effort_for_benefit(g, cost)
}

pub(crate) fn effort_for_benefit(g: f64, cost: &CostFunction) -> Result<f64> {
    let cap = cost.marginal(cost.max_effort());
    if g > cap * (1.0 + 1e-12) {
        return Err(Error::EffortOutOfRange {
            benefit: g,
            max_marginal_cost: cap,
        });
    }
    if g <= 0.0 {
        return Ok(0.0);
    }
    Ok(cost.marginal_inverse(g))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub marginal_benefit: f64,
    /// `(mode, g(mode; v))` for every mode at or above the global mode.
    pub candidates: Vec<(f64, f64)>,
    /// Maximizer and maximum of `g` over a uniform scan of the support.
    pub scan_threshold: f64,
    pub scan_marginal_benefit: f64,
    pub scan_step: f64,
    /// The scan found nothing better than the best mode.
    pub scan_agrees: bool,
}

/// Evaluates `g(t; v)` on a uniform grid of the effective support plus kinks.
pub fn scan_marginal_benefit(
    d: &NoiseDistribution,
    v: &PrizeSchedule,
    points: usize,
    quad: QuadOptions,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = d.effective_support();
    let xs = scan_grid(d, lo, hi, 1.0 / (points.max(3) - 1) as f64);
    xs.par_iter()
        .map(|&t| total_marginal_benefit_with(d, v, t, quad).map(|g| (t, g)))
        .collect()
}

fn argmax_smallest(points: &[(f64, f64)]) -> (f64, f64) {
    let best = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    points
        .iter()
        .filter(|p| p.1 >= best - TIE_TOL)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .copied()
        .expect("nonempty")
}

/// Best threshold among the modes at or above the global mode.
pub fn optimal_threshold(d: &NoiseDistribution, v: &PrizeSchedule) -> Result<ThresholdChoice> {
    let opts = SolverOptions::default();
    let shape = find_modes_with(d, opts.modes)?;
    optimal_threshold_with(d, &shape, v, opts)
}

pub fn optimal_threshold_with(
    d: &NoiseDistribution,
    shape: &ShapeReport,
    v: &PrizeSchedule,
    opts: SolverOptions,
) -> Result<ThresholdChoice> {
    let candidates: Vec<(f64, f64)> = shape
        .candidate_modes()
        .into_iter()
        .map(|m| total_marginal_benefit_with(d, v, m, opts.quad).map(|g| (m, g)))
        .collect::<Result<_>>()?;
    let (threshold, marginal_benefit) = argmax_smallest(&candidates);
    let scan = scan_marginal_benefit(d, v, opts.scan_points, opts.quad)?;
    let (scan_threshold, scan_marginal_benefit) = argmax_smallest(&scan);
    let (lo, hi) = d.effective_support();
    Ok(ThresholdChoice {
        threshold,
        marginal_benefit,
        candidates,
        scan_threshold,
        scan_marginal_benefit,
        scan_step: (hi - lo) / (opts.scan_points.max(3) - 1) as f64,
        scan_agrees: scan_marginal_benefit <= marginal_benefit + 10.0 * opts.quad.abs_tol,
    })
}

/// Whether the FOC point is the peak of a unimodal deviation payoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcavityDiagnostic {
    /// Discrete differences of the payoff change sign at most once, from + to -.
    pub unimodal: bool,
    /// Grid effort with the highest deviation payoff.
    pub best_grid_effort: f64,
    /// `max_grid pi(e) - pi(e*)`.
    pub payoff_gap: f64,
    /// `unimodal` and no grid effort beats `e*` beyond quadrature error.
    pub ok: bool,
}

pub fn concavity_diagnostic(
    d: &NoiseDistribution,
    design: &TournamentDesign,
    cost: &CostFunction,
    e_star: f64,
    points: usize,
    quad: QuadOptions,
) -> Result<ConcavityDiagnostic> {
    let e_bar = cost.max_effort();
    let grid: Vec<f64> = (0..points)
        .map(|k| e_bar * k as f64 / (points - 1) as f64)
        .collect();
    let payoffs: Vec<f64> = grid
        .par_iter()
        .map(|&e| deviation_payoff(d, design, cost, e, e_star, quad))
        .collect::<Result<_>>()?;
    let at_star = deviation_payoff(d, design, cost, e_star, e_star, quad)?;

    let mut descending = false;
    let mut unimodal = true;
    for w in payoffs.windows(2) {
        let diff = w[1] - w[0];
        if diff.abs() <= 1e-12 {
            continue;
        }
        if diff < 0.0 {
            descending = true;
        } else if descending {
            unimodal = false;
        }
    }
    let (k, best) = payoffs
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p > acc.1 { (i, p) } else { acc });
    let payoff_gap = best - at_star;
    Ok(ConcavityDiagnostic {
        unimodal,
        best_grid_effort: grid[k],
        payoff_gap,
        ok: unimodal && payoff_gap <= 1e-7,
    })
}

/// Optimal standard and equilibrium effort for a fixed prize schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSolution {
    pub threshold: f64,
    pub effort: f64,
    pub standard: f64,
    pub marginal_benefit: f64,
    pub pass_probability: f64,
    pub concavity_ok: bool,
    pub concavity: ConcavityDiagnostic,
    pub scan_agrees: bool,
    pub warnings: Vec<String>,
}

impl EquilibriumSolution {
    pub fn design(&self, schedule: &PrizeSchedule) -> TournamentDesign {
        TournamentDesign::new(self.standard, schedule.clone())
    }
}

/// Optimal threshold, effort from the FOC and the concavity diagnostic.
pub fn solve_design(
    d: &NoiseDistribution,
    v: &PrizeSchedule,
    cost: &CostFunction,
) -> Result<EquilibriumSolution> {
    solve_design_with(d, v, cost, SolverOptions::default())
}

pub fn solve_design_with(
    d: &NoiseDistribution,
    v: &PrizeSchedule,
    cost: &CostFunction,
    opts: SolverOptions,
) -> Result<EquilibriumSolution> {
    let shape = find_modes_with(d, opts.modes)?;
    let choice = optimal_threshold_with(d, &shape, v, opts)?;
    let mut sol = solve_at_threshold(d, v, cost, choice.threshold, opts)?;
    sol.scan_agrees = choice.scan_agrees;
    if !choice.scan_agrees {
        let msg = format!(
            "support scan found g = {} at t = {}, above the best mode value {}",
            choice.scan_marginal_benefit, choice.scan_threshold, choice.marginal_benefit
        );
        log::warn!("{msg}");
        sol.warnings.push(msg);
    }
    Ok(sol)
}

/// Equilibrium for an explicitly chosen threshold `t`.
pub fn solve_at_threshold(
    d: &NoiseDistribution,
    v: &PrizeSchedule,
    cost: &CostFunction,
    t: f64,
    opts: SolverOptions,
) -> Result<EquilibriumSolution> {
    let g = total_marginal_benefit_with(d, v, t, opts.quad)?;
    let effort = effort_for_benefit(g, cost)?;
    let standard = effort + t;
    let design = TournamentDesign::new(standard, v.clone());
    let concavity =
        concavity_diagnostic(d, &design, cost, effort, opts.concavity_points, opts.quad)?;
    let mut warnings = d.warnings().to_vec();
    if !concavity.ok {
        let msg = format!(
            "concavity warning: deviation payoff peaks at e = {} (gain {:.3e} over e* = {}); \
             a symmetric pure-strategy equilibrium may not exist",
            concavity.best_grid_effort, concavity.payoff_gap, effort
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(EquilibriumSolution {
        threshold: t,
        effort,
        standard,
        marginal_benefit: g,
        pass_probability: d.sf(t),
        concavity_ok: concavity.ok,
        concavity,
        scan_agrees: true,
        warnings,
    })
}

/// Result of checking whether the global mode is optimal for every schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sufficiency {
    pub holds: bool,
    pub global_mode: f64,
    /// Mode maximizing `B_1`; equals the global mode when `holds`.
    pub witness: f64,
    pub top_rank_benefits: Vec<(f64, f64)>,
}

/// `B_1` (the winner-take-all marginal benefit) maximized at the global mode?
pub fn global_mode_sufficiency(d: &NoiseDistribution, n: usize) -> Result<Sufficiency> {
    let opts = SolverOptions::default();
    let shape = find_modes_with(d, opts.modes)?;
    global_mode_sufficiency_with(d, &shape, n, opts)
}

pub fn global_mode_sufficiency_with(
    d: &NoiseDistribution,
    shape: &ShapeReport,
    n: usize,
    opts: SolverOptions,
) -> Result<Sufficiency> {
    let wta = PrizeSchedule::winner_take_all(n);
    let choice = optimal_threshold_with(d, shape, &wta, opts)?;
    Ok(Sufficiency {
        holds: choice.threshold == shape.global_mode && choice.scan_agrees,
        global_mode: shape.global_mode,
        witness: choice.threshold,
        top_rank_benefits: choice.candidates,
    })
}
