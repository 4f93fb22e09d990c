//! Monte-Carlo tournaments.
//!
//! Draws are split into fixed-size batches; batch `k` uses its own ChaCha
//! stream, so results depend only on the seed, never on the thread count.
//! Within a draw every effort on a grid sees the same noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::NoiseDistribution;
use crate::equilibrium::{marginal_benefit_rank_with, prize_probability_with, TournamentDesign};
use crate::error::{Error, Result};
use crate::quad::QuadOptions;
use crate::schedule::CostFunction;

pub const MIN_DRAWS: usize = 10_000;
pub const DEFAULT_DRAWS: usize = 1_000_000;
pub const DEFAULT_GRID: usize = 200;
const BATCH: usize = 10_000;

/// Environment variable consulted by callers that accept an implicit seed.
pub const SEED_ENV: &str = "TOURNEY_SEED";

fn require_seed(seed: Option<u64>) -> Result<u64> {
    seed.ok_or(Error::SeedRequired)
}

fn check_draws(draws: usize) -> Result<()> {
    if draws < MIN_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_DRAWS} draws required, got {draws}"
        )));
    }
    Ok(())
}

fn batches(draws: usize) -> Vec<(u64, usize)> {
    (0..draws.div_ceil(BATCH))
        .map(|k| (k as u64, BATCH.min(draws - k * BATCH)))
        .collect()
}

fn batch_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_noise(d: &NoiseDistribution, rng: &mut ChaCha8Rng) -> f64 {
    let mut u: f64 = rng.random();
    if u == 0.0 {
        u = f64::MIN_POSITIVE;
    }
    d.quantile(u)
}

/// Rank of player 0 with output `y` among rivals, or `None` below the standard.
/// Ties go to the lower index, so player 0 wins them.
fn rank_of(y: f64, rivals: &[f64], standard: f64) -> Option<usize> {
    if y < standard {
        return None;
    }
    Some(1 + rivals.iter().filter(|&&z| z > y).count())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub draws: usize,
    pub seed: u64,
    pub n: usize,
    pub effort: f64,
    pub rival_effort: f64,
    pub standard: f64,
    /// Estimated probability of winning at least the r-th prize, `r = 1..=n`.
    pub prize_probabilities: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub pass_fraction: f64,
    pub pass_fraction_se: f64,
    /// Draws in which player 1 finished exactly at rank r among qualifiers.
    pub rank_counts: Vec<u64>,
    /// Draws in which player 1 missed the standard.
    pub missed: u64,
}

fn bernoulli_se(p: f64, draws: usize) -> f64 {
    (p * (1.0 - p) / draws as f64).sqrt()
}

/// Player 1 at effort `e`, everyone else at `e_star`.
pub fn simulate_prize_probabilities(
    d: &NoiseDistribution,
    design: &TournamentDesign,
    e: f64,
    e_star: f64,
    draws: usize,
    seed: Option<u64>,
) -> Result<SimulationReport> {
    let seed = require_seed(seed)?;
    check_draws(draws)?;
    let n = design.n();
    let rho = design.standard;
    let tallies: Vec<Vec<u64>> = batches(draws)
        .into_par_iter()
        .map(|(stream, size)| {
            let mut rng = batch_rng(seed, stream);
            let mut counts = vec![0u64; n + 1];
            let mut rivals = vec![0.0; n - 1];
            for _ in 0..size {
                let y = e + draw_noise(d, &mut rng);
                for z in rivals.iter_mut() {
                    *z = e_star + draw_noise(d, &mut rng);
                }
                match rank_of(y, &rivals, rho) {
                    Some(r) => counts[r - 1] += 1,
                    None => counts[n] += 1,
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; n + 1];
    for t in &tallies {
        for (c, x) in counts.iter_mut().zip(t) {
            *c += x;
        }
    }
    let mut probs = Vec::with_capacity(n);
    let mut cum = 0u64;
    for c in &counts[..n] {
        cum += c;
        probs.push(cum as f64 / draws as f64);
    }
    let ses = probs.iter().map(|&p| bernoulli_se(p, draws)).collect();
    let pass = probs[n - 1];
    Ok(SimulationReport {
        draws,
        seed,
        n,
        effort: e,
        rival_effort: e_star,
        standard: rho,
        prize_probabilities: probs,
        standard_errors: ses,
        pass_fraction: pass,
        pass_fraction_se: bernoulli_se(pass, draws),
        rank_counts: counts[..n].to_vec(),
        missed: counts[n],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PayoffPoint {
    pub effort: f64,
    pub payoff: f64,
    /// `payoff - payoff(e*)`, estimated draw by draw.
    pub gain: f64,
    pub gain_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponseReport {
    pub draws: usize,
    pub seed: u64,
    pub rival_effort: f64,
    pub payoff_at_rival_effort: f64,
    pub curve: Vec<PayoffPoint>,
    /// Largest estimated gain over the grid.
    pub best_response_gap: f64,
    /// Standard error of the gain at the maximizing grid point.
    pub gap_se: f64,
    pub best_effort: f64,
    /// Upward bias allowance for taking a maximum over many noisy grid points.
    pub grid_bias: f64,
    pub certified: bool,
}

/// Effort grid `k * e_bar / (points - 1)`.
pub fn effort_grid(e_bar: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|k| e_bar * k as f64 / (points - 1) as f64)
        .collect()
}

/// Deviation payoffs over `grid` against rivals at `e_star`.
///
/// `to_output` maps an effort to its additive contribution to output and
/// `cost` is the deviator's cost of effort; both are in the caller's units.
pub fn scan_deviations<M, C>(
    d: &NoiseDistribution,
    design: &TournamentDesign,
    e_star: f64,
    grid: &[f64],
    to_output: M,
    cost: C,
    draws: usize,
    seed: Option<u64>,
) -> Result<BestResponseReport>
where
    M: Fn(f64) -> f64 + Sync,
    C: Fn(f64) -> f64,
{
    let seed = require_seed(seed)?;
    check_draws(draws)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty effort grid".into()));
    }
    let n = design.n();
    let rho = design.standard;
    let v = design.schedule.prizes();
    let shifts: Vec<f64> = grid.iter().map(|&e| to_output(e)).collect();
    let star_shift = to_output(e_star);
    let k = grid.len();
    let prize = |y: f64, rivals: &[f64]| rank_of(y, rivals, rho).map_or(0.0, |r| v[r - 1]);

    // per grid point: sum of prizes, sum and sum of squares of prize differences
    let sums: Vec<(f64, Vec<[f64; 3]>)> = batches(draws)
        .into_par_iter()
        .map(|(stream, size)| {
            let mut rng = batch_rng(seed, stream);
            let mut acc = vec![[0.0; 3]; k];
            let mut star_sum = 0.0;
            let mut rivals = vec![0.0; n - 1];
            for _ in 0..size {
                let x = draw_noise(d, &mut rng);
                for z in rivals.iter_mut() {
                    *z = star_shift + draw_noise(d, &mut rng);
                }
                let p_star = prize(star_shift + x, &rivals);
                star_sum += p_star;
                for (a, &s) in acc.iter_mut().zip(&shifts) {
                    let p = prize(s + x, &rivals);
                    let diff = p - p_star;
                    a[0] += p;
                    a[1] += diff;
                    a[2] += diff * diff;
                }
            }
            (star_sum, acc)
        })
        .collect();

    let mut star_sum = 0.0;
    let mut acc = vec![[0.0; 3]; k];
    for (s, a) in &sums {
        star_sum += s;
        for (x, y) in acc.iter_mut().zip(a) {
            for i in 0..3 {
                x[i] += y[i];
            }
        }
    }
    let nd = draws as f64;
    let c_star = cost(e_star);
    let curve: Vec<PayoffPoint> = grid
        .iter()
        .zip(&acc)
        .map(|(&e, a)| {
            let mean_diff = a[1] / nd;
            let var = (a[2] / nd - mean_diff * mean_diff).max(0.0) * nd / (nd - 1.0);
            PayoffPoint {
                effort: e,
                payoff: a[0] / nd - cost(e),
                gain: mean_diff - (cost(e) - c_star),
                gain_se: (var / nd).sqrt(),
            }
        })
        .collect();
    let best = curve
        .iter()
        .copied()
        .fold(None::<PayoffPoint>, |b, p| match b {
            Some(b) if b.gain >= p.gain => Some(b),
            _ => Some(p),
        })
        .expect("nonempty grid");
    let max_se = curve.iter().map(|p| p.gain_se).fold(0.0, f64::max);
    let grid_bias = (2.0 * (k as f64).ln()).sqrt() * max_se;
    let gap = best.gain;
    Ok(BestResponseReport {
        draws,
        seed,
        rival_effort: e_star,
        payoff_at_rival_effort: star_sum / nd - c_star,
        curve,
        best_response_gap: gap,
        gap_se: best.gain_se,
        best_effort: best.effort,
        grid_bias,
        certified: gap <= 3.0 * best.gain_se + grid_bias,
    })
}

/// Best-response check for additive effort on `[0, e_bar]`.
pub fn verify_best_response(
    d: &NoiseDistribution,
    design: &TournamentDesign,
    cost: &CostFunction,
    e_star: f64,
    grid_size: usize,
    draws: usize,
    seed: Option<u64>,
) -> Result<BestResponseReport> {
    let grid = effort_grid(cost.max_effort(), grid_size);
    scan_deviations(d, design, e_star, &grid, |e| e, |e| cost.cost(e), draws, seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalSource {
    Quadrature(QuadOptions),
    MonteCarlo { draws: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalComparison {
    pub rank: usize,
    pub finite_difference: f64,
    pub analytic: f64,
}

/// Central differences of `P^(r)` in own effort at `e_star`, next to `B_r`.
pub fn finite_difference_marginals(
    d: &NoiseDistribution,
    design: &TournamentDesign,
    e_star: f64,
    step: f64,
    source: MarginalSource,
) -> Result<Vec<MarginalComparison>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let n = design.n();
    let t = design.standard - e_star;
    let quad = match source {
        MarginalSource::Quadrature(q) => q,
        MarginalSource::MonteCarlo { .. } => QuadOptions::default(),
    };
    let fd: Vec<f64> = match source {
        MarginalSource::Quadrature(q) => (1..=n)
            .into_par_iter()
            .map(|r| {
                let up = prize_probability_with(d, n, r, e_star + step, e_star, design.standard, q)?;
                let down =
                    prize_probability_with(d, n, r, e_star - step, e_star, design.standard, q)?;
                Ok((up - down) / (2.0 * step))
            })
            .collect::<Result<_>>()?,
        MarginalSource::MonteCarlo { draws, seed } => {
            let up = simulate_prize_probabilities(d, design, e_star + step, e_star, draws, Some(seed))?;
            let down =
                simulate_prize_probabilities(d, design, e_star - step, e_star, draws, Some(seed))?;
            up.prize_probabilities
                .iter()
                .zip(&down.prize_probabilities)
                .map(|(a, b)| (a - b) / (2.0 * step))
                .collect()
        }
    };
    fd.into_iter()
        .enumerate()
        .map(|(i, fd)| {
            Ok(MarginalComparison {
                rank: i + 1,
                finite_difference: fd,
                analytic: marginal_benefit_rank_with(d, n, i + 1, t, quad)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::catalog;
    use crate::schedule::PrizeSchedule;

    #[test]
    fn seed_and_draws_required() {
        let d = NoiseDistribution::exponential(1.0).unwrap();
        let design = TournamentDesign::new(0.5, PrizeSchedule::winner_take_all(2));
        assert_eq!(
            simulate_prize_probabilities(&d, &design, 0.5, 0.5, 20_000, None).unwrap_err(),
            Error::SeedRequired
        );
        assert!(simulate_prize_probabilities(&d, &design, 0.5, 0.5, 100, Some(1)).is_err());
    }

    #[test]
    fn uniform_closed_form() {
        let d = NoiseDistribution::uniform(0.0, 1.0).unwrap();
        let design = TournamentDesign::new(0.8, PrizeSchedule::winner_take_all(2));
        let rep = simulate_prize_probabilities(&d, &design, 0.3, 0.3, 200_000, Some(7)).unwrap();
        assert!((rep.prize_probabilities[0] - 0.375).abs() < 3.0 * rep.standard_errors[0]);
        assert_eq!(rep.rank_counts.iter().sum::<u64>() + rep.missed, 200_000);
    }

    #[test]
    fn exchangeable_ranks() {
        let d = catalog::trimodal_red();
        let design = TournamentDesign::new(-1e9, PrizeSchedule::equal_sharing(4));
        let rep = simulate_prize_probabilities(&d, &design, 0.2, 0.2, 100_000, Some(3)).unwrap();
        for (r, (p, se)) in rep.prize_probabilities.iter().zip(&rep.standard_errors).enumerate() {
            let target = (r + 1) as f64 / 4.0;
            assert!((p - target).abs() <= 3.0 * se.max(1e-12), "r={r} p={p}");
        }
        assert_eq!(rep.pass_fraction, 1.0);
    }

    #[test]
    fn reproducible() {
        let d = NoiseDistribution::gumbel(0.0, 1.0).unwrap();
        let design = TournamentDesign::new(0.4, PrizeSchedule::new(vec![0.6, 0.3, 0.1]).unwrap());
        let a = simulate_prize_probabilities(&d, &design, 0.3, 0.4, 35_000, Some(11)).unwrap();
        let b = simulate_prize_probabilities(&d, &design, 0.3, 0.4, 35_000, Some(11)).unwrap();
        assert_eq!(a, b);
        let c = simulate_prize_probabilities(&d, &design, 0.3, 0.4, 35_000, Some(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn exponential_equilibrium_certified() {
        let d = NoiseDistribution::exponential(1.0).unwrap();
        let cost = CostFunction::quadratic();
        let design = TournamentDesign::new(0.5, PrizeSchedule::new(vec![0.8, 0.2]).unwrap());
        let ok = verify_best_response(&d, &design, &cost, 0.5, 60, 100_000, Some(5)).unwrap();
        assert!(ok.certified, "{} {} {}", ok.best_response_gap, ok.gap_se, ok.grid_bias);
        let bad = verify_best_response(&d, &design, &cost, 0.8, 60, 100_000, Some(5)).unwrap();
        assert!(!bad.certified);
        assert!(bad.best_response_gap > 5.0 * bad.gap_se);
        assert_eq!(bad.curve.len(), 60);
    }

    #[test]
    fn finite_differences_match_benefits() {
        let d = catalog::trimodal_red();
        let design = TournamentDesign::new(1.6, PrizeSchedule::winner_take_all(3));
        let rows = finite_difference_marginals(
            &d,
            &design,
            0.6,
            1e-5,
            MarginalSource::Quadrature(QuadOptions::default()),
        )
        .unwrap();
        for row in rows {
            assert!((row.finite_difference - row.analytic).abs() < 1e-4, "{row:?}");
        }
        let u = NoiseDistribution::uniform(0.0, 1.0).unwrap();
        let design = TournamentDesign::new(0.9, PrizeSchedule::winner_take_all(2));
        let rows = finite_difference_marginals(
            &u,
            &design,
            0.4,
            1e-5,
            MarginalSource::Quadrature(QuadOptions::default()),
        )
        .unwrap();
        assert!((rows[0].finite_difference - 1.0).abs() < 1e-3);
    }
}
