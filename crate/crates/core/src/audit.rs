//! Empirical audit of a declared standard.
//!
//! Performance is a shifted copy of the noise, so the optimal standard sits at
//! a mode of the performance density (the global one when that mode is also
//! best for the schedule in use). The audit estimates the density with a
//! Gaussian KDE, finds its modes, bootstraps the modal performance and
//! compares the declared standard against it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLE: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSample {
    pub observations: Vec<f64>,
    #[serde(default)]
    pub declared_standard: Option<f64>,
    #[serde(default)]
    pub groups: Option<Vec<String>>,
}

impl PerformanceSample {
    pub fn new(observations: Vec<f64>, declared_standard: Option<f64>) -> Result<Self> {
        let s = Self {
            observations,
            declared_standard,
            groups: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(x) = self.observations.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite observation {x}")));
        }
        if let Some(s) = self.declared_standard {
            if !s.is_finite() {
                return Err(Error::InvalidArgument("declared standard must be finite".into()));
            }
        }
        if let Some(g) = &self.groups {
            if g.len() != self.observations.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} group labels for {} observations",
                    g.len(),
                    self.observations.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditOptions {
    /// Kernel bandwidth; Silverman's rule when `None`.
    pub bandwidth: Option<f64>,
    pub resamples: usize,
    pub grid_points: usize,
    pub confidence: f64,
    /// Local maxima below this fraction of the peak are dropped.
    pub min_relative_height: f64,
    pub seed: u64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            bandwidth: None,
            resamples: 1000,
            grid_points: 2048,
            confidence: 0.95,
            min_relative_height: 0.05,
            seed: 0,
        }
    }
}

/// `0.9 min(sd, IQR / 1.34) n^{-1/5}`.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    let frac = h - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Density estimate on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kde {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl Kde {
    /// Linear binning onto `points` nodes spanning the data plus four
    /// bandwidths, then a discrete convolution with the Gaussian kernel.
    pub fn fit(xs: &[f64], bandwidth: f64, points: usize) -> Self {
        let (min, max) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let lo = min - 4.0 * bandwidth;
        let hi = max + 4.0 * bandwidth;
        Self::fit_on(xs, bandwidth, lo, hi, points)
    }

    pub fn fit_on(xs: &[f64], bandwidth: f64, lo: f64, hi: f64, points: usize) -> Self {
        let m = points.max(16);
        let delta = (hi - lo) / (m - 1) as f64;
        let mut counts = vec![0.0; m];
        for &x in xs {
            let pos = ((x - lo) / delta).clamp(0.0, (m - 1) as f64);
            let i = (pos.floor() as usize).min(m - 2);
            let w = pos - i as f64;
            counts[i] += 1.0 - w;
            counts[i + 1] += w;
        }
        let reach = ((4.0 * bandwidth / delta).ceil() as usize).min(m - 1);
        let norm = 1.0 / (xs.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
        let kernel: Vec<f64> = (0..=reach)
            .map(|k| (-0.5 * (k as f64 * delta / bandwidth).powi(2)).exp() * norm)
            .collect();
        let density = (0..m)
            .map(|i| {
                let a = i.saturating_sub(reach);
                let b = (i + reach).min(m - 1);
                (a..=b).map(|j| counts[j] * kernel[i.abs_diff(j)]).sum()
            })
            .collect();
        let grid = (0..m).map(|i| lo + i as f64 * delta).collect();
        Self {
            bandwidth,
            grid,
            density,
        }
    }

    /// Local maxima at least `min_relative` of the peak, sorted by location.
    pub fn modes(&self, min_relative: f64) -> Vec<f64> {
        let peak = self.density.iter().copied().fold(0.0, f64::max);
        let f = &self.density;
        let mut out = Vec::new();
        let mut i = 1;
        while i + 1 < f.len() {
            if f[i] > f[i - 1] {
                // walk across a plateau
                let mut j = i;
                while j + 1 < f.len() && f[j + 1] == f[i] {
                    j += 1;
                }
                if j + 1 < f.len() && f[j + 1] < f[i] && f[i] >= min_relative * peak {
                    out.push(0.5 * (self.grid[i] + self.grid[j]));
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
        out
    }

    /// Largest location attaining the maximum.
    pub fn global_mode(&self) -> f64 {
        let peak = self.density.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let i = self.density.iter().rposition(|&v| v == peak).unwrap_or(0);
        self.grid[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Recommendation {
    Keep,
    Raise,
    Lower,
}

impl std::fmt::Display for Recommendation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Recommendation::Keep => "keep",
            Recommendation::Raise => "raise",
            Recommendation::Lower => "lower",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardComparison {
    pub declared_standard: f64,
    pub recommendation: Recommendation,
    pub pass_fraction: f64,
    pub pass_fraction_se: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub observations: usize,
    pub bandwidth: f64,
    pub modes: Vec<f64>,
    pub modal_performance: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub confidence: f64,
    pub resamples: usize,
    pub seed: u64,
    pub comparison: Option<StandardComparison>,
}

impl AuditReport {
    pub fn comparison(&self) -> Result<&StandardComparison> {
        self.comparison.as_ref().ok_or(Error::NoDeclaredStandard)
    }
}

const BENCHMARK_NOTE: &str = "with symmetric unimodal noise the optimal standard passes half of \
the contestants; a pass fraction far from 0.5 is expected under skewed or multimodal noise";

pub fn audit(sample: &PerformanceSample, opts: &AuditOptions) -> Result<AuditReport> {
    sample.validate()?;
    let xs = &sample.observations;
    if xs.len() < MIN_SAMPLE {
        return Err(Error::SampleTooSmall {
            len: xs.len(),
            min: MIN_SAMPLE,
        });
    }
    let h = match opts.bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(xs),
    };
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("sample has no spread".into()));
    }
    if !(opts.confidence > 0.0 && opts.confidence < 1.0) {
        return Err(Error::InvalidArgument("confidence must lie in (0, 1)".into()));
    }
    let kde = Kde::fit(xs, h, opts.grid_points);
    let (lo, hi) = (kde.grid[0], *kde.grid.last().expect("grid"));
    let modal = kde.global_mode();

    let boot: Vec<f64> = (0..opts.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(b as u64);
            let resample: Vec<f64> = (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).collect();
            Kde::fit_on(&resample, h, lo, hi, opts.grid_points).global_mode()
        })
        .collect();
    let (ci_lower, ci_upper) = if boot.is_empty() {
        (modal, modal)
    } else {
        let mut sorted = boot;
        sorted.sort_by(f64::total_cmp);
        let alpha = 1.0 - opts.confidence;
        (
            quantile_sorted(&sorted, alpha / 2.0),
            quantile_sorted(&sorted, 1.0 - alpha / 2.0),
        )
    };

    let comparison = sample.declared_standard.map(|s| {
        let recommendation = if s < ci_lower {
            Recommendation::Raise
        } else if s > ci_upper {
            Recommendation::Lower
        } else {
            Recommendation::Keep
        };
        let pass = xs.iter().filter(|&&x| x >= s).count() as f64 / xs.len() as f64;
        StandardComparison {
            declared_standard: s,
            recommendation,
            pass_fraction: pass,
            pass_fraction_se: (pass * (1.0 - pass) / xs.len() as f64).sqrt(),
            note: BENCHMARK_NOTE.into(),
        }
    });
    Ok(AuditReport {
        observations: xs.len(),
        bandwidth: h,
        modes: kde.modes(opts.min_relative_height),
        modal_performance: modal,
        ci_lower,
        ci_upper,
        confidence: opts.confidence,
        resamples: opts.resamples,
        seed: opts.seed,
        comparison,
    })
}
