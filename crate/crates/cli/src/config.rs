use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tourney_core::{CostFunction, DistSpec, NoiseDistribution, PrizeSchedule};

use crate::CliError;

/// A scenario file. Command-line flags override the matching fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub distribution: DistSpec,
    pub n: usize,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub threshold: ThresholdSpec,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    /// Rival effort to test instead of the solved one (verify only).
    #[serde(default)]
    pub effort: Option<f64>,
    #[serde(default)]
    pub battery: Option<BatteryConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Named(String),
    Prizes(Vec<f64>),
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Named("optimal".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ThresholdSpec {
    Named(String),
    Value(f64),
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec::Named("optimal".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostConfig {
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "two")]
    pub beta: f64,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

impl Default for CostConfig {
    fn default() -> Self {
        Self { kappa: 1.0, beta: 2.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_draws() -> usize {
    tourney_core::oracle::DEFAULT_DRAWS
}

fn default_grid() -> usize {
    tourney_core::oracle::DEFAULT_GRID
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            draws: default_draws(),
            seed: None,
            grid: default_grid(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryConfig {
    #[serde(default = "default_schemes")]
    pub schemes: usize,
    #[serde(default = "default_battery_draws")]
    pub draws: usize,
}

fn default_schemes() -> usize {
    50
}

fn default_battery_draws() -> usize {
    200_000
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

pub enum Schedule {
    Optimal,
    Fixed(PrizeSchedule),
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn noise(&self) -> Result<NoiseDistribution, CliError> {
        Ok(self.distribution.build()?)
    }

    pub fn cost_function(&self) -> Result<CostFunction, CliError> {
        Ok(CostFunction::power(self.cost.kappa, self.cost.beta)?)
    }

    pub fn schedule(&self) -> Result<Schedule, CliError> {
        let n = self.n;
        if n == 0 {
            return Err(CliError::Config("n must be at least 1".into()));
        }
        match &self.schedule {
            ScheduleSpec::Named(name) => match name.as_str() {
                "optimal" => Ok(Schedule::Optimal),
                "wta" => Ok(Schedule::Fixed(PrizeSchedule::winner_take_all(n))),
                "eps" => Ok(Schedule::Fixed(PrizeSchedule::equal_sharing(n))),
                other => Err(CliError::Config(format!(
                    "unknown schedule `{other}`; use \"optimal\", \"wta\", \"eps\" or a list of prizes"
                ))),
            },
            ScheduleSpec::Prizes(v) => {
                if v.len() != n {
                    return Err(CliError::Config(format!(
                        "schedule has {} prizes but n = {n}",
                        v.len()
                    )));
                }
                Ok(Schedule::Fixed(PrizeSchedule::new(v.clone())?))
            }
        }
    }

    pub fn threshold(&self) -> Result<Option<f64>, CliError> {
        match &self.threshold {
            ThresholdSpec::Value(t) => Ok(Some(*t)),
            ThresholdSpec::Named(s) if s == "optimal" => Ok(None),
            ThresholdSpec::Named(s) => Err(CliError::Config(format!(
                "threshold must be a number or \"optimal\", got `{s}`"
            ))),
        }
    }

    /// Flag, then config, then the environment.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        resolve_seed(flag.or(self.monte_carlo.seed))
    }
}

pub fn resolve_seed(explicit: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var(tourney_core::oracle::SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{} must be an unsigned integer, got `{v}`",
                tourney_core::oracle::SEED_ENV
            ))
        }),
        Err(_) => Err(tourney_core::Error::SeedRequired.into()),
    }
}
