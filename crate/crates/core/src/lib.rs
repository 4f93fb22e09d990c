//! Rank-order tournaments with a minimum performance standard.
//!
//! Players choose effort `e`, output is `e + X` with i.i.d. noise `X`, and the
//! principal awards a prize schedule to the players whose output passes a
//! standard. The crate computes symmetric equilibria, the optimal standard
//! (always at a mode of the noise density at or above the global mode), the
//! optimal prize schedule, Monte-Carlo checks of all of the above, and the
//! Tullock / innovation-contest / patent-race special cases.

pub mod adapters;
pub mod audit;
pub mod cardinal;
pub mod dist;
pub mod equilibrium;
pub mod error;
pub mod oracle;
pub mod prizes;
pub mod quad;
pub mod schedule;

pub use audit::{AuditReport, PerformanceSample};
pub use cardinal::PayScheme;
pub use dist::{DistSpec, Family, NoiseDistribution, ShapeReport};
pub use equilibrium::{EquilibriumSolution, TournamentDesign};
pub use error::{Error, Result};
pub use oracle::SimulationReport;
pub use prizes::{PrizeDesignReport, Regime};
pub use schedule::{CostFunction, PrizeSchedule};
