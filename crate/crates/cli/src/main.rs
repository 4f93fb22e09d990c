use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use tourney_core::adapters::{
    fm_optimal_standard, patent_race_deadline, tullock_csf_with_standard, tullock_optimal,
    IdeaDistribution, InverseExponentialIdeas, TullockConfig, UniformIdeas,
};
use tourney_core::audit::{audit, AuditOptions};
use tourney_core::cardinal::{check_bound, random_battery};
use tourney_core::equilibrium::{prize_probability, solve_at_threshold, solve_design_with, SolverOptions};
use tourney_core::oracle::{simulate_prize_probabilities, verify_best_response};
use tourney_core::prizes::{corner_solution, optimal_prizes_with, rank_scores};
use tourney_core::{
    EquilibriumSolution, Error, NoiseDistribution, PerformanceSample, PrizeDesignReport,
    TournamentDesign,
};

mod config;
mod figures;

use config::{resolve_seed, ScenarioConfig, Schedule};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Verification(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid input: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSchedule(_)
            | Error::InvalidCost(_)
            | Error::InvalidDistribution(_)
            | Error::InvalidArgument(_)
            | Error::SampleTooSmall { .. }
            | Error::NoDeclaredStandard
            | Error::SeedRequired
            | Error::RankOutOfRange { .. }
            | Error::AllZeroEfforts
            | Error::PropertyViolation { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

/// Tournaments with a minimum performance standard.
///
/// Exit codes: 0 ok, 2 invalid input, 3 numeric failure, 4 verification failure.
#[derive(Parser)]
#[command(name = "tourney", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the scenario commands; each overrides the config field.
#[derive(clap::Args)]
struct ScenarioArgs {
    /// Scenario file (JSON).
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    /// Threshold in noise units, overriding the optimal one.
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    draws: Option<usize>,
    /// Output directory for JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut c = ScenarioConfig::load(&self.config)?;
        if let Some(n) = self.n {
            c.n = n;
        }
        if let Some(t) = self.threshold {
            c.threshold = config::ThresholdSpec::Value(t);
        }
        if let Some(d) = self.draws {
            c.monte_carlo.draws = d;
        }
        if let Some(s) = self.seed {
            c.monte_carlo.seed = Some(s);
        }
        if let Some(o) = &self.out {
            c.output.dir = Some(o.clone());
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimal standard, effort and (if requested) prize schedule.
    Solve(ScenarioArgs),
    /// Rank scores and the optimal number of equal prizes.
    Prizes(ScenarioArgs),
    /// Write CSV and SVG panels for fig1 or fig2.
    Figures {
        which: String,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long, default_value_t = 1751)]
        points: usize,
    },
    /// Monte-Carlo certification of a solved scenario.
    Verify(ScenarioArgs),
    /// Compare a declared standard with the modal performance of a sample.
    Audit {
        /// CSV with a `performance` column.
        sample: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        standard: Option<f64>,
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal Tullock standard; with --rho and --efforts, the success probabilities.
    Tullock {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        efforts: Option<Vec<f64>>,
    },
    /// Optimal standard of an innovation contest.
    Fm {
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// `uniform:<upper>` or `inverse-exponential`.
        #[arg(long, default_value = "uniform:1")]
        ideas: String,
    },
    /// Optimal patent-race deadline under Gumbel log-time noise.
    Race {
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Equilibrium effort; defaults to the Tullock optimum for n.
        #[arg(long)]
        effort: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        location: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
}

fn emit<T: Serialize>(value: &T, dir: Option<&Path>, file: &str) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))? + "\n";
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join(file);
        std::fs::write(&path, &text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput {
    distribution: tourney_core::DistSpec,
    n: usize,
    solution: EquilibriumSolution,
    prize_design: PrizeDesignReport,
}

fn solve_scenario(c: &ScenarioConfig) -> Result<(NoiseDistribution, SolveOutput), CliError> {
    let d = c.noise()?;
    let cost = c.cost_function()?;
    let opts = SolverOptions::default();
    let threshold = c.threshold()?;
    let (solution, prize_design) = match c.schedule()? {
        Schedule::Optimal => {
            let (rep, sol) = optimal_prizes_with(&d, c.n, &cost, threshold, opts)?;
            (sol, rep)
        }
        Schedule::Fixed(v) => {
            if v.n() != c.n {
                return Err(CliError::Config(format!("schedule has {} prizes but n = {}", v.n(), c.n)));
            }
            let sol = match threshold {
                Some(t) => solve_at_threshold(&d, &v, &cost, t, opts)?,
                None => solve_design_with(&d, &v, &cost, opts)?,
            };
            let scores = rank_scores(&d, c.n, sol.threshold, opts.quad)?;
            let report = corner_solution(&scores, sol.threshold);
            (sol, report)
        }
    };
    let out = SolveOutput {
        distribution: d.to_spec(),
        n: c.n,
        solution,
        prize_design,
    };
    Ok((d, out))
}

fn scheduled_design(c: &ScenarioConfig, out: &SolveOutput) -> Result<TournamentDesign, CliError> {
    let schedule = match c.schedule()? {
        Schedule::Optimal => out.prize_design.schedule.clone(),
        Schedule::Fixed(v) => v,
    };
    Ok(TournamentDesign::new(out.solution.standard, schedule))
}

fn cmd_solve(args: &ScenarioArgs) -> Result<(), CliError> {
    let c = args.load()?;
    let (_, out) = solve_scenario(&c)?;
    emit(&out, c.output.dir.as_deref(), "solution.json")
}

fn cmd_prizes(args: &ScenarioArgs) -> Result<(), CliError> {
    let mut c = args.load()?;
    c.schedule = config::ScheduleSpec::Named("optimal".into());
    let (_, out) = solve_scenario(&c)?;
    emit(&out.prize_design, c.output.dir.as_deref(), "prizes.json")
}

#[derive(Serialize)]
struct ProbabilityCheck {
    rank: usize,
    quadrature: f64,
    monte_carlo: f64,
    standard_error: f64,
    within_four_se: bool,
}

fn cmd_verify(args: &ScenarioArgs) -> Result<(), CliError> {
    let c = args.load()?;
    let seed = c.seed(None)?;
    let (d, out) = solve_scenario(&c)?;
    let cost = c.cost_function()?;
    let design = scheduled_design(&c, &out)?;
    let e_star = c.effort.unwrap_or(out.solution.effort);
    let draws = c.monte_carlo.draws;

    let br = verify_best_response(&d, &design, &cost, e_star, c.monte_carlo.grid, draws, Some(seed))?;
    let sim = simulate_prize_probabilities(&d, &design, e_star, e_star, draws, Some(seed))?;
    let mut probs = Vec::new();
    for r in 1..=design.n() {
        let q = prize_probability(&d, design.n(), r, e_star, e_star, design.standard)?;
        let (p, se) = (sim.prize_probabilities[r - 1], sim.standard_errors[r - 1]);
        probs.push(ProbabilityCheck {
            rank: r,
            quadrature: q,
            monte_carlo: p,
            standard_error: se,
            within_four_se: (p - q).abs() <= 4.0 * se.max(1.0 / draws as f64),
        });
    }
    let mut bounds = Vec::new();
    if let Some(b) = &c.battery {
        for (k, w) in random_battery(&d, design.n(), e_star, b.schemes, seed).iter().enumerate() {
            let chk = check_bound(&d, w.as_ref(), e_star, b.draws, seed.wrapping_add(k as u64 + 1))?;
            bounds.push(json!({ "scheme": w.name(), "check": chk }));
        }
    }
    let bounds_ok = bounds.iter().all(|b| b["check"]["satisfied"] == json!(true));
    let probs_ok = probs.iter().all(|p| p.within_four_se);
    let report = json!({
        "seed": seed,
        "draws": draws,
        "rival_effort": e_star,
        "standard": design.standard,
        "schedule": design.schedule,
        "best_response": {
            "gap": br.best_response_gap,
            "gap_se": br.gap_se,
            "grid_bias": br.grid_bias,
            "best_effort": br.best_effort,
            "certified": br.certified,
        },
        "prize_probabilities": probs,
        "bounds": bounds,
        "passed": br.certified && probs_ok && bounds_ok,
    });
    if let Some(dir) = c.output.dir.as_deref() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(e.to_string()))?;
        let mut w = csv::Writer::from_path(dir.join("payoff_curve.csv")).map_err(|e| CliError::Io(e.to_string()))?;
        w.write_record(["effort", "payoff", "gain", "gain_se"]).map_err(|e| CliError::Io(e.to_string()))?;
        for p in &br.curve {
            w.write_record([p.effort, p.payoff, p.gain, p.gain_se].map(|x| x.to_string()))
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
        let mut w = csv::Writer::from_path(dir.join("rank_tallies.csv")).map_err(|e| CliError::Io(e.to_string()))?;
        w.write_record(["rank", "count"]).map_err(|e| CliError::Io(e.to_string()))?;
        for (r, n) in sim.rank_counts.iter().enumerate() {
            w.write_record([(r + 1).to_string(), n.to_string()]).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.write_record(["missed".to_string(), sim.missed.to_string()]).map_err(|e| CliError::Io(e.to_string()))?;
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    }
    emit(&report, c.output.dir.as_deref(), "verification.json")?;
    let mut failures = Vec::new();
    if !br.certified {
        failures.push(format!(
            "deviation to e = {} gains {:.3e} (se {:.1e})",
            br.best_effort, br.best_response_gap, br.gap_se
        ));
    }
    if !probs_ok {
        failures.push("Monte-Carlo prize probabilities disagree with quadrature".into());
    }
    if !bounds_ok {
        failures.push("a pay scheme exceeded the marginal-benefit bound".into());
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join("; ")))
    }
}

fn read_sample(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = r.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "performance")
        .ok_or_else(|| CliError::Config(format!("{}: no `performance` column", path.display())))?;
    let mut xs = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        let field = rec.get(col).unwrap_or("").trim();
        let x: f64 = field
            .parse()
            .map_err(|_| CliError::Config(format!("line {}: `{field}` is not a number", i + 2)))?;
        xs.push(x);
    }
    Ok(xs)
}

fn cmd_audit(
    sample: &Path,
    standard: Option<f64>,
    bandwidth: Option<f64>,
    resamples: usize,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let seed = match seed {
        Some(s) => s,
        None => resolve_seed(None).unwrap_or(0),
    };
    let s = PerformanceSample::new(read_sample(sample)?, standard)?;
    let opts = AuditOptions {
        bandwidth,
        resamples,
        seed,
        ..Default::default()
    };
    let report = audit(&s, &opts)?;
    emit(&report, out, "audit.json")
}

fn cmd_tullock(n: usize, rho: Option<f64>, efforts: Option<Vec<f64>>) -> Result<(), CliError> {
    let opt = tullock_optimal(n)?;
    let csf = match (rho, efforts) {
        (Some(rho), Some(e)) => {
            let cfg = TullockConfig::new(rho, e)?;
            let p = (0..cfg.n())
                .map(|i| tullock_csf_with_standard(&cfg, i))
                .collect::<Result<Vec<_>, _>>()?;
            let none = 1.0 - p.iter().sum::<f64>();
            Some(json!({ "rho": rho, "efforts": cfg.efforts, "win_probabilities": p, "no_winner": none }))
        }
        (None, None) => None,
        _ => return Err(CliError::Config("--rho and --efforts go together".into())),
    };
    emit(&json!({ "optimum": opt, "contest": csf }), None, "")
}

fn cmd_fm(n: usize, ideas: &str) -> Result<(), CliError> {
    let h: Box<dyn IdeaDistribution> = match ideas.split_once(':') {
        Some(("uniform", upper)) => {
            let upper: f64 = upper
                .parse()
                .map_err(|_| CliError::Config(format!("bad upper bound `{upper}`")))?;
            if !(upper > 0.0) {
                return Err(CliError::Config("upper bound must be positive".into()));
            }
            Box::new(UniformIdeas { upper })
        }
        None if ideas == "uniform" => Box::new(UniformIdeas { upper: 1.0 }),
        None if ideas == "inverse-exponential" => Box::new(InverseExponentialIdeas),
        _ => return Err(CliError::Config(format!("unknown idea distribution `{ideas}`"))),
    };
    let e = tullock_optimal(n)?.effort;
    let rho = fm_optimal_standard(h.as_ref(), n)?;
    emit(&json!({ "n": n, "ideas": ideas, "effort": e, "standard": rho }), None, "")
}

fn cmd_race(n: usize, effort: Option<f64>, location: f64, scale: f64) -> Result<(), CliError> {
    let d = NoiseDistribution::gumbel(location, scale)?;
    let e = match effort {
        Some(e) => e,
        None => tullock_optimal(n)?.effort,
    };
    let tau = patent_race_deadline(&d, e)?;
    emit(&json!({ "n": n, "effort": e, "location": location, "scale": scale, "deadline": tau }), None, "")
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Prizes(a) => cmd_prizes(&a),
        Command::Figures { which, out, points } => {
            let tables = figures::build(&which, points)?;
            let files = figures::write(&tables, &out)?;
            emit(&json!({ "figure": which, "files": files }), None, "")
        }
        Command::Verify(a) => cmd_verify(&a),
        Command::Audit {
            sample,
            standard,
            bandwidth,
            resamples,
            seed,
            out,
        } => cmd_audit(&sample, standard, bandwidth, resamples, seed, out.as_deref()),
        Command::Tullock { n, rho, efforts } => cmd_tullock(n, rho, efforts),
        Command::Fm { n, ideas } => cmd_fm(n, &ideas),
        Command::Race {
            n,
            effort,
            location,
            scale,
        } => cmd_race(n, effort, location, scale),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tourney: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
