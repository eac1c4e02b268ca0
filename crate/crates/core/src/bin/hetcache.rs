//! Command-line front end. Every subcommand writes CSV to stdout or `--out`.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
//! 1 anything else (I/O).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hetcache::experiments::{
    evaluate, parse_density, parse_policy_csv, policy_csv, run_sweep, show_policy, sweep_csv, Evaluator, Scenario,
    Solver, SweepSpec, SweepVariable,
};
use hetcache::model::{db_to_linear, dbm_to_watts};
use hetcache::sim::estimate_offloading;
use hetcache::{CachingPolicy, Error, PopularityModel, Result};

#[derive(Parser)]
#[command(name = "hetcache", version, about = "Probabilistic caching in two-tier cache-enabled HetNets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for a caching policy and print a one-row summary.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "opt-lower-bound")]
        solver: String,
    },
    /// Closed-form metrics of a solved or supplied policy.
    Evaluate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Monte Carlo estimate of the offloading probability.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Sweep one parameter over several policies.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// gamma0_db, lambda2, p1_over_p2_db, b2_db or lambda_u. Densities are
        /// counts per π·250² m².
        #[arg(long)]
        variable: String,
        /// Comma-separated, strictly monotone.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "opt-local,opt-lower-bound,popular,uniform")]
        policies: Vec<String>,
        /// closed-form, monte-carlo or both.
        #[arg(long, default_value = "closed-form")]
        evaluator: String,
        /// Fill the solve_time_ms column (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Print `rank,q` for every file.
    ShowPolicy {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "opt-lower-bound")]
        solver: String,
    },
}

#[derive(Args)]
struct PolicyArgs {
    #[arg(long, default_value = "opt-lower-bound", conflicts_with = "policy")]
    solver: String,
    /// `rank,q` CSV as printed by show-policy.
    #[arg(long)]
    policy: Option<PathBuf>,
}

/// Scenario file plus per-field overrides. Without `--config` the reference
/// scenario is used.
#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Macro density, per m² or "<count>/disc250".
    #[arg(long)]
    lambda1: Option<String>,
    #[arg(long)]
    lambda2: Option<String>,
    #[arg(long)]
    lambda_u: Option<String>,
    #[arg(long)]
    m1: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    p1_dbm: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    p2_dbm: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b1_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b2_db: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma0_db: Option<f64>,
    #[arg(long)]
    n_cache: Option<usize>,
    #[arg(long)]
    n_files: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    skew: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "no_noise")]
    noise_dbm: Option<f64>,
    /// Interference-limited simulation.
    #[arg(long)]
    no_noise: bool,
    #[arg(long)]
    window_radius: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn density(field: &str, text: &str) -> Result<f64> {
    parse_density(text).ok_or_else(|| Error::Config {
        field: field.to_string(),
        reason: format!("expected a number or \"<count>/disc250\", got {text:?}"),
    })
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let base = match &self.config {
            Some(path) => Scenario::from_path(path)?,
            None => Scenario::default(),
        };
        let mut net = base.network.clone();
        if let Some(v) = &self.lambda1 {
            net.lambda1 = density("lambda1", v)?;
        }
        if let Some(v) = &self.lambda2 {
            net.lambda2 = density("lambda2", v)?;
        }
        if let Some(v) = &self.lambda_u {
            net.lambda_u = density("lambda_u", v)?;
        }
        if let Some(v) = self.m1 {
            net.m1 = v;
        }
        if let Some(v) = self.p1_dbm {
            net.p1 = dbm_to_watts(v);
        }
        if let Some(v) = self.p2_dbm {
            net.p2 = dbm_to_watts(v);
        }
        if let Some(v) = self.b1_db {
            net.b1 = db_to_linear(v);
        }
        if let Some(v) = self.b2_db {
            net.b2 = db_to_linear(v);
        }
        if let Some(v) = self.alpha {
            net.alpha = v;
        }
        if let Some(v) = self.gamma0_db {
            net.gamma0 = db_to_linear(v);
        }
        if let Some(v) = self.n_cache {
            net.n_cache = v;
        }
        net.validate()?;
        let mut scenario = base.with_network(net);
        if self.n_files.is_some() || self.skew.is_some() {
            let n = self.n_files.unwrap_or(scenario.popularity.n_files());
            let skew = self.skew.unwrap_or(scenario.popularity.skew());
            scenario.popularity = PopularityModel::zipf(n, skew)
                .map_err(|e| Error::Config { field: "popularity".into(), reason: e.to_string() })?;
        }
        if scenario.network.n_cache > scenario.popularity.n_files() {
            return Err(Error::Config { field: "n_cache".into(), reason: "exceeds n_files".into() });
        }
        if let Some(v) = self.seed {
            scenario.sim.seed = v;
        }
        if let Some(v) = self.drops {
            scenario.sim.n_drops = v;
        }
        if let Some(v) = self.noise_dbm {
            scenario.sim.noise_dbm = Some(v);
        }
        if self.no_noise {
            scenario.sim.noise_dbm = None;
        }
        if let Some(v) = self.window_radius {
            scenario.sim.window_radius = v;
        }
        Ok(scenario)
    }

    fn emit(&self, csv: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, csv)?,
            None => print!("{csv}"),
        }
        Ok(())
    }
}

impl PolicyArgs {
    fn resolve(&self, scenario: &Scenario) -> Result<(String, CachingPolicy)> {
        match &self.policy {
            Some(path) => {
                let policy = parse_policy_csv(&std::fs::read_to_string(path)?, scenario.popularity.n_files())?;
                policy.validate(scenario.network.n_cache)?;
                Ok(("file".to_string(), policy))
            }
            None => {
                let solver: Solver = self.solver.parse()?;
                let report = solver.solve(&scenario.network, &scenario.popularity)?;
                Ok((solver.name().to_string(), report.policy))
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Solve { scenario, solver } => {
            let s = scenario.load()?;
            let solver: Solver = solver.parse()?;
            let r = solver.solve(&s.network, &s.popularity)?;
            let p_off = evaluate(&s.network, &s.popularity, &r.policy)?.p_off;
            // `objective` is the value of whatever the solver maximises; p_off is always exact.
            let mut out =
                String::from("solver,p_off,objective,multiplier,iterations,residual,popular_fallback,cache_total\n");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                solver,
                p_off,
                r.objective,
                r.multiplier,
                r.iterations,
                r.residual,
                r.popular_fallback,
                r.policy.total()
            );
            scenario.emit(&out)
        }
        Command::Evaluate { scenario, policy } => {
            let s = scenario.load()?;
            let (name, q) = policy.resolve(&s)?;
            let e = evaluate(&s.network, &s.popularity, &q)?;
            let mut out = String::from(
                "policy,p_off,p_off_saturated,p_off_lower_bound,active_prob,active_prob_bound,c1,c2,c3\n",
            );
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{},{},{}",
                e.p_off, e.p_off_saturated, e.p_off_lower_bound, e.active_prob, e.active_prob_bound, e.c1, e.c2, e.c3
            );
            scenario.emit(&out)
        }
        Command::Simulate { scenario, policy } => {
            let s = scenario.load()?;
            let (name, q) = policy.resolve(&s)?;
            let closed = evaluate(&s.network, &s.popularity, &q)?.p_off;
            let est = estimate_offloading(&s.sim, &q, &s.popularity)?;
            let mut out = String::from("policy,p_off_closed_form,p_off_mc,mc_half_width,n_drops,seed\n");
            let _ = writeln!(
                out,
                "{name},{closed},{},{},{},{}",
                est.p_hat, est.half_width_95, est.n_drops, s.sim.seed
            );
            scenario.emit(&out)
        }
        Command::Sweep { scenario, variable, values, policies, evaluator, timing } => {
            let s = scenario.load()?;
            let spec = SweepSpec {
                variable: variable.parse::<SweepVariable>()?,
                values,
                policies: policies.iter().map(|p| p.trim().parse()).collect::<Result<_>>()?,
                evaluator: evaluator.parse::<Evaluator>()?,
                timing,
            };
            let rows = run_sweep(&s, &spec)?;
            scenario.emit(&sweep_csv(&rows))
        }
        Command::ShowPolicy { scenario, solver } => {
            let s = scenario.load()?;
            let rows = show_policy(&s.network, &s.popularity, solver.parse()?)?;
            scenario.emit(&policy_csv(&rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } | Error::Domain(_) => 2,
                Error::Numerical(_) => 3,
                Error::Io(_) => 1,
            })
        }
    }
}
