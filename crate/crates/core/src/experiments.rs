//! Scenario files, parameter sweeps and policy dumps behind the CLI.
//!
//! A scenario is a TOML file with `[network]`, `[popularity]` and optional
//! `[simulation]` tables. Powers, biases and thresholds are given in dB/dBm
//! and converted to linear here. Densities are either a number (per m²) or
//! a string `"<count>/disc250"` meaning `<count>` points per π·250² m².
//!
//! ```toml
//! [network]
//! lambda1 = "1/disc250"
//! lambda2 = "25/disc250"
//! lambda_u = "25/disc250"
//! m1 = 4
//! p1_dbm = 46.0
//! p2_dbm = 21.0
//! b1_db = 0.0
//! b2_db = 10.0
//! alpha = 3.7
//! gamma0_db = -10.0
//! n_cache = 100
//!
//! [popularity]
//! n_files = 1000
//! skew = 0.5
//!
//! [simulation]
//! window_radius = 2500.0
//! drops = 20000
//! noise_dbm = -95.0
//! seed = 1
//! ```

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::analysis::{
    constants, helper_active_prob, offloading_prob, offloading_prob_lower_bound, offloading_prob_saturated,
};
use crate::error::{Error, Result};
use crate::model::{db_to_linear, dbm_to_watts, per_disc_250m, CachingPolicy, NetworkConfig};
use crate::optimizer::{
    active_prob_upper_bound, baseline_popular, baseline_uniform, solve_active_prob_max, solve_local,
    solve_lower_bound, solve_saturated, solve_sparse_users, SolverReport,
};
use crate::popularity::PopularityModel;
use crate::sim::{estimate_offloading, SimConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Density {
    PerSquareMeter(f64),
    Text(String),
}

impl Density {
    fn resolve(&self, field: &str) -> Result<f64> {
        match self {
            Density::PerSquareMeter(v) => Ok(*v),
            Density::Text(s) => parse_density(s).ok_or_else(|| {
                Error::config(field, format!("expected a number or \"<count>/disc250\", got {s:?}"))
            }),
        }
    }
}

/// Parses a density given per m² or as `"<count>/disc250"`.
pub fn parse_density(s: &str) -> Option<f64> {
    let s = s.trim();
    match s.strip_suffix("/disc250") {
        Some(count) => count.trim().parse::<f64>().ok().map(per_disc_250m),
        None => s.parse().ok(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSection {
    lambda1: Density,
    lambda2: Density,
    lambda_u: Density,
    m1: u32,
    p1_dbm: f64,
    p2_dbm: f64,
    #[serde(default)]
    b1_db: f64,
    #[serde(default)]
    b2_db: f64,
    alpha: f64,
    gamma0_db: f64,
    n_cache: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopularitySection {
    n_files: usize,
    skew: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    window_radius: Option<f64>,
    drops: Option<usize>,
    noise_dbm: Option<f64>,
    seed: Option<u64>,
    #[serde(default)]
    require_selection: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    network: NetworkSection,
    popularity: PopularitySection,
    simulation: Option<SimulationSection>,
}

/// A fully resolved scenario: network, catalog and simulator settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: NetworkConfig,
    pub popularity: PopularityModel,
    pub sim: SimConfig,
}

impl Default for Scenario {
    /// Reference scenario with `N_f = 1000`, `δ = 0.5`, −95 dBm noise in
    /// the simulator and 2·10⁴ drops.
    fn default() -> Self {
        let network = NetworkConfig::default();
        let sim = SimConfig::new(network.clone()).with_noise_dbm(Some(-95.0));
        Scenario {
            network,
            popularity: PopularityModel::zipf(1000, 0.5).expect("valid default catalog"),
            sim,
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| {
            let field = e.span().map_or_else(|| "<file>".to_string(), |s| field_at(text, s.start));
            Error::config(field, e.message().to_string())
        })?;
        let n = &file.network;
        let network = NetworkConfig {
            lambda1: n.lambda1.resolve("network.lambda1")?,
            lambda2: n.lambda2.resolve("network.lambda2")?,
            lambda_u: n.lambda_u.resolve("network.lambda_u")?,
            m1: n.m1,
            p1: dbm_to_watts(n.p1_dbm),
            p2: dbm_to_watts(n.p2_dbm),
            b1: db_to_linear(n.b1_db),
            b2: db_to_linear(n.b2_db),
            alpha: n.alpha,
            gamma0: db_to_linear(n.gamma0_db),
            n_cache: n.n_cache,
        };
        network.validate().map_err(prefix_field("network"))?;
        let popularity = PopularityModel::zipf(file.popularity.n_files, file.popularity.skew)
            .map_err(|e| Error::config("popularity", e.to_string()))?;
        if network.n_cache > popularity.n_files() {
            return Err(Error::config("network.n_cache", "exceeds popularity.n_files"));
        }
        let mut sim = SimConfig::new(network.clone());
        if let Some(s) = file.simulation {
            if let Some(r) = s.window_radius {
                sim.window_radius = r;
            }
            if let Some(d) = s.drops {
                sim.n_drops = d;
            }
            sim.noise_dbm = s.noise_dbm;
            sim.seed = s.seed.unwrap_or(0);
            sim.require_selection = s.require_selection;
        }
        Ok(Scenario { network, popularity, sim })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Replaces the network everywhere it is stored.
    pub fn with_network(mut self, network: NetworkConfig) -> Self {
        self.sim.network = network.clone();
        self.network = network;
        self
    }
}

fn prefix_field(section: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Config { field, reason } => Error::Config { field: format!("{section}.{field}"), reason },
        other => other,
    }
}

/// Best-effort name of the key on the line containing byte `offset`.
fn field_at(text: &str, offset: usize) -> String {
    let start = text[..offset.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next().unwrap_or("");
    line.split('=').next().unwrap_or("").trim().to_string()
}

/// Every policy the CLI can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Local optimum of the exact objective, warm-started from the lower-bound solution.
    OptLocal,
    OptLowerBound,
    Saturated,
    SparseUsers,
    ActiveMax,
    Popular,
    Uniform,
}

impl Solver {
    pub const ALL: [Solver; 7] = [
        Solver::OptLocal,
        Solver::OptLowerBound,
        Solver::Saturated,
        Solver::SparseUsers,
        Solver::ActiveMax,
        Solver::Popular,
        Solver::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::OptLocal => "opt-local",
            Solver::OptLowerBound => "opt-lower-bound",
            Solver::Saturated => "saturated",
            Solver::SparseUsers => "sparse-users",
            Solver::ActiveMax => "active-max",
            Solver::Popular => "popular",
            Solver::Uniform => "uniform",
        }
    }

    pub fn solve(self, cfg: &NetworkConfig, popularity: &PopularityModel) -> Result<SolverReport> {
        match self {
            Solver::OptLocal => {
                let warm = solve_lower_bound(cfg, popularity)?;
                solve_local(cfg, popularity, &warm.policy)
            }
            Solver::OptLowerBound => solve_lower_bound(cfg, popularity),
            Solver::Saturated => solve_saturated(cfg, popularity),
            Solver::SparseUsers => solve_sparse_users(cfg, popularity),
            Solver::ActiveMax => solve_active_prob_max(cfg, popularity),
            Solver::Popular | Solver::Uniform => {
                let policy = if self == Solver::Popular {
                    baseline_popular(popularity, cfg.n_cache)
                } else {
                    baseline_uniform(popularity, cfg.n_cache)
                };
                let objective = offloading_prob(cfg, &policy, popularity)?;
                let residual = (policy.total() - cfg.n_cache.min(popularity.n_files()) as f64).abs();
                Ok(SolverReport { policy, multiplier: 0.0, objective, iterations: 0, residual, popular_fallback: false })
            }
        }
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config("solver", format!("unknown solver {s:?}")))
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    Gamma0Db,
    /// Helper density, in points per π·250² m².
    Lambda2,
    P1OverP2Db,
    B2Db,
    /// User density, in points per π·250² m².
    LambdaU,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Gamma0Db => "gamma0_db",
            SweepVariable::Lambda2 => "lambda2",
            SweepVariable::P1OverP2Db => "p1_over_p2_db",
            SweepVariable::B2Db => "b2_db",
            SweepVariable::LambdaU => "lambda_u",
        }
    }

    pub fn apply(self, base: &NetworkConfig, value: f64) -> NetworkConfig {
        let mut cfg = base.clone();
        match self {
            SweepVariable::Gamma0Db => cfg.gamma0 = db_to_linear(value),
            SweepVariable::Lambda2 => cfg.lambda2 = per_disc_250m(value),
            SweepVariable::P1OverP2Db => cfg.p1 = cfg.p2 * db_to_linear(value),
            SweepVariable::B2Db => cfg.b2 = db_to_linear(value),
            SweepVariable::LambdaU => cfg.lambda_u = per_disc_250m(value),
        }
        cfg
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepVariable::Gamma0Db,
            SweepVariable::Lambda2,
            SweepVariable::P1OverP2Db,
            SweepVariable::B2Db,
            SweepVariable::LambdaU,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| Error::config("variable", format!("unknown sweep variable {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluator {
    ClosedForm,
    MonteCarlo,
    Both,
}

impl Evaluator {
    fn closed_form(self) -> bool {
        matches!(self, Evaluator::ClosedForm | Evaluator::Both)
    }

    fn monte_carlo(self) -> bool {
        matches!(self, Evaluator::MonteCarlo | Evaluator::Both)
    }
}

impl FromStr for Evaluator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed-form" => Ok(Evaluator::ClosedForm),
            "monte-carlo" => Ok(Evaluator::MonteCarlo),
            "both" => Ok(Evaluator::Both),
            _ => Err(Error::config("evaluator", format!("unknown evaluator {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// Only the four policies compared in the figures are accepted here.
    pub policies: Vec<Solver>,
    pub evaluator: Evaluator,
    /// Fill the `solve_time_ms` column. Off by default so output is reproducible.
    pub timing: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("values", "sweep needs at least one value"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("values", "sweep values must be finite"));
        }
        let increasing = self.values.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Error::config("values", "sweep values must be strictly monotone"));
        }
        if self.policies.is_empty() {
            return Err(Error::config("policies", "sweep needs at least one policy"));
        }
        let allowed = [Solver::OptLocal, Solver::OptLowerBound, Solver::Popular, Solver::Uniform];
        if let Some(p) = self.policies.iter().find(|p| !allowed.contains(p)) {
            return Err(Error::config("policies", format!("{p} is not a sweep policy")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub policy: Solver,
    pub p_off_closed_form: Option<f64>,
    pub p_off_mc: Option<f64>,
    pub mc_half_width: Option<f64>,
    pub solve_time_ms: Option<f64>,
}

/// Runs every (value, policy) pair. Rows come back in value-major order
/// whatever order the work finishes in.
pub fn run_sweep(base: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(f64, Solver)> =
        spec.values.iter().flat_map(|&v| spec.policies.iter().map(move |&p| (v, p))).collect();
    jobs.par_iter()
        .map(|&(value, policy)| {
            let cfg = spec.variable.apply(&base.network, value);
            cfg.validate().map_err(prefix_field("network"))?;
            let started = Instant::now();
            let report = policy.solve(&cfg, &base.popularity)?;
            let elapsed = started.elapsed().as_secs_f64() * 1e3;
            let p_off_closed_form = if spec.evaluator.closed_form() {
                Some(offloading_prob(&cfg, &report.policy, &base.popularity)?)
            } else {
                None
            };
            let (p_off_mc, mc_half_width) = if spec.evaluator.monte_carlo() {
                let sim = SimConfig { network: cfg.clone(), ..base.sim.clone() };
                let est = estimate_offloading(&sim, &report.policy, &base.popularity)?;
                (Some(est.p_hat), Some(est.half_width_95))
            } else {
                (None, None)
            };
            Ok(SweepRow {
                value,
                policy,
                p_off_closed_form,
                p_off_mc,
                mc_half_width,
                solve_time_ms: spec.timing.then_some(elapsed),
            })
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "value,policy,p_off_closed_form,p_off_mc,mc_half_width,solve_time_ms");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.value,
            r.policy,
            opt(r.p_off_closed_form),
            opt(r.p_off_mc),
            opt(r.mc_half_width),
            opt(r.solve_time_ms),
        );
    }
    out
}

/// `(rank, q_f)` for every file of the solved policy.
pub fn show_policy(cfg: &NetworkConfig, popularity: &PopularityModel, solver: Solver) -> Result<Vec<(usize, f64)>> {
    let report = solver.solve(cfg, popularity)?;
    Ok(report.policy.q().iter().enumerate().map(|(i, &q)| (i + 1, q)).collect())
}

pub fn policy_csv(rows: &[(usize, f64)]) -> String {
    let mut out = String::from("rank,q\n");
    for (rank, q) in rows {
        let _ = writeln!(out, "{rank},{q}");
    }
    out
}

/// Reads a `rank,q` CSV as written by [`policy_csv`].
pub fn parse_policy_csv(text: &str, n_files: usize) -> Result<CachingPolicy> {
    let mut q = vec![0.0; n_files];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("rank")) {
            continue;
        }
        let bad = || Error::config("policy", format!("line {}: expected `rank,q`, got {line:?}", lineno + 1));
        let (rank, value) = line.split_once(',').ok_or_else(bad)?;
        let rank: usize = rank.trim().parse().map_err(|_| bad())?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        if rank == 0 || rank > n_files {
            return Err(Error::config("policy", format!("rank {rank} outside 1..={n_files}")));
        }
        q[rank - 1] = value;
    }
    Ok(CachingPolicy::new(q))
}

/// Closed-form metrics of one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub p_off: f64,
    pub p_off_saturated: f64,
    pub p_off_lower_bound: f64,
    pub active_prob: f64,
    pub active_prob_bound: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

pub fn evaluate(cfg: &NetworkConfig, popularity: &PopularityModel, policy: &CachingPolicy) -> Result<Evaluation> {
    policy.validate(cfg.n_cache)?;
    let k = constants(cfg)?;
    let pbar = active_prob_upper_bound(cfg, popularity)?;
    Ok(Evaluation {
        p_off: offloading_prob(cfg, policy, popularity)?,
        p_off_saturated: offloading_prob_saturated(cfg, policy, popularity)?,
        p_off_lower_bound: offloading_prob_lower_bound(cfg, policy, popularity, pbar)?,
        active_prob: helper_active_prob(cfg, policy, popularity),
        active_prob_bound: pbar,
        c1: k.c1,
        c2: k.c2,
        c3: k.c3,
    })
}
