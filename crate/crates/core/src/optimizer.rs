//! Caching-probability solvers.
//!
//! Every closed-form case shares one structure: maximise
//! `Σ_f p_f q_f / (c_num + c_den·q_f)` subject to `Σ q_f ≤ N_c` and
//! `0 ≤ q_f ≤ 1`. The objective is separable and concave, and the KKT
//! conditions give the water-filling solution
//!
//! ```text
//! q_f = [ √(c_num/ν)·√p_f / c_den − c_num/c_den ]₀¹
//! ```
//!
//! with the multiplier `ν` bisected until the capacity constraint is tight.
//! The solvers differ only in which constants they plug in. The general
//! case, where the helper active probability depends on `q`, is handled by
//! [`solve_local`].

use crate::analysis::{
    active_prob_from_mass, constants, helper_active_prob, offloading_prob_given_active, ClosedFormConstants,
};
use crate::error::{Error, Result};
use crate::model::{CachingPolicy, NetworkConfig, CAPACITY_SLACK};
use crate::popularity::PopularityModel;

const NU_LOWER: f64 = 1e-18;
const BISECTION_ITERS: usize = 200;
const BISECTION_TOL: f64 = 1e-12;
/// Smallest admissible `c_den`; below it the popular-caching limit applies.
const MIN_SLOPE: f64 = 1e-12;

const LOCAL_MAX_ITERS: usize = 100_000;
const LOCAL_GRAD_TOL: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct WaterfillingProblem<'a> {
    /// Additive denominator constant.
    pub c_num: f64,
    /// Coefficient of `q_f` in the denominator.
    pub c_den: f64,
    pub popularity: &'a PopularityModel,
    pub n_cache: usize,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub policy: CachingPolicy,
    /// Lagrange multiplier of the capacity constraint (`ν` or `μ`).
    pub multiplier: f64,
    /// Value of the objective the solver maximised.
    pub objective: f64,
    pub iterations: usize,
    /// `|Σ q − N_c|`.
    pub residual: f64,
    /// Set when the problem degenerated to caching the most popular files.
    pub popular_fallback: bool,
}

impl WaterfillingProblem<'_> {
    pub fn objective(&self, policy: &CachingPolicy) -> f64 {
        self.popularity
            .pmf()
            .iter()
            .zip(policy.q())
            .map(|(p, q)| p * q / (self.c_num + self.c_den * q))
            .sum()
    }

    /// Marginal value `∂/∂q_f` of the objective at `q`.
    pub fn marginal(&self, p: f64, q: f64) -> f64 {
        let d = self.c_num + self.c_den * q;
        p * self.c_num / (d * d)
    }

    fn allocation(&self, nu: f64, out: &mut [f64]) -> f64 {
        let scale = (self.c_num / nu).sqrt() / self.c_den;
        let offset = self.c_num / self.c_den;
        let mut total = 0.0;
        for (q, p) in out.iter_mut().zip(self.popularity.pmf()) {
            *q = (scale * p.sqrt() - offset).clamp(0.0, 1.0);
            total += *q;
        }
        total
    }
}

pub fn solve_waterfilling(problem: &WaterfillingProblem) -> Result<SolverReport> {
    let n_files = problem.popularity.n_files();
    if !(problem.c_num > 0.0 && problem.c_num.is_finite()) {
        return Err(Error::Domain(format!("water-filling needs c_num > 0, got {}", problem.c_num)));
    }
    if !(problem.c_den > 0.0 && problem.c_den.is_finite()) {
        return Err(Error::Domain(format!("water-filling needs c_den > 0, got {}", problem.c_den)));
    }
    let target = problem.n_cache as f64;
    let p_max = problem.popularity.pmf().iter().cloned().fold(0.0, f64::max);
    let nu_upper = p_max / problem.c_num;

    if problem.n_cache >= n_files {
        let policy = CachingPolicy::new(vec![1.0; n_files]);
        return Ok(report(problem, policy, 0.0, 0, 0.0, false));
    }
    if problem.n_cache == 0 {
        return Ok(report(problem, CachingPolicy::zeros(n_files), nu_upper, 0, 0.0, false));
    }

    let mut q = vec![0.0; n_files];
    let (mut lo, mut hi) = (NU_LOWER, nu_upper);
    if problem.allocation(lo, &mut q) < target || problem.allocation(hi, &mut q) > target {
        return Err(Error::Numerical(format!(
            "water-filling bracket [{lo:e}, {hi:e}] does not straddle N_c = {target}"
        )));
    }

    let mut best = (f64::INFINITY, hi);
    let mut iterations = 0;
    for _ in 0..BISECTION_ITERS {
        iterations += 1;
        // Geometric midpoint: the bracket spans many decades.
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let total = problem.allocation(mid, &mut q);
        let gap = total - target;
        if gap.abs() < best.0 {
            best = (gap.abs(), mid);
        }
        if gap.abs() <= BISECTION_TOL {
            break;
        }
        if gap > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut nu = best.1;
    problem.allocation(nu, &mut q);
    if let Some(polished) = polish(problem, &q) {
        let total = problem.allocation(polished, &mut q);
        if (total - target).abs() <= best.0 {
            nu = polished;
        } else {
            problem.allocation(nu, &mut q);
        }
    }
    let residual = (q.iter().sum::<f64>() - target).abs();
    Ok(report(problem, CachingPolicy::new(q), nu, iterations, residual, false))
}

/// Solves for `ν` in closed form once the saturation pattern is known:
/// with `N₁` coordinates at one and interior set `I`,
/// `√(c_num/ν)/c_den = (N_c − N₁ + |I|·c_num/c_den) / Σ_I √p_f`.
fn polish(problem: &WaterfillingProblem, q: &[f64]) -> Option<f64> {
    let mut ones = 0usize;
    let mut interior = 0usize;
    let mut root_sum = 0.0;
    for (&qf, p) in q.iter().zip(problem.popularity.pmf()) {
        if qf >= 1.0 {
            ones += 1;
        } else if qf > 0.0 {
            interior += 1;
            root_sum += p.sqrt();
        }
    }
    if interior == 0 {
        return None;
    }
    let offset = problem.c_num / problem.c_den;
    let scale = (problem.n_cache as f64 - ones as f64 + interior as f64 * offset) / root_sum;
    if !(scale > 0.0) {
        return None;
    }
    let nu = problem.c_num / (scale * problem.c_den).powi(2);
    nu.is_finite().then_some(nu)
}

fn report(
    problem: &WaterfillingProblem,
    policy: CachingPolicy,
    multiplier: f64,
    iterations: usize,
    residual: f64,
    popular_fallback: bool,
) -> SolverReport {
    let objective = problem.objective(&policy);
    SolverReport { policy, multiplier, objective, iterations, residual, popular_fallback }
}

/// Water-filling with a fallback to popular caching when `c_den` vanishes,
/// which is the high-threshold limit where the objective becomes linear in `q`.
fn waterfill_or_popular(
    c_num: f64,
    c_den: f64,
    popularity: &PopularityModel,
    n_cache: usize,
) -> Result<SolverReport> {
    if c_den <= MIN_SLOPE {
        let problem = WaterfillingProblem { c_num, c_den: MIN_SLOPE, popularity, n_cache };
        let policy = baseline_popular(popularity, n_cache);
        let residual = (policy.total() - n_cache.min(popularity.n_files()) as f64).abs();
        return Ok(report(&problem, policy, 0.0, 0, residual, true));
    }
    solve_waterfilling(&WaterfillingProblem { c_num, c_den, popularity, n_cache })
}

/// Optimal policy when every helper is active (`λu/λ₂ → ∞`).
pub fn solve_saturated(cfg: &NetworkConfig, popularity: &PopularityModel) -> Result<SolverReport> {
    let k = constants(cfg)?;
    waterfill_or_popular(k.base(1.0), k.slope(1.0), popularity, cfg.n_cache)
}

/// Optimal policy when helpers are almost always idle (`λu/λ₂ → 0`).
pub fn solve_sparse_users(cfg: &NetworkConfig, popularity: &PopularityModel) -> Result<SolverReport> {
    let k = constants(cfg)?;
    solve_waterfilling(&WaterfillingProblem { c_num: k.c1, c_den: 1.0, popularity, n_cache: cfg.n_cache })
}

/// Policy maximising the helper active probability. Its induced active
/// probability bounds that of every feasible policy from above.
pub fn solve_active_prob_max(cfg: &NetworkConfig, popularity: &PopularityModel) -> Result<SolverReport> {
    cfg.validate()?;
    solve_waterfilling(&WaterfillingProblem {
        c_num: cfg.macro_weight(),
        c_den: 1.0,
        popularity,
        n_cache: cfg.n_cache,
    })
}

/// `p̄_a,2`: the active probability induced by [`solve_active_prob_max`].
pub fn active_prob_upper_bound(cfg: &NetworkConfig, popularity: &PopularityModel) -> Result<f64> {
    let q_max = solve_active_prob_max(cfg, popularity)?.policy;
    Ok(helper_active_prob(cfg, &q_max, popularity))
}

/// Maximiser of the lower bound obtained by replacing `p_a,2` with `p̄_a,2`.
pub fn solve_lower_bound(cfg: &NetworkConfig, popularity: &PopularityModel) -> Result<SolverReport> {
    let pbar = active_prob_upper_bound(cfg, popularity)?;
    solve_lower_bound_with(cfg, popularity, pbar)
}

/// [`solve_lower_bound`] with a caller-supplied active-probability bound.
pub fn solve_lower_bound_with(cfg: &NetworkConfig, popularity: &PopularityModel, pbar: f64) -> Result<SolverReport> {
    if !(0.0..=1.0).contains(&pbar) {
        return Err(Error::Domain(format!("active-probability bound {pbar} outside [0, 1]")));
    }
    let k = constants(cfg)?;
    waterfill_or_popular(k.base(pbar), k.slope(pbar), popularity, cfg.n_cache)
}

pub fn baseline_popular(popularity: &PopularityModel, n_cache: usize) -> CachingPolicy {
    CachingPolicy::new((0..popularity.n_files()).map(|i| if i < n_cache { 1.0 } else { 0.0 }).collect())
}

pub fn baseline_uniform(popularity: &PopularityModel, n_cache: usize) -> CachingPolicy {
    let n = popularity.n_files();
    CachingPolicy::new(vec![(n_cache as f64 / n as f64).min(1.0); n])
}

/// The exact offloading probability with policy-dependent `p_a,2`, and its
/// gradient.
#[derive(Debug, Clone)]
pub struct ExactObjective<'a> {
    k: ClosedFormConstants,
    macro_weight: f64,
    load_ratio: f64,
    popularity: &'a PopularityModel,
}

impl<'a> ExactObjective<'a> {
    pub fn new(cfg: &NetworkConfig, popularity: &'a PopularityModel) -> Result<Self> {
        Ok(ExactObjective {
            k: constants(cfg)?,
            macro_weight: cfg.macro_weight(),
            load_ratio: cfg.load_ratio(),
            popularity,
        })
    }

    fn mass(&self, q: &[f64]) -> f64 {
        let w = self.macro_weight;
        self.popularity.pmf().iter().zip(q).map(|(p, &q)| p * q / (w + q)).sum()
    }

    pub fn active_prob(&self, q: &[f64]) -> f64 {
        active_prob_from_mass(self.load_ratio, self.mass(q))
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let policy = CachingPolicy::new(q.to_vec());
        offloading_prob_given_active(&self.k, &policy, self.popularity, self.active_prob(q))
    }

    /// `∂P_off/∂q`, including the dependence of `p_a,2` on every coordinate.
    pub fn gradient(&self, q: &[f64], out: &mut [f64]) {
        let ClosedFormConstants { c2, c3, .. } = self.k;
        let w = self.macro_weight;
        let kappa = self.load_ratio / 3.5;
        let s = self.mass(q);
        let active = active_prob_from_mass(self.load_ratio, s);
        // dp_a/dS = 3.5·κ·(1 + κS)^{-4.5}
        let dpa_ds = 3.5 * kappa * (1.0 + kappa * s).powf(-4.5);
        let base = self.k.base(active);
        let slope = self.k.slope(active);

        let mut dobj_dpa = 0.0;
        for ((g, &qf), p) in out.iter_mut().zip(q).zip(self.popularity.pmf()) {
            let d = base + slope * qf;
            *g = p * base / (d * d);
            dobj_dpa -= p * qf * (c2 + c3 * qf) / (d * d);
        }
        for ((g, &qf), p) in out.iter_mut().zip(q).zip(self.popularity.pmf()) {
            let ds_dq = p * w / ((w + qf) * (w + qf));
            *g += dobj_dpa * dpa_ds * ds_dq;
        }
    }
}

/// Euclidean projection onto `{0 ≤ q ≤ 1, Σ q ≤ N_c}`.
pub fn project_capped_simplex(y: &[f64], n_cache: usize, out: &mut [f64]) {
    let cap = n_cache as f64;
    let clamp_sum = |tau: f64, out: &mut [f64]| {
        let mut s = 0.0;
        for (o, &v) in out.iter_mut().zip(y) {
            *o = (v - tau).clamp(0.0, 1.0);
            s += *o;
        }
        s
    };
    if clamp_sum(0.0, out) <= cap {
        return;
    }
    let mut lo = 0.0;
    let mut hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if clamp_sum(mid, out) > cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // `hi` always satisfies the capacity constraint.
    clamp_sum(hi, out);
}

/// Local maximiser of the exact offloading probability by projected
/// gradient ascent with Barzilai-Borwein steps and Armijo backtracking.
///
/// The objective never decreases between iterates and every iterate is
/// feasible. Stops when the unit-step projected gradient is below `1e-8`.
pub fn solve_local(cfg: &NetworkConfig, popularity: &PopularityModel, init: &CachingPolicy) -> Result<SolverReport> {
    solve_local_traced(cfg, popularity, init, |_, _| {})
}

/// [`solve_local`] that reports every accepted iterate to `observe`.
pub fn solve_local_traced(
    cfg: &NetworkConfig,
    popularity: &PopularityModel,
    init: &CachingPolicy,
    mut observe: impl FnMut(&[f64], f64),
) -> Result<SolverReport> {
    if init.len() != popularity.n_files() {
        return Err(Error::Domain("initial policy length does not match the catalog".into()));
    }
    init.validate(cfg.n_cache)?;
    let objective = ExactObjective::new(cfg, popularity)?;
    let n = init.len();

    let mut q = init.q().to_vec();
    let mut value = objective.value(&q);
    let mut grad = vec![0.0; n];
    objective.gradient(&q, &mut grad);
    observe(&q, value);

    let mut trial = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];
    let mut step = 1.0;
    let mut iterations = 0;

    while iterations < LOCAL_MAX_ITERS {
        if projected_gradient_norm(&q, &grad, cfg.n_cache, &mut scratch) < LOCAL_GRAD_TOL {
            break;
        }
        iterations += 1;

        let mut accepted = false;
        let mut s = step;
        for _ in 0..80 {
            for ((t, &qi), &gi) in scratch.iter_mut().zip(&q).zip(&grad) {
                *t = qi + s * gi;
            }
            project_capped_simplex(&scratch, cfg.n_cache, &mut trial);
            let ascent: f64 = trial.iter().zip(&q).zip(&grad).map(|((t, qi), g)| g * (t - qi)).sum();
            let trial_value = objective.value(&trial);
            if trial_value >= value + ARMIJO * ascent && trial_value >= value {
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }

        objective.gradient(&trial, &mut trial_grad);
        // Barzilai-Borwein step for the next iterate (sign flipped for ascent).
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..n {
            let ds = trial[i] - q[i];
            let dy = trial_grad[i] - grad[i];
            ss += ds * ds;
            sy += ds * dy;
        }
        step = if sy < 0.0 { (ss / -sy).clamp(1e-10, 1e10) } else { (s * 2.0).min(1e10) };

        std::mem::swap(&mut q, &mut trial);
        std::mem::swap(&mut grad, &mut trial_grad);
        value = objective.value(&q);
        observe(&q, value);
    }

    let residual = (q.iter().sum::<f64>() - (cfg.n_cache.min(n)) as f64).abs();
    Ok(SolverReport {
        multiplier: 0.0,
        objective: value,
        iterations,
        residual,
        policy: CachingPolicy::new(q),
        popular_fallback: false,
    })
}

/// `‖P(q + ∇) − q‖₂`.
pub fn projected_gradient_norm(q: &[f64], grad: &[f64], n_cache: usize, scratch: &mut [f64]) -> f64 {
    let moved: Vec<f64> = q.iter().zip(grad).map(|(a, b)| a + b).collect();
    project_capped_simplex(&moved, n_cache, scratch);
    scratch.iter().zip(q).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Checks a policy against the capacity slack and box; used by callers that
/// build policies by hand.
pub fn is_feasible(policy: &CachingPolicy, n_cache: usize) -> bool {
    policy.q().iter().all(|q| (0.0..=1.0).contains(q)) && policy.total() <= n_cache as f64 + CAPACITY_SLACK
}
