mod common;

use common::{gaps_grow, inside, oracle_separable, random_full_policy, separable_objective};
use hetcache::analysis::{constants, helper_active_prob, offloading_prob, offloading_prob_lower_bound};
use hetcache::model::per_disc_250m;
use hetcache::optimizer::{
    active_prob_upper_bound, baseline_popular, baseline_uniform, solve_active_prob_max, solve_local,
    solve_lower_bound, solve_lower_bound_with, solve_saturated, solve_sparse_users, solve_waterfilling, SolverReport,
    WaterfillingProblem,
};
use hetcache::{NetworkConfig, PopularityModel};
use proptest::prelude::*;

/// The separable constants `(c_num, c_den)` each closed-form solver uses.
fn saturated_constants(cfg: &NetworkConfig) -> (f64, f64) {
    let k = constants(cfg).unwrap();
    (k.base(1.0), k.slope(1.0))
}

fn lower_bound_constants(cfg: &NetworkConfig, pop: &PopularityModel) -> (f64, f64) {
    let k = constants(cfg).unwrap();
    let pbar = active_prob_upper_bound(cfg, pop).unwrap();
    (k.base(pbar), k.slope(pbar))
}

fn problem(c: (f64, f64), pop: &PopularityModel, n_cache: usize) -> WaterfillingProblem<'_> {
    WaterfillingProblem { c_num: c.0, c_den: c.1, popularity: pop, n_cache }
}

/// Largest relative KKT violation of `report` for `problem`.
fn kkt_residual(problem: &WaterfillingProblem, report: &SolverReport) -> f64 {
    let nu = report.multiplier;
    let mut worst: f64 = 0.0;
    for (q, p) in report.policy.q().iter().zip(problem.popularity.pmf()) {
        let m = problem.marginal(*p, *q);
        let v = if inside(*q) {
            (m - nu).abs() / nu
        } else if *q >= 1.0 {
            ((nu - m) / nu).max(0.0)
        } else {
            ((m - nu) / nu).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Right-hand side of the closed-form multiplier identity.
fn closed_form_scale(q: &[f64], pop: &PopularityModel, c: (f64, f64), n_cache: usize) -> f64 {
    let n1 = q.iter().filter(|&&x| x >= 1.0).count() as f64;
    let interior: Vec<usize> = (0..q.len()).filter(|&i| q[i] > 0.0 && q[i] < 1.0).collect();
    let roots: f64 = interior.iter().map(|&i| pop.pmf()[i].sqrt()).sum();
    (n_cache as f64 - n1 + interior.len() as f64 * c.0 / c.1) / roots
}

fn scenario() -> impl Strategy<Value = (NetworkConfig, PopularityModel)> {
    (-15.0..10.0f64, 0.1..1.5f64, 50usize..400, 1usize..40, 1.0..100.0f64, 1.0..100.0f64).prop_map(
        |(g, skew, n_files, n_cache, l2, lu)| {
            let cfg = NetworkConfig {
                lambda2: per_disc_250m(l2),
                lambda_u: per_disc_250m(lu),
                ..NetworkConfig::default().with_gamma0_db(g).with_n_cache(n_cache)
            };
            (cfg, PopularityModel::zipf(n_files, skew).unwrap())
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn waterfilling_satisfies_kkt((cfg, pop) in scenario()) {
        let k = constants(&cfg).unwrap();
        let cases = [
            (saturated_constants(&cfg), solve_saturated(&cfg, &pop).unwrap()),
            ((k.c1, 1.0), solve_sparse_users(&cfg, &pop).unwrap()),
            ((cfg.macro_weight(), 1.0), solve_active_prob_max(&cfg, &pop).unwrap()),
            (lower_bound_constants(&cfg, &pop), solve_lower_bound(&cfg, &pop).unwrap()),
        ];
        for (c, report) in cases {
            let pr = problem(c, &pop, cfg.n_cache);
            prop_assert!(kkt_residual(&pr, &report) <= 1e-6, "residual {}", kkt_residual(&pr, &report));
            prop_assert!(report.residual <= 1e-9);
            // Closed-form multiplier identity.
            let q = report.policy.q();
            if q.iter().any(|&x| x > 0.0 && x < 1.0) {
                let lhs = (c.0 / report.multiplier).sqrt() / c.1;
                let rhs = closed_form_scale(q, &pop, c, cfg.n_cache);
                prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn interior_follows_shifted_power_law((cfg, pop) in scenario()) {
        let c = saturated_constants(&cfg);
        let report = solve_saturated(&cfg, &pop).unwrap();
        let shift = c.0 / c.1;
        let delta = pop.skew();
        let ratios: Vec<f64> = report
            .policy
            .q()
            .iter()
            .enumerate()
            .filter(|(_, q)| inside(**q))
            .map(|(i, q)| (q + shift) * ((i + 1) as f64).powf(delta / 2.0))
            .collect();
        for r in &ratios {
            prop_assert!((r - ratios[0]).abs() <= 1e-9 * ratios[0]);
        }
    }

    #[test]
    fn solvers_dominate_baselines((cfg, pop) in scenario()) {
        let popular = baseline_popular(&pop, cfg.n_cache);
        let uniform = baseline_uniform(&pop, cfg.n_cache);
        let k = constants(&cfg).unwrap();
        let cases = [
            (saturated_constants(&cfg), solve_saturated(&cfg, &pop).unwrap()),
            ((k.c1, 1.0), solve_sparse_users(&cfg, &pop).unwrap()),
            (lower_bound_constants(&cfg, &pop), solve_lower_bound(&cfg, &pop).unwrap()),
        ];
        for (c, report) in cases {
            let pr = problem(c, &pop, cfg.n_cache);
            prop_assert!(report.objective >= pr.objective(&popular) - 1e-9);
            prop_assert!(report.objective >= pr.objective(&uniform) - 1e-9);
        }
    }

    #[test]
    fn saturated_policy_is_nonincreasing((cfg, pop) in scenario()) {
        let q = solve_saturated(&cfg, &pop).unwrap().policy;
        prop_assert!(q.q().windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn matches_projected_gradient_oracle_on_small_catalog() {
    let pop = PopularityModel::zipf(4, 1.0).unwrap();
    let report = solve_waterfilling(&problem((1.0, 1.0), &pop, 2)).unwrap();
    let oracle = oracle_separable(pop.pmf(), 1.0, 1.0, 2.0);
    for (a, b) in report.policy.q().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-7, "{:?} vs {oracle:?}", report.policy.q());
    }
    let best = separable_objective(pop.pmf(), 1.0, 1.0, &oracle);
    assert!((report.objective - best).abs() <= 1e-10);
}

fn assert_gaps_grow(policies: &[Vec<f64>], label: &str) {
    if let Err(e) = gaps_grow(policies) {
        panic!("{label}: {e}");
    }
}

#[test]
fn saturated_gaps_grow_with_macro_density_and_power() {
    let pop = PopularityModel::zipf(1000, 0.5).unwrap();
    let base = NetworkConfig::default();
    let by_density: Vec<Vec<f64>> = [1.0, 4.0, 16.0]
        .iter()
        .map(|m| {
            let cfg = NetworkConfig { lambda1: base.lambda1 * m, ..base.clone() };
            solve_saturated(&cfg, &pop).unwrap().policy.into_inner()
        })
        .collect();
    assert_gaps_grow(&by_density, "lambda12");
    let by_power: Vec<Vec<f64>> = [1.0, 4.0, 16.0]
        .iter()
        .map(|m| {
            let cfg = NetworkConfig { p1: base.p1 * m, ..base.clone() };
            solve_saturated(&cfg, &pop).unwrap().policy.into_inner()
        })
        .collect();
    assert_gaps_grow(&by_power, "P12");
}

#[test]
fn lower_bound_gaps_grow_with_load() {
    let pop = PopularityModel::zipf(1000, 0.5).unwrap();
    let base = NetworkConfig::default();
    let ladder: Vec<Vec<f64>> = [0.1, 1.0, 10.0]
        .iter()
        .map(|r| {
            let cfg = NetworkConfig { lambda_u: base.lambda2 * r, ..base.clone() };
            solve_lower_bound(&cfg, &pop).unwrap().policy.into_inner()
        })
        .collect();
    assert_gaps_grow(&ladder, "lambda_u/lambda2");
}

#[test]
fn sparse_user_gaps_grow_with_macro_density() {
    let pop = PopularityModel::zipf(1000, 0.5).unwrap();
    let base = NetworkConfig::default();
    let ladder: Vec<Vec<f64>> = [1.0, 4.0, 16.0]
        .iter()
        .map(|m| {
            let cfg = NetworkConfig { lambda1: base.lambda1 * m, ..base.clone() };
            solve_sparse_users(&cfg, &pop).unwrap().policy.into_inner()
        })
        .collect();
    assert_gaps_grow(&ladder, "sparse lambda12");
}

#[test]
fn high_threshold_converges_to_popular_caching() {
    let pop = PopularityModel::zipf(20, 1.0).unwrap();
    let popular = baseline_popular(&pop, 5);
    let mut deviations = Vec::new();
    for gamma0 in [1e2, 1e4, 1e6] {
        let cfg = NetworkConfig { gamma0, ..NetworkConfig::default().with_n_cache(5) };
        let q = solve_saturated(&cfg, &pop).unwrap().policy;
        let dev = q.q().iter().zip(popular.q()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        deviations.push(dev);
    }
    assert!(deviations.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{deviations:?}");
    assert!(deviations[2] <= 1e-3, "{deviations:?}");
}

#[test]
fn active_prob_maximiser_dominates_random_policies() {
    let cfg = NetworkConfig::default();
    let pop = PopularityModel::zipf(1000, 0.5).unwrap();
    let best = helper_active_prob(&cfg, &solve_active_prob_max(&cfg, &pop).unwrap().policy, &pop);
    assert_eq!(best, active_prob_upper_bound(&cfg, &pop).unwrap());
    let mut rng = common::rng(17);
    for _ in 0..100 {
        let q = random_full_policy(1000, 100, &mut rng);
        assert!(helper_active_prob(&cfg, &q, &pop) <= best + 1e-12);
    }
}

#[test]
fn lower_bound_tends_to_saturated_under_heavy_load() {
    let pop = PopularityModel::zipf(1000, 0.5).unwrap();
    let cfg = NetworkConfig { lambda_u: NetworkConfig::default().lambda2 * 1e4, ..NetworkConfig::default() };
    let lb = solve_lower_bound(&cfg, &pop).unwrap().policy;
    let sat = solve_saturated(&cfg, &pop).unwrap().policy;
    let dev = lb.q().iter().zip(sat.q()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(dev <= 1e-3, "{dev}");
}

#[test]
fn sparse_users_is_lower_bound_with_idle_helpers() {
    let pop = PopularityModel::zipf(500, 0.8).unwrap();
    let cfg = NetworkConfig::default().with_n_cache(40);
    let a = solve_sparse_users(&cfg, &pop).unwrap().policy;
    let b = solve_lower_bound_with(&cfg, &pop, 0.0).unwrap().policy;
    for (x, y) in a.q().iter().zip(b.q()) {
        assert!((x - y).abs() <= 1e-9);
    }
}

#[test]
fn local_search_barely_improves_on_lower_bound() {
    for skew in [0.5, 1.0] {
        let pop = PopularityModel::zipf(1000, skew).unwrap();
        let cfg = NetworkConfig::default();
        let lb = solve_lower_bound(&cfg, &pop).unwrap();
        let local = solve_local(&cfg, &pop, &lb.policy).unwrap();
        let start = offloading_prob(&cfg, &lb.policy, &pop).unwrap();
        assert!(local.objective >= start - 1e-12);
        assert!(local.objective <= 1.01 * start, "skew {skew}: {} vs {start}", local.objective);
        assert!(local.policy.is_feasible(cfg.n_cache));
    }
}

#[test]
fn lower_bound_objective_bounds_true_value_of_its_solution() {
    let pop = PopularityModel::zipf(1000, 0.5).unwrap();
    let cfg = NetworkConfig::default();
    let pbar = active_prob_upper_bound(&cfg, &pop).unwrap();
    let report = solve_lower_bound(&cfg, &pop).unwrap();
    let lb = offloading_prob_lower_bound(&cfg, &report.policy, &pop, pbar).unwrap();
    assert!((lb - report.objective).abs() <= 1e-12);
    assert!(lb <= offloading_prob(&cfg, &report.policy, &pop).unwrap());
}

#[test]
fn sparse_users_also_converges_to_popular_caching() {
    let pop = PopularityModel::zipf(20, 1.0).unwrap();
    let popular = baseline_popular(&pop, 5);
    let mut last = f64::INFINITY;
    for gamma0 in [1e2, 1e4, 1e6] {
        let cfg = NetworkConfig { gamma0, ..NetworkConfig::default().with_n_cache(5) };
        let q = solve_sparse_users(&cfg, &pop).unwrap().policy;
        let dev = q.q().iter().zip(popular.q()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= last + 1e-12);
        last = dev;
    }
    assert!(last <= 1e-3, "{last}");
}
