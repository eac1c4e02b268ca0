//! Helpers shared by the integration tests. Kept independent of the
//! library's own solvers so they can serve as oracles.
#![allow(dead_code)]

use hetcache::CachingPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Euclidean projection onto `{0 ≤ x ≤ 1, Σx ≤ cap}` by bisection on the shift.
pub fn project(y: &[f64], cap: f64) -> Vec<f64> {
    let clipped = |t: f64| -> Vec<f64> { y.iter().map(|v| (v - t).clamp(0.0, 1.0)).collect() };
    let x = clipped(0.0);
    if x.iter().sum::<f64>() <= cap {
        return x;
    }
    let (mut lo, mut hi) = (0.0, y.iter().cloned().fold(f64::MIN, f64::max));
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if clipped(mid).iter().sum::<f64>() > cap {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clipped(hi)
}

/// Maximises `Σ p_f q_f / (a + b q_f)` over the capped simplex with
/// fixed-step projected gradient ascent. Slow but simple.
pub fn oracle_separable(p: &[f64], a: f64, b: f64, cap: f64) -> Vec<f64> {
    // Curvature bound: |d²/dq²| ≤ 2 p b / a².
    let lipschitz = p.iter().map(|pf| 2.0 * pf * b / (a * a)).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let mut q = project(&vec![cap / p.len() as f64; p.len()], cap);
    for _ in 0..2_000_000 {
        let y: Vec<f64> = q.iter().zip(p).map(|(qf, pf)| qf + step * pf * a / (a + b * qf).powi(2)).collect();
        let next = project(&y, cap);
        let moved = next.iter().zip(&q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        q = next;
        if moved < 1e-15 {
            break;
        }
    }
    q
}

pub fn separable_objective(p: &[f64], a: f64, b: f64, q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(pf, qf)| pf * qf / (a + b * qf)).sum()
}

/// Random policy with `Σq = cap` exactly (up to rounding) and `q ≤ 1`.
pub fn random_full_policy(n_files: usize, cap: usize, rng: &mut ChaCha8Rng) -> CachingPolicy {
    loop {
        let raw: Vec<f64> = (0..n_files).map(|_| rng.random::<f64>()).collect();
        let q = project(&raw.iter().map(|x| x * 3.0).collect::<Vec<_>>(), cap as f64);
        // Projection with a binding cap lands on Σq = cap.
        if (q.iter().sum::<f64>() - cap as f64).abs() < 1e-9 {
            return CachingPolicy::new(q);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Indices `f` (0-based) with both `q[f]` and `q[f+1]` strictly inside (0, 1).
pub fn interior_pairs(q: &[f64]) -> Vec<usize> {
    (0..q.len().saturating_sub(1)).filter(|&f| inside(q[f]) && inside(q[f + 1])).collect()
}

pub fn inside(x: f64) -> bool {
    x > 1e-12 && x < 1.0 - 1e-12
}

/// Checks that every adjacent gap `q[f] − q[f+1]` that is interior under all
/// `policies` strictly grows along the ladder. Returns the number of pairs
/// checked, or a description of the first violation.
pub fn gaps_grow(policies: &[Vec<f64>]) -> Result<usize, String> {
    let common: Vec<usize> = interior_pairs(&policies[0])
        .into_iter()
        .filter(|f| policies.iter().all(|q| interior_pairs(q).contains(f)))
        .collect();
    if common.is_empty() {
        return Err("no adjacent pair is interior across the ladder".into());
    }
    for &f in &common {
        for w in policies.windows(2) {
            let (before, after) = (w[0][f] - w[0][f + 1], w[1][f] - w[1][f + 1]);
            if after <= before {
                return Err(format!("gap at rank {} went {before:e} -> {after:e}", f + 1));
            }
        }
    }
    Ok(common.len())
}
