//! Closed-form successful offloading probability.
//!
//! A user requesting file `f` associates with the helper tier with
//! probability `P_{f,2} = q_f / (W + q_f)` where `W = λ₁₂(P₁₂B₁₂)^{2/α}`.
//! Given helper association, the interference-limited success probability
//! is `(W + q_f) / (C₁ + C₂·p_a + C₃·p_a·q_f + q_f)`, so
//!
//! ```text
//! P_off(q) = Σ_f p_f q_f / (C₁ + C₂ p_a + C₃ p_a q_f + q_f)
//! ```
//!
//! with `p_a` the (approximate) probability that a helper has at least one
//! associated user. Thermal noise is neglected throughout.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{CachingPolicy, NetworkConfig, HELPER_ANTENNAS};
use crate::popularity::PopularityModel;
use crate::specfun::{hyp2f1, hyp2f1_asymptotic_tail, hyp2f1_excess_over_tail, HypergeometricArgs};

/// Shape constant of the Voronoi-cell area approximation used for `p_a`.
const CELL_SHAPE: f64 = 3.5;

/// The threshold-dependent constants `C₁`, `C₂`, `C₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormConstants {
    /// Interference from the macro tier, which is never farther than the
    /// biased association distance allows.
    pub c1: f64,
    /// Interference from active helpers that do not cache the request.
    pub c2: f64,
    /// Correction for active helpers that do cache it; in `[-1, 0]`.
    pub c3: f64,
    /// `C₃ + 1`, evaluated without cancellation. It decays like `1/γ₀`.
    pub c3_plus_one: f64,
}

impl ClosedFormConstants {
    /// Coefficient of `q_f` in each denominator for active probability `p`:
    /// `C₃ p + 1`.
    pub fn slope(&self, active: f64) -> f64 {
        (1.0 - active) + active * self.c3_plus_one
    }

    /// Additive part of each denominator: `C₁ + C₂ p`.
    pub fn base(&self, active: f64) -> f64 {
        self.c1 + self.c2 * active
    }
}

/// `2F1[-2/α, M₁; 1-2/α; -γ₀/(M₁₂B₁₂)]`.
fn macro_hyp(cfg: &NetworkConfig) -> Result<f64> {
    let z = -cfg.gamma0 / (cfg.antenna_ratio() * cfg.bias_ratio());
    hyp2f1(HypergeometricArgs::interference(cfg.alpha, cfg.m1, z))
}

/// `2F1[-2/α, M₂; 1-2/α; -γ₀]`.
fn helper_hyp(cfg: &NetworkConfig) -> Result<f64> {
    hyp2f1(HypergeometricArgs::interference(cfg.alpha, HELPER_ANTENNAS, -cfg.gamma0))
}

pub fn constants(cfg: &NetworkConfig) -> Result<ClosedFormConstants> {
    cfg.validate()?;
    let c1 = cfg.macro_weight() * macro_hyp(cfg)?;
    let c2 = hyp2f1_asymptotic_tail(cfg.alpha, HELPER_ANTENNAS, cfg.gamma0)?;
    let c3_plus_one = hyp2f1_excess_over_tail(cfg.alpha, HELPER_ANTENNAS, cfg.gamma0)?;
    Ok(ClosedFormConstants { c1, c2, c3: c3_plus_one - 1.0, c3_plus_one })
}

/// Probability that a user requesting a file cached with probability `q`
/// associates with the helper tier.
pub fn association_prob_q(cfg: &NetworkConfig, q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    q / (cfg.macro_weight() + q)
}

/// `P_{f,2}` for a 1-indexed rank.
pub fn association_prob(cfg: &NetworkConfig, policy: &CachingPolicy, rank: usize) -> f64 {
    association_prob_q(cfg, policy.q()[rank - 1])
}

/// Helper active probability `p_a,2 ≈ 1 - (1 + λu/(3.5λ₂)·Σ_f p_f P_{f,2})^{-3.5}`.
pub fn helper_active_prob(cfg: &NetworkConfig, policy: &CachingPolicy, popularity: &PopularityModel) -> f64 {
    active_prob_from_mass(cfg.load_ratio(), helper_association_mass(cfg, policy, popularity))
}

/// `Σ_f p_f P_{f,2}`: the probability that a random user associates with a helper.
pub fn helper_association_mass(cfg: &NetworkConfig, policy: &CachingPolicy, popularity: &PopularityModel) -> f64 {
    let w = cfg.macro_weight();
    popularity
        .pmf()
        .iter()
        .zip(policy.q())
        .filter(|(_, &q)| q > 0.0)
        .map(|(p, q)| p * q / (w + q))
        .sum()
}

pub(crate) fn active_prob_from_mass(load_ratio: f64, mass: f64) -> f64 {
    1.0 - (1.0 + load_ratio / CELL_SHAPE * mass).powf(-CELL_SHAPE)
}

/// `Σ_f p_f q_f / (C₁ + C₂ p + (C₃ p + 1) q_f)` for a fixed active probability `p`.
pub fn offloading_prob_given_active(
    k: &ClosedFormConstants,
    policy: &CachingPolicy,
    popularity: &PopularityModel,
    active: f64,
) -> f64 {
    let base = k.base(active);
    let slope = k.slope(active);
    popularity
        .pmf()
        .iter()
        .zip(policy.q())
        .filter(|(_, &q)| q > 0.0)
        .map(|(p, q)| p * q / (base + slope * q))
        .sum()
}

pub fn offloading_prob(cfg: &NetworkConfig, policy: &CachingPolicy, popularity: &PopularityModel) -> Result<f64> {
    check_lengths(policy, popularity)?;
    let k = constants(cfg)?;
    let active = helper_active_prob(cfg, policy, popularity);
    Ok(offloading_prob_given_active(&k, policy, popularity, active))
}

/// Offloading probability when every helper is active.
pub fn offloading_prob_saturated(
    cfg: &NetworkConfig,
    policy: &CachingPolicy,
    popularity: &PopularityModel,
) -> Result<f64> {
    check_lengths(policy, popularity)?;
    Ok(offloading_prob_given_active(&constants(cfg)?, policy, popularity, 1.0))
}

/// Lower bound obtained by substituting a policy-independent upper bound
/// `pbar` for the helper active probability.
pub fn offloading_prob_lower_bound(
    cfg: &NetworkConfig,
    policy: &CachingPolicy,
    popularity: &PopularityModel,
    pbar: f64,
) -> Result<f64> {
    check_lengths(policy, popularity)?;
    if !(0.0..=1.0).contains(&pbar) {
        return Err(Error::Domain(format!("active-probability bound {pbar} outside [0, 1]")));
    }
    Ok(offloading_prob_given_active(&constants(cfg)?, policy, popularity, pbar))
}

/// `P(γ_{f,2} > γ₀)`: success probability of a user requesting `rank`,
/// conditioned on it being served by a helper.
pub fn conditional_success_prob(
    cfg: &NetworkConfig,
    policy: &CachingPolicy,
    popularity: &PopularityModel,
    rank: usize,
) -> Result<f64> {
    check_lengths(policy, popularity)?;
    let k = constants(cfg)?;
    let active = helper_active_prob(cfg, policy, popularity);
    Ok(conditional_success_q(cfg, &k, policy.q()[rank - 1], active))
}

pub(crate) fn conditional_success_q(cfg: &NetworkConfig, k: &ClosedFormConstants, q: f64, active: f64) -> f64 {
    (cfg.macro_weight() + q) / (k.base(active) + k.slope(active) * q)
}

fn check_lengths(policy: &CachingPolicy, popularity: &PopularityModel) -> Result<()> {
    if policy.len() != popularity.n_files() {
        return Err(Error::Domain(format!(
            "policy has {} entries but the catalog has {} files",
            policy.len(),
            popularity.n_files()
        )));
    }
    Ok(())
}

/// Density of the distance to the serving helper, given helper association
/// for a file cached with probability `q`.
pub fn serving_distance_pdf(cfg: &NetworkConfig, q: f64, r: f64) -> f64 {
    let rate = PI * cfg.lambda2 * (cfg.macro_weight() + q);
    2.0 * rate * r * (-rate * r * r).exp()
}

/// Laplace transform of macro-tier interference at `s = M₂ r^α γ₀ / P₂`.
/// Macro BSs hold every file, so none is closer than `(P₁₂B₁₂)^{1/α} r`.
pub fn laplace_macro_interference(cfg: &NetworkConfig, r: f64) -> Result<f64> {
    let z = macro_hyp(cfg)? - 1.0;
    let scale = (cfg.power_ratio() * cfg.bias_ratio()).powf(2.0 / cfg.alpha);
    Ok((-PI * cfg.lambda1 * scale * r * r * z).exp())
}

/// Laplace transform of interference from active helpers that cache the
/// requested file; they lie outside the serving distance.
pub fn laplace_caching_helpers(cfg: &NetworkConfig, q: f64, active: f64, r: f64) -> Result<f64> {
    let z = helper_hyp(cfg)? - 1.0;
    Ok((-PI * active * q * cfg.lambda2 * r * r * z).exp())
}

/// Laplace transform of interference from active helpers that do not cache
/// the requested file; they can be arbitrarily close.
pub fn laplace_noncaching_helpers(cfg: &NetworkConfig, q: f64, active: f64, r: f64) -> Result<f64> {
    let z = hyp2f1_asymptotic_tail(cfg.alpha, HELPER_ANTENNAS, cfg.gamma0)?;
    Ok((-PI * active * (1.0 - q) * cfg.lambda2 * r * r * z).exp())
}

/// `P(γ_{f,2} > γ₀ | r)`: product of the three interference Laplace transforms.
pub fn conditional_success_given_distance(cfg: &NetworkConfig, q: f64, active: f64, r: f64) -> Result<f64> {
    Ok(laplace_macro_interference(cfg, r)?
        * laplace_caching_helpers(cfg, q, active, r)?
        * laplace_noncaching_helpers(cfg, q, active, r)?)
}
