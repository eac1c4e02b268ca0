//! Network parameters and caching-policy vectors.
//!
//! All quantities are stored on a linear scale. dB/dBm inputs are converted
//! by the constructors here and never travel further into the math.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Number of helper antennas; fixed to one.
pub const HELPER_ANTENNAS: u32 = 1;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Density of `count` points per disc of radius 250 m, in points per m².
pub fn per_disc_250m(count: f64) -> f64 {
    count / (250.0 * 250.0 * PI)
}

/// Two-tier network: tier 1 are macro BSs, tier 2 are cache-equipped helpers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Macro BS density, per m².
    pub lambda1: f64,
    /// Helper density, per m².
    pub lambda2: f64,
    /// User density, per m².
    pub lambda_u: f64,
    /// Macro BS antennas.
    pub m1: u32,
    /// Macro BS transmit power, W.
    pub p1: f64,
    /// Helper transmit power, W.
    pub p2: f64,
    /// Association bias of each tier (linear).
    pub b1: f64,
    pub b2: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// SINR threshold (linear).
    pub gamma0: f64,
    /// Helper cache capacity in files.
    pub n_cache: usize,
}

impl Default for NetworkConfig {
    /// The reference scenario: λ₁ = 1, λ₂ = λu = 25 per π·250² m², α = 3.7,
    /// M₁ = 4, P₁ = 46 dBm, P₂ = 21 dBm, B₁ = 0 dB, B₂ = 10 dB, γ₀ = -10 dB,
    /// N_c = 100.
    fn default() -> Self {
        NetworkConfig {
            lambda1: per_disc_250m(1.0),
            lambda2: per_disc_250m(25.0),
            lambda_u: per_disc_250m(25.0),
            m1: 4,
            p1: dbm_to_watts(46.0),
            p2: dbm_to_watts(21.0),
            b1: db_to_linear(0.0),
            b2: db_to_linear(10.0),
            alpha: 3.7,
            gamma0: db_to_linear(-10.0),
            n_cache: 100,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda_u", self.lambda_u),
            ("p1", self.p1),
            ("p2", self.p2),
            ("b1", self.b1),
            ("b2", self.b2),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.alpha > 2.0) || !self.alpha.is_finite() {
            return Err(Error::config("alpha", format!("must be > 2, got {}", self.alpha)));
        }
        if self.m1 < 1 {
            return Err(Error::config("m1", "must be >= 1"));
        }
        if !(self.gamma0 >= 0.0) || !self.gamma0.is_finite() {
            return Err(Error::config("gamma0", format!("must be finite and >= 0, got {}", self.gamma0)));
        }
        Ok(())
    }

    pub fn with_gamma0_db(mut self, db: f64) -> Self {
        self.gamma0 = db_to_linear(db);
        self
    }

    pub fn with_n_cache(mut self, n: usize) -> Self {
        self.n_cache = n;
        self
    }

    /// λ₁/λ₂.
    pub fn density_ratio(&self) -> f64 {
        self.lambda1 / self.lambda2
    }

    /// P₁/P₂.
    pub fn power_ratio(&self) -> f64 {
        self.p1 / self.p2
    }

    /// B₁/B₂.
    pub fn bias_ratio(&self) -> f64 {
        self.b1 / self.b2
    }

    /// M₁/M₂.
    pub fn antenna_ratio(&self) -> f64 {
        f64::from(self.m1) / f64::from(HELPER_ANTENNAS)
    }

    /// λu/λ₂.
    pub fn load_ratio(&self) -> f64 {
        self.lambda_u / self.lambda2
    }

    /// `λ₁₂(P₁₂B₁₂)^{2/α}`: the weight of the macro tier in every
    /// association-probability denominator.
    pub fn macro_weight(&self) -> f64 {
        self.density_ratio() * (self.power_ratio() * self.bias_ratio()).powf(2.0 / self.alpha)
    }
}

/// Per-file helper caching probabilities `q_f`, index `rank - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CachingPolicy(Vec<f64>);

/// Slack allowed on `Σ q ≤ N_c`.
pub const CAPACITY_SLACK: f64 = 1e-9;

impl CachingPolicy {
    pub fn new(q: Vec<f64>) -> Self {
        CachingPolicy(q)
    }

    pub fn zeros(n_files: usize) -> Self {
        CachingPolicy(vec![0.0; n_files])
    }

    pub fn q(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Checks `0 ≤ q_f ≤ 1` and `Σ q ≤ N_c`.
    pub fn validate(&self, n_cache: usize) -> Result<()> {
        if let Some((i, &q)) = self.0.iter().enumerate().find(|(_, q)| !(0.0..=1.0).contains(*q)) {
            return Err(Error::Domain(format!("q[{}] = {q} outside [0, 1]", i + 1)));
        }
        let total = self.total();
        if total > n_cache as f64 + CAPACITY_SLACK {
            return Err(Error::Domain(format!("sum of q = {total} exceeds cache size {n_cache}")));
        }
        Ok(())
    }

    pub fn is_feasible(&self, n_cache: usize) -> bool {
        self.validate(n_cache).is_ok()
    }
}

impl From<Vec<f64>> for CachingPolicy {
    fn from(q: Vec<f64>) -> Self {
        CachingPolicy(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_scenario_ratios() {
        let cfg = NetworkConfig::default();
        cfg.validate().unwrap();
        assert_relative_eq!(cfg.density_ratio(), 1.0 / 25.0, max_relative = 1e-14);
        assert_relative_eq!(cfg.power_ratio(), 10f64.powf(2.5), max_relative = 1e-12);
        assert_relative_eq!(cfg.bias_ratio(), 0.1, max_relative = 1e-14);
        assert_relative_eq!(cfg.macro_weight(), 0.258_744_306_461_853, max_relative = 1e-12);
    }

    #[test]
    fn validation_names_the_field() {
        let cfg = NetworkConfig { alpha: 2.0, ..NetworkConfig::default() };
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn policy_feasibility() {
        assert!(CachingPolicy::new(vec![1.0, 0.5, 0.5]).is_feasible(2));
        assert!(!CachingPolicy::new(vec![1.0, 0.6, 0.5]).is_feasible(2));
        assert!(!CachingPolicy::new(vec![1.1, 0.0]).is_feasible(2));
    }
}
