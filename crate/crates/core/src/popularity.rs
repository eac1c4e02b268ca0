//! Zipf content popularity.
//!
//! Ranks are 1-indexed everywhere in the public API: rank 1 is the most
//! popular file. Slices indexed by rank use `rank - 1`.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityModel {
    n_files: usize,
    skew: f64,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl PopularityModel {
    /// Zipf pmf `p_f = f^{-δ} / Σ_n n^{-δ}` with the normaliser summed directly.
    pub fn zipf(n_files: usize, skew: f64) -> Result<Self> {
        if n_files < 1 {
            return Err(Error::Domain("catalog needs at least one file".into()));
        }
        if !(skew >= 0.0) || !skew.is_finite() {
            return Err(Error::Domain(format!("Zipf skew must be finite and >= 0, got {skew}")));
        }
        let weights: Vec<f64> = (1..=n_files).map(|f| (f as f64).powf(-skew)).collect();
        // Sum smallest-first to keep the normaliser accurate for long tails.
        let norm: f64 = weights.iter().rev().sum();
        let pmf: Vec<f64> = weights.iter().map(|w| w / norm).collect();
        let mut cdf = Vec::with_capacity(n_files);
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        // Guard the last bucket against rounding so sampling never falls off the end.
        *cdf.last_mut().unwrap() = 1.0;
        Ok(PopularityModel { n_files, skew, pmf, cdf })
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn skew(&self) -> f64 {
        self.skew
    }

    /// Request probabilities, index `rank - 1`.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Request probability of a 1-indexed rank.
    pub fn prob(&self, rank: usize) -> f64 {
        self.pmf[rank - 1]
    }

    /// Draws a 1-indexed file rank by inverse-CDF search.
    pub fn sample_request<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.n_files - 1) + 1
    }
}

/// Convenience alias for [`PopularityModel::zipf`].
pub fn zipf_pmf(n_files: usize, skew: f64) -> Result<PopularityModel> {
    PopularityModel::zipf(n_files, skew)
}
