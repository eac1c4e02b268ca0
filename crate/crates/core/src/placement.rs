//! Realising per-helper caches from a caching-probability vector.
//!
//! Segments of length `q_f` are laid end to end over `[0, Σq)` in ascending
//! rank order. One uniform offset `u ∈ [0, 1)` picks the points
//! `u, u+1, …`; each point selects the file whose half-open segment contains
//! it. A segment no longer than one contains at most one point, so the files
//! are distinct, and file `f` is selected with probability exactly `q_f`.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{CachingPolicy, CAPACITY_SLACK};

/// A concrete set of cached files (1-indexed ranks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheRealization {
    pub files: BTreeSet<usize>,
}

impl CacheRealization {
    pub fn contains(&self, rank: usize) -> bool {
        self.files.contains(&rank)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

/// Precomputed segment boundaries for one policy, shared by all helpers.
///
/// A helper's cache is fully described by its offset `u`, which keeps
/// per-helper state to a single `f64` inside the simulator.
#[derive(Debug, Clone)]
pub struct PlacementLayout {
    /// `ends[i]` is the right end of the segment of rank `i + 1`; the left
    /// end is `ends[i - 1]` (or 0).
    ends: Vec<f64>,
    n_points: usize,
}

impl PlacementLayout {
    pub fn new(policy: &CachingPolicy, n_cache: usize) -> Result<Self> {
        if let Some((i, q)) = policy.q().iter().enumerate().find(|(_, q)| !(0.0..=1.0).contains(*q)) {
            return Err(Error::Domain(format!("caching probability q[{}] = {q} outside [0, 1]", i + 1)));
        }
        let mut ends = Vec::with_capacity(policy.len());
        let mut acc = 0.0;
        for q in policy.q() {
            acc += q;
            ends.push(acc);
        }
        let total = acc;
        let filled = total >= n_cache as f64 - CAPACITY_SLACK;
        let n_points = if filled {
            n_cache
        } else {
            // Under-filled policy: only points below Σq are used, so the
            // number of files drawn depends on the offset.
            total.ceil() as usize
        };
        // Rounding in the prefix sums can leave the last point just past the
        // final boundary; stretch the last non-empty segment to cover it.
        if filled && n_cache > 0 {
            if let Some(last) = policy.q().iter().rposition(|&q| q > 0.0) {
                let cover = (n_points as f64).max(ends[last]);
                for e in &mut ends[last..] {
                    *e = cover;
                }
            }
        }
        Ok(PlacementLayout { ends, n_points })
    }

    pub fn n_files(&self) -> usize {
        self.ends.len()
    }

    fn start(&self, rank: usize) -> f64 {
        if rank == 1 {
            0.0
        } else {
            self.ends[rank - 2]
        }
    }

    fn total(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    fn point_count(&self, offset: f64) -> usize {
        if self.n_points == 0 {
            return 0;
        }
        let total = self.total();
        (0..self.n_points).take_while(|&k| offset + (k as f64) < total).count()
    }

    /// Whether the helper with offset `u` caches `rank`. O(1).
    pub fn contains(&self, offset: f64, rank: usize) -> bool {
        let (lo, hi) = (self.start(rank), self.ends[rank - 1]);
        if hi <= lo {
            return false;
        }
        // Smallest point index k with u + k >= lo.
        let k = (lo - offset).ceil().max(0.0);
        let k = if offset + k < lo { k + 1.0 } else { k };
        (k as usize) < self.n_points && offset + k < hi
    }

    /// Files selected by offset `u`.
    pub fn files_at(&self, offset: f64) -> CacheRealization {
        let files = (0..self.point_count(offset))
            .map(|k| {
                let x = offset + k as f64;
                // Half-open segments [start, end): first end strictly above x.
                self.ends.partition_point(|&e| e <= x) + 1
            })
            .collect();
        CacheRealization { files }
    }

    /// Draws the offset for one helper.
    pub fn draw_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random::<f64>()
    }
}

/// Realises one helper's cache for `policy`.
pub fn realize<R: Rng + ?Sized>(policy: &CachingPolicy, n_cache: usize, rng: &mut R) -> Result<CacheRealization> {
    let layout = PlacementLayout::new(policy, n_cache)?;
    let u = layout.draw_offset(rng);
    Ok(layout.files_at(u))
}
