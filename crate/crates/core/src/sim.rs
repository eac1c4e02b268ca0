//! Monte Carlo simulator for the two-tier cache-enabled network.
//!
//! Each drop places macro BSs, helpers and users as independent PPPs on a
//! disc with the typical user at the origin. Helpers realise their caches
//! from the policy, every user draws a Zipf request and associates by
//! strongest biased received power among the macro BSs and the helpers
//! caching its request, and helpers without users go idle. The drop records
//! whether the typical user is served by a helper with SINR above `γ₀`.
//!
//! Zero-forcing at the macro BSs is represented by its channel statistics:
//! the serving gain is `Exp(1)` with power `P_k/M_k`, and each macro
//! interferer contributes `P₁·Gamma(M₁, 1/M₁)·r^{-α}`. Every macro BS is
//! always active. Drops are seeded independently (one ChaCha stream per
//! drop), so results do not depend on thread scheduling.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{dbm_to_watts, CachingPolicy, NetworkConfig, HELPER_ANTENNAS};
use crate::placement::{CacheRealization, PlacementLayout};
use crate::popularity::PopularityModel;

/// Attempts at redrawing a drop with no macro BS before giving up.
const MAX_EMPTY_REDRAWS: usize = 1000;

type Point = [f64; 2];

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub network: NetworkConfig,
    /// Radius of the simulation disc, m.
    pub window_radius: f64,
    pub n_drops: usize,
    /// Thermal noise power, dBm. `None` means interference-limited.
    pub noise_dbm: Option<f64>,
    pub seed: u64,
    /// Also require the serving helper to pick the typical user among all
    /// of its associated users. Off by default.
    pub require_selection: bool,
}

impl SimConfig {
    pub fn new(network: NetworkConfig) -> Self {
        SimConfig {
            network,
            window_radius: 2500.0,
            n_drops: 20_000,
            noise_dbm: None,
            seed: 0,
            require_selection: false,
        }
    }

    pub fn with_drops(mut self, n: usize) -> Self {
        self.n_drops = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise_dbm(mut self, noise: Option<f64>) -> Self {
        self.noise_dbm = noise;
        self
    }

    pub fn with_window_radius(mut self, r: f64) -> Self {
        self.window_radius = r;
        self
    }

    /// Checks the edge-effect rules: at least 30 expected points of every
    /// process, and a radius of at least 10 mean macro association distances.
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        let r = self.window_radius;
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::config("window_radius", format!("must be finite and > 0, got {r}")));
        }
        let area = PI * r * r;
        for (field, lambda) in [
            ("lambda1", self.network.lambda1),
            ("lambda2", self.network.lambda2),
            ("lambda_u", self.network.lambda_u),
        ] {
            if lambda * area < 30.0 {
                return Err(Error::config(
                    "window_radius",
                    format!("expected {field} count {:.1} in the window is below 30", lambda * area),
                ));
            }
        }
        // Mean distance to the nearest point of a PPP is 1/(2√λ).
        let mean_macro_distance = 0.5 / self.network.lambda1.sqrt();
        if r < 10.0 * mean_macro_distance {
            return Err(Error::config(
                "window_radius",
                format!("{r} m is below 10x the mean macro distance {mean_macro_distance:.1} m"),
            ));
        }
        if self.n_drops == 0 {
            return Err(Error::config("n_drops", "must be >= 1"));
        }
        Ok(())
    }

    fn noise_watts(&self) -> f64 {
        self.noise_dbm.map_or(0.0, dbm_to_watts)
    }

    fn drop_rng(&self, drop: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(drop as u64);
        rng
    }
}

/// Monte Carlo estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub p_hat: f64,
    pub n_drops: usize,
    pub successes: u64,
    /// Normal-approximation 95% half-width, `1.96·√(p(1-p)/n)`.
    pub half_width_95: f64,
}

impl SimEstimate {
    pub fn from_counts(successes: u64, n_drops: usize) -> Self {
        let p_hat = if n_drops == 0 { 0.0 } else { successes as f64 / n_drops as f64 };
        SimEstimate { p_hat, n_drops, successes, half_width_95: half_width(p_hat, n_drops) }
    }

    /// Binomial standard error `√(p(1-p)/n)` at a reference probability.
    pub fn std_error_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.n_drops as f64).sqrt()
    }
}

pub fn half_width(p: f64, n: usize) -> f64 {
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Macro,
    Helper,
}

/// Serving node chosen by biased received power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    pub tier: Tier,
    /// Index into the realisation's macro or helper list.
    pub index: usize,
    pub distance: f64,
}

/// Uniform grid over the window's bounding square, stored CSR-style.
#[derive(Debug, Clone)]
struct Grid {
    origin: f64,
    cell: f64,
    side: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl Grid {
    fn build(points: &[Point], radius: f64, cell: f64) -> Self {
        let side = ((2.0 * radius / cell).ceil() as usize).max(1);
        let origin = -radius;
        let n_cells = side * side;
        let mut counts = vec![0u32; n_cells + 1];
        let cells: Vec<usize> = points.iter().map(|p| Self::cell_of(origin, cell, side, p)).collect();
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for i in 0..n_cells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        Grid { origin, cell, side, starts: counts, items }
    }

    fn coord(origin: f64, cell: f64, side: usize, x: f64) -> usize {
        (((x - origin) / cell).floor().max(0.0) as usize).min(side - 1)
    }

    fn cell_of(origin: f64, cell: f64, side: usize, p: &Point) -> usize {
        Self::coord(origin, cell, side, p[1]) * side + Self::coord(origin, cell, side, p[0])
    }

    /// Nearest point to `at` among those accepted by `keep`, no farther than
    /// `max_dist`. Searches rings of cells outward and stops once the ring
    /// cannot contain anything closer than the best hit.
    fn nearest(
        &self,
        points: &[Point],
        at: &Point,
        max_dist: f64,
        mut keep: impl FnMut(usize) -> bool,
    ) -> Option<(usize, f64)> {
        let cx = Self::coord(self.origin, self.cell, self.side, at[0]) as isize;
        let cy = Self::coord(self.origin, self.cell, self.side, at[1]) as isize;
        // Distance from `at` to the edges of its own cell.
        let x0 = self.origin + cx as f64 * self.cell;
        let y0 = self.origin + cy as f64 * self.cell;
        let inner = (at[0] - x0)
            .min(x0 + self.cell - at[0])
            .min(at[1] - y0)
            .min(y0 + self.cell - at[1])
            .max(0.0);

        let mut best: Option<(usize, f64)> = None;
        let mut best_d2 = max_dist * max_dist;
        let side = self.side as isize;
        for ring in 0..=side {
            if ring > 0 {
                let reach = inner + (ring - 1) as f64 * self.cell;
                if reach * reach > best_d2 {
                    break;
                }
            }
            let (lo_x, hi_x, lo_y, hi_y) = (cx - ring, cx + ring, cy - ring, cy + ring);
            if lo_x < 0 && lo_y < 0 && hi_x >= side && hi_y >= side {
                // Ring lies entirely outside the grid, as will every later one.
                if ring > 0 {
                    break;
                }
            }
            for gy in lo_y..=hi_y {
                if gy < 0 || gy >= side {
                    continue;
                }
                let on_edge_row = gy == lo_y || gy == hi_y;
                let mut gx = lo_x;
                while gx <= hi_x {
                    if gx >= 0 && gx < side {
                        let c = gy as usize * self.side + gx as usize;
                        for &i in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                            let i = i as usize;
                            let p = points[i];
                            let d2 = (p[0] - at[0]).powi(2) + (p[1] - at[1]).powi(2);
                            if d2 < best_d2 && keep(i) {
                                best_d2 = d2;
                                best = Some((i, d2));
                            }
                        }
                    }
                    // Interior rows of a ring only touch its two side columns.
                    gx += if on_edge_row || ring == 0 { 1 } else { 2 * ring };
                }
            }
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }
}

/// Per-policy context shared by all drops.
#[derive(Debug, Clone)]
pub struct PolicyContext<'a> {
    pub layout: PlacementLayout,
    pub popularity: &'a PopularityModel,
}

impl<'a> PolicyContext<'a> {
    pub fn new(policy: &CachingPolicy, n_cache: usize, popularity: &'a PopularityModel) -> Result<Self> {
        if policy.len() != popularity.n_files() {
            return Err(Error::Domain(format!(
                "policy has {} entries but the catalog has {} files",
                policy.len(),
                popularity.n_files()
            )));
        }
        Ok(PolicyContext { layout: PlacementLayout::new(policy, n_cache)?, popularity })
    }
}

/// One realisation of the three point processes plus helper caches.
#[derive(Debug, Clone)]
pub struct NetworkRealization<'a> {
    pub macros: Vec<Point>,
    pub helpers: Vec<Point>,
    /// Placement offset of each helper; see [`PlacementLayout`].
    pub helper_offsets: Vec<f64>,
    pub users: Vec<Point>,
    layout: &'a PlacementLayout,
    macro_grid: Grid,
    helper_grid: Grid,
    /// Helper wins iff its distance is below this factor times the macro distance.
    helper_reach: f64,
}

impl NetworkRealization<'_> {
    pub fn helper_cache(&self, helper: usize) -> CacheRealization {
        self.layout.files_at(self.helper_offsets[helper])
    }

    pub fn helper_caches(&self, helper: usize, rank: usize) -> bool {
        self.layout.contains(self.helper_offsets[helper], rank)
    }

    /// Association of a user at `at` requesting `rank`.
    pub fn associate_at(&self, at: &Point, rank: usize) -> Association {
        let (m, r1) = self
            .macro_grid
            .nearest(&self.macros, at, f64::INFINITY, |_| true)
            .expect("realisation holds at least one macro BS");
        let reach = r1 * self.helper_reach;
        match self.helper_grid.nearest(&self.helpers, at, reach, |h| self.helper_caches(h, rank)) {
            Some((h, r2)) => Association { tier: Tier::Helper, index: h, distance: r2 },
            None => Association { tier: Tier::Macro, index: m, distance: r1 },
        }
    }

    /// Association of the typical user at the origin.
    pub fn associate(&self, rank: usize) -> Association {
        self.associate_at(&[0.0, 0.0], rank)
    }
}

fn uniform_disc<R: Rng + ?Sized>(rng: &mut R, lambda: f64, radius: f64) -> Vec<Point> {
    let mean = lambda * PI * radius * radius;
    let n = Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0);
    (0..n)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let theta = 2.0 * PI * rng.random::<f64>();
            [r * theta.cos(), r * theta.sin()]
        })
        .collect()
}

/// Draws one network. Windows without any macro BS are redrawn.
pub fn drop_network<'a, R: Rng + ?Sized>(
    cfg: &SimConfig,
    layout: &'a PlacementLayout,
    rng: &mut R,
) -> Result<NetworkRealization<'a>> {
    let net = &cfg.network;
    let radius = cfg.window_radius;
    for _ in 0..MAX_EMPTY_REDRAWS {
        let macros = uniform_disc(rng, net.lambda1, radius);
        let helpers = uniform_disc(rng, net.lambda2, radius);
        let users = uniform_disc(rng, net.lambda_u, radius);
        let helper_offsets = helpers.iter().map(|_| layout.draw_offset(rng)).collect();
        if macros.is_empty() {
            continue;
        }
        let macro_grid = Grid::build(&macros, radius, 1.0 / net.lambda1.sqrt());
        let helper_grid = Grid::build(&helpers, radius, 1.0 / net.lambda2.sqrt());
        let helper_reach = ((net.p2 * net.b2) / (net.p1 * net.b1)).powf(1.0 / net.alpha);
        return Ok(NetworkRealization {
            macros,
            helpers,
            helper_offsets,
            users,
            layout,
            macro_grid,
            helper_grid,
            helper_reach,
        });
    }
    Err(Error::Numerical(format!("{MAX_EMPTY_REDRAWS} consecutive drops had no macro BS")))
}

/// What happened to the typical user in one drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropOutcome {
    pub request: usize,
    pub association: Association,
    /// SINR at the typical user; only evaluated for helper association.
    pub sinr: Option<f64>,
    /// Helper association with SINR above the threshold.
    pub offloaded: bool,
}

/// Evaluates the typical user's offloading event on a realisation.
pub fn evaluate_drop<R: Rng + ?Sized>(
    cfg: &SimConfig,
    real: &NetworkRealization,
    ctx: &PolicyContext,
    rng: &mut R,
) -> DropOutcome {
    let net = &cfg.network;
    let request = ctx.popularity.sample_request(rng);
    let association = real.associate(request);
    if association.tier == Tier::Macro {
        // The event needs helper association; the rest of the drop cannot change that.
        return DropOutcome { request, association, sinr: None, offloaded: false };
    }
    let serving = association.index;

    let mut load = vec![0u32; real.helpers.len()];
    for u in &real.users {
        let a = real.associate_at(u, ctx.popularity.sample_request(rng));
        if a.tier == Tier::Helper {
            load[a.index] += 1;
        }
    }

    let path_gain = |p: &Point| (p[0] * p[0] + p[1] * p[1]).sqrt().powf(-net.alpha);
    let h0: f64 = Exp1.sample(rng);
    let signal = net.p2 / f64::from(HELPER_ANTENNAS) * h0 * association.distance.powf(-net.alpha);

    let mut interference = 0.0;
    for (h, p) in real.helpers.iter().enumerate() {
        if h != serving && load[h] > 0 {
            let g: f64 = Exp1.sample(rng);
            interference += net.p2 * g * path_gain(p);
        }
    }
    let m1 = f64::from(net.m1);
    let fading = Gamma::new(m1, 1.0 / m1).expect("M1 >= 1");
    for p in &real.macros {
        interference += net.p1 * fading.sample(rng) * path_gain(p);
    }

    let sinr = signal / (interference + cfg.noise_watts());
    let mut offloaded = sinr > net.gamma0;
    if offloaded && cfg.require_selection {
        // Uniform pick among the typical user and the other associated users.
        offloaded = rng.random_range(0..=load[serving]) == 0;
    }
    DropOutcome { request, association, sinr: Some(sinr), offloaded }
}

fn run_drops<T: Send>(
    cfg: &SimConfig,
    each: impl Fn(&mut ChaCha8Rng) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..cfg.n_drops).into_par_iter().map(|d| each(&mut cfg.drop_rng(d))).collect()
}

/// Successful offloading probability estimated over `cfg.n_drops` drops.
pub fn estimate_offloading(
    cfg: &SimConfig,
    policy: &CachingPolicy,
    popularity: &PopularityModel,
) -> Result<SimEstimate> {
    cfg.validate()?;
    let ctx = PolicyContext::new(policy, cfg.network.n_cache, popularity)?;
    let outcomes = run_drops(cfg, |rng| {
        let real = drop_network(cfg, &ctx.layout, rng)?;
        Ok(evaluate_drop(cfg, &real, &ctx, rng).offloaded as u64)
    })?;
    Ok(SimEstimate::from_counts(outcomes.iter().sum(), cfg.n_drops))
}

/// Frequency with which the typical user requesting `rank` associates with a helper.
pub fn estimate_association(
    cfg: &SimConfig,
    policy: &CachingPolicy,
    popularity: &PopularityModel,
    rank: usize,
) -> Result<SimEstimate> {
    cfg.validate()?;
    if rank == 0 || rank > popularity.n_files() {
        return Err(Error::Domain(format!("rank {rank} outside 1..={}", popularity.n_files())));
    }
    let ctx = PolicyContext::new(policy, cfg.network.n_cache, popularity)?;
    let hits = run_drops(cfg, |rng| {
        let real = drop_network(cfg, &ctx.layout, rng)?;
        Ok((real.associate(rank).tier == Tier::Helper) as u64)
    })?;
    Ok(SimEstimate::from_counts(hits.iter().sum(), cfg.n_drops))
}

/// Fraction of helpers with at least one associated user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivityEstimate {
    pub fraction: f64,
    pub active: u64,
    pub helpers: u64,
    pub n_drops: usize,
}

/// Helper active fraction, counted over helpers within half the window
/// radius so that every counted helper sees a full neighbourhood of users.
/// The typical user is left out, so this measures an ordinary helper.
pub fn estimate_active_fraction(
    cfg: &SimConfig,
    policy: &CachingPolicy,
    popularity: &PopularityModel,
) -> Result<ActivityEstimate> {
    cfg.validate()?;
    let ctx = PolicyContext::new(policy, cfg.network.n_cache, popularity)?;
    let inner2 = (0.5 * cfg.window_radius).powi(2);
    let counts = run_drops(cfg, |rng| {
        let real = drop_network(cfg, &ctx.layout, rng)?;
        let mut load = vec![0u32; real.helpers.len()];
        for u in &real.users {
            let a = real.associate_at(u, ctx.popularity.sample_request(rng));
            if a.tier == Tier::Helper {
                load[a.index] += 1;
            }
        }
        let (mut active, mut total) = (0u64, 0u64);
        for (p, &l) in real.helpers.iter().zip(&load) {
            if p[0] * p[0] + p[1] * p[1] <= inner2 {
                total += 1;
                active += (l > 0) as u64;
            }
        }
        Ok((active, total))
    })?;
    let (active, helpers) = counts.iter().fold((0, 0), |(a, t), &(x, y)| (a + x, t + y));
    let fraction = if helpers == 0 { 0.0 } else { active as f64 / helpers as f64 };
    Ok(ActivityEstimate { fraction, active, helpers, n_drops: cfg.n_drops })
}
