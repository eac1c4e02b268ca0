//! Optimal probabilistic cache placement for a two-tier heterogeneous
//! network: multi-antenna macro base stations overlaid with single-antenna,
//! cache-equipped helpers that go idle when no user associates with them.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: Gamma and the `2F1` family used by PPP interference terms.
//! * [`popularity`]: Zipf request distribution.
//! * [`model`]: network parameters and caching-policy vectors.
//! * [`analysis`]: closed-form successful offloading probability and the
//!   per-file association / conditional-success decomposition.
//! * [`optimizer`]: water-filling solvers, the local ascent solver and baselines.
//! * [`placement`]: turns a probability vector into concrete per-helper caches.
//! * [`sim`]: Monte Carlo PPP simulator used as ground truth.
//! * [`experiments`]: sweeps and policy dumps behind the `hetcache` CLI.

pub mod analysis;
pub mod error;
pub mod experiments;
pub mod model;
pub mod optimizer;
pub mod placement;
pub mod popularity;
pub mod sim;
pub mod specfun;

pub use error::{Error, Result};
pub use model::{CachingPolicy, NetworkConfig};
pub use popularity::PopularityModel;
