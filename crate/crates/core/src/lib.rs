//! Sampling from discrete distributions over size-`k` subsets of `[n]` via
//! domain sparsification: estimate marginals once, move the distribution to
//! near-isotropic position, then draw each sample by restricting the target
//! to a random domain of `t ~ n^{1-alpha} * poly(k)` elements reweighted by a
//! sparse external field.
//!
//! The crate is organized as:
//!
//! - [`dist`]: domain types (subsets, weight oracles, external fields,
//!   subdivision maps, explicit tables) and structure-preserving transforms.
//! - [`families`]: concrete weight oracles (DPPs, matroid bases, matchings,
//!   blow-ups, the paired hard instance, Reed-Solomon lower-bound instances).
//! - [`analysis`]: exact desk-scale oracles and certificates (enumeration,
//!   marginals, TV/KL, entropic-independence tangent check, correlation
//!   matrices, exact transition kernels).
//! - [`samplers`]: the sampling engines (exact inverse-CDF, down-up walk,
//!   intermediate-sampling chain, rejection-based intermediate sampling) and
//!   combinatorial helpers.
//! - [`pipeline`]: the end-to-end flow: marginal estimation, isotropic
//!   transformation, sparse-domain draws, and sampling-to-counting.
//! - [`rng`]: a counter-based splittable generator so sample streams are
//!   reproducible across thread counts.

pub mod analysis;
pub mod dist;
pub mod families;
pub mod pipeline;
pub mod rng;
pub mod samplers;

mod error;

pub use dist::{
    apply_external_field, complement, down_operator, restrict, subdivide, ExplicitDistribution,
    ExternalField, Family, KSubset, SubdivisionMap, WeightedFamily,
};
pub use error::{Error, Result};
pub use rng::RngStream;

/// Caps the global worker pool at `threads`; fails if a pool already exists.
pub fn rayon_thread_pool(threads: usize) -> std::result::Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
}
