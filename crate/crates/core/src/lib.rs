//! Ewens–Pitman `PD(α, θ)` random partitions: samplers, exact laws,
//! posterior counts for unseen samples, and moderate-deviation quantities
//! for the number of blocks `K_n` and the multiplicities `M_{l,n}`.

use std::fmt;

pub mod combinatorics;
mod error;
pub mod exact;
pub mod mdp;
pub mod numeric;
pub mod posterior;
pub mod sampler;

pub use error::{Error, Result};
pub use sampler::ModelParams;

/// Which partition statistic a computation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    /// Number of blocks.
    K,
    /// Number of blocks of the given size.
    M(u64),
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::K => write!(f, "K"),
            Statistic::M(l) => write!(f, "M{l}"),
        }
    }
}
