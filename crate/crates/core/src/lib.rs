// `!(x <= y)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod coupling;
pub mod error;
pub mod mixing;
pub mod noise;
pub mod rds;
pub mod rng;
pub mod runner;
pub mod spectral;
pub mod stats;
pub mod wave;

pub use error::{Error, Result};

/// Ordered parallel map over `0..n`.
pub(crate) fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}
