//! Batch decomposition drivers.
//!
//! Decomposing many ensembles is embarrassingly parallel: each
//! decomposition is a pure function of its input.  `decompose_all` fans
//! the work out across threads when the `parallel` feature is enabled and
//! otherwise defers to the sequential driver; because every item is
//! computed by identical code, the two produce bit-identical results in
//! input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::ensemble::Ensemble;
use crate::error::Result;
use crate::kle::{decompose_with_tol, KleDecomposition};

/// Decomposes every ensemble, concurrently when built with the `parallel`
/// feature.  Fails on the first error, in input order.
pub fn decompose_all(ensembles: &[Ensemble], rank_tol: f64) -> Result<Vec<KleDecomposition>> {
    #[cfg(feature = "parallel")]
    {
        ensembles
            .par_iter()
            .map(|e| decompose_with_tol(e, rank_tol))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        decompose_all_seq(ensembles, rank_tol)
    }
}

/// The always-sequential reference driver.
pub fn decompose_all_seq(ensembles: &[Ensemble], rank_tol: f64) -> Result<Vec<KleDecomposition>> {
    ensembles
        .iter()
        .map(|e| decompose_with_tol(e, rank_tol))
        .collect()
}
