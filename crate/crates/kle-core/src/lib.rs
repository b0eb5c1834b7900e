//! Karhunen-Loeve expansions of empirical random elements in finite-dimensional
//! Hilbert-space realizations.
//!
//! The crate represents an `H`-valued random element as a weighted sample
//! ensemble, computes its KL decomposition through a whitened singular value
//! decomposition of the induced Hilbert-Schmidt operator, and accounts exactly
//! for the error of every `M`-term truncation. Spaces carry an explicit Gram
//! matrix, so weighted, grid-`L2`, and `Q`-component vector-field inner
//! products are all handled by the same machinery.
//!
//! The main entry points:
//!
//! * [`SpaceSpec`] — a finite-dimensional Hilbert-space realization with an
//!   `Identity`, `Diagonal`, or dense SPD Gram matrix, optionally carrying a
//!   block layout for vector-field data.
//! * [`Ensemble`] — `N` weighted samples of the random element.
//! * [`decompose`] — the KL decomposition (mean, eigenvalues, modes, scores).
//! * [`compare`] — component-wise versus vector-field truncation errors at
//!   equal total dimension.
//!
//! Data-parallel paths (per-component decompositions, batch drivers) use
//! rayon when the default `parallel` feature is enabled and fall back to
//! sequential execution when it is not; results are identical either way.

pub mod batch;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod kle;
pub mod space;
mod svd;
pub mod vector_field;

pub use ensemble::Ensemble;
pub use error::{Error, Result};
pub use kle::{decompose, decompose_with_tol, naturality_gap, truncation_error, KleDecomposition, DEFAULT_RANK_TOL};
pub use space::{Blocks, Gram, GramFactor, HPoint, SpaceSpec};
pub use batch::{decompose_all, decompose_all_seq};
pub use vector_field::{
    compare, compare_with_tol, componentwise_truncate, componentwise_truncate_with_tol,
    vectorfield_truncate, vectorfield_truncate_with_tol, TruncationReport,
};
