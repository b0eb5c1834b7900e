//! Weighted sample ensembles.
//!
//! An ensemble is `N` samples in a common space together with strictly
//! positive probability weights summing to one — an empirical random
//! element.  It supports the weighted mean, centering, and the two linear
//! maps every decomposition is built from: the sample-wise inner product
//! `x -> (<v_i, x>)_i` and the covariance application
//! `x -> sum_i w_i <v0_i, x> v0_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::space::{HPoint, SpaceSpec};

/// Tolerance on `|sum of weights - 1|`.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// `N` weighted samples of a random element with values in `space`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    space: SpaceSpec,
    samples: DMatrix<f64>,
    weights: Vec<f64>,
}

impl Ensemble {
    /// Builds an ensemble from an `N x d` sample matrix (row `i` is sample
    /// `i`) and `N` weights.  Weights must be strictly positive and sum to
    /// one within `WEIGHT_SUM_TOL`; sample values themselves are not
    /// inspected here (decomposition rejects non-finite entries).
    pub fn new(space: SpaceSpec, samples: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = samples.nrows();
        if n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        if samples.ncols() != space.dim() {
            return Err(Error::DimMismatch { expected: space.dim(), got: samples.ncols() });
        }
        if weights.len() != n {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} samples",
                weights.len(),
                n
            )));
        }
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidWeights(format!("weight {bad} is not strictly positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(Ensemble { space, samples, weights })
    }

    /// Builds an ensemble from explicit points, one row per sample.
    pub fn from_points(space: SpaceSpec, points: &[HPoint], weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let d = space.dim();
        for p in points {
            if p.len() != d {
                return Err(Error::DimMismatch { expected: d, got: p.len() });
            }
        }
        let samples = DMatrix::from_fn(points.len(), d, |i, j| points[i][j]);
        Self::new(space, samples, weights)
    }

    /// Builds an ensemble with uniform weights `1/N`.
    pub fn uniform(space: SpaceSpec, samples: DMatrix<f64>) -> Result<Self> {
        let n = samples.nrows();
        if n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        Self::new(space, samples, vec![1.0 / n as f64; n])
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // N >= 1 by construction
    }

    /// Coefficient dimension `d`.
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Sample `i` as a point of the space.
    pub fn sample(&self, i: usize) -> HPoint {
        self.samples.row(i).transpose()
    }

    /// The weighted mean `sum_i w_i v_i` — the expectation under the
    /// empirical measure.
    pub fn expectation(&self) -> HPoint {
        let w = DVector::from_column_slice(&self.weights);
        self.samples.tr_mul(&w)
    }

    /// Subtracts the expectation from every sample.
    pub fn center(&self) -> Ensemble {
        let mean = self.expectation();
        let mut centered = self.samples.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        Ensemble {
            space: self.space.clone(),
            samples: centered,
            weights: self.weights.clone(),
        }
    }

    /// The induced linear map applied to `x`: the sample-indexed sequence
    /// `(<v_i, x>)_i`.  The ensemble is used as given — center first to get
    /// the map induced by the fluctuation.
    pub fn h_apply(&self, x: &HPoint) -> Result<DVector<f64>> {
        let gx = self.space.gram_mul(x)?;
        Ok(&self.samples * gx)
    }

    /// Applies the covariance operator: `sum_i w_i <v0_i, x> v0_i`,
    /// where `v0` is the centered ensemble.
    pub fn cov_apply(&self, x: &HPoint) -> Result<HPoint> {
        let centered = self.center();
        let h = centered.h_apply(x)?;
        let wh = DVector::from_iterator(
            self.len(),
            h.iter().zip(&self.weights).map(|(hi, wi)| hi * wi),
        );
        Ok(centered.samples.tr_mul(&wh))
    }

    /// The squared Bochner norm `sum_i w_i <v_i, v_i>`.
    pub fn bochner_norm_sq(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                let row = self.samples.row(i).transpose();
                w * self.space.inner_unchecked(&row, &row)
            })
            .sum()
    }
}
