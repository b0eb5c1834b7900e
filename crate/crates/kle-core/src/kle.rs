//! Karhunen-Loeve decomposition via whitened SVD.
//!
//! The weighted, Gram-structured eigenproblem is reduced to a plain SVD:
//! with centered samples `D0` (N x d), weight matrix `W = diag(w)`, and
//! Gram factor `G = L L'`, the matrix `M = W^(1/2) D0 L` has SVD
//! `U S V'`; then `lambda_r = s_r^2`, the modes are `phi_r = L^(-T) v_r`
//! (G-orthonormal), and the scores are `Y_r = W^(-1/2) u_r`
//! (w-orthonormal with zero w-mean).  Every sample reconstructs as
//! `mean + sum_r sqrt(lambda_r) Y_r(i) phi_r`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::space::{HPoint, SpaceSpec};

/// Default relative cutoff below which singular values are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// The decomposition of an ensemble: mean, descending eigenvalues, modes,
/// and per-sample scores.
#[derive(Debug, Clone, PartialEq)]
pub struct KleDecomposition {
    space: SpaceSpec,
    weights: Vec<f64>,
    mean: HPoint,
    lambdas: Vec<f64>,
    /// `R x d`; row `r` is the mode `phi_r`.
    phis: DMatrix<f64>,
    /// `N x R`; column `r` holds the score samples `Y_r(omega_i)`.
    scores: DMatrix<f64>,
    rank_tol: f64,
}

impl KleDecomposition {
    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn mean(&self) -> &HPoint {
        &self.mean
    }

    /// Number of retained terms `R`.
    pub fn rank(&self) -> usize {
        self.lambdas.len()
    }

    /// Eigenvalues in nonincreasing order, all strictly positive.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn phis(&self) -> &DMatrix<f64> {
        &self.phis
    }

    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Mode `r` as a point of the space.
    pub fn phi(&self, r: usize) -> HPoint {
        self.phis.row(r).transpose()
    }

    /// Sum of all eigenvalues — the squared Bochner norm of the centered
    /// ensemble, up to the rank cutoff.
    pub fn total_variance(&self) -> f64 {
        self.lambdas.iter().sum()
    }

    /// The first `m` modes together with the exact tail error
    /// `sum_(r>m) lambda_r` committed by truncating there.
    pub fn truncate(&self, m: usize) -> Result<(Vec<HPoint>, f64)> {
        if m > self.rank() {
            return Err(Error::MOutOfRange { m, rank: self.rank() });
        }
        let basis = (0..m).map(|r| self.phi(r)).collect();
        let tail = self.lambdas[m..].iter().sum();
        Ok((basis, tail))
    }

    /// Rebuilds the ensemble from the first `m` terms:
    /// `mean + sum_(r<=m) sqrt(lambda_r) Y_r(i) phi_r` per sample.
    pub fn reconstruct(&self, m: usize) -> Result<Ensemble> {
        if m > self.rank() {
            return Err(Error::MOutOfRange { m, rank: self.rank() });
        }
        let n = self.scores.nrows();
        let d = self.space.dim();
        let mut rows = DMatrix::zeros(n, d);
        for mut row in rows.row_iter_mut() {
            row += self.mean.transpose();
        }
        if m > 0 {
            let mut scaled = self.scores.columns(0, m).into_owned();
            for (r, mut col) in scaled.column_iter_mut().enumerate() {
                col.scale_mut(self.lambdas[r].sqrt());
            }
            rows += scaled * self.phis.rows(0, m);
        }
        Ensemble::new(self.space.clone(), rows, self.weights.clone())
    }

    /// Serializes mean, eigenvalues, modes (row-major), scores (row-major),
    /// and the rank tolerance used.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.wire()).expect("decomposition wire form serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.wire()).expect("decomposition wire form serializes")
    }

    fn wire(&self) -> KleWire {
        KleWire {
            mean: self.mean.iter().copied().collect(),
            lambdas: self.lambdas.clone(),
            phis: matrix_rows(&self.phis),
            scores: matrix_rows(&self.scores),
            rank_tol: self.rank_tol,
        }
    }
}

#[derive(Serialize)]
struct KleWire {
    mean: Vec<f64>,
    lambdas: Vec<f64>,
    phis: Vec<Vec<f64>>,
    scores: Vec<Vec<f64>>,
    rank_tol: f64,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Decomposes an ensemble with the default rank tolerance.
pub fn decompose(ens: &Ensemble) -> Result<KleDecomposition> {
    decompose_with_tol(ens, DEFAULT_RANK_TOL)
}

/// Decomposes an ensemble, keeping singular values
/// `s_r > rank_tol * max(s_1, ||v||)`.  Comparing against the overall data
/// scale as well as `s_1` makes a constant ensemble come out as rank 0
/// instead of surfacing centering roundoff as spurious modes.
pub fn decompose_with_tol(ens: &Ensemble, rank_tol: f64) -> Result<KleDecomposition> {
    if ens.samples().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let space = ens.space().clone();
    let weights = ens.weights().to_vec();
    let mean = ens.expectation();
    let centered = ens.center();

    // Whiten: scale row i by sqrt(w_i), then right-multiply by L.
    let mut m = centered.samples().clone();
    for (i, w) in weights.iter().enumerate() {
        m.row_mut(i).scale_mut(w.sqrt());
    }
    let m = space.factor().right_mul_l(&m);

    let svd = crate::svd::thin_svd(&m);
    let u = svd.u;
    let v_t = svd.v_t;
    let sigma = svd.singular_values;

    // Order singular triples by descending singular value regardless of
    // what the backend returns, for a deterministic layout.
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).expect("finite singular values"));

    let scale = sigma
        .iter()
        .fold(ens.bochner_norm_sq().sqrt(), |acc, s| acc.max(*s));
    let rank = order
        .iter()
        .take_while(|&&k| sigma[k] > rank_tol * scale)
        .count();

    let n = ens.len();
    let d = space.dim();
    let mut lambdas = Vec::with_capacity(rank);
    let mut phis = DMatrix::zeros(rank, d);
    let mut scores = DMatrix::zeros(n, rank);
    for (r, &k) in order.iter().take(rank).enumerate() {
        lambdas.push(sigma[k] * sigma[k]);
        let mut phi = space.factor().solve_lt(&v_t.row(k).transpose());
        let mut y = DVector::from_iterator(
            n,
            u.column(k).iter().zip(&weights).map(|(ui, wi)| ui / wi.sqrt()),
        );
        if needs_sign_flip(&phi) {
            phi.neg_mut();
            y.neg_mut();
        }
        phis.row_mut(r).copy_from(&phi.transpose());
        scores.column_mut(r).copy_from(&y);
    }

    Ok(KleDecomposition { space, weights, mean, lambdas, phis, scores, rank_tol })
}

/// The sign convention: the largest-magnitude coefficient of each mode is
/// positive, ties broken by the lowest index.  Scores flip together with
/// their mode, so reconstruction is unaffected.
fn needs_sign_flip(phi: &HPoint) -> bool {
    let mut best = 0;
    for (j, x) in phi.iter().enumerate() {
        if x.abs() > phi[best].abs() {
            best = j;
        }
    }
    phi[best] < 0.0
}

/// The mean-squared residual of projecting the centered ensemble onto the
/// span of `basis`: `sum_i w_i <r_i, r_i>` with
/// `r_i = v0_i - P(v0_i)`.  With the first `M` modes as basis this equals
/// the spectrum tail; any other `M`-dimensional subspace does no better.
pub fn truncation_error(ens: &Ensemble, basis: &[HPoint]) -> Result<f64> {
    let space = ens.space();
    let ortho = space.g_orthonormalize(basis)?;
    let centered = ens.center();
    let mut total = 0.0;
    for (i, w) in ens.weights().iter().enumerate() {
        let mut r = centered.sample(i);
        for q in &ortho {
            let c = space.inner_unchecked(&r, q);
            r.axpy(-c, q, 1.0);
        }
        total += w * space.inner_unchecked(&r, &r);
    }
    Ok(total)
}

/// Measures how far the identification of samples with their induced maps
/// is from commuting with a linear operator `T` into `target`: the maximum
/// over canonical target directions `k` of the w-norm of
/// `(<T v_i, k>_target)_i - (<v_i, T* k>_source)_i`, where
/// `T* = G_src^(-1) T' G_tgt` is the adjoint with respect to both Gram
/// structures.  Exact commutation means zero up to roundoff; the two sides
/// are computed by independent numeric routes.
pub fn naturality_gap(ens: &Ensemble, t: &DMatrix<f64>, target: &SpaceSpec) -> Result<f64> {
    let src = ens.space();
    if t.ncols() != src.dim() {
        return Err(Error::DimMismatch { expected: src.dim(), got: t.ncols() });
    }
    if t.nrows() != target.dim() {
        return Err(Error::DimMismatch { expected: target.dim(), got: t.nrows() });
    }
    let mapped = Ensemble::new(
        target.clone(),
        ens.samples() * t.transpose(),
        ens.weights().to_vec(),
    )?;
    // T* = G_src^(-1) T' G_tgt, assembled column by column through the
    // Cholesky factor rather than by matrix inversion.
    let t_star = src.factor().solve_g_mat(&(t.transpose() * target.gram_matrix()));

    let mut gap = 0.0_f64;
    for j in 0..target.dim() {
        let mut k = DVector::zeros(target.dim());
        k[j] = 1.0;
        let lhs = mapped.h_apply(&k)?;
        let rhs = ens.h_apply(&t_star.column(j).into_owned())?;
        let w_norm_sq: f64 = lhs
            .iter()
            .zip(rhs.iter())
            .zip(ens.weights())
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum();
        gap = gap.max(w_norm_sq.sqrt());
    }
    Ok(gap)
}
