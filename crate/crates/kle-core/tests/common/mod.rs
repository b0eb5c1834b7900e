//! Shared helpers for the integration tests: an independent symmetric
//! eigensolver used as an oracle, naive inner-product arithmetic that
//! bypasses the library's factorizations, and seeded random instance
//! generators.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use kle_core::{Ensemble, SpaceSpec};

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method, sorted
/// descending.  Deliberately shares no code with the library's
/// decomposition path: plain two-sided rotations, no SVD, no Cholesky.
pub fn jacobi_eigenvalues(sym: &DMatrix<f64>) -> Vec<f64> {
    let n = sym.nrows();
    assert_eq!(n, sym.ncols(), "oracle needs a square matrix");
    let mut a = sym.clone();
    let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).expect("oracle eigenvalues are finite"));
    ev
}

/// `<x, y>` under an explicit Gram matrix, by direct double summation.
pub fn naive_inner(g: &DMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        for j in 0..y.len() {
            acc += x[i] * g[(i, j)] * y[j];
        }
    }
    acc
}

/// The weighted score kernel `K_ij = sqrt(w_i w_j) <v0_i, v0_j>` of the
/// centered ensemble, assembled entrywise.  Its nonzero eigenvalues are
/// exactly the variances the decomposition must report, which makes
/// `jacobi_eigenvalues(&score_kernel(..))` a full independent oracle for
/// the spectrum.
pub fn score_kernel(ens: &Ensemble) -> DMatrix<f64> {
    let g = ens.space().gram_matrix();
    let n = ens.len();
    let w = ens.weights();
    let mut mean = DVector::zeros(ens.dim());
    for i in 0..n {
        mean += ens.sample(i) * w[i];
    }
    let centered: Vec<DVector<f64>> = (0..n).map(|i| ens.sample(i) - &mean).collect();
    DMatrix::from_fn(n, n, |i, j| {
        (w[i] * w[j]).sqrt() * naive_inner(&g, &centered[i], &centered[j])
    })
}

/// A deterministic RNG for a named test case.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One of the three Gram kinds, selected by `kind % 3`: Euclidean,
/// log-uniform diagonal weights, or a shifted random dense SPD matrix.
pub fn random_space(rng: &mut ChaCha8Rng, d: usize, kind: usize) -> SpaceSpec {
    match kind % 3 {
        0 => SpaceSpec::identity(d).expect("d >= 1"),
        1 => {
            let w: Vec<f64> = (0..d).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
            SpaceSpec::diagonal(w).expect("positive weights")
        }
        _ => {
            let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            let g = &a * a.transpose() + DMatrix::identity(d, d) * (0.5 * d as f64);
            SpaceSpec::dense(g).expect("shifted square is SPD")
        }
    }
}

/// Strictly positive weights summing to one.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|u| u / total).collect()
}

/// A random ensemble with entries of order one and non-uniform weights.
pub fn random_ensemble(rng: &mut ChaCha8Rng, space: SpaceSpec, n: usize) -> Ensemble {
    let d = space.dim();
    let samples = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-2.0..2.0));
    let weights = random_weights(rng, n);
    Ensemble::new(space, samples, weights).expect("generator produces valid ensembles")
}

/// Largest entry magnitude of a vector.
pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
