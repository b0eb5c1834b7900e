//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! The general-purpose SVD in our linear-algebra dependency returns
//! incorrect singular values for some rank-deficient inputs (easily caught
//! against the Frobenius identity `sum sigma_r^2 = ||A||_F^2`), which is
//! fatal for a decomposition whose whitened matrices are rank-deficient by
//! construction whenever `N - 1 < d`.  One-sided Jacobi is short enough to
//! own, converges unconditionally, and delivers high relative accuracy:
//! right vectors are products of exact plane rotations, left vectors are
//! the mutually orthogonal worked columns themselves, so orthogonality
//! does not degrade for small singular values.  The rotation order is
//! fixed, making results bit-reproducible run to run.

use nalgebra::{DMatrix, DVector};

/// A thin singular value decomposition `A = U S V^T` with
/// `k = min(nrows, ncols)` columns in `U`, rows in `V^T`, and entries in
/// `S`, ordered by nonincreasing singular value.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

/// Cyclic sweeps cap; convergence is usually reached in well under 20.
const MAX_SWEEPS: usize = 64;

pub(crate) fn thin_svd(a: &DMatrix<f64>) -> ThinSvd {
    let transposed = a.nrows() < a.ncols();
    let mut work = if transposed { a.transpose() } else { a.clone() };
    let nrows = work.nrows();
    let k = work.ncols();
    let mut v = DMatrix::<f64>::identity(k, k);

    // Two columns count as orthogonal when their inner product is at
    // rounding level for dot products of this length.
    let tol = (nrows as f64).sqrt() * f64::EPSILON;

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..nrows {
                    let x = work[(i, p)];
                    let y = work[(i, q)];
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..nrows {
                    let x = work[(i, p)];
                    let y = work[(i, q)];
                    work[(i, p)] = c * x - s * y;
                    work[(i, q)] = s * x + c * y;
                }
                for i in 0..k {
                    let x = v[(i, p)];
                    let y = v[(i, q)];
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut norms = vec![0.0f64; k];
    for r in 0..k {
        norms[r] = work.column(r).norm();
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite singular values"));

    let mut sigma = DVector::zeros(k);
    let mut u = DMatrix::zeros(nrows, k);
    let mut v_sorted = DMatrix::zeros(k, k);
    for (r, &j) in order.iter().enumerate() {
        sigma[r] = norms[j];
        if norms[j] > 0.0 {
            u.column_mut(r).copy_from(&(work.column(j) / norms[j]));
        }
        v_sorted.column_mut(r).copy_from(&v.column(j));
    }

    if transposed {
        // A^T = U S V^T means A = V S U^T: swap the roles back.
        ThinSvd { u: v_sorted, singular_values: sigma, v_t: u.transpose() }
    } else {
        ThinSvd { u, singular_values: sigma, v_t: v_sorted.transpose() }
    }
}
