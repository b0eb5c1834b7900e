//! File formats: ensemble CSV, mortality tables, grid images, synthetic
//! generators, and the spectrum report.
//!
//! All parsers work on in-memory text and ignore `#` comment lines, so
//! outputs that carry comment metadata round-trip through the readers.
//! Floating-point values are written with 17 significant digits, which
//! reproduces every `f64` exactly.

pub mod image;
pub mod mortality;
pub mod synth;

use nalgebra::DMatrix;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::kle::KleDecomposition;
use crate::space::SpaceSpec;

/// Serializes an ensemble as CSV with header `sample_id,w,c0,...,c{d-1}`.
/// The space itself travels separately (sidecar JSON).
pub fn write_ensemble_csv(ens: &Ensemble) -> String {
    let d = ens.dim();
    let mut out = String::from("sample_id,w");
    for j in 0..d {
        out.push_str(&format!(",c{j}"));
    }
    out.push('\n');
    for i in 0..ens.len() {
        out.push_str(&format!("{i},{:.16e}", ens.weights()[i]));
        for j in 0..d {
            out.push_str(&format!(",{:.16e}", ens.samples()[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Parses an ensemble CSV against a known space.  The `sample_id` column
/// is informational; rows are taken in file order.
pub fn read_ensemble_csv(text: &str, space: SpaceSpec) -> Result<Ensemble> {
    let d = space.dim();
    let mut weights = Vec::new();
    let mut rows = Vec::new();
    let mut n = 0usize;
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 2 || fields[0] != "sample_id" || fields[1] != "w" {
                return Err(Error::MalformedRow {
                    line: line_no,
                    message: "expected header sample_id,w,c0,...".into(),
                });
            }
            let ncoef = fields.len() - 2;
            if ncoef != d {
                return Err(Error::DimMismatch { expected: d, got: ncoef });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(Error::MalformedRow {
                line: line_no,
                message: format!("expected {} fields, found {}", d + 2, fields.len()),
            });
        }
        fields[0].parse::<u64>().map_err(|_| Error::MalformedRow {
            line: line_no,
            message: format!("sample_id {:?} is not an integer", fields[0]),
        })?;
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::MalformedRow {
                line: line_no,
                message: format!("{s:?} is not a number"),
            })
        };
        weights.push(parse(fields[1])?);
        for f in &fields[2..] {
            rows.push(parse(f)?);
        }
        n += 1;
    }
    if !saw_header {
        return Err(Error::MalformedRow { line: 0, message: "missing header line".into() });
    }
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    Ensemble::new(space, DMatrix::from_row_slice(n, d, &rows), weights)
}

/// The spectrum report `r,lambda,cumulative_fraction`, one row per
/// retained eigenvalue (`r` is 1-based).
pub fn spectrum_csv(kle: &KleDecomposition) -> String {
    let mut out = String::from("r,lambda,cumulative_fraction\n");
    let total = kle.total_variance();
    let mut acc = 0.0;
    for (r, lambda) in kle.lambdas().iter().enumerate() {
        acc += lambda;
        out.push_str(&format!("{},{},{}\n", r + 1, lambda, acc / total));
    }
    out
}
