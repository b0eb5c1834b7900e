//! Finite-dimensional Hilbert-space realizations.
//!
//! A space is a coefficient dimension `d` together with an SPD Gram matrix
//! `G` defining `<x, y> = x' G y`, and an optional block layout that splits
//! the coordinates into `Q` components of equal size.  The Gram matrix is
//! factored once at construction (`G = L L'`) so that weighted problems can
//! be whitened into plain Euclidean ones.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for accepting a dense Gram matrix as symmetric.
pub const GRAM_SYMMETRY_TOL: f64 = 1e-12;

/// Orthogonalization pivot threshold, relative to the largest basis-vector
/// G-norm squared; below it a basis is declared numerically dependent.
pub const PROJECTION_PIVOT_TOL: f64 = 1e-10;

/// An element of a space: coefficients in the canonical basis.
pub type HPoint = DVector<f64>;

/// The inner-product structure of a space.
#[derive(Debug, Clone, PartialEq)]
pub enum Gram {
    /// Euclidean inner product.
    Identity,
    /// Weighted inner product `<x, y> = sum_i w_i x_i y_i`, all `w_i > 0`.
    Diagonal(Vec<f64>),
    /// General SPD inner product `<x, y> = x' G y`.
    Dense(DMatrix<f64>),
}

/// Block layout for vector-field spaces: component `q` occupies the
/// coefficient slice `[q * base_dim, (q + 1) * base_dim)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocks {
    pub q: usize,
    pub base_dim: usize,
}

/// Cached lower-triangular factor `L` with `G = L L'`.  Identity and
/// diagonal Grams store the factor in compressed diagonal form.
#[derive(Debug, Clone)]
pub enum GramFactor {
    Identity { dim: usize },
    Diagonal { sqrt: Vec<f64> },
    Dense { l: DMatrix<f64> },
}

impl GramFactor {
    pub fn dim(&self) -> usize {
        match self {
            GramFactor::Identity { dim } => *dim,
            GramFactor::Diagonal { sqrt } => sqrt.len(),
            GramFactor::Dense { l } => l.nrows(),
        }
    }

    /// Materializes `L` as a dense matrix.
    pub fn lower(&self) -> DMatrix<f64> {
        match self {
            GramFactor::Identity { dim } => DMatrix::identity(*dim, *dim),
            GramFactor::Diagonal { sqrt } => {
                DMatrix::from_diagonal(&DVector::from_vec(sqrt.clone()))
            }
            GramFactor::Dense { l } => l.clone(),
        }
    }

    /// Returns `M L` for an arbitrary matrix with `dim` columns.
    pub fn right_mul_l(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            GramFactor::Identity { .. } => m.clone(),
            GramFactor::Diagonal { sqrt } => {
                let mut out = m.clone();
                for (j, s) in sqrt.iter().enumerate() {
                    out.column_mut(j).scale_mut(*s);
                }
                out
            }
            GramFactor::Dense { l } => m * l,
        }
    }

    /// Solves `L' x = v`.
    pub fn solve_lt(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            GramFactor::Identity { .. } => v.clone(),
            GramFactor::Diagonal { sqrt } => {
                DVector::from_iterator(sqrt.len(), v.iter().zip(sqrt).map(|(x, s)| x / s))
            }
            GramFactor::Dense { l } => l
                .tr_solve_lower_triangular(v)
                .expect("Cholesky factor has a positive diagonal"),
        }
    }

    /// Solves `G x = v` via the two triangular factors.
    pub fn solve_g(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            GramFactor::Identity { .. } => v.clone(),
            GramFactor::Diagonal { sqrt } => {
                DVector::from_iterator(sqrt.len(), v.iter().zip(sqrt).map(|(x, s)| x / (s * s)))
            }
            GramFactor::Dense { l } => {
                let y = l
                    .solve_lower_triangular(v)
                    .expect("Cholesky factor has a positive diagonal");
                l.tr_solve_lower_triangular(&y)
                    .expect("Cholesky factor has a positive diagonal")
            }
        }
    }

    /// Solves `G X = M` column by column.
    pub fn solve_g_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            GramFactor::Identity { .. } => m.clone(),
            GramFactor::Diagonal { sqrt } => {
                let mut out = m.clone();
                for (i, s) in sqrt.iter().enumerate() {
                    out.row_mut(i).scale_mut(1.0 / (s * s));
                }
                out
            }
            GramFactor::Dense { l } => {
                let y = l
                    .solve_lower_triangular(m)
                    .expect("Cholesky factor has a positive diagonal");
                l.tr_solve_lower_triangular(&y)
                    .expect("Cholesky factor has a positive diagonal")
            }
        }
    }
}

/// A validated space: dimension, Gram structure, optional block layout, and
/// the cached Cholesky factor of the Gram matrix.
#[derive(Debug, Clone)]
pub struct SpaceSpec {
    dim: usize,
    gram: Gram,
    blocks: Option<Blocks>,
    factor: GramFactor,
}

impl PartialEq for SpaceSpec {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.gram == other.gram && self.blocks == other.blocks
    }
}

impl SpaceSpec {
    /// Builds and validates a space.  A dense Gram matrix is checked for
    /// symmetry (to `GRAM_SYMMETRY_TOL` relative), symmetrized as
    /// `(G + G') / 2` to absorb round-trip noise, and factored; Cholesky
    /// failure is reported as `NonSPDGram`.
    pub fn new(dim: usize, gram: Gram, blocks: Option<Blocks>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        if let Some(b) = blocks {
            if b.q == 0 || b.base_dim == 0 || b.q * b.base_dim != dim {
                return Err(Error::BlockMismatch { q: b.q, base_dim: b.base_dim, dim });
            }
        }
        let (gram, factor) = match gram {
            Gram::Identity => (Gram::Identity, GramFactor::Identity { dim }),
            Gram::Diagonal(w) => {
                if w.len() != dim {
                    return Err(Error::DimMismatch { expected: dim, got: w.len() });
                }
                if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                    return Err(Error::NonSPDGram(format!(
                        "diagonal weight {bad} is not strictly positive"
                    )));
                }
                let sqrt = w.iter().map(|x| x.sqrt()).collect();
                (Gram::Diagonal(w), GramFactor::Diagonal { sqrt })
            }
            Gram::Dense(g) => {
                if g.nrows() != dim || g.ncols() != dim {
                    return Err(Error::DimMismatch { expected: dim, got: g.nrows().max(g.ncols()) });
                }
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonSPDGram("matrix has non-finite entries".into()));
                }
                let scale = g.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
                let asym = (&g - g.transpose()).iter().fold(0.0_f64, |a, x| a.max(x.abs()));
                if asym > GRAM_SYMMETRY_TOL * scale {
                    return Err(Error::NonSPDGram(format!(
                        "asymmetry {asym:.3e} exceeds tolerance"
                    )));
                }
                let sym = (&g + g.transpose()) * 0.5;
                let l = Cholesky::new(sym.clone())
                    .ok_or_else(|| Error::NonSPDGram("Cholesky factorization failed".into()))?
                    .unpack();
                (Gram::Dense(sym), GramFactor::Dense { l })
            }
        };
        Ok(SpaceSpec { dim, gram, blocks, factor })
    }

    /// Euclidean space of dimension `dim`.
    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(dim, Gram::Identity, None)
    }

    /// Diagonally weighted space; dimension is the number of weights.
    pub fn diagonal(weights: Vec<f64>) -> Result<Self> {
        let dim = weights.len();
        Self::new(dim, Gram::Diagonal(weights), None)
    }

    /// Space with a dense SPD Gram matrix; dimension is its side length.
    pub fn dense(g: DMatrix<f64>) -> Result<Self> {
        let dim = g.nrows();
        Self::new(dim, Gram::Dense(g), None)
    }

    /// The L2 space of piecewise-constant functions on an `m x n` grid over
    /// the unit square, one block per channel: every cell has area
    /// `1 / (m n)`, so the Gram matrix is diagonal with that weight, and the
    /// blocks are `(channels, m n)`.
    pub fn grid_l2(m: usize, n: usize, channels: usize) -> Result<Self> {
        if m == 0 || n == 0 || channels == 0 {
            return Err(Error::InvalidDimension);
        }
        let cell = 1.0 / (m as f64 * n as f64);
        let dim = m * n * channels;
        Self::new(
            dim,
            Gram::Diagonal(vec![cell; dim]),
            Some(Blocks { q: channels, base_dim: m * n }),
        )
    }

    /// Returns a copy of this space with the given block layout attached.
    pub fn with_blocks(&self, q: usize, base_dim: usize) -> Result<Self> {
        Self::new(self.dim, self.gram.clone(), Some(Blocks { q, base_dim }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram(&self) -> &Gram {
        &self.gram
    }

    pub fn blocks(&self) -> Option<Blocks> {
        self.blocks
    }

    pub fn factor(&self) -> &GramFactor {
        &self.factor
    }

    /// Materializes the Gram matrix as a dense `d x d` matrix.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        match &self.gram {
            Gram::Identity => DMatrix::identity(self.dim, self.dim),
            Gram::Diagonal(w) => DMatrix::from_diagonal(&DVector::from_vec(w.clone())),
            Gram::Dense(g) => g.clone(),
        }
    }

    /// Applies the Gram matrix: `x -> G x`.
    pub fn gram_mul(&self, x: &HPoint) -> Result<HPoint> {
        self.check_dim(x)?;
        Ok(match &self.gram {
            Gram::Identity => x.clone(),
            Gram::Diagonal(w) => {
                DVector::from_iterator(self.dim, x.iter().zip(w).map(|(a, wi)| a * wi))
            }
            Gram::Dense(g) => g * x,
        })
    }

    /// The inner product `x' G y`.
    pub fn inner(&self, x: &HPoint, y: &HPoint) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.inner_unchecked(x, y))
    }

    pub(crate) fn inner_unchecked(&self, x: &HPoint, y: &HPoint) -> f64 {
        match &self.gram {
            Gram::Identity => x.dot(y),
            Gram::Diagonal(w) => x
                .iter()
                .zip(y.iter())
                .zip(w.iter())
                .map(|((a, b), wi)| wi * a * b)
                .sum(),
            Gram::Dense(g) => x.dot(&(g * y)),
        }
    }

    /// The squared norm `<x, x>`.
    pub fn norm_sq(&self, x: &HPoint) -> Result<f64> {
        self.inner(x, x)
    }

    /// G-orthonormalizes a basis by modified Gram-Schmidt in this space's
    /// inner product (with a re-orthogonalization pass for stability).
    /// Fails with `DegenerateBasis` when a residual pivot drops below
    /// `PROJECTION_PIVOT_TOL` times the largest basis-vector norm squared.
    pub fn g_orthonormalize(&self, basis: &[HPoint]) -> Result<Vec<HPoint>> {
        for b in basis {
            self.check_dim(b)?;
        }
        let max_diag = basis
            .iter()
            .map(|b| self.inner_unchecked(b, b))
            .fold(0.0_f64, f64::max);
        let threshold = PROJECTION_PIVOT_TOL * max_diag;
        let mut ortho: Vec<HPoint> = Vec::with_capacity(basis.len());
        for b in basis {
            let mut v = b.clone();
            for _ in 0..2 {
                for q in &ortho {
                    let c = self.inner_unchecked(&v, q);
                    v.axpy(-c, q, 1.0);
                }
            }
            let pivot = self.inner_unchecked(&v, &v);
            if !(pivot > threshold) {
                return Err(Error::DegenerateBasis);
            }
            ortho.push(v / pivot.sqrt());
        }
        Ok(ortho)
    }

    /// The G-orthogonal projection of `x` onto the span of `basis`.  An
    /// empty basis projects everything to zero.
    pub fn project(&self, x: &HPoint, basis: &[HPoint]) -> Result<HPoint> {
        self.check_dim(x)?;
        let ortho = self.g_orthonormalize(basis)?;
        let mut out = DVector::zeros(self.dim);
        for q in &ortho {
            let c = self.inner_unchecked(x, q);
            out.axpy(c, q, 1.0);
        }
        Ok(out)
    }

    /// Extracts the space a single component lives in: the `index`-th
    /// diagonal block of the Gram matrix over `base_dim` coordinates.
    /// Requires a block layout.
    pub fn component_space(&self, index: usize) -> Result<SpaceSpec> {
        let b = self.blocks.ok_or(Error::NoBlocks)?;
        assert!(index < b.q, "component index {index} out of range for {} blocks", b.q);
        let lo = index * b.base_dim;
        let gram = match &self.gram {
            Gram::Identity => Gram::Identity,
            Gram::Diagonal(w) => Gram::Diagonal(w[lo..lo + b.base_dim].to_vec()),
            Gram::Dense(g) => {
                Gram::Dense(g.view((lo, lo), (b.base_dim, b.base_dim)).into_owned())
            }
        };
        SpaceSpec::new(b.base_dim, gram, None)
    }

    /// True when the Gram matrix couples coordinates from different blocks,
    /// i.e. some off-diagonal block has a nonzero entry (exact-zero check).
    /// Requires a block layout.
    pub fn has_cross_block_coupling(&self) -> Result<bool> {
        let b = self.blocks.ok_or(Error::NoBlocks)?;
        match &self.gram {
            Gram::Identity | Gram::Diagonal(_) => Ok(false),
            Gram::Dense(g) => {
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        if i / b.base_dim != j / b.base_dim && g[(i, j)] != 0.0 {
                            return Ok(true);
                        }
                    }
                }
                Ok(false)
            }
        }
    }

    fn check_dim(&self, x: &HPoint) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Serializes the space to the JSON wire format.
    pub fn to_json(&self) -> String {
        let gram = match &self.gram {
            Gram::Identity => GramWire { kind: "identity".into(), values: None },
            Gram::Diagonal(w) => GramWire { kind: "diagonal".into(), values: Some(w.clone()) },
            Gram::Dense(g) => {
                let d = self.dim;
                let mut values = Vec::with_capacity(d * d);
                for i in 0..d {
                    for j in 0..d {
                        values.push(g[(i, j)]);
                    }
                }
                GramWire { kind: "dense".into(), values: Some(values) }
            }
        };
        let wire = SpaceWire { dim: self.dim, gram, blocks: self.blocks };
        serde_json::to_string_pretty(&wire).expect("space wire form serializes")
    }

    /// Parses and validates a space from the JSON wire format.
    pub fn from_json(text: &str) -> Result<Self> {
        let wire: SpaceWire =
            serde_json::from_str(text).map_err(|e| Error::BadFormat(e.to_string()))?;
        let values = wire.gram.values;
        let gram = match wire.gram.kind.as_str() {
            "identity" => Gram::Identity,
            "diagonal" => Gram::Diagonal(values.unwrap_or_default()),
            "dense" => {
                let v = values.unwrap_or_default();
                if v.len() != wire.dim * wire.dim {
                    return Err(Error::BadFormat(format!(
                        "dense gram needs {} values, found {}",
                        wire.dim * wire.dim,
                        v.len()
                    )));
                }
                Gram::Dense(DMatrix::from_row_slice(wire.dim, wire.dim, &v))
            }
            other => return Err(Error::BadFormat(format!("unknown gram kind {other:?}"))),
        };
        Self::new(wire.dim, gram, wire.blocks)
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceWire {
    dim: usize,
    gram: GramWire,
    blocks: Option<Blocks>,
}

#[derive(Serialize, Deserialize)]
struct GramWire {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
}
