//! Dense 3-way tensors, CP factor triples, and the exact KL divergence
//! between two unit-variance Gaussian CP models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense 3-way tensor, row-major: entry (i, j, k) lives at `(i*J + j)*K + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    values: Vec<f64>,
}

impl Tensor3 {
    /// Build from explicit values; every entry must be finite.
    pub fn new(dims: (usize, usize, usize), values: Vec<f64>) -> Result<Self> {
        let len = dims.0 * dims.1 * dims.2;
        if values.len() != len {
            return Err(Error::DimMismatch(format!(
                "tensor of dims {dims:?} needs {len} values, got {}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("tensor entries must be finite".into()));
        }
        Ok(Tensor3 { dims, values })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Tensor3 {
            dims,
            values: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.dims.1 + j) * self.dims.2 + k]
    }

    /// Squared Frobenius norm, summed in index order.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor3) {
        debug_assert_eq!(self.dims, other.dims);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

/// Squared Frobenius distance `‖a − b‖²`.
pub fn sq_distance(a: &Tensor3, b: &Tensor3) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::DimMismatch(format!(
            "tensors have dims {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    Ok(sq_distance_unchecked(&a.values, &b.values))
}

pub(crate) fn sq_distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Frobenius inner product `⟨a, b⟩`.
pub fn dot(a: &Tensor3, b: &Tensor3) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::DimMismatch(format!(
            "tensors have dims {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum())
}

/// Dense row-major matrix; entry (r, c) lives at `r*cols + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Matrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Matrix { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    /// Largest absolute entry in column `c`; 0 for an empty column.
    pub fn column_abs_max(&self, c: usize) -> f64 {
        (0..self.rows)
            .map(|r| self.get(r, c).abs())
            .fold(0.0, f64::max)
    }
}

/// A CP factor triple (A, B, C) with a shared column count H (the rank).
///
/// Column h across the three factors forms one rank-one component
/// `a_h ⊗ b_h ⊗ c_h`; the composed tensor is the sum over columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CpParams {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl CpParams {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        if a.cols != b.cols || b.cols != c.cols {
            return Err(Error::DimMismatch(format!(
                "factor column counts differ: {} / {} / {}",
                a.cols, b.cols, c.cols
            )));
        }
        Ok(CpParams { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    /// Shared column count H.
    pub fn rank(&self) -> usize {
        self.a.cols
    }

    /// The I×J×K tensor these factors parameterize.
    pub fn compose(&self) -> Tensor3 {
        compose(self)
    }

    /// Output tensor dims (I, J, K).
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.rows, self.b.rows, self.c.rows)
    }

    /// Total scalar parameter count for given dims and rank.
    pub fn flat_len(dims: (usize, usize, usize), rank: usize) -> usize {
        (dims.0 + dims.1 + dims.2) * rank
    }

    /// Concatenate A, B, C row-major into one parameter vector.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(Self::flat_len(self.dims(), self.rank()));
        flat.extend_from_slice(&self.a.values);
        flat.extend_from_slice(&self.b.values);
        flat.extend_from_slice(&self.c.values);
        flat
    }

    /// Inverse of [`CpParams::flatten`] for the given shape.
    pub fn from_flat(dims: (usize, usize, usize), rank: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != Self::flat_len(dims, rank) {
            return Err(Error::DimMismatch(format!(
                "flat vector of length {} cannot fill dims {dims:?} rank {rank}",
                flat.len()
            )));
        }
        let (na, nb) = (dims.0 * rank, dims.1 * rank);
        Ok(CpParams {
            a: Matrix {
                rows: dims.0,
                cols: rank,
                values: flat[..na].to_vec(),
            },
            b: Matrix {
                rows: dims.1,
                cols: rank,
                values: flat[na..na + nb].to_vec(),
            },
            c: Matrix {
                rows: dims.2,
                cols: rank,
                values: flat[na + nb..].to_vec(),
            },
        })
    }
}

/// Shape of one estimation problem: tensor dims, model rank H, true rank H₀,
/// and training-set size n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dims: (usize, usize, usize),
    pub rank: usize,
    pub true_rank: usize,
    pub n_samples: usize,
}

impl ModelSpec {
    pub fn new(dims: (usize, usize, usize), rank: usize, true_rank: usize, n_samples: usize) -> Result<Self> {
        let spec = ModelSpec {
            dims,
            rank,
            true_rank,
            n_samples,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (i, j, k) = self.dims;
        if i < 1 || j < 1 || k < 1 {
            return Err(Error::Config(format!(
                "tensor dims must all be >= 1, got {:?}",
                self.dims
            )));
        }
        if self.rank < 1 {
            return Err(Error::Config("model rank H must be >= 1".into()));
        }
        if self.true_rank > self.rank {
            return Err(Error::Config(format!(
                "true rank H0={} exceeds model rank H={}",
                self.true_rank, self.rank
            )));
        }
        if self.n_samples < 1 {
            return Err(Error::Config("sample count n must be >= 1".into()));
        }
        Ok(())
    }

    /// Scalar parameter count (I + J + K) · H.
    pub fn param_count(&self) -> usize {
        CpParams::flat_len(self.dims, self.rank)
    }
}

/// Shared composition kernel over raw row-major factor slices.
///
/// Per output entry, rank-one contributions accumulate in column order
/// h = 0, 1, ..., so the result is a deterministic function of the factor
/// values alone.
pub(crate) fn compose_parts(
    dims: (usize, usize, usize),
    rank: usize,
    a: &[f64],
    b: &[f64],
    c: &[f64],
) -> Tensor3 {
    let (ni, nj, nk) = dims;
    let mut out = Tensor3::zeros(dims);
    for h in 0..rank {
        for i in 0..ni {
            let aih = a[i * rank + h];
            for j in 0..nj {
                let ab = aih * b[j * rank + h];
                let row = (i * nj + j) * nk;
                for k in 0..nk {
                    out.values[row + k] += ab * c[k * rank + h];
                }
            }
        }
    }
    out
}

/// Compose the CP factor triple into its I×J×K tensor:
/// `T[i,j,k] = Σ_h A[i,h]·B[j,h]·C[k,h]`.
pub fn compose(params: &CpParams) -> Tensor3 {
    compose_parts(
        params.dims(),
        params.rank(),
        &params.a.values,
        &params.b.values,
        &params.c.values,
    )
}

/// KL divergence between the unit-variance Gaussian models centered at the
/// two composed tensors: `KL = ½ ‖T(w) − T(w₀)‖²`.
pub fn kl_divergence(w: &CpParams, w0: &CpParams) -> Result<f64> {
    if w.dims() != w0.dims() {
        return Err(Error::DimMismatch(format!(
            "models have dims {:?} vs {:?}",
            w.dims(),
            w0.dims()
        )));
    }
    Ok(0.5 * sq_distance(&compose(w), &compose(w0))?)
}
