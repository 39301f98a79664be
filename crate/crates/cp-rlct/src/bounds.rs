//! Closed-form RLCT quantities: the exact matrix-factorization RLCT and the
//! upper bound it yields for the CP tensor decomposition model.
//!
//! Every value here is an integer multiple of 1/8, so all arithmetic runs on
//! integer eighths and converts to `f64` only at the boundary. The returned
//! floats are exactly representable — equality comparisons are legitimate.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::ModelSpec;

/// Largest eighths value that still converts to f64 exactly.
const MAX_EXACT_EIGHTHS: i128 = 1 << 53;

/// Exact RLCT of the rank-`h` matrix-factorization model between an `n`-dim
/// output and `m`-dim input, in units of 1/8.
///
/// Five cases: an explicit zero at h = 0, a thin-rank regime on either side
/// (`h ≤ n − m` or `h ≤ m − n`), a saturated regime (`h ≥ n + m`), and the
/// interior band `|n − m| ≤ h ≤ n + m` with a parity correction. The
/// interior formula is tried first; the regimes overlap only where the
/// formulas agree.
fn rrr_rlct_eighths(n: i128, m: i128, h: i128) -> Result<i128> {
    debug_assert!(n >= 1 && m >= 1 && h >= 0);
    if h == 0 {
        return Ok(0);
    }
    let eighths = if (n - m).abs() <= h && h <= n + m {
        let base = 2 * (n * m + m * h + h * n) - (n * n + m * m + h * h);
        let parity = (h + m - n).rem_euclid(2);
        base + parity
    } else if h <= n - m {
        4 * m * h
    } else if h <= m - n {
        4 * n * h
    } else if n + m <= h {
        4 * n * m
    } else {
        // All of h ∈ [0, ∞) is covered above; reaching this is a bug.
        return Err(Error::Internal(format!(
            "matrix-factorization RLCT case analysis fell through at n={n}, m={m}, h={h}"
        )));
    };
    if eighths < 0 {
        return Err(Error::Internal(format!(
            "matrix-factorization RLCT came out negative at n={n}, m={m}, h={h}"
        )));
    }
    Ok(eighths)
}

/// Exact RLCT of the reduced-rank regression (matrix factorization) model
/// with output dim `n`, input dim `m`, and inner rank `h`.
pub fn rrr_rlct(n: u64, m: u64, h: u64) -> Result<f64> {
    if n < 1 || m < 1 {
        return Err(Error::Domain(format!(
            "matrix dimensions must satisfy N >= 1 and M >= 1, got N={n}, M={m}"
        )));
    }
    let eighths = rrr_rlct_eighths(n as i128, m as i128, h as i128)?;
    if eighths > MAX_EXACT_EIGHTHS {
        return Err(Error::Domain(format!(
            "dimensions N={n}, M={m}, H={h} are too large for an exactly representable RLCT"
        )));
    }
    Ok(eighths as f64 / 8.0)
}

/// The theoretical RLCT upper bound for one model shape, with the terms it
/// is assembled from and two reference quantities for context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RlctBound {
    /// (H₀(I + J + K) − 2) / 2 — cost of the true-rank part.
    pub core_term: f64,
    /// Matrix-factorization RLCT of the (IJ) × K flattening at rank H − H₀.
    pub m1: f64,
    /// Matrix-factorization RLCT of the (JK) × I flattening at rank H − H₀.
    pub m2: f64,
    /// Matrix-factorization RLCT of the (KI) × J flattening at rank H − H₀.
    pub m3: f64,
    /// core_term + min(m1, m2, m3); the RLCT λ satisfies λ ≤ bound.
    pub bound: f64,
    /// H(I + J + K) / 2 — half the parameter count, the regular-model rate.
    pub half_params: f64,
    /// H₀(I + J + K) / 2 — the bound from the true-rank part alone.
    pub obvious_lambda1: f64,
}

impl RlctBound {
    /// The smallest residual term as (1-based index, value); ties resolve to
    /// the lowest index.
    pub fn min_residual(&self) -> (usize, f64) {
        let terms = [self.m1, self.m2, self.m3];
        let mut best = 0;
        for (idx, t) in terms.iter().enumerate() {
            if *t < terms[best] {
                best = idx;
            }
        }
        (best + 1, terms[best])
    }
}

/// Upper bound on the RLCT of the CP decomposition model for `spec`:
/// `λ ≤ (H₀(I+J+K) − 2)/2 + min(m1, m2, m3)`, where each mᵢ is the
/// matrix-factorization RLCT of one flattening at the excess rank H − H₀.
pub fn tensor_rlct_bound(spec: &ModelSpec) -> Result<RlctBound> {
    spec.validate()?;
    if spec.true_rank < 1 {
        return Err(Error::Domain(
            "H0 must be >= 1 for the RLCT bound (a zero true rank has no core term)".into(),
        ));
    }
    let (i, j, k) = spec.dims;
    let (i, j, k) = (i as u64, j as u64, k as u64);
    let excess = (spec.rank - spec.true_rank) as u64;
    let m1 = rrr_rlct(i * j, k, excess)?;
    let m2 = rrr_rlct(j * k, i, excess)?;
    let m3 = rrr_rlct(k * i, j, excess)?;
    let dim_sum = (i + j + k) as f64;
    let core_term = (spec.true_rank as f64 * dim_sum - 2.0) / 2.0;
    let bound = core_term + m1.min(m2).min(m3);
    Ok(RlctBound {
        core_term,
        m1,
        m2,
        m3,
        bound,
        half_params: spec.rank as f64 * dim_sum / 2.0,
        obvious_lambda1: spec.true_rank as f64 * dim_sum / 2.0,
    })
}
