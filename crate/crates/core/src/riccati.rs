//! Block matrix of the diagonal Riccati inequality and certificate checks.
//!
//! For diagonal `P = diag(p)`, `Q = diag(q)` the Riccati inequality
//! `A^T P + P A + Q + P B Q^{-1} B^T P < 0` holds iff the symmetric block
//! matrix
//!
//! ```text
//! S = [ A^T P + P A + Q   P B ]
//!     [ B^T P            -Q   ]
//! ```
//!
//! is negative definite. Certificates are always judged on `S`; the
//! Riccati form is recomputed as a consistency check.

use crate::error::{Error, Result};
use crate::matcore::{check_pair, lambda_max, lyapunov_form, RealMatrix, RealVector};

/// Diagonals of `P` and `Q`, both strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalPair {
    p: RealVector,
    q: RealVector,
}

impl DiagonalPair {
    pub fn new(p: RealVector, q: RealVector) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                what: "q",
                expected: p.len(),
                got: q.len(),
            });
        }
        for (name, v) in [("p", &p), ("q", &q)] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name));
            }
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::NotPositive(name));
            }
        }
        Ok(Self { p, q })
    }

    pub fn from_slices(p: &[f64], q: &[f64]) -> Result<Self> {
        Self::new(
            RealVector::from_column_slice(p),
            RealVector::from_column_slice(q),
        )
    }

    /// `p = q = 1`.
    pub fn ones(n: usize) -> Self {
        Self {
            p: RealVector::from_element(n, 1.0),
            q: RealVector::from_element(n, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &RealVector {
        &self.p
    }

    pub fn q(&self) -> &RealVector {
        &self.q
    }

    /// Both diagonals multiplied by `t > 0`.
    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(&self.p * t, &self.q * t)
    }
}

/// A diagonal pair whose block matrix has been verified negative definite.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiCertificate {
    pub pair: DiagonalPair,
    /// Largest eigenvalue of the block matrix `S`.
    pub lambda_max: f64,
    /// Decay margin, `-lambda_max / 2`, so that `S <= -2 beta I`.
    pub beta: f64,
}

fn check_dims(a: &RealMatrix, b: &RealMatrix, pair: &DiagonalPair) -> Result<usize> {
    let n = check_pair(a, b)?;
    if pair.dim() != n {
        return Err(Error::DimensionMismatch {
            what: "diagonal pair",
            expected: n,
            got: pair.dim(),
        });
    }
    Ok(n)
}

/// Assembles the `2n x 2n` block matrix `S`.
pub fn build_block_s(a: &RealMatrix, b: &RealMatrix, pair: &DiagonalPair) -> Result<RealMatrix> {
    let n = check_dims(a, b, pair)?;
    let (p, q) = (pair.p(), pair.q());
    let mut s = RealMatrix::zeros(2 * n, 2 * n);
    let top = lyapunov_form(a, p);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = top[(i, j)];
            let pb = p[i] * b[(i, j)];
            s[(i, n + j)] = pb;
            s[(n + j, i)] = pb;
        }
        s[(i, i)] += q[i];
        s[(n + i, n + i)] = -q[i];
    }
    Ok(s)
}

/// `A^T P + P A + Q + P B Q^{-1} B^T P`, with `Q^{-1}` taken entrywise.
pub fn riccati_form(a: &RealMatrix, b: &RealMatrix, pair: &DiagonalPair) -> Result<RealMatrix> {
    let n = check_dims(a, b, pair)?;
    let (p, q) = (pair.p(), pair.q());
    let pb = RealMatrix::from_fn(n, n, |i, j| p[i] * b[(i, j)]);
    let pb_scaled = RealMatrix::from_fn(n, n, |i, j| pb[(i, j)] / q[j]);
    let mut r = lyapunov_form(a, p) + pb_scaled * pb.transpose();
    for i in 0..n {
        r[(i, i)] += q[i];
    }
    Ok(crate::matcore::symmetrize(&r))
}

/// Verifies that `pair` certifies diagonal Riccati stability of `(A, B)`.
///
/// Succeeds iff `lambda_max(S) < -tol`. On success the Riccati form must also
/// be negative definite; a disagreement is reported as
/// [`Error::SchurInconsistency`].
pub fn verify_certificate(
    a: &RealMatrix,
    b: &RealMatrix,
    pair: &DiagonalPair,
    tol: f64,
) -> Result<RiccatiCertificate> {
    let s = build_block_s(a, b, pair)?;
    let block = lambda_max(&s)?;
    if !(block < -tol) {
        return Err(Error::NotNegativeDefinite { lambda_max: block });
    }
    // S <= -eps I implies the Schur complement is <= -eps I as well.
    let riccati = lambda_max(&riccati_form(a, b, pair)?)?;
    if !(riccati < 0.0) {
        return Err(Error::SchurInconsistency { block, riccati });
    }
    Ok(RiccatiCertificate {
        pair: pair.clone(),
        lambda_max: block,
        beta: -block / 2.0,
    })
}

/// `(A^T P + P A < 0, (A+B)^T P + P (A+B) < 0)` for `P = diag(p)`.
pub fn lyapunov_consequences(
    a: &RealMatrix,
    b: &RealMatrix,
    p: &RealVector,
    tol: f64,
) -> Result<(bool, bool)> {
    let n = check_pair(a, b)?;
    if p.len() != n {
        return Err(Error::DimensionMismatch {
            what: "p",
            expected: n,
            got: p.len(),
        });
    }
    let first = lambda_max(&lyapunov_form(a, p))? < -tol;
    let second = lambda_max(&lyapunov_form(&(a + b), p))? < -tol;
    Ok((first, second))
}

/// Splits a `2n x 2n` matrix into `(H11, H12, H22)`.
pub fn split_blocks(h: &RealMatrix, n: usize) -> (RealMatrix, RealMatrix, RealMatrix) {
    (
        h.view((0, 0), (n, n)).into_owned(),
        h.view((0, n), (n, n)).into_owned(),
        h.view((n, n), (n, n)).into_owned(),
    )
}

/// Residual of the expansion `trace(H S) = trace(2 P (A H11 + B H12^T)) + trace(Q (H11 - H22))`.
///
/// The left side is computed from the assembled block matrix and a full
/// product; the right side from the blocks of `H` only.
pub fn trace_identity_residual(
    a: &RealMatrix,
    b: &RealMatrix,
    pair: &DiagonalPair,
    h: &RealMatrix,
) -> Result<f64> {
    let n = check_dims(a, b, pair)?;
    if h.nrows() != 2 * n || h.ncols() != 2 * n {
        return Err(Error::DimensionMismatch {
            what: "H",
            expected: 2 * n,
            got: h.nrows(),
        });
    }
    let s = build_block_s(a, b, pair)?;
    let lhs = (h * s).trace();
    let (h11, h12, h22) = split_blocks(h, n);
    let m = a * &h11 + b * h12.transpose();
    let (p, q) = (pair.p(), pair.q());
    let rhs: f64 = (0..n)
        .map(|i| 2.0 * p[i] * m[(i, i)] + q[i] * (h11[(i, i)] - h22[(i, i)]))
        .sum();
    Ok((lhs - rhs).abs())
}
