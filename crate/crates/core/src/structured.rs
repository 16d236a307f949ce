//! Infeasibility witnesses and the exact decision for triangular pairs.
//!
//! A witness is a nonzero PSD block matrix `H = [[H11, H12], [H12^T, H22]]`
//! with `diag(H11) >= diag(H22)` for which `A H11 + B H12^T` has no negative
//! diagonal entry. Its existence rules out every diagonal certificate.

use crate::error::{Error, Result};
use crate::matcore::{check_pair, lambda_min, RealMatrix, RealVector};

/// Tolerance on `lambda_min(H)` for the PSD invariant.
pub const PSD_TOL: f64 = 1e-9;
/// Tolerance on `diag(H11) >= diag(H22)`.
pub const DIAG_TOL: f64 = 1e-12;
/// Tolerance on the symmetry of `H11` and `H22`.
pub const SYM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityWitness {
    h11: RealMatrix,
    h12: RealMatrix,
    h22: RealMatrix,
}

impl InfeasibilityWitness {
    /// Validates the witness invariants: symmetric diagonal blocks, `H`
    /// PSD, `H != 0` and `diag(H11) >= diag(H22)`.
    pub fn new(h11: RealMatrix, h12: RealMatrix, h22: RealMatrix) -> Result<Self> {
        let n = h11.nrows();
        for (name, blk) in [("H11", &h11), ("H12", &h12), ("H22", &h22)] {
            if blk.nrows() != n || blk.ncols() != n {
                return Err(Error::InvalidWitness(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    blk.nrows(),
                    blk.ncols()
                )));
            }
            if blk.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidWitness(format!("{name} has a non-finite entry")));
            }
        }
        for (name, blk) in [("H11", &h11), ("H22", &h22)] {
            let asym = (blk - blk.transpose()).abs().max();
            if asym > SYM_TOL * (1.0 + blk.abs().max()) {
                return Err(Error::InvalidWitness(format!("{name} is not symmetric")));
            }
        }
        let w = Self { h11, h12, h22 };
        let h = w.assemble();
        if h.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidWitness("H is zero".into()));
        }
        let lmin = lambda_min(&h)?;
        if lmin < -PSD_TOL {
            return Err(Error::InvalidWitness(format!(
                "H is not positive semidefinite (lambda_min = {lmin:e})"
            )));
        }
        for i in 0..n {
            if w.h22[(i, i)] > w.h11[(i, i)] + DIAG_TOL {
                return Err(Error::InvalidWitness(format!(
                    "diag(H22)[{i}] = {} exceeds diag(H11)[{i}] = {}",
                    w.h22[(i, i)],
                    w.h11[(i, i)]
                )));
            }
        }
        Ok(w)
    }

    /// Builds a witness from a full symmetric `2n x 2n` matrix.
    pub fn from_full(h: &RealMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() || !h.nrows().is_multiple_of(2) {
            return Err(Error::InvalidWitness(format!(
                "H must be square of even order, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        let n = h.nrows() / 2;
        let asym = (h - h.transpose()).abs().max();
        if asym > SYM_TOL * (1.0 + h.abs().max()) {
            return Err(Error::InvalidWitness("H is not symmetric".into()));
        }
        let (h11, h12, h22) = crate::riccati::split_blocks(h, n);
        Self::new(h11, h12, h22)
    }

    pub fn dim(&self) -> usize {
        self.h11.nrows()
    }

    pub fn h11(&self) -> &RealMatrix {
        &self.h11
    }

    pub fn h12(&self) -> &RealMatrix {
        &self.h12
    }

    pub fn h22(&self) -> &RealMatrix {
        &self.h22
    }

    pub fn assemble(&self) -> RealMatrix {
        let n = self.dim();
        let mut h = RealMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.h11);
        h.view_mut((0, n), (n, n)).copy_from(&self.h12);
        h.view_mut((n, 0), (n, n)).copy_from(&self.h12.transpose());
        h.view_mut((n, n), (n, n)).copy_from(&self.h22);
        h
    }

    /// `diag(A H11 + B H12^T)`.
    pub fn diagonal(&self, a: &RealMatrix, b: &RealMatrix) -> RealVector {
        let n = self.dim();
        RealVector::from_fn(n, |i, _| {
            (0..n)
                .map(|j| a[(i, j)] * self.h11[(j, i)] + b[(i, j)] * self.h12[(i, j)])
                .sum()
        })
    }
}

/// Result of checking a witness against a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessCheck {
    /// `diag(A H11 + B H12^T)`.
    pub diagonal: RealVector,
    pub min_diag: f64,
    /// No diagonal entry below `-tol`.
    pub valid: bool,
    /// Every diagonal entry at least `+tol` and strictly positive.
    pub strict: bool,
}

/// Checks whether `witness` certifies that `(A, B)` has no diagonal
/// certificate. Invariant violations are caught when the witness is built.
pub fn verify_witness(
    a: &RealMatrix,
    b: &RealMatrix,
    witness: &InfeasibilityWitness,
    tol: f64,
) -> Result<WitnessCheck> {
    let n = check_pair(a, b)?;
    if witness.dim() != n {
        return Err(Error::DimensionMismatch {
            what: "witness",
            expected: n,
            got: witness.dim(),
        });
    }
    let diagonal = witness.diagonal(a, b);
    let min_diag = diagonal.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(WitnessCheck {
        valid: min_diag >= -tol,
        strict: min_diag >= tol && min_diag > 0.0,
        min_diag,
        diagonal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Lower,
    Upper,
}

fn is_lower(m: &RealMatrix, tol: f64) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (i + 1..n).all(|j| m[(i, j)].abs() <= tol))
}

/// Common triangular orientation of `A` and `B`, if any. Diagonal pairs
/// report `Lower`.
pub fn triangular_orientation(a: &RealMatrix, b: &RealMatrix, tol: f64) -> Option<Orientation> {
    if is_lower(a, tol) && is_lower(b, tol) {
        Some(Orientation::Lower)
    } else if is_lower(&a.transpose(), tol) && is_lower(&b.transpose(), tol) {
        Some(Orientation::Upper)
    } else {
        None
    }
}

/// Exact decision for a triangular pair: true iff `a_ii < -tol` and
/// `|b_ii| < |a_ii| - tol` for every `i`.
pub fn triangular_decision(a: &RealMatrix, b: &RealMatrix, tol: f64) -> Result<bool> {
    let n = check_pair(a, b)?;
    triangular_orientation(a, b, tol).ok_or(Error::NotTriangular)?;
    Ok((0..n).all(|i| {
        let aii = a[(i, i)];
        aii < -tol && b[(i, i)].abs() < aii.abs() - tol
    }))
}

/// Rank-one witness for a triangular pair that fails the criterion.
///
/// Picks the smallest index with `a_ii >= 0` or `|b_ii| >= |a_ii|`. In the
/// first case `H11 = e_i e_i^T` alone; otherwise `H11 = H22 = e_i e_i^T` and
/// `H12 = sign(b_ii) e_i e_i^T`, so the only nonzero diagonal entry of
/// `A H11 + B H12^T` is `a_ii + |b_ii| >= 0`.
pub fn triangular_witness(a: &RealMatrix, b: &RealMatrix) -> Result<InfeasibilityWitness> {
    let n = check_pair(a, b)?;
    triangular_orientation(a, b, 0.0).ok_or(Error::NotTriangular)?;
    let i = (0..n)
        .find(|&i| a[(i, i)] >= 0.0 || b[(i, i)].abs() >= a[(i, i)].abs())
        .ok_or(Error::NoViolatingIndex)?;
    let mut h11 = RealMatrix::zeros(n, n);
    let mut h12 = RealMatrix::zeros(n, n);
    let mut h22 = RealMatrix::zeros(n, n);
    h11[(i, i)] = 1.0;
    if a[(i, i)] < 0.0 {
        h22[(i, i)] = 1.0;
        h12[(i, i)] = if b[(i, i)] < 0.0 { -1.0 } else { 1.0 };
    }
    InfeasibilityWitness::new(h11, h12, h22)
}
