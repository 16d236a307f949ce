//! Constructive certificates for Metzler `A` and nonnegative `B`.
//!
//! For this class a diagonal certificate exists iff `A + B` is Hurwitz. The
//! construction takes a diagonal Lyapunov solution `P` of `A + B`, a
//! positive `v` with `((A+B)^T P + P (A+B)) v = -w` for `w = 1`, and reads
//! `Q` off `Q v = B^T P v + w / 2`.

use crate::error::{Error, Result};
use crate::matcore::{
    check_pair, diagonal_lyapunov_metzler, is_hurwitz, is_metzler, is_nonnegative, lyapunov_form,
    RealMatrix, RealVector, DEFAULT_TOL,
};
use crate::riccati::{build_block_s, verify_certificate, DiagonalPair, RiccatiCertificate};

/// Relative floor for accepting `v >> 0` in the synthesis step.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Output of [`synthesize`]: the verified certificate plus the intermediate
/// vectors `v` and `w` used to build `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub certificate: RiccatiCertificate,
    pub v: RealVector,
    pub w: RealVector,
}

impl Synthesis {
    pub fn pair(&self) -> &DiagonalPair {
        &self.certificate.pair
    }
}

fn check_class(a: &RealMatrix, b: &RealMatrix, tol: f64) -> Result<usize> {
    let n = check_pair(a, b)?;
    if !is_metzler(a, tol) {
        return Err(Error::PreconditionViolation("A is not Metzler".into()));
    }
    if !is_nonnegative(b, tol) {
        return Err(Error::PreconditionViolation("B is not nonnegative".into()));
    }
    Ok(n)
}

/// Decides diagonal Riccati stability for Metzler `A`, nonnegative `B`:
/// true iff `A + B` is Hurwitz.
pub fn theorem3_decision(a: &RealMatrix, b: &RealMatrix, tol: f64) -> Result<bool> {
    check_class(a, b, tol)?;
    is_hurwitz(&(a + b), tol)
}

/// Builds and verifies a diagonal certificate for Metzler `A`, nonnegative
/// `B` with `A + B` Hurwitz.
pub fn synthesize(a: &RealMatrix, b: &RealMatrix) -> Result<Synthesis> {
    let n = check_class(a, b, 0.0)?;
    let sum = a + b;
    if !is_hurwitz(&sum, 0.0)? {
        return Err(Error::PreconditionViolation("A + B is not Hurwitz".into()));
    }
    let p = diagonal_lyapunov_metzler(&sum)
        .map_err(|e| Error::PreconditionViolation(format!("no diagonal Lyapunov solution for A + B: {e}")))?
        .into_inner();

    let lyap = lyapunov_form(&sum, &p);
    let w = RealVector::from_element(n, 1.0);
    let v = lyap
        .clone()
        .lu()
        .solve(&(-&w))
        .ok_or_else(|| Error::VerificationFailure("Lyapunov form is singular".into()))?;
    let vmax = v.max();
    if !(v.min() > POSITIVITY_FLOOR * vmax) {
        return Err(Error::VerificationFailure(format!(
            "v is not strictly positive: min {:e}, max {:e}",
            v.min(),
            vmax
        )));
    }

    let pb = RealMatrix::from_fn(n, n, |i, j| p[i] * b[(i, j)]);
    let btpv = pb.transpose() * &v;
    let q = RealVector::from_fn(n, |i, _| (btpv[i] + 0.5 * w[i]) / v[i]);

    let pair = DiagonalPair::new(p, q).map_err(|e| Error::VerificationFailure(e.to_string()))?;
    let certificate = verify_certificate(a, b, &pair, DEFAULT_TOL)
        .map_err(|e| Error::VerificationFailure(e.to_string()))?;
    Ok(Synthesis { certificate, v, w })
}

/// `max_i |(S (v, v))_i + w_i / 2|` for a synthesized pair.
pub fn q2_residual(a: &RealMatrix, b: &RealMatrix, synthesis: &Synthesis) -> Result<f64> {
    let s = build_block_s(a, b, synthesis.pair())?;
    let n = synthesis.v.len();
    let vv = RealVector::from_fn(2 * n, |i, _| synthesis.v[i % n]);
    let sv = s * vv;
    Ok((0..2 * n)
        .map(|i| (sv[i] + 0.5 * synthesis.w[i % n]).abs())
        .fold(0.0, f64::max))
}

/// Per-index `(lhs_i, rhs_i)` with `lhs_i = (A H11 + B H12^T)_ii` and
/// `rhs_i = g_i ((A + B) g)_i`, `g_i = sqrt((H11)_ii)`.
///
/// For Metzler `A`, nonnegative `B` and PSD `H` with `diag(H22) <= diag(H11)`,
/// `lhs_i <= rhs_i` for every `i`.
pub fn metzler_diag_bound(
    a: &RealMatrix,
    b: &RealMatrix,
    h11: &RealMatrix,
    h12: &RealMatrix,
) -> Result<(RealVector, RealVector)> {
    let n = check_pair(a, b)?;
    for (what, blk) in [("H11", h11), ("H12", h12)] {
        if blk.nrows() != n || blk.ncols() != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                got: blk.nrows(),
            });
        }
    }
    let m = a * h11 + b * h12.transpose();
    let lhs = RealVector::from_fn(n, |i, _| m[(i, i)]);
    let g = RealVector::from_fn(n, |i, _| h11[(i, i)].max(0.0).sqrt());
    let sg = (a + b) * &g;
    let rhs = g.component_mul(&sg);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(n: usize, rows: &[f64]) -> RealMatrix {
        RealMatrix::from_row_slice(n, n, rows)
    }

    fn eye(n: usize) -> RealMatrix {
        RealMatrix::identity(n, n)
    }

    #[test]
    fn decision_examples() {
        let a = m(2, &[-2.0, 1.0, 1.0, -2.0]);
        assert!(theorem3_decision(&a, &(eye(2) * 0.5), DEFAULT_TOL).unwrap());
        assert!(!theorem3_decision(&(-eye(2)), &(eye(2) * 2.0), DEFAULT_TOL).unwrap());
        assert!(theorem3_decision(&(-eye(2)), &RealMatrix::zeros(2, 2), DEFAULT_TOL).unwrap());
    }

    #[test]
    fn decision_rejects_wrong_class() {
        let a = m(2, &[-1.0, 0.0, -2.0, -1.0]);
        assert!(matches!(
            theorem3_decision(&a, &eye(2), DEFAULT_TOL),
            Err(Error::PreconditionViolation(_))
        ));
        assert!(matches!(
            theorem3_decision(&(-eye(2)), &(-eye(2)), DEFAULT_TOL),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn synthesize_lyapunov_case() {
        let syn = synthesize(&(-eye(2)), &RealMatrix::zeros(2, 2)).unwrap();
        assert_relative_eq!(syn.pair().p().as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
        assert_relative_eq!(syn.v.as_slice(), &[0.5, 0.5][..], epsilon = 1e-14);
        assert_relative_eq!(syn.pair().q().as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
        assert_relative_eq!(syn.certificate.lambda_max, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn synthesize_metzler_example() {
        let a = m(2, &[-2.0, 1.0, 1.0, -2.0]);
        let b = eye(2) * 0.5;
        let syn = synthesize(&a, &b).unwrap();
        assert_relative_eq!(syn.pair().p().as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
        assert_relative_eq!(syn.v.as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
        assert_relative_eq!(syn.pair().q().as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
        assert!(q2_residual(&a, &b, &syn).unwrap() <= 1e-12);
    }

    #[test]
    fn synthesize_rejects_counterexample() {
        let a = m(2, &[-1.0, 0.0, -2.0, -1.0]);
        assert!(matches!(
            synthesize(&a, &RealMatrix::zeros(2, 2)),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn synthesize_rejects_unstable_sum() {
        assert!(matches!(
            synthesize(&(-eye(2)), &(eye(2) * 2.0)),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn synthesized_block_is_metzler() {
        let a = m(3, &[-3.0, 0.5, 0.2, 0.1, -2.0, 0.7, 0.0, 0.3, -4.0]);
        let b = m(3, &[0.2, 0.0, 0.4, 0.1, 0.3, 0.0, 0.5, 0.1, 0.2]);
        let syn = synthesize(&a, &b).unwrap();
        let s = build_block_s(&a, &b, syn.pair()).unwrap();
        assert!(is_metzler(&s, 0.0));
    }

    #[test]
    fn diag_bound_rank_one() {
        let a = m(2, &[-2.0, 1.0, 0.5, -3.0]);
        let b = m(2, &[0.1, 0.2, 0.3, 0.4]);
        let mut h11 = RealMatrix::zeros(2, 2);
        h11[(0, 0)] = 1.0;
        let (lhs, rhs) = metzler_diag_bound(&a, &b, &h11, &RealMatrix::zeros(2, 2)).unwrap();
        assert_eq!(lhs[0], a[(0, 0)]);
        assert_eq!(rhs[0], a[(0, 0)] + b[(0, 0)]);
        assert!(lhs[0] <= rhs[0]);
    }

    #[test]
    fn diag_bound_identity_blocks() {
        let a = m(2, &[-2.0, 1.0, 1.0, -2.0]);
        let b = eye(2) * 0.5;
        let (lhs, rhs) = metzler_diag_bound(&a, &b, &eye(2), &eye(2)).unwrap();
        assert_relative_eq!(lhs.as_slice(), &[-1.5, -1.5][..], epsilon = 1e-15);
        assert_relative_eq!(rhs.as_slice(), &[-0.5, -0.5][..], epsilon = 1e-15);
    }
}
