//! Dense-matrix predicates and the classical Metzler constructions.
//!
//! Every definiteness test goes through a symmetric eigensolve so that the
//! extreme eigenvalue is available to callers as a margin, not just a sign.
//! Values sitting exactly at a tolerance are classified as failures.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense real matrix. Shapes are checked at the API boundary.
pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;

/// Default absolute tolerance on eigenvalue real parts.
pub const DEFAULT_TOL: f64 = 1e-9;

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

/// A vector with strictly positive entries (`v >> 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveVector(RealVector);

impl PositiveVector {
    pub fn new(v: RealVector) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("positive vector"));
        }
        if v.iter().any(|&x| x <= 0.0) {
            return Err(Error::NotPositive("positive vector"));
        }
        Ok(Self(v))
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(RealVector::from_column_slice(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &RealVector {
        &self.0
    }

    pub fn into_inner(self) -> RealVector {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

impl std::ops::Deref for PositiveVector {
    type Target = RealVector;

    fn deref(&self) -> &RealVector {
        &self.0
    }
}

/// Checks that `m` is square with finite entries and returns its dimension.
pub fn check_square(m: &RealMatrix, what: &'static str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(m.nrows())
}

/// Checks that `a` and `b` are square, finite and of equal dimension.
pub fn check_pair(a: &RealMatrix, b: &RealMatrix) -> Result<usize> {
    let n = check_square(a, "A")?;
    let nb = check_square(b, "B")?;
    if nb != n {
        return Err(Error::DimensionMismatch {
            what: "B",
            expected: n,
            got: nb,
        });
    }
    Ok(n)
}

/// True iff every off-diagonal entry is at least `-tol`.
pub fn is_metzler(a: &RealMatrix, tol: f64) -> bool {
    let n = a.nrows();
    (0..n).all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)] >= -tol))
}

/// True iff every entry is at least `-tol`.
pub fn is_nonnegative(a: &RealMatrix, tol: f64) -> bool {
    a.iter().all(|&x| x >= -tol)
}

/// Largest real part over the spectrum of a general square matrix.
pub fn spectral_abscissa(a: &RealMatrix) -> Result<f64> {
    let n = check_square(a, "matrix")?;
    if n == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let schur = Schur::try_new(a.clone(), EIG_EPS, EIG_MAX_ITER).ok_or(Error::EigenFailure(n))?;
    let eig = schur.complex_eigenvalues();
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// True iff every eigenvalue has real part strictly below `-tol`.
pub fn is_hurwitz(a: &RealMatrix, tol: f64) -> Result<bool> {
    Ok(spectral_abscissa(a)? < -tol)
}

/// `(S + S^T) / 2`.
pub fn symmetrize(s: &RealMatrix) -> RealMatrix {
    (s + s.transpose()) * 0.5
}

/// Eigen-decomposition of the symmetric part of `s`, eigenvalues ascending.
pub fn sym_eigen(s: &RealMatrix) -> Result<(RealVector, RealMatrix)> {
    let n = check_square(s, "symmetric matrix")?;
    let eig = SymmetricEigen::try_new(symmetrize(s), EIG_EPS, EIG_MAX_ITER)
        .ok_or(Error::EigenFailure(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = RealVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = RealMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Largest eigenvalue of the symmetric part of `s`.
pub fn lambda_max(s: &RealMatrix) -> Result<f64> {
    let (values, _) = sym_eigen(s)?;
    Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest eigenvalue of the symmetric part of `s`.
pub fn lambda_min(s: &RealMatrix) -> Result<f64> {
    let (values, _) = sym_eigen(s)?;
    Ok(values.iter().copied().fold(f64::INFINITY, f64::min))
}

/// True iff `lambda_max(sym(S)) < -tol`.
pub fn is_negative_definite(s: &RealMatrix, tol: f64) -> Result<bool> {
    Ok(lambda_max(s)? < -tol)
}

fn solve(a: &RealMatrix, rhs: &RealVector) -> Result<RealVector> {
    let x = a.clone().lu().solve(rhs).ok_or(Error::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(x)
}

/// For Metzler Hurwitz `A`, the vector `v >> 0` solving `A v = -1`.
///
/// Both `v >> 0` and `A v << 0` are checked on the computed solution, so a
/// non-Metzler or non-Hurwitz input surfaces as [`Error::NoPositiveVector`].
pub fn metzler_positive_vector(a: &RealMatrix) -> Result<PositiveVector> {
    let n = check_square(a, "A")?;
    let v = solve(a, &RealVector::from_element(n, -1.0))
        .map_err(|_| Error::NoPositiveVector("A is singular".into()))?;
    if v.iter().any(|&x| x <= 0.0) {
        return Err(Error::NoPositiveVector(format!(
            "solution of Av = -1 has a nonpositive entry: {:?}",
            v.as_slice()
        )));
    }
    let av = a * &v;
    if av.iter().any(|&x| x >= 0.0) {
        return Err(Error::NoPositiveVector(format!(
            "Av is not strictly negative: {:?}",
            av.as_slice()
        )));
    }
    PositiveVector::new(v)
}

/// Diagonal `d` with `A^T D + D A` negative definite, for Metzler Hurwitz `A`.
///
/// Uses `d_i = u_i / v_i` with `A v = -1` and `A^T u = -1`. With `V = diag(v)`,
/// `V (A^T D + D A) V = V A^T U + U A V` is symmetric Metzler and maps the
/// ones vector to `-(u + v) << 0`, so it is Hurwitz and hence negative
/// definite. The result is still checked numerically before returning.
pub fn diagonal_lyapunov_metzler(a: &RealMatrix) -> Result<PositiveVector> {
    check_square(a, "A")?;
    if !is_metzler(a, 0.0) {
        return Err(Error::PreconditionViolation("A is not Metzler".into()));
    }
    let v = metzler_positive_vector(a)?;
    let u = metzler_positive_vector(&a.transpose())?;
    let d = u.as_vector().component_div(v.as_vector());
    let lyap = lyapunov_form(a, &d);
    let lmax = lambda_max(&lyap)?;
    if !(lmax < -DEFAULT_TOL) {
        return Err(Error::LyapunovVerification { lambda_max: lmax });
    }
    PositiveVector::new(d)
}

/// `A^T D + D A` for `D = diag(d)`.
pub fn lyapunov_form(a: &RealMatrix, d: &RealVector) -> RealMatrix {
    let da = RealMatrix::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)]);
    &da + da.transpose()
}

/// Smallest (0-based) index `i` with `v_i (A v)_i < 0`.
///
/// Exists for every nonzero `v` when `A` is Metzler Hurwitz; used as a test
/// oracle for that equivalence.
pub fn prop1_iv_index(a: &RealMatrix, v: &RealVector) -> Result<usize> {
    let n = check_square(a, "A")?;
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            what: "v",
            expected: n,
            got: v.len(),
        });
    }
    let av = a * v;
    (0..n)
        .find(|&i| v[i] * av[i] < 0.0)
        .ok_or(Error::NoIndexFound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(n: usize, rows: &[f64]) -> RealMatrix {
        RealMatrix::from_row_slice(n, n, rows)
    }

    fn counter_a() -> RealMatrix {
        m(2, &[-1.0, 0.0, -2.0, -1.0])
    }

    #[test]
    fn metzler_predicate() {
        assert!(!is_metzler(&counter_a(), DEFAULT_TOL));
        assert!(is_metzler(&(-RealMatrix::identity(4, 4)), DEFAULT_TOL));
        assert!(is_metzler(&m(2, &[-2.0, 1.0, 1.0, -2.0]), DEFAULT_TOL));
    }

    #[test]
    fn nonnegative_predicate() {
        assert!(!is_nonnegative(&m(2, &[-10.0, 0.0, 0.0, -10.0]), DEFAULT_TOL));
        assert!(is_nonnegative(&RealMatrix::zeros(3, 3), DEFAULT_TOL));
        assert!(is_nonnegative(&m(2, &[0.2, 0.1, 0.1, 0.2]), DEFAULT_TOL));
    }

    #[test]
    fn hurwitz_predicate() {
        assert!(is_hurwitz(&counter_a(), DEFAULT_TOL).unwrap());
        assert!(!is_hurwitz(&RealMatrix::zeros(2, 2), DEFAULT_TOL).unwrap());
        let apb = m(2, &[-1.5, 1.0, 1.0, -1.5]);
        assert!(is_hurwitz(&apb, DEFAULT_TOL).unwrap());
        assert_relative_eq!(spectral_abscissa(&apb).unwrap(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn hurwitz_tie_is_failure() {
        let a = -RealMatrix::identity(2, 2) * 1e-9;
        assert!(!is_hurwitz(&a, 1e-9).unwrap());
    }

    #[test]
    fn negative_definite_predicate() {
        assert!(is_negative_definite(&(-RealMatrix::identity(3, 3)), DEFAULT_TOL).unwrap());
        let s = m(2, &[-3.0, 2.0, 2.0, -3.0]);
        assert!(is_negative_definite(&s, DEFAULT_TOL).unwrap());
        let (vals, _) = sym_eigen(&s).unwrap();
        assert_relative_eq!(vals[0], -5.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], -1.0, epsilon = 1e-12);
        assert!(!is_negative_definite(&m(2, &[0.0, 0.0, 0.0, -1.0]), DEFAULT_TOL).unwrap());
    }

    #[test]
    fn negative_definite_rejects_rectangular() {
        let r = RealMatrix::zeros(2, 3);
        assert!(matches!(
            is_negative_definite(&r, DEFAULT_TOL),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn positive_vector_examples() {
        let v = metzler_positive_vector(&(-RealMatrix::identity(3, 3))).unwrap();
        assert_relative_eq!(v.as_vector(), &RealVector::from_element(3, 1.0), epsilon = 1e-14);

        let v = metzler_positive_vector(&m(2, &[-2.0, 1.0, 1.0, -2.0])).unwrap();
        assert_relative_eq!(v.as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);

        let v = metzler_positive_vector(&m(2, &[-1.0, 2.0, 0.0, -1.0])).unwrap();
        assert_relative_eq!(v.as_slice(), &[3.0, 1.0][..], epsilon = 1e-14);
    }

    #[test]
    fn positive_vector_rejects_unstable() {
        let a = m(2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            metzler_positive_vector(&a),
            Err(Error::NoPositiveVector(_))
        ));
        let a = m(2, &[-1.0, 2.0, 2.0, -1.0]);
        assert!(metzler_positive_vector(&a).is_err());
    }

    #[test]
    fn diagonal_lyapunov_examples() {
        let d = diagonal_lyapunov_metzler(&(-RealMatrix::identity(2, 2))).unwrap();
        assert_relative_eq!(d.as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
        let d = diagonal_lyapunov_metzler(&m(2, &[-2.0, 1.0, 1.0, -2.0])).unwrap();
        assert_relative_eq!(d.as_slice(), &[1.0, 1.0][..], epsilon = 1e-14);
        assert!(matches!(
            diagonal_lyapunov_metzler(&counter_a()),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn iv_index_examples() {
        let a = -RealMatrix::identity(2, 2);
        assert_eq!(prop1_iv_index(&a, &RealVector::from_column_slice(&[1.0, 0.0])).unwrap(), 0);
        let a = m(2, &[-2.0, 1.0, 1.0, -2.0]);
        let v = RealVector::from_column_slice(&[1.0, -1.0]);
        let av = &a * &v;
        assert_eq!(v[0] * av[0], -3.0);
        assert_eq!(v[1] * av[1], -3.0);
        assert_eq!(prop1_iv_index(&a, &v).unwrap(), 0);
        let v = RealVector::from_column_slice(&[1.0, 0.0]);
        assert_eq!(prop1_iv_index(&a, &v).unwrap(), 0);
        assert_eq!((&a * &v)[0], -2.0);
    }

    #[test]
    fn iv_index_fails_on_unstable() {
        let a = RealMatrix::identity(2, 2);
        let v = RealVector::from_column_slice(&[1.0, 1.0]);
        assert_eq!(prop1_iv_index(&a, &v), Err(Error::NoIndexFound));
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = RealMatrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(check_square(&a, "A"), Err(Error::NonFinite("A"))));
    }
}
