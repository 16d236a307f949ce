//! Generalized Lotka-Volterra systems with a single discrete delay,
//!
//! `x_i' = g_i(x_i) (c_i + sum_j a_ij f_j(x_j(t)) + sum_j b_ij f_j(x_j(t - tau)))`,
//!
//! and the Lyapunov-Krasovskii functional built from a diagonal Riccati
//! certificate.

mod bounded;
mod functional;
mod functions;
mod integrate;

pub use bounded::{boundedness_experiment, BoundednessReport, RunSummary};
pub use functional::{lk_value, quadratic_bound_slack, verify_decay, DecayReport, LKWeights};
pub use functions::InteractionFunction;
pub use integrate::{constant_history, integrate, History, Trajectory, MAX_HALVINGS};

use crate::error::{Error, Result};
use crate::matcore::{
    check_pair, is_hurwitz, is_metzler, is_nonnegative, PositiveVector, RealMatrix, RealVector,
    DEFAULT_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct DelayLVModel {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub c: RealVector,
    pub tau: f64,
    pub f: Vec<InteractionFunction>,
    pub g: Vec<InteractionFunction>,
}

impl DelayLVModel {
    pub fn new(
        a: RealMatrix,
        b: RealMatrix,
        c: RealVector,
        tau: f64,
        f: Vec<InteractionFunction>,
        g: Vec<InteractionFunction>,
    ) -> Result<Self> {
        let n = check_pair(&a, &b)?;
        for (what, len) in [("c", c.len()), ("f", f.len()), ("g", g.len())] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("c"));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidStep(format!("delay must be finite and nonnegative, got {tau}")));
        }
        for func in f.iter().chain(&g) {
            func.validate()?;
        }
        Ok(Self { a, b, c, tau, f, g })
    }

    /// Model with `f = g = identity` for every species.
    pub fn classical(a: RealMatrix, b: RealMatrix, c: RealVector, tau: f64) -> Result<Self> {
        let n = a.nrows();
        let id = vec![InteractionFunction::Identity; n];
        Self::new(a, b, c, tau, id.clone(), id)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        let mut m = self.clone();
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidStep(format!("delay must be finite and nonnegative, got {tau}")));
        }
        m.tau = tau;
        Ok(m)
    }

    pub fn f_of(&self, x: &RealVector) -> RealVector {
        RealVector::from_fn(x.len(), |i, _| self.f[i].eval(x[i]))
    }

    /// Right-hand side for current state `x` and delayed state `y`.
    pub fn rhs(&self, x: &RealVector, y: &RealVector) -> RealVector {
        let drive = &self.c + &self.a * self.f_of(x) + &self.b * self.f_of(y);
        RealVector::from_fn(x.len(), |i, _| self.g[i].eval(x[i]) * drive[i])
    }

    /// `||c + (A + B) f(x)||_inf`.
    pub fn equilibrium_residual(&self, x: &RealVector) -> f64 {
        (&self.c + (&self.a + &self.b) * self.f_of(x)).amax()
    }
}

/// Interior equilibrium of a mutualistic model: `y = -(A+B)^{-1} c`, then
/// `f_i(x_i) = y_i` componentwise.
pub fn mutualistic_equilibrium(model: &DelayLVModel) -> Result<PositiveVector> {
    let (a, b) = (&model.a, &model.b);
    if !is_metzler(a, DEFAULT_TOL) {
        return Err(Error::PreconditionViolation("A is not Metzler".into()));
    }
    if !is_nonnegative(b, DEFAULT_TOL) {
        return Err(Error::PreconditionViolation("B is not nonnegative".into()));
    }
    let sum = a + b;
    if !is_hurwitz(&sum, DEFAULT_TOL)? {
        return Err(Error::PreconditionViolation("A + B is not Hurwitz".into()));
    }
    if !model.c.iter().all(|&v| v > 0.0) {
        return Err(Error::PreconditionViolation("c must be strictly positive".into()));
    }
    interior_equilibrium(model)
}

/// Solves `c + (A + B) f(x) = 0` for `x >> 0` without class restrictions.
pub fn interior_equilibrium(model: &DelayLVModel) -> Result<PositiveVector> {
    let sum = &model.a + &model.b;
    let y = sum.lu().solve(&(-&model.c)).ok_or(Error::Singular)?;
    if !y.iter().all(|&v| v > 0.0) {
        return Err(Error::PreconditionViolation(format!(
            "-(A+B)^-1 c is not strictly positive: {:?}",
            y.as_slice()
        )));
    }
    let mut x = RealVector::zeros(y.len());
    for i in 0..y.len() {
        x[i] = model.f[i].invert(y[i]).ok_or(Error::InversionFailure {
            index: i,
            target: y[i],
        })?;
    }
    PositiveVector::new(x)
}
