use serde::Serialize;

use super::{DelayLVModel, Trajectory};
use crate::error::{Error, Result};
use crate::matcore::{RealMatrix, RealVector, DEFAULT_TOL};
use crate::riccati::{verify_certificate, RiccatiCertificate};

/// Coefficients of the functional: `p_i` from `P`, `mu_j = q_j / 2` from `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct LKWeights {
    pub p: RealVector,
    pub mu: RealVector,
}

impl LKWeights {
    pub fn from_certificate(cert: &RiccatiCertificate) -> Self {
        Self {
            p: cert.pair.p().clone(),
            mu: cert.pair.q() * 0.5,
        }
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature to `rel` relative accuracy.
fn integrate_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let tol = rel * whole.abs().max(f64::MIN_POSITIVE);
    adaptive(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn species_term(model: &DelayLVModel, i: usize, x: f64, xbar: f64) -> f64 {
    let (f, g) = (&model.f[i], &model.g[i]);
    if f.antiderivative_available() && g.antiderivative_available() {
        return (x - xbar) - xbar * (x / xbar).ln();
    }
    let fbar = f.eval(xbar);
    integrate_simpson(&|z| (f.eval(z) - fbar) / g.eval(z), xbar, x, 1e-10)
}

/// Lyapunov-Krasovskii functional on a grid window `x(t + u)`,
/// `u = -tau, ..., 0` with spacing `h`; the last sample is `x(t)`.
pub fn lk_value(
    model: &DelayLVModel,
    weights: &LKWeights,
    xbar: &RealVector,
    window: &[RealVector],
    h: f64,
) -> f64 {
    let n = model.dim();
    let x = window.last().expect("window must contain x(t)");
    let mut v = 0.0;
    for i in 0..n {
        v += weights.p[i] * species_term(model, i, x[i], xbar[i]);
    }
    if window.len() > 1 {
        let fbar = model.f_of(xbar);
        let sq = |s: &RealVector| -> f64 {
            (0..n)
                .map(|j| weights.mu[j] * (model.f[j].eval(s[j]) - fbar[j]).powi(2))
                .sum()
        };
        let inner: f64 = window[1..window.len() - 1].iter().map(sq).sum();
        v += h * (0.5 * (sq(&window[0]) + sq(x)) + inner);
    }
    v
}

/// Result of checking the functional's decay along a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub steps: usize,
    pub beta: f64,
    pub v_initial: f64,
    pub v_final: f64,
    /// Steps with `V(t_{k+1}) > V(t_k) + eps`.
    pub monotonicity_violations: usize,
    /// Steps whose finite-difference slope exceeds the certified bound.
    pub slope_violations: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` over both checks; negative when every check holds
    /// without the numerical allowance.
    pub worst_margin: f64,
}

/// Checks along `traj` that `V` is nonincreasing and that it decays at the
/// certified rate `dV/dt <= -beta b(t)`,
/// `b(t) = sum_i [(f_i(x_i(t)) - f_i(xbar_i))^2 + (f_i(x_i(t - tau)) - f_i(xbar_i))^2]`,
/// in the step form `(V(t_{k+1}) - V(t_k)) / h <= -beta (b(t_k) + b(t_{k+1})) / 2`.
/// Both checks allow `1e-6 (1 + |V(t_k)|)`.
pub fn verify_decay(
    model: &DelayLVModel,
    cert: &RiccatiCertificate,
    xbar: &RealVector,
    traj: &Trajectory,
) -> Result<DecayReport> {
    let verified = verify_certificate(&model.a, &model.b, &cert.pair, DEFAULT_TOL)
        .map_err(|e| Error::CertificateRejected(e.to_string()))?;
    if traj.lag() != 0 && (traj.tau() - model.tau).abs() > 1e-9 * model.tau.max(1.0) {
        return Err(Error::PreconditionViolation("trajectory delay does not match the model".into()));
    }
    let beta = verified.beta;
    let weights = LKWeights::from_certificate(&verified);
    let h = traj.h();
    let fbar = model.f_of(xbar);
    let values: Vec<f64> = (0..=traj.steps())
        .map(|k| lk_value(model, &weights, xbar, traj.window(k), h))
        .collect();

    let mut report = DecayReport {
        steps: traj.steps(),
        beta,
        v_initial: values[0],
        v_final: values[values.len() - 1],
        monotonicity_violations: 0,
        slope_violations: 0,
        violations: 0,
        worst_margin: f64::NEG_INFINITY,
    };
    let bounds: Vec<f64> = (0..=traj.steps())
        .map(|k| {
            let z = model.f_of(traj.state(k)) - &fbar;
            let w = model.f_of(traj.delayed(k)) - &fbar;
            -beta * (z.norm_squared() + w.norm_squared())
        })
        .collect();
    for k in 0..traj.steps() {
        let eps = 1e-6 * (1.0 + values[k].abs());
        let rise = values[k + 1] - values[k];
        // The slope is a step average of dV/dt, so it is compared with the
        // step average (trapezoid) of the pointwise bound.
        let bound = 0.5 * (bounds[k] + bounds[k + 1]);
        let slope_margin = rise / h - bound;
        report.worst_margin = report.worst_margin.max(rise).max(slope_margin);
        if rise > eps {
            report.monotonicity_violations += 1;
        }
        if slope_margin > eps {
            report.slope_violations += 1;
        }
    }
    if traj.steps() == 0 {
        report.worst_margin = 0.0;
    }
    report.violations = report.monotonicity_violations + report.slope_violations;
    Ok(report)
}

/// `-beta (x'x + y'y) - [x'PAx + x'PBy + (x'Qx - y'Qy) / 2]`; nonnegative
/// for a valid certificate.
pub fn quadratic_bound_slack(
    a: &RealMatrix,
    b: &RealMatrix,
    cert: &RiccatiCertificate,
    x: &RealVector,
    y: &RealVector,
) -> f64 {
    let (p, q) = (cert.pair.p(), cert.pair.q());
    let px = p.component_mul(x);
    let form = px.dot(&(a * x)) + px.dot(&(b * y))
        + 0.5 * (q.component_mul(x).dot(x) - q.component_mul(y).dot(y));
    -cert.beta * (x.norm_squared() + y.norm_squared()) - form
}
