use super::DelayLVModel;
use crate::error::{Error, Result};
use crate::matcore::RealVector;

/// Maximum number of local step halvings before a step is declared collapsed.
pub const MAX_HALVINGS: u32 = 20;

/// Initial segment `phi(t)` on `[-tau, 0]`.
pub type History = dyn Fn(f64) -> RealVector + Sync;

pub fn constant_history(x: RealVector) -> impl Fn(f64) -> RealVector + Sync {
    move |_| x.clone()
}

/// States on the uniform grid `t_k = k h`, `k = 0..=N`, preceded by the
/// sampled history on `[-tau, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    h: f64,
    lag: usize,
    samples: Vec<RealVector>,
    derivs: Vec<RealVector>,
    halvings: usize,
}

impl Trajectory {
    pub fn h(&self) -> f64 {
        self.h
    }

    /// `tau / h`.
    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn tau(&self) -> f64 {
        self.lag as f64 * self.h
    }

    /// Number of grid intervals on `[0, T]`.
    pub fn steps(&self) -> usize {
        self.samples.len() - self.lag - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn final_time(&self) -> f64 {
        self.time(self.steps())
    }

    /// States at `t_0, ..., t_N`.
    pub fn states(&self) -> &[RealVector] {
        &self.samples[self.lag..]
    }

    /// History samples at `-tau, ..., 0`.
    pub fn history(&self) -> &[RealVector] {
        &self.samples[..=self.lag]
    }

    pub fn state(&self, k: usize) -> &RealVector {
        &self.samples[self.lag + k]
    }

    /// `x(t_k - tau)`.
    pub fn delayed(&self, k: usize) -> &RealVector {
        &self.samples[k]
    }

    /// Right-hand side evaluated at each grid point.
    pub fn derivs(&self) -> &[RealVector] {
        &self.derivs
    }

    /// Grid segment `x(t_k + u)`, `u in [-tau, 0]`.
    pub fn window(&self, k: usize) -> &[RealVector] {
        &self.samples[k..=k + self.lag]
    }

    /// Total number of local step halvings taken.
    pub fn halvings(&self) -> usize {
        self.halvings
    }

    pub fn last(&self) -> &RealVector {
        self.samples.last().expect("trajectory is never empty")
    }
}

fn positive(x: &RealVector) -> bool {
    x.iter().all(|&v| v > 0.0 && v.is_finite())
}

/// Integrates on `[0, T]` by the method of steps with classical RK4.
///
/// Delayed values inside `[-tau, 0]` come from `history` directly; later ones
/// from cubic Hermite interpolation of the stored grid values and
/// derivatives. A step whose stages leave the open positive orthant is
/// retried as two half steps, recursively up to [`MAX_HALVINGS`] levels.
pub fn integrate(model: &DelayLVModel, history: &History, h: f64, t_end: f64) -> Result<Trajectory> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidStep(format!("step must be positive, got {h}")));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidStep(format!("horizon must be finite and nonnegative, got {t_end}")));
    }
    let tau = model.tau;
    let ratio = tau / h;
    let lag = ratio.round();
    if (ratio - lag).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidStep(format!("step {h} does not divide delay {tau}")));
    }
    let lag = lag as usize;
    let steps = (t_end / h - 1e-9).ceil().max(0.0) as usize;
    let n = model.dim();

    let mut samples = Vec::with_capacity(lag + steps + 1);
    for j in 0..=lag {
        let x = history((j as f64 - lag as f64) * h);
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                what: "history",
                expected: n,
                got: x.len(),
            });
        }
        if !positive(&x) {
            return Err(Error::PreconditionViolation(format!(
                "history must be strictly positive, got {:?} at t = {:e}",
                x.as_slice(),
                (j as f64 - lag as f64) * h
            )));
        }
        samples.push(x);
    }

    let mut traj = Trajectory {
        h,
        lag,
        samples,
        derivs: Vec::with_capacity(steps + 1),
        halvings: 0,
    };
    let stepper = Stepper { model, history, h };
    for k in 0..steps {
        let y = stepper.delayed(&traj, k, 0.0, None);
        let d = model.rhs(traj.state(k), &y);
        traj.derivs.push(d);
        let x = traj.state(k).clone();
        let next = stepper.advance(&mut traj, k, 0.0, 1.0, x, 0)?;
        traj.samples.push(next);
    }
    let y = stepper.delayed(&traj, steps, 0.0, None);
    let d = model.rhs(traj.state(steps), &y);
    traj.derivs.push(d);
    Ok(traj)
}

struct Stepper<'a> {
    model: &'a DelayLVModel,
    history: &'a History,
    h: f64,
}

impl Stepper<'_> {
    /// `x(t_k + theta h - tau)`; `current` is the stage state used when
    /// `tau = 0`.
    fn delayed(&self, traj: &Trajectory, k: usize, theta: f64, current: Option<&RealVector>) -> RealVector {
        let lag = traj.lag;
        if lag == 0 {
            return current.unwrap_or_else(|| traj.state(k)).clone();
        }
        if k < lag {
            let m = k as f64 - lag as f64;
            return (self.history)((m + theta) * self.h);
        }
        let m = k - lag;
        if theta == 0.0 {
            return traj.state(m).clone();
        }
        let (p0, p1) = (traj.state(m), traj.state(m + 1));
        let (d0, d1) = (&traj.derivs[m], &traj.derivs[m + 1]);
        let s = theta;
        let h00 = (2.0 * s - 3.0) * s * s + 1.0;
        let h10 = ((s - 2.0) * s + 1.0) * s * self.h;
        let h01 = (3.0 - 2.0 * s) * s * s;
        let h11 = (s - 1.0) * s * s * self.h;
        RealVector::from_fn(p0.len(), |i, _| {
            let v = h00 * p0[i] + h10 * d0[i] + h01 * p1[i] + h11 * d1[i];
            if v > 0.0 {
                v
            } else {
                // The cubic can undershoot between two positive samples;
                // linear interpolation cannot.
                (1.0 - s) * p0[i] + s * p1[i]
            }
        })
    }

    fn stage(&self, traj: &Trajectory, k: usize, theta: f64, x: &RealVector) -> Option<RealVector> {
        if !positive(x) {
            return None;
        }
        let y = self.delayed(traj, k, theta, Some(x));
        let d = self.model.rhs(x, &y);
        d.iter().all(|v| v.is_finite()).then_some(d)
    }

    fn rk4(&self, traj: &Trajectory, k: usize, theta: f64, dtheta: f64, x: &RealVector) -> Option<RealVector> {
        let dt = dtheta * self.h;
        let mid = theta + 0.5 * dtheta;
        let k1 = self.stage(traj, k, theta, x)?;
        let k2 = self.stage(traj, k, mid, &(x + &k1 * (0.5 * dt)))?;
        let k3 = self.stage(traj, k, mid, &(x + &k2 * (0.5 * dt)))?;
        let k4 = self.stage(traj, k, theta + dtheta, &(x + &k3 * dt))?;
        let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        positive(&next).then_some(next)
    }

    fn advance(
        &self,
        traj: &mut Trajectory,
        k: usize,
        theta: f64,
        dtheta: f64,
        x: RealVector,
        depth: u32,
    ) -> Result<RealVector> {
        if let Some(next) = self.rk4(traj, k, theta, dtheta, &x) {
            return Ok(next);
        }
        if depth >= MAX_HALVINGS {
            return Err(Error::StepCollapse {
                t: (k as f64 + theta) * self.h,
                state: x.as_slice().to_vec(),
            });
        }
        traj.halvings += 1;
        let half = 0.5 * dtheta;
        let mid = self.advance(traj, k, theta, half, x, depth + 1)?;
        self.advance(traj, k, theta + half, half, mid, depth + 1)
    }
}
