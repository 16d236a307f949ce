use crate::error::{Error, Result};

/// Shape functions `f_i`, `g_i` of a generalized Lotka-Volterra model.
#[derive(Debug, Clone, PartialEq)]
pub enum InteractionFunction {
    Identity,
    /// `x^alpha`, `alpha > 0`.
    Power { alpha: f64 },
    /// `x / (1 + x)`.
    Saturating,
    /// Piecewise-linear through `(x_k, y_k)` with `x_0 = y_0 = 0`, extended
    /// linearly past the last knot. `attested` records the caller's claim that
    /// the divergent-integral conditions hold; they cannot be checked here.
    Tabulated { x: Vec<f64>, y: Vec<f64>, attested: bool },
}

impl InteractionFunction {
    pub fn tabulated(x: Vec<f64>, y: Vec<f64>, attested: bool) -> Result<Self> {
        let f = Self::Tabulated { x, y, attested };
        f.validate()?;
        Ok(f)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Power { alpha } => x.powf(*alpha),
            Self::Saturating => x / (1.0 + x),
            Self::Tabulated { x: xs, y: ys, .. } => {
                let k = xs.partition_point(|&xk| xk <= x).clamp(1, xs.len() - 1);
                let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// True for the one pairing whose functional integral is evaluated in
    /// closed form (`f = g = identity`).
    pub fn antiderivative_available(&self) -> bool {
        matches!(self, Self::Identity)
    }

    /// Checks `f(0) = 0` and strict monotonicity on a log grid over
    /// `[1e-8, 1e8]`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Power { alpha } if !(alpha.is_finite() && *alpha > 0.0) => {
                return Err(Error::InvalidFunction(format!("power exponent must be positive, got {alpha}")))
            }
            Self::Tabulated { x, y, .. } => {
                if x.len() < 2 || x.len() != y.len() {
                    return Err(Error::InvalidFunction(
                        "table needs at least two knots and equal-length x, y".into(),
                    ));
                }
                if x.iter().chain(y).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidFunction("table entries must be finite".into()));
                }
                if x[0] != 0.0 || y[0] != 0.0 {
                    return Err(Error::InvalidFunction("table must start at (0, 0)".into()));
                }
                if x.windows(2).any(|w| w[1] <= w[0]) || y.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidFunction("table must be strictly increasing".into()));
                }
            }
            _ => {}
        }
        if self.eval(0.0) != 0.0 {
            return Err(Error::InvalidFunction("f(0) must be 0".into()));
        }
        let mut prev = 0.0;
        for k in -32..=32 {
            let v = self.eval(10f64.powf(k as f64 / 4.0));
            if !(v.is_finite() && v > prev) {
                return Err(Error::InvalidFunction(format!(
                    "not strictly increasing near x = 1e{:.2}",
                    k as f64 / 4.0
                )));
            }
            prev = v;
        }
        Ok(())
    }

    /// Solves `f(x) = y` for `y > 0`. Closed form for identity and power;
    /// otherwise bisection to `1e-12` relative after doubling the bracket
    /// until `f` exceeds `y`. `None` if `f` never reaches `y`.
    pub fn invert(&self, y: f64) -> Option<f64> {
        if !(y > 0.0 && y.is_finite()) {
            return None;
        }
        match self {
            Self::Identity => return Some(y),
            Self::Power { alpha } => return Some(y.powf(1.0 / alpha)),
            _ => {}
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.eval(hi) <= y {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return None;
            }
        }
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}
