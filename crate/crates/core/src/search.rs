//! Two-sided numerical decision for arbitrary pairs.
//!
//! The certificate side minimizes `lambda_max(S)` over log-parametrized
//! diagonals `p = exp(theta)`, `q = exp(phi)`; the witness side maximizes the
//! smallest diagonal entry of `A H11 + B H12^T` over `H = L L^T` with
//! `trace(H) = 1`. Both are heuristics for finding. Anything they return
//! is re-verified by the exact checkers, so a verdict is always backed by a
//! proof object.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matcore::{
    check_pair, is_metzler, is_nonnegative, spectral_abscissa, sym_eigen, RealMatrix, RealVector,
    DEFAULT_TOL,
};
use crate::riccati::{build_block_s, verify_certificate, DiagonalPair, RiccatiCertificate};
use crate::structured::{
    triangular_decision, triangular_orientation, triangular_witness, verify_witness,
    InfeasibilityWitness,
};
use crate::synth::{synthesize, theorem3_decision};

/// Lower bound on log-parameters; keeps normalized iterates in a box.
const LOG_FLOOR: f64 = -40.0;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub cert_margin: f64,
    pub witness_margin: f64,
    pub rng_seed: u64,
    pub step_init: f64,
    /// Worker threads for independent restarts. Does not affect results.
    pub jobs: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iters: 500,
            cert_margin: 1e-7,
            witness_margin: 1e-7,
            rng_seed: 0,
            step_init: 0.5,
            jobs: 1,
        }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.restarts > 0
            && self.max_iters > 0
            && self.cert_margin > 0.0
            && self.witness_margin > 0.0
            && self.step_init > 0.0
            && self.step_init.is_finite()
            && self.cert_margin.is_finite()
            && self.witness_margin.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::PreconditionViolation(format!("invalid search options: {self:?}")))
        }
    }

    fn restart_rng(&self, restart: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed ^ restart as u64)
    }
}

/// Outcome of a single certificate restart.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRun {
    pub best: f64,
    pub iterations: usize,
    /// Range of the final normalized log-parameters.
    pub log_range: (f64, f64),
    pub certificate: Option<RiccatiCertificate>,
}

/// Outcome of a single witness restart.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessRun {
    pub best: f64,
    pub iterations: usize,
    pub witness: Option<InfeasibilityWitness>,
}

struct CertProblem<'a> {
    a: &'a RealMatrix,
    b: &'a RealMatrix,
    n: usize,
}

struct CertPoint {
    x: RealVector,
    /// `lambda_max(S)` at the normalization `max(p, q) = 1`.
    value: f64,
    /// Scale-invariant descent objective `lambda_max(S) / (sum p + sum q)`.
    score: f64,
    eigenvalues: RealVector,
    eigenvectors: RealMatrix,
}

impl CertProblem<'_> {
    fn normalize(&self, x: &mut RealVector) {
        let m = x.max();
        x.apply(|v| *v = (*v - m).max(LOG_FLOOR));
    }

    fn pair(&self, x: &RealVector) -> Result<DiagonalPair> {
        let n = self.n;
        DiagonalPair::new(
            RealVector::from_fn(n, |i, _| x[i].exp()),
            RealVector::from_fn(n, |i, _| x[n + i].exp()),
        )
    }

    fn eval(&self, mut x: RealVector) -> Result<CertPoint> {
        self.normalize(&mut x);
        let s = build_block_s(self.a, self.b, &self.pair(&x)?)?;
        let (eigenvalues, eigenvectors) = sym_eigen(&s)?;
        let value = eigenvalues[2 * self.n - 1];
        let total: f64 = x.iter().map(|v| v.exp()).sum();
        Ok(CertPoint {
            value,
            score: value / total,
            x,
            eigenvalues,
            eigenvectors,
        })
    }

    /// Gradient of `u^T S(theta, phi) u` in the log-parameters.
    fn eigvec_gradient(&self, x: &RealVector, u: &RealVector) -> RealVector {
        let n = self.n;
        let (ux, uy) = (u.rows(0, n), u.rows(n, n));
        let ax = self.a * ux;
        let by = self.b * uy;
        RealVector::from_fn(2 * n, |k, _| {
            if k < n {
                x[k].exp() * 2.0 * ux[k] * (ax[k] + by[k])
            } else {
                let i = k - n;
                x[k].exp() * (ux[i] * ux[i] - uy[i] * uy[i])
            }
        })
    }

    /// Gradient of the log-sum-exp smoothing of the spectrum at width `mu`.
    fn smoothed_gradient(&self, pt: &CertPoint, mu: f64) -> RealVector {
        let top = pt.value;
        let mut g = RealVector::zeros(2 * self.n);
        let mut total = 0.0;
        for k in 0..pt.eigenvalues.len() {
            let w = ((pt.eigenvalues[k] - top) / mu).exp();
            if w < 1e-12 {
                continue;
            }
            total += w;
            g += self.eigvec_gradient(&pt.x, &pt.eigenvectors.column(k).into_owned()) * w;
        }
        g / total
    }

    /// Converts a gradient of `lambda_max` into one of the normalized score.
    /// The result is orthogonal to joint translation of all log-parameters.
    fn score_gradient(&self, pt: &CertPoint, grad: RealVector) -> RealVector {
        let e = pt.x.map(f64::exp);
        let total = e.sum();
        (grad - e * pt.score) / total
    }
}

fn descent_step<F>(
    current: f64,
    x: &RealVector,
    grad: &RealVector,
    step: f64,
    mut eval: F,
) -> Result<Option<(f64, CertPoint)>>
where
    F: FnMut(RealVector) -> Result<CertPoint>,
{
    let gnorm = grad.amax();
    if !(gnorm > 0.0) || !gnorm.is_finite() {
        return Ok(None);
    }
    let dir = grad / (-gnorm);
    let mut t = step;
    for _ in 0..MAX_HALVINGS {
        let trial = eval(x + &dir * t)?;
        if trial.score < current {
            return Ok(Some((t, trial)));
        }
        t *= 0.5;
    }
    Ok(None)
}

fn certificate_restart(
    a: &RealMatrix,
    b: &RealMatrix,
    opts: &SearchOptions,
    restart: usize,
) -> Result<CertificateRun> {
    let n = check_pair(a, b)?;
    let prob = CertProblem { a, b, n };
    let mut rng = opts.restart_rng(restart);
    let x0 = RealVector::from_fn(2 * n, |_, _| rng.random_range(-1.0..=1.0));
    let mut pt = prob.eval(x0)?;
    let mut best = pt.value;
    let mut step = opts.step_init;
    let scale = 1.0 + a.amax() + b.amax();

    for it in 0..opts.max_iters {
        if pt.value <= -opts.cert_margin {
            if let Ok(cert) = verify_certificate(a, b, &prob.pair(&pt.x)?, DEFAULT_TOL) {
                return Ok(CertificateRun {
                    best,
                    iterations: it,
                    log_range: (pt.x.min(), pt.x.max()),
                    certificate: Some(cert),
                });
            }
        }
        let top = pt.eigenvectors.column(2 * n - 1).into_owned();
        let mut moved = None;
        // Plain subgradient first; at a kink fall back to smoothed gradients.
        let directions = std::iter::once(None).chain([1e-4, 1e-3, 1e-2, 1e-1].into_iter().map(Some));
        for mu in directions {
            let grad = match mu {
                None => prob.eigvec_gradient(&pt.x, &top),
                Some(m) => prob.smoothed_gradient(&pt, m * scale),
            };
            let grad = prob.score_gradient(&pt, grad);
            if let Some(found) = descent_step(pt.score, &pt.x, &grad, step, |x| prob.eval(x))? {
                moved = Some(found);
                break;
            }
        }
        match moved {
            Some((t, next)) => {
                step = (2.0 * t).min(8.0 * opts.step_init);
                pt = next;
                best = best.min(pt.value);
            }
            None => {
                return Ok(CertificateRun {
                    best,
                    iterations: it,
                    log_range: (pt.x.min(), pt.x.max()),
                    certificate: None,
                })
            }
        }
    }
    let certificate = if pt.value <= -opts.cert_margin {
        verify_certificate(a, b, &prob.pair(&pt.x)?, DEFAULT_TOL).ok()
    } else {
        None
    };
    Ok(CertificateRun {
        best,
        iterations: opts.max_iters,
        log_range: (pt.x.min(), pt.x.max()),
        certificate,
    })
}

/// Central-cut ellipsoid method on the convex problem
/// `min lambda_max(S(p, q))` over the box `0 <= p, q <= 1`.
///
/// Runs after the randomized restarts; deterministic and free of step-size
/// tuning, it reaches thin margins that the descent stalls short of.
fn ellipsoid_certificate(a: &RealMatrix, b: &RealMatrix, opts: &SearchOptions) -> Result<CertificateRun> {
    let n = check_pair(a, b)?;
    let d = 2 * n;
    let df = d as f64;
    let prob = CertProblem { a, b, n };
    let budget = ((2.0 * df * (df + 1.0)) * 28.0) as usize;
    let mut center = RealVector::from_element(d, 0.5);
    let mut shape = RealMatrix::identity(d, d) * (df / 4.0 + 1e-3);
    let mut best = f64::INFINITY;
    let mut best_z: Option<RealVector> = None;
    let mut iterations = 0;

    for it in 0..budget {
        iterations = it + 1;
        let cut = match (0..d).find(|&i| center[i] <= 0.0 || center[i] > 1.0) {
            Some(i) => {
                let mut g = RealVector::zeros(d);
                g[i] = if center[i] <= 0.0 { -1.0 } else { 1.0 };
                g
            }
            None => {
                let pair = DiagonalPair::new(center.rows(0, n).into_owned(), center.rows(n, n).into_owned())?;
                let s = build_block_s(a, b, &pair)?;
                let (vals, vecs) = sym_eigen(&s)?;
                let value = vals[d - 1];
                if value < best {
                    best = value;
                    best_z = Some(center.clone());
                }
                if value <= -opts.cert_margin {
                    break;
                }
                // Gradient in (p, q) of u^T S u; the log-gradient divided through by p, q.
                let x = center.map(f64::ln);
                let g = prob.eigvec_gradient(&x, &vecs.column(d - 1).into_owned());
                g.component_div(&center)
            }
        };
        let pg = &shape * &cut;
        let gpg = cut.dot(&pg);
        if !(gpg > 1e-300) || !gpg.is_finite() {
            break;
        }
        let step = &pg / gpg.sqrt();
        center -= &step / (df + 1.0);
        shape = (&shape - (&step * step.transpose()) * (2.0 / (df + 1.0))) * (df * df / (df * df - 1.0));
        shape = crate::matcore::symmetrize(&shape);
    }

    let mut certificate = None;
    let mut log_range = (0.0, 0.0);
    if let Some(z) = best_z {
        let mut x = z.map(|v| v.ln());
        prob.normalize(&mut x);
        log_range = (x.min(), x.max());
        let pair = prob.pair(&x)?;
        if best <= -opts.cert_margin {
            certificate = verify_certificate(a, b, &pair, DEFAULT_TOL)
                .ok()
                .filter(|c| c.lambda_max <= -opts.cert_margin);
        }
    }
    Ok(CertificateRun {
        best,
        iterations,
        log_range,
        certificate,
    })
}

struct WitnessProblem<'a> {
    a: &'a RealMatrix,
    b: &'a RealMatrix,
    n: usize,
    penalty: f64,
}

struct WitnessPoint {
    l: RealMatrix,
    h: RealMatrix,
    value: f64,
    diag: RealVector,
}

impl WitnessProblem<'_> {
    fn project(&self, l: &mut RealMatrix) {
        let m = 2 * self.n;
        for i in 0..m {
            for j in i + 1..m {
                l[(i, j)] = 0.0;
            }
        }
        let norm = l.norm();
        if norm > 0.0 {
            *l /= norm;
        }
    }

    fn diag_entries(&self, h: &RealMatrix) -> RealVector {
        let n = self.n;
        RealVector::from_fn(n, |i, _| {
            (0..n)
                .map(|j| self.a[(i, j)] * h[(j, i)] + self.b[(i, j)] * h[(i, n + j)])
                .sum()
        })
    }

    fn eval(&self, mut l: RealMatrix) -> WitnessPoint {
        self.project(&mut l);
        let n = self.n;
        let h = &l * l.transpose();
        let diag = self.diag_entries(&h);
        let pen: f64 = (0..n).map(|i| (h[(n + i, n + i)] - h[(i, i)]).max(0.0)).sum();
        WitnessPoint {
            value: diag.min() - self.penalty * pen,
            l,
            h,
            diag,
        }
    }

    /// Gradient in `H` of `sum_i w_i diag_i - penalty * hinge`.
    fn h_gradient(&self, pt: &WitnessPoint, weights: &RealVector) -> RealMatrix {
        let n = self.n;
        let mut g = RealMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            let w = weights[i];
            if w == 0.0 {
                continue;
            }
            for j in 0..n {
                g[(j, i)] += w * self.a[(i, j)];
                g[(i, n + j)] += w * self.b[(i, j)];
            }
        }
        for i in 0..n {
            if pt.h[(n + i, n + i)] > pt.h[(i, i)] {
                g[(n + i, n + i)] -= self.penalty;
                g[(i, i)] += self.penalty;
            }
        }
        g
    }

    fn l_gradient(&self, pt: &WitnessPoint, weights: &RealVector) -> RealMatrix {
        let g = self.h_gradient(pt, weights);
        let mut gl = (&g + g.transpose()) * &pt.l;
        let m = 2 * self.n;
        for i in 0..m {
            for j in i + 1..m {
                gl[(i, j)] = 0.0;
            }
        }
        gl
    }

    /// Scales the second block so that `diag(H22) <= diag(H11)` holds.
    fn repair(&self, h: &RealMatrix) -> RealMatrix {
        let n = self.n;
        let d = RealVector::from_fn(2 * n, |k, _| {
            if k < n {
                1.0
            } else {
                let i = k - n;
                let (h11, h22) = (h[(i, i)], h[(k, k)]);
                if h22 > h11 {
                    (h11.max(0.0) / h22).sqrt()
                } else {
                    1.0
                }
            }
        });
        let mut out = DMatrix::from_fn(2 * n, 2 * n, |i, j| d[i] * h[(i, j)] * d[j]);
        for i in 0..n {
            if out[(n + i, n + i)] > out[(i, i)] {
                out[(n + i, n + i)] = out[(i, i)];
            }
        }
        crate::matcore::symmetrize(&out)
    }

    fn accept(&self, pt: &WitnessPoint, margin: f64) -> Option<InfeasibilityWitness> {
        if pt.diag.min() < margin {
            return None;
        }
        let w = InfeasibilityWitness::from_full(&self.repair(&pt.h)).ok()?;
        let check = verify_witness(self.a, self.b, &w, margin).ok()?;
        check.strict.then_some(w)
    }
}

fn witness_restart(
    a: &RealMatrix,
    b: &RealMatrix,
    opts: &SearchOptions,
    restart: usize,
) -> Result<WitnessRun> {
    let n = check_pair(a, b)?;
    let prob = WitnessProblem {
        a,
        b,
        n,
        penalty: 10.0 * (1.0 + a.amax() + b.amax()),
    };
    let mut rng = opts.restart_rng(restart);
    // Decorrelate from the certificate stream of the same restart.
    let _: u64 = rng.random();
    let l0 = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let noise = rng.random_range(-0.1..=0.1);
        if i == j {
            1.0 + noise
        } else {
            noise
        }
    });
    let mut pt = prob.eval(l0);
    let mut best = pt.value;
    let mut step = opts.step_init;
    let scale = 1.0 + a.amax() + b.amax();

    for it in 0..opts.max_iters {
        if let Some(w) = prob.accept(&pt, opts.witness_margin) {
            return Ok(WitnessRun {
                best,
                iterations: it,
                witness: Some(w),
            });
        }
        let imin = pt.diag.imin();
        let mut moved = None;
        let weightings = std::iter::once(None).chain([1e-4, 1e-3, 1e-2, 1e-1].into_iter().map(Some));
        for mu in weightings {
            let weights = match mu {
                None => RealVector::from_fn(n, |i, _| if i == imin { 1.0 } else { 0.0 }),
                Some(m) => {
                    let lo = pt.diag.min();
                    let w = pt.diag.map(|d| (-(d - lo) / (m * scale)).exp());
                    let s = w.sum();
                    w / s
                }
            };
            let grad = prob.l_gradient(&pt, &weights);
            let gnorm = grad.amax();
            if !(gnorm > 0.0) || !gnorm.is_finite() {
                continue;
            }
            let dir = grad / gnorm;
            let mut t = step;
            for _ in 0..MAX_HALVINGS {
                let trial = prob.eval(&pt.l + &dir * t);
                if trial.value > pt.value {
                    moved = Some((t, trial));
                    break;
                }
                t *= 0.5;
            }
            if moved.is_some() {
                break;
            }
        }
        match moved {
            Some((t, next)) => {
                step = (2.0 * t).min(8.0 * opts.step_init);
                pt = next;
                best = best.max(pt.value);
            }
            None => {
                return Ok(WitnessRun {
                    best,
                    iterations: it,
                    witness: None,
                })
            }
        }
    }
    Ok(WitnessRun {
        best,
        iterations: opts.max_iters,
        witness: prob.accept(&pt, opts.witness_margin),
    })
}

fn run_batched<T, F>(opts: &SearchOptions, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<(T, bool)> + Sync,
{
    let jobs = opts.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::PreconditionViolation(format!("thread pool: {e}")))?;
    let mut out = Vec::new();
    let mut start = 0;
    while start < opts.restarts {
        let end = (start + jobs).min(opts.restarts);
        let batch: Vec<Result<(T, bool)>> =
            pool.install(|| (start..end).into_par_iter().map(&f).collect());
        for item in batch {
            let (value, done) = item?;
            out.push(value);
            if done {
                return Ok(out);
            }
        }
        start = end;
    }
    Ok(out)
}

/// Per-restart certificate search results, stopping at the first success.
pub fn certificate_runs(
    a: &RealMatrix,
    b: &RealMatrix,
    opts: &SearchOptions,
) -> Result<Vec<CertificateRun>> {
    check_pair(a, b)?;
    opts.validate()?;
    let mut runs = run_batched(opts, |r| {
        let run = certificate_restart(a, b, opts, r)?;
        let done = run.certificate.is_some();
        Ok((run, done))
    })?;
    if runs.iter().all(|r| r.certificate.is_none()) {
        runs.push(ellipsoid_certificate(a, b, opts)?);
    }
    Ok(runs)
}

/// Multi-start search for a diagonal certificate with `lambda_max <= -cert_margin`.
pub fn search_certificate(
    a: &RealMatrix,
    b: &RealMatrix,
    opts: &SearchOptions,
) -> Result<RiccatiCertificate> {
    let runs = certificate_runs(a, b, opts)?;
    let best = runs.iter().map(|r| r.best).fold(f64::INFINITY, f64::min);
    runs.into_iter()
        .find_map(|r| r.certificate)
        .ok_or(Error::NotFound { best })
}

/// Multi-start search for a strict infeasibility witness.
pub fn search_witness(
    a: &RealMatrix,
    b: &RealMatrix,
    opts: &SearchOptions,
) -> Result<InfeasibilityWitness> {
    check_pair(a, b)?;
    opts.validate()?;
    let runs = run_batched(opts, |r| {
        let run = witness_restart(a, b, opts, r)?;
        let done = run.witness.is_some();
        Ok((run, done))
    })?;
    let best = runs.iter().map(|r| r.best).fold(f64::NEG_INFINITY, f64::max);
    runs.into_iter()
        .find_map(|r| r.witness)
        .ok_or(Error::NotFound { best })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Stable(RiccatiCertificate),
    Unstable(InfeasibilityWitness),
    Unknown,
}

/// Which branch of [`decide`] produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Metzler,
    Triangular,
    Search,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Metzler => "metzler",
            Route::Triangular => "triangular",
            Route::Search => "search",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartDiagnostic {
    pub restart: usize,
    pub certificate_best: Option<f64>,
    pub witness_best: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionResult {
    pub verdict: Verdict,
    pub route: Route,
    pub diagnostics: Vec<RestartDiagnostic>,
}

/// Nonnegative eigenvector for the spectral abscissa of a Metzler matrix,
/// by shifted inverse iteration (the shifted inverse is entrywise nonnegative).
fn perron_vector(m: &RealMatrix) -> Option<RealVector> {
    let n = m.nrows();
    let alpha = spectral_abscissa(m).ok()?;
    let shift = alpha + 1e-6 * (1.0 + m.amax());
    let shifted = RealMatrix::identity(n, n) * shift - m;
    let lu = shifted.lu();
    let mut g = RealVector::from_element(n, 1.0);
    for _ in 0..200 {
        let mut next = lu.solve(&g)?;
        next.apply(|x| *x = x.max(0.0));
        let norm = next.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return None;
        }
        next /= norm;
        let delta = (&next - &g).amax();
        g = next;
        if delta < 1e-15 {
            break;
        }
    }
    Some(g)
}

/// `H = [g; g][g; g]^T` with `g` the Perron vector of `A + B`; its diagonal
/// entries are `g_i ((A+B) g)_i`.
fn metzler_witness(a: &RealMatrix, b: &RealMatrix, margin: f64) -> Option<InfeasibilityWitness> {
    let g = perron_vector(&(a + b))?;
    let gg = &g * g.transpose();
    let w = InfeasibilityWitness::new(gg.clone(), gg.clone(), gg).ok()?;
    let check = verify_witness(a, b, &w, margin).ok()?;
    check.strict.then_some(w)
}

/// Decides diagonal Riccati stability of `(A, B)`.
///
/// Metzler/nonnegative pairs are settled by the Hurwitz test on `A + B` and
/// synthesis; triangular pairs by the diagonal criterion, with a rank-one
/// witness on failure and the certificate search on success. Anything else
/// interleaves certificate and witness restarts until one side produces a
/// verified object or both budgets run out.
pub fn decide(a: &RealMatrix, b: &RealMatrix, opts: &SearchOptions) -> Result<DecisionResult> {
    check_pair(a, b)?;
    opts.validate()?;

    if is_metzler(a, 0.0) && is_nonnegative(b, 0.0) {
        if theorem3_decision(a, b, DEFAULT_TOL)? {
            if let Ok(syn) = synthesize(a, b) {
                return Ok(DecisionResult {
                    verdict: Verdict::Stable(syn.certificate),
                    route: Route::Metzler,
                    diagnostics: Vec::new(),
                });
            }
        } else if let Some(w) = metzler_witness(a, b, opts.witness_margin) {
            return Ok(DecisionResult {
                verdict: Verdict::Unstable(w),
                route: Route::Metzler,
                diagnostics: Vec::new(),
            });
        }
    }

    if triangular_orientation(a, b, 0.0).is_some() {
        if triangular_decision(a, b, DEFAULT_TOL)? {
            let runs = certificate_runs(a, b, opts)?;
            let diagnostics = runs
                .iter()
                .enumerate()
                .map(|(restart, r)| RestartDiagnostic {
                    restart,
                    certificate_best: Some(r.best),
                    witness_best: None,
                })
                .collect();
            let verdict = runs
                .into_iter()
                .find_map(|r| r.certificate)
                .map_or(Verdict::Unknown, Verdict::Stable);
            return Ok(DecisionResult {
                verdict,
                route: Route::Triangular,
                diagnostics,
            });
        }
        if let Ok(w) = triangular_witness(a, b) {
            // Rank-one witnesses are exact: their single nonzero diagonal
            // entry is a_ii + |b_ii| or a_ii, evaluated without cancellation.
            if verify_witness(a, b, &w, 0.0)?.valid {
                return Ok(DecisionResult {
                    verdict: Verdict::Unstable(w),
                    route: Route::Triangular,
                    diagnostics: Vec::new(),
                });
            }
        }
    }

    let runs = run_batched(opts, |r| {
        let cert = certificate_restart(a, b, opts, r)?;
        if cert.certificate.is_some() {
            return Ok(((cert, None), true));
        }
        let wit = witness_restart(a, b, opts, r)?;
        let done = wit.witness.is_some();
        Ok(((cert, Some(wit)), done))
    })?;
    let mut diagnostics = Vec::with_capacity(runs.len());
    let mut verdict = Verdict::Unknown;
    for (restart, (cert, wit)) in runs.into_iter().enumerate() {
        diagnostics.push(RestartDiagnostic {
            restart,
            certificate_best: Some(cert.best),
            witness_best: wit.as_ref().map(|w| w.best),
        });
        if let Some(c) = cert.certificate {
            verdict = Verdict::Stable(c);
        } else if let Some(w) = wit.and_then(|w| w.witness) {
            verdict = Verdict::Unstable(w);
        }
    }
    if verdict == Verdict::Unknown {
        let polish = ellipsoid_certificate(a, b, opts)?;
        diagnostics.push(RestartDiagnostic {
            restart: diagnostics.len(),
            certificate_best: Some(polish.best),
            witness_best: None,
        });
        if let Some(c) = polish.certificate {
            verdict = Verdict::Stable(c);
        }
    }
    Ok(DecisionResult {
        verdict,
        route: Route::Search,
        diagnostics,
    })
}
