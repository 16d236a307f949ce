use rayon::prelude::*;
use serde::Serialize;

use super::{integrate, DelayLVModel, History};
use crate::error::{Error, Result};
use crate::matcore::{PositiveVector, DEFAULT_TOL};
use crate::riccati::{verify_certificate, RiccatiCertificate};

/// Per-history outcome of a boundedness run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    /// `sup ||x(t)||` over the tail `[T/2, T]`.
    pub tail_sup: f64,
    /// `sup ||x(t) - reference||` over the same tail.
    pub tail_sup_offset: f64,
    /// First grid time after which `||x(t)|| <= 1.05 R` holds to the end.
    pub entry_time: f64,
    pub final_state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundednessReport {
    /// Empirical ultimate bound `R`: the largest tail supremum over runs.
    pub r_hat: f64,
    pub runs: Vec<Result<RunSummary>>,
}

/// Norm series, tail offset and final state of one run.
type RawRun = (Vec<f64>, f64, Vec<f64>);

/// Integrates every history and estimates an ultimate bound from the tails.
/// A failing run is reported in place without affecting the others.
pub fn boundedness_experiment(
    model: &DelayLVModel,
    cert: &RiccatiCertificate,
    reference: &PositiveVector,
    histories: &[&History],
    t_end: f64,
    h: f64,
    jobs: usize,
) -> Result<BoundednessReport> {
    verify_certificate(&model.a, &model.b, &cert.pair, DEFAULT_TOL)
        .map_err(|e| Error::CertificateRejected(e.to_string()))?;
    if reference.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            what: "reference",
            expected: model.dim(),
            got: reference.len(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::PreconditionViolation(format!("thread pool: {e}")))?;
    let norms: Vec<Result<RawRun>> = pool.install(|| {
        histories
            .par_iter()
            .map(|hist| {
                let traj = integrate(model, *hist, h, t_end)?;
                let tail_start = traj.steps() / 2;
                let norms: Vec<f64> = traj.states().iter().map(|x| x.norm()).collect();
                let offset = traj.states()[tail_start..]
                    .iter()
                    .map(|x| (x - reference.as_vector()).norm())
                    .fold(0.0, f64::max);
                Ok((norms, offset, traj.last().as_slice().to_vec()))
            })
            .collect()
    });

    let tail_sup = |norms: &[f64]| norms[(norms.len() - 1) / 2..].iter().copied().fold(0.0, f64::max);
    let r_hat = norms
        .iter()
        .flatten()
        .map(|(n, _, _)| tail_sup(n))
        .fold(0.0, f64::max);
    let limit = 1.05 * r_hat;
    let runs = norms
        .into_iter()
        .map(|run| {
            run.map(|(norms, offset, final_state)| {
                let inside = norms.iter().rev().take_while(|&&v| v <= limit).count();
                RunSummary {
                    tail_sup: tail_sup(&norms),
                    tail_sup_offset: offset,
                    entry_time: (norms.len() - inside) as f64 * h,
                    final_state,
                }
            })
        })
        .collect();
    Ok(BoundednessReport { r_hat, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lv::{constant_history, mutualistic_equilibrium};
    use crate::matcore::{RealMatrix, RealVector};
    use crate::synth::synthesize;

    fn model() -> DelayLVModel {
        DelayLVModel::classical(
            RealMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.5, -2.0]),
            RealMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.1, 0.2]),
            RealVector::from_element(2, 1.0),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_history_enters_immediately() {
        let m = model();
        let xbar = mutualistic_equilibrium(&m).unwrap();
        let cert = synthesize(&m.a, &m.b).unwrap().certificate;
        let hist = constant_history(xbar.as_vector().clone());
        let r = boundedness_experiment(&m, &cert, &xbar, &[&hist], 10.0, 0.25, 1).unwrap();
        let run = r.runs[0].as_ref().unwrap();
        assert_eq!(run.entry_time, 0.0);
        assert!((r.r_hat - xbar.as_vector().norm()).abs() <= 1e-10);
    }

    #[test]
    fn failures_stay_local() {
        let m = model();
        let xbar = mutualistic_equilibrium(&m).unwrap();
        let cert = synthesize(&m.a, &m.b).unwrap().certificate;
        let good = constant_history(RealVector::from_row_slice(&[0.5, 1.2]));
        let bad = constant_history(RealVector::from_row_slice(&[-1.0, 1.2]));
        let r = boundedness_experiment(&m, &cert, &xbar, &[&good, &bad], 40.0, 0.25, 2).unwrap();
        assert!(r.runs[0].is_ok());
        assert!(r.runs[1].is_err());
        assert!((r.r_hat - xbar.as_vector().norm()).abs() <= 0.05 * xbar.as_vector().norm());
    }
}
