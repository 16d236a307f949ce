//! Command-line front end.
//!
//! Exit codes: 0 stable / valid / success, 1 unstable / invalid, 2 unknown
//! or numerical failure, 64 usage or I/O error, 65 malformed input, 66
//! checksum mismatch between a certificate or witness and its problem.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::io::{to_json_string, write_trajectory_csv, CertificateFile, FormatError, ProblemFile, WitnessFile};
use crate::lv::{
    boundedness_experiment, constant_history, integrate, interior_equilibrium, verify_decay, DelayLVModel,
    History,
};
use crate::matcore::{PositiveVector, RealVector, DEFAULT_TOL};
use crate::riccati::{verify_certificate, RiccatiCertificate};
use crate::search::{decide, DecisionResult, SearchOptions, Verdict};
use crate::structured::{verify_witness, InfeasibilityWitness, DIAG_TOL};
use crate::synth::synthesize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_CHECKSUM: i32 = 66;

#[derive(Parser, Debug)]
#[command(name = "drstab", version, about = "Diagonal Riccati stability certificates and witnesses")]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide diagonal Riccati stability; exit 0 stable, 1 unstable, 2 unknown.
    Decide {
        problem: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        /// Also write the verdict JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a certificate for Metzler A and nonnegative B.
    Synth {
        problem: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify a certificate file against a problem; exit 0 iff valid.
    Verify {
        problem: PathBuf,
        #[arg(long)]
        cert: PathBuf,
        /// Required margin: lambda_max(S) < -tol.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Verify a witness file, or search for one when no file is given;
    /// exit 0 iff a valid witness is at hand.
    Witness {
        problem: PathBuf,
        witness: Option<PathBuf>,
        /// Allowed negativity of the witness diagonal.
        #[arg(long, default_value_t = DIAG_TOL)]
        tol: f64,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Delayed Lotka-Volterra tools.
    Lv {
        #[command(subcommand)]
        command: LvCommand,
    },
}

#[derive(Args, Debug, Clone)]
struct SearchArgs {
    #[arg(long, default_value_t = SearchOptions::default().restarts)]
    restarts: usize,
    #[arg(long, default_value_t = SearchOptions::default().max_iters)]
    max_iters: usize,
    #[arg(long, default_value_t = SearchOptions::default().cert_margin)]
    cert_margin: f64,
    #[arg(long, default_value_t = SearchOptions::default().witness_margin)]
    witness_margin: f64,
    #[arg(long, default_value_t = SearchOptions::default().step_init)]
    step_init: f64,
    #[arg(long, default_value_t = SearchOptions::default().rng_seed)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl SearchArgs {
    fn options(&self) -> SearchOptions {
        SearchOptions {
            restarts: self.restarts,
            max_iters: self.max_iters,
            cert_margin: self.cert_margin,
            witness_margin: self.witness_margin,
            rng_seed: self.seed,
            step_init: self.step_init,
            jobs: self.jobs,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SimArgs {
    model: PathBuf,
    /// Delay; overrides the model's "tau".
    #[arg(long)]
    tau: Option<f64>,
    /// Step size; must divide tau. Defaults to tau/64, or 1/64 when tau = 0.
    #[arg(long)]
    h: Option<f64>,
    /// Horizon.
    #[arg(long = "T", default_value_t = 100.0)]
    t_end: f64,
    /// Constant history "x1,...,xn" or "equilibrium".
    #[arg(long, default_value = "equilibrium")]
    history: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum LvCommand {
    /// Interior equilibrium x with c + (A+B) f(x) = 0.
    Equilibrium { model: PathBuf },
    /// Integrate and write the trajectory as CSV.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Check decay of the Lyapunov-Krasovskii functional; exit 0 iff no violations.
    CheckDecay {
        #[command(flatten)]
        sim: SimArgs,
        /// Certificate file; otherwise one is computed.
        #[arg(long)]
        cert: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Empirical ultimate-boundedness experiment over random histories.
    Boundedness {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        cert: Option<PathBuf>,
        /// Number of random histories.
        #[arg(long, default_value_t = 10)]
        histories: usize,
        /// Bound on the sup-norm of the random histories.
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[command(flatten)]
        search: SearchArgs,
    },
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        let code = match e {
            FormatError::ChecksumMismatch { .. } => EXIT_CHECKSUM,
            _ => EXIT_DATA,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotSquare { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::NotPositive(_)
            | Error::InvalidFunction(_)
            | Error::InvalidWitness(_)
            | Error::InvalidStep(_) => EXIT_DATA,
            Error::PreconditionViolation(_)
            | Error::CertificateRejected(_)
            | Error::InversionFailure { .. }
            | Error::NotNegativeDefinite { .. } => EXIT_NEGATIVE,
            _ => EXIT_UNKNOWN,
        };
        Failure::new(code, e.to_string())
    }
}

type CliResult = Result<i32, Failure>;

struct Ctx {
    quiet: bool,
}

impl Ctx {
    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("drstab: {msg}");
        }
    }

    /// Prints `text` on stdout and, if requested, writes it to `out`.
    fn emit(&self, text: &str, out: Option<&Path>) -> Result<(), Failure> {
        print!("{text}");
        if let Some(path) = out {
            write_file(path, text)?;
            self.log(&format!("wrote {}", path.display()));
        }
        Ok(())
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))
}

fn load_problem(path: &Path) -> Result<ProblemFile, Failure> {
    let text = read_file(path)?;
    ProblemFile::parse(&text).map_err(|e| Failure::from(e).prefixed(path))
}

impl Failure {
    fn prefixed(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let ctx = Ctx { quiet: cli.quiet };
    match dispatch(&ctx, cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("drstab: error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(ctx: &Ctx, command: Command) -> CliResult {
    match command {
        Command::Decide { problem, search, out } => cmd_decide(ctx, &problem, &search.options(), out.as_deref()),
        Command::Synth { problem, out } => cmd_synth(ctx, &problem, out.as_deref()),
        Command::Verify { problem, cert, tol } => cmd_verify(ctx, &problem, &cert, tol),
        Command::Witness {
            problem,
            witness,
            tol,
            search,
            out,
        } => cmd_witness(ctx, &problem, witness.as_deref(), tol, &search.options(), out.as_deref()),
        Command::Lv { command } => match command {
            LvCommand::Equilibrium { model } => cmd_equilibrium(ctx, &model),
            LvCommand::Simulate { sim } => cmd_simulate(ctx, &sim),
            LvCommand::CheckDecay { sim, cert, search } => cmd_check_decay(ctx, &sim, cert.as_deref(), &search.options()),
            LvCommand::Boundedness {
                sim,
                cert,
                histories,
                radius,
                search,
            } => cmd_boundedness(ctx, &sim, cert.as_deref(), histories, radius, &search.options()),
        },
    }
}

fn value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn witness_value(a: &crate::RealMatrix, b: &crate::RealMatrix, w: &InfeasibilityWitness, checksum: &str) -> Value {
    let min_diag = w.diagonal(a, b).min();
    value(&WitnessFile::new(w, min_diag, checksum.to_string()))
}

fn verdict_json(p: &ProblemFile, result: &DecisionResult) -> Value {
    let checksum = p.checksum();
    let diagnostics: Vec<Value> = result
        .diagnostics
        .iter()
        .map(|d| {
            json!({
                "restart": d.restart,
                "certificate_best": d.certificate_best,
                "witness_best": d.witness_best,
            })
        })
        .collect();
    let mut obj = json!({
        "route": result.route.as_str(),
        "checksum": checksum,
        "diagnostics": diagnostics,
    });
    let map = obj.as_object_mut().expect("object literal");
    match &result.verdict {
        Verdict::Stable(cert) => {
            map.insert("verdict".into(), "Stable".into());
            map.insert("certificate".into(), value(&CertificateFile::new(cert, checksum)));
        }
        Verdict::Unstable(w) => {
            map.insert("verdict".into(), "Unstable".into());
            map.insert("witness".into(), witness_value(&p.a, &p.b, w, &checksum));
        }
        Verdict::Unknown => {
            map.insert("verdict".into(), "Unknown".into());
        }
    }
    obj
}

fn cmd_decide(ctx: &Ctx, path: &Path, opts: &SearchOptions, out: Option<&Path>) -> CliResult {
    let p = load_problem(path)?;
    let result = decide(&p.a, &p.b, opts)?;
    let code = match result.verdict {
        Verdict::Stable(_) => EXIT_OK,
        Verdict::Unstable(_) => EXIT_NEGATIVE,
        Verdict::Unknown => EXIT_UNKNOWN,
    };
    ctx.log(&format!(
        "{} via {} route",
        match result.verdict {
            Verdict::Stable(_) => "stable",
            Verdict::Unstable(_) => "unstable",
            Verdict::Unknown => "unknown",
        },
        result.route.as_str()
    ));
    ctx.emit(&to_json_string(&verdict_json(&p, &result)), out)?;
    Ok(code)
}

fn cmd_synth(ctx: &Ctx, path: &Path, out: Option<&Path>) -> CliResult {
    let p = load_problem(path)?;
    let syn = synthesize(&p.a, &p.b).map_err(|e| match e {
        Error::PreconditionViolation(ref m) if m.contains("Metzler") || m.contains("nonnegative") => {
            Failure::new(EXIT_DATA, e.to_string())
        }
        other => Failure::from(other),
    })?;
    ctx.log(&format!("certificate with lambda_max = {:e}", syn.certificate.lambda_max));
    let file = CertificateFile::new(&syn.certificate, p.checksum());
    ctx.emit(&file.to_json(), out)?;
    Ok(EXIT_OK)
}

fn cmd_verify(ctx: &Ctx, path: &Path, cert: &Path, tol: f64) -> CliResult {
    let p = load_problem(path)?;
    let file = CertificateFile::parse(&read_file(cert)?, &p.checksum()).map_err(|e| Failure::from(e).prefixed(cert))?;
    let pair = file.pair()?;
    let (valid, lambda_max, message) = match verify_certificate(&p.a, &p.b, &pair, tol) {
        Ok(c) => (true, c.lambda_max, "certificate verified".to_string()),
        Err(Error::NotNegativeDefinite { lambda_max }) => (false, lambda_max, "block matrix is not negative definite".into()),
        Err(e @ Error::SchurInconsistency { .. }) => return Err(Failure::new(EXIT_UNKNOWN, e.to_string())),
        Err(e) => return Err(e.into()),
    };
    ctx.log(&message);
    let report = json!({ "valid": valid, "lambda_max": lambda_max, "checksum": p.checksum() });
    ctx.emit(&to_json_string(&report), None)?;
    Ok(if valid { EXIT_OK } else { EXIT_NEGATIVE })
}

fn cmd_witness(
    ctx: &Ctx,
    path: &Path,
    witness: Option<&Path>,
    tol: f64,
    opts: &SearchOptions,
    out: Option<&Path>,
) -> CliResult {
    let p = load_problem(path)?;
    let checksum = p.checksum();
    let Some(wpath) = witness else {
        let result = decide(&p.a, &p.b, opts)?;
        return match &result.verdict {
            Verdict::Unstable(w) => {
                ctx.log(&format!("witness found via {} route", result.route.as_str()));
                ctx.emit(&to_json_string(&witness_value(&p.a, &p.b, w, &checksum)), out)?;
                Ok(EXIT_OK)
            }
            Verdict::Stable(_) => {
                ctx.log("pair is certified stable; no witness exists");
                ctx.emit(&to_json_string(&verdict_json(&p, &result)), out)?;
                Ok(EXIT_NEGATIVE)
            }
            Verdict::Unknown => {
                ctx.log("no witness found within the search budget");
                Ok(EXIT_UNKNOWN)
            }
        };
    };
    let file = WitnessFile::parse(&read_file(wpath)?, &checksum).map_err(|e| Failure::from(e).prefixed(wpath))?;
    let w = file.witness()?;
    let check = verify_witness(&p.a, &p.b, &w, tol)?;
    ctx.log(if check.valid { "witness verified" } else { "witness rejected" });
    let report = json!({
        "valid": check.valid,
        "strict": check.strict,
        "min_diag": check.min_diag,
        "diagonal": check.diagonal.as_slice(),
        "checksum": checksum,
    });
    ctx.emit(&to_json_string(&report), out)?;
    Ok(if check.valid { EXIT_OK } else { EXIT_NEGATIVE })
}

fn load_model(sim: &SimArgs) -> Result<(ProblemFile, DelayLVModel), Failure> {
    let p = load_problem(&sim.model)?;
    let model = p.model(sim.tau).map_err(|e| Failure::from(e).prefixed(&sim.model))?;
    Ok((p, model))
}

fn cmd_equilibrium(ctx: &Ctx, path: &Path) -> CliResult {
    let p = load_problem(path)?;
    let model = p.model(None).map_err(|e| Failure::from(e).prefixed(path))?;
    let x = interior_equilibrium(&model)?;
    ctx.log(&format!(
        "equilibrium ({})",
        x.as_slice().iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", ")
    ));
    let report = json!({
        "equilibrium": x.as_slice(),
        "residual": model.equilibrium_residual(x.as_vector()),
    });
    ctx.emit(&to_json_string(&report), None)?;
    Ok(EXIT_OK)
}

fn step_size(sim: &SimArgs, model: &DelayLVModel) -> f64 {
    sim.h.unwrap_or(if model.tau > 0.0 { model.tau / 64.0 } else { 1.0 / 64.0 })
}

fn history_state(sim: &SimArgs, model: &DelayLVModel) -> Result<RealVector, Failure> {
    if sim.history == "equilibrium" {
        return Ok(interior_equilibrium(model)?.into_inner());
    }
    let values: Result<Vec<f64>, _> = sim.history.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let values = values.map_err(|e| Failure::new(EXIT_USAGE, format!("--history: {e}")))?;
    if values.len() != model.dim() {
        return Err(Failure::new(
            EXIT_USAGE,
            format!("--history has {} entries, model has {} species", values.len(), model.dim()),
        ));
    }
    Ok(RealVector::from_vec(values))
}

fn cmd_simulate(ctx: &Ctx, sim: &SimArgs) -> CliResult {
    let (_, model) = load_model(sim)?;
    let h = step_size(sim, &model);
    let hist = constant_history(history_state(sim, &model)?);
    let traj = integrate(&model, &hist, h, sim.t_end)?;
    ctx.log(&format!("{} steps, {} local halvings", traj.steps(), traj.halvings()));
    let mut buf = Vec::new();
    write_trajectory_csv(&traj, &mut buf).expect("writing to memory");
    let csv = String::from_utf8(buf).expect("ASCII output");
    match &sim.out {
        Some(path) => {
            write_file(path, &csv)?;
            ctx.log(&format!("wrote {}", path.display()));
        }
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

/// Loads `--cert` or obtains one from [`decide`].
fn certificate_for(
    ctx: &Ctx,
    p: &ProblemFile,
    cert: Option<&Path>,
    opts: &SearchOptions,
) -> Result<Option<RiccatiCertificate>, Failure> {
    if let Some(path) = cert {
        let file = CertificateFile::parse(&read_file(path)?, &p.checksum()).map_err(|e| Failure::from(e).prefixed(path))?;
        let pair = file.pair()?;
        return Ok(Some(RiccatiCertificate {
            pair,
            lambda_max: file.lambda_max,
            beta: file.beta,
        }));
    }
    match decide(&p.a, &p.b, opts)?.verdict {
        Verdict::Stable(c) => Ok(Some(c)),
        Verdict::Unstable(_) => {
            ctx.log("pair has no diagonal Riccati certificate");
            Ok(None)
        }
        Verdict::Unknown => {
            ctx.log("no certificate found within the search budget");
            Ok(None)
        }
    }
}

fn cmd_check_decay(ctx: &Ctx, sim: &SimArgs, cert: Option<&Path>, opts: &SearchOptions) -> CliResult {
    let (p, model) = load_model(sim)?;
    let Some(cert) = certificate_for(ctx, &p, cert, opts)? else {
        return Ok(EXIT_UNKNOWN);
    };
    let xbar = interior_equilibrium(&model)?.into_inner();
    let h = step_size(sim, &model);
    let hist = constant_history(history_state(sim, &model)?);
    let traj = integrate(&model, &hist, h, sim.t_end)?;
    let report = verify_decay(&model, &cert, &xbar, &traj)?;
    ctx.log(&format!(
        "{} violations over {} steps (worst margin {:e})",
        report.violations, report.steps, report.worst_margin
    ));
    let mut obj = value(&report);
    let map = obj.as_object_mut().expect("struct serializes to an object");
    map.insert("tau".into(), value(&model.tau));
    map.insert("h".into(), value(&h));
    map.insert("final_state".into(), value(&traj.last().as_slice()));
    map.insert("equilibrium".into(), value(&xbar.as_slice()));
    ctx.emit(&to_json_string(&obj), sim.out.as_deref())?;
    Ok(if report.violations == 0 { EXIT_OK } else { EXIT_NEGATIVE })
}

/// Smooth positive history `a_i (1 + sin(w_i t + phi_i) / 2)` with
/// `||phi||_tau <= radius`.
fn random_history(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> impl Fn(f64) -> RealVector + Sync {
    let base = RealVector::from_fn(n, |_, _| rng.random_range(0.05..1.0));
    let scale = radius * rng.random_range(0.1..1.0) / (1.5 * base.norm());
    let amp = base * scale;
    let freq: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let phase: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    move |t| RealVector::from_fn(n, |i, _| amp[i] * (1.0 + 0.5 * (freq[i] * t + phase[i]).sin()))
}

fn cmd_boundedness(
    ctx: &Ctx,
    sim: &SimArgs,
    cert: Option<&Path>,
    histories: usize,
    radius: f64,
    opts: &SearchOptions,
) -> CliResult {
    if !(radius.is_finite() && radius > 0.0) || histories == 0 {
        return Err(Failure::new(EXIT_USAGE, "--radius must be positive and --histories at least 1"));
    }
    let (p, model) = load_model(sim)?;
    let Some(cert) = certificate_for(ctx, &p, cert, opts)? else {
        return Ok(EXIT_UNKNOWN);
    };
    let reference = interior_equilibrium(&model)
        .unwrap_or_else(|_| PositiveVector::new(RealVector::from_element(model.dim(), 1.0)).expect("ones"));
    let h = step_size(sim, &model);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);
    let hists: Vec<_> = (0..histories).map(|_| random_history(&mut rng, model.dim(), radius)).collect();
    let refs: Vec<&History> = hists.iter().map(|f| f as &History).collect();
    let report = boundedness_experiment(&model, &cert, &reference, &refs, sim.t_end, h, opts.jobs)?;
    let runs: Vec<Value> = report
        .runs
        .iter()
        .map(|r| match r {
            Ok(s) => value(s),
            Err(e) => json!({ "error": e.to_string() }),
        })
        .collect();
    let failed = report.runs.iter().filter(|r| r.is_err()).count();
    ctx.log(&format!("R = {:.6} over {} runs ({} failed)", report.r_hat, runs.len(), failed));
    let obj = json!({
        "r_hat": report.r_hat,
        "reference": reference.as_slice(),
        "tau": model.tau,
        "h": h,
        "runs": runs,
    });
    ctx.emit(&to_json_string(&obj), sim.out.as_deref())?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_UNKNOWN })
}
