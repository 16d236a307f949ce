//! JSON problem, certificate and witness files, and CSV trajectory export.
//!
//! Matrices are row-major arrays of arrays. Emitted floats carry 17
//! significant digits so every file re-parses to the same bits.

use std::io::Write;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::lv::{DelayLVModel, InteractionFunction, Trajectory};
use crate::matcore::{RealMatrix, RealVector};
use crate::riccati::{DiagonalPair, RiccatiCertificate};
use crate::structured::InfeasibilityWitness;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing key \"{0}\"")]
    MissingKey(String),
    #[error("invalid value for key \"{key}\": {reason}")]
    InvalidKey { key: String, reason: String },
    #[error("checksum mismatch: file has {found}, problem has {expected}")]
    ChecksumMismatch { expected: String, found: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> FormatError {
    FormatError::InvalidKey {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn parse_object(text: &str) -> Result<Map<String, Value>, FormatError> {
    let value: Value = serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(invalid("<root>", "expected a JSON object")),
    }
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, FormatError> {
    obj.get(key).ok_or_else(|| FormatError::MissingKey(key.to_string()))
}

fn number(v: &Value, key: &str) -> Result<f64, FormatError> {
    let x = v.as_f64().ok_or_else(|| invalid(key, "expected a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(key, "number is not finite"))
    }
}

fn vector(v: &Value, key: &str) -> Result<Vec<f64>, FormatError> {
    v.as_array()
        .ok_or_else(|| invalid(key, "expected an array of numbers"))?
        .iter()
        .map(|x| number(x, key))
        .collect()
}

fn square_matrix(v: &Value, key: &str) -> Result<RealMatrix, FormatError> {
    let rows = v.as_array().ok_or_else(|| invalid(key, "expected an array of rows"))?;
    let n = rows.len();
    if n == 0 {
        return Err(invalid(key, "matrix is empty"));
    }
    let mut data = Vec::with_capacity(n * n);
    for (i, row) in rows.iter().enumerate() {
        let row = vector(row, key)?;
        if row.len() != n {
            return Err(invalid(key, format!("row {i} has {} entries, expected {n}", row.len())));
        }
        data.extend(row);
    }
    Ok(RealMatrix::from_row_slice(n, n, &data))
}

fn matrix_rows(m: &RealMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn function(v: &Value, key: &str) -> Result<InteractionFunction, FormatError> {
    let bad = |reason: String| invalid(key, reason);
    let f = match v {
        Value::String(s) => match s.as_str() {
            "identity" => InteractionFunction::Identity,
            "saturating" => InteractionFunction::Saturating,
            other => return Err(bad(format!("unknown function kind \"{other}\""))),
        },
        Value::Object(o) if o.len() == 1 => {
            let (kind, arg) = o.iter().next().expect("one entry");
            match kind.as_str() {
                "power" => InteractionFunction::Power {
                    alpha: number(arg, key)?,
                },
                "tabulated" => {
                    let t = arg.as_object().ok_or_else(|| bad("tabulated expects an object".into()))?;
                    let x = vector(required(t, "x").map_err(|_| bad("tabulated needs \"x\"".into()))?, key)?;
                    let y = vector(required(t, "y").map_err(|_| bad("tabulated needs \"y\"".into()))?, key)?;
                    let attested = t.get("attested").and_then(Value::as_bool).unwrap_or(false);
                    InteractionFunction::Tabulated { x, y, attested }
                }
                other => return Err(bad(format!("unknown function kind \"{other}\""))),
            }
        }
        _ => return Err(bad("expected \"identity\", \"saturating\", {\"power\": a} or {\"tabulated\": {...}}".into())),
    };
    f.validate().map_err(|e| bad(e.to_string()))?;
    Ok(f)
}

fn functions(v: &Value, key: &str, n: usize) -> Result<Vec<InteractionFunction>, FormatError> {
    match v {
        Value::Array(items) => {
            if items.len() != n {
                return Err(invalid(key, format!("expected {n} functions, got {}", items.len())));
            }
            items.iter().map(|item| function(item, key)).collect()
        }
        single => Ok(vec![function(single, key)?; n]),
    }
}

/// Matrix pair plus the optional Lotka-Volterra fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub a: RealMatrix,
    pub b: RealMatrix,
    pub c: Option<RealVector>,
    pub tau: Option<f64>,
    pub f: Option<Vec<InteractionFunction>>,
    pub g: Option<Vec<InteractionFunction>>,
}

impl ProblemFile {
    pub fn new(a: RealMatrix, b: RealMatrix) -> Self {
        Self {
            a,
            b,
            c: None,
            tau: None,
            f: None,
            g: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let obj = parse_object(text)?;
        let a = square_matrix(required(&obj, "A")?, "A")?;
        let b = square_matrix(required(&obj, "B")?, "B")?;
        let n = a.nrows();
        if b.nrows() != n {
            return Err(invalid("B", format!("dimension {} does not match A ({n})", b.nrows())));
        }
        let c = match obj.get("c") {
            Some(v) => {
                let c = vector(v, "c")?;
                if c.len() != n {
                    return Err(invalid("c", format!("expected {n} entries, got {}", c.len())));
                }
                Some(RealVector::from_vec(c))
            }
            None => None,
        };
        let tau = match obj.get("tau") {
            Some(v) => {
                let t = number(v, "tau")?;
                if t < 0.0 {
                    return Err(invalid("tau", "delay must be nonnegative"));
                }
                Some(t)
            }
            None => None,
        };
        let f = obj.get("f").map(|v| functions(v, "f", n)).transpose()?;
        let g = obj.get("g").map(|v| functions(v, "g", n)).transpose()?;
        Ok(Self { a, b, c, tau, f, g })
    }

    /// SHA-256 over the dimension and the little-endian bits of `A` then
    /// `B`, row-major.
    pub fn checksum(&self) -> String {
        checksum(&self.a, &self.b)
    }

    /// Builds the delay model; `c`, `f` and `g` are required, `tau` defaults
    /// to 0 unless overridden.
    pub fn model(&self, tau_override: Option<f64>) -> Result<DelayLVModel, FormatError> {
        let c = self.c.clone().ok_or_else(|| FormatError::MissingKey("c".into()))?;
        let f = self.f.clone().ok_or_else(|| FormatError::MissingKey("f".into()))?;
        let g = self.g.clone().ok_or_else(|| FormatError::MissingKey("g".into()))?;
        let tau = tau_override.or(self.tau).unwrap_or(0.0);
        DelayLVModel::new(self.a.clone(), self.b.clone(), c, tau, f, g).map_err(|e| {
            let key = match e {
                crate::Error::InvalidStep(_) => "tau",
                crate::Error::InvalidFunction(_) => "f",
                _ => "c",
            };
            invalid(key, e.to_string())
        })
    }

    pub fn to_json(&self) -> String {
        let mut obj = Map::new();
        obj.insert("A".into(), to_value(&matrix_rows(&self.a)));
        obj.insert("B".into(), to_value(&matrix_rows(&self.b)));
        if let Some(c) = &self.c {
            obj.insert("c".into(), to_value(&c.as_slice()));
        }
        if let Some(t) = self.tau {
            obj.insert("tau".into(), to_value(&t));
        }
        for (key, fs) in [("f", &self.f), ("g", &self.g)] {
            if let Some(fs) = fs {
                obj.insert(key.into(), Value::Array(fs.iter().map(function_value).collect()));
            }
        }
        to_json_string(&Value::Object(obj))
    }
}

fn function_value(f: &InteractionFunction) -> Value {
    match f {
        InteractionFunction::Identity => Value::String("identity".into()),
        InteractionFunction::Saturating => Value::String("saturating".into()),
        InteractionFunction::Power { alpha } => serde_json::json!({ "power": alpha }),
        InteractionFunction::Tabulated { x, y, attested } => {
            serde_json::json!({ "tabulated": { "x": x, "y": y, "attested": attested } })
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

pub fn checksum(a: &RealMatrix, b: &RealMatrix) -> String {
    let mut hasher = Sha256::new();
    hasher.update((a.nrows() as u64).to_le_bytes());
    for m in [a, b] {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                hasher.update(m[(i, j)].to_le_bytes());
            }
        }
    }
    format!("sha256:{}", hex::encode(hasher.finalize()))
}

fn check_checksum(obj: &Map<String, Value>, expected: &str) -> Result<(), FormatError> {
    let found = required(obj, "checksum")?
        .as_str()
        .ok_or_else(|| invalid("checksum", "expected a string"))?;
    if found == expected {
        Ok(())
    } else {
        Err(FormatError::ChecksumMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

/// Accepts either the bare object or an envelope holding it under `key`
/// (as emitted by `decide`).
fn unwrap_envelope(mut obj: Map<String, Value>, key: &str) -> Map<String, Value> {
    match obj.remove(key) {
        Some(Value::Object(inner)) => inner,
        Some(other) => {
            obj.insert(key.to_string(), other);
            obj
        }
        None => obj,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateFile {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub lambda_max: f64,
    pub beta: f64,
    pub checksum: String,
}

impl CertificateFile {
    pub fn new(cert: &RiccatiCertificate, checksum: String) -> Self {
        Self {
            p: cert.pair.p().as_slice().to_vec(),
            q: cert.pair.q().as_slice().to_vec(),
            lambda_max: cert.lambda_max,
            beta: cert.beta,
            checksum,
        }
    }

    /// Parses and checks the checksum against `expected`.
    pub fn parse(text: &str, expected: &str) -> Result<Self, FormatError> {
        let obj = unwrap_envelope(parse_object(text)?, "certificate");
        check_checksum(&obj, expected)?;
        let p = vector(required(&obj, "p")?, "p")?;
        let q = vector(required(&obj, "q")?, "q")?;
        if p.len() != q.len() {
            return Err(invalid("q", "length differs from p"));
        }
        Ok(Self {
            p,
            q,
            lambda_max: number(required(&obj, "lambda_max")?, "lambda_max")?,
            beta: number(required(&obj, "beta")?, "beta")?,
            checksum: expected.to_string(),
        })
    }

    pub fn pair(&self) -> Result<DiagonalPair, FormatError> {
        DiagonalPair::from_slices(&self.p, &self.q).map_err(|e| invalid("p", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessFile {
    #[serde(rename = "H11")]
    pub h11: Vec<Vec<f64>>,
    #[serde(rename = "H12")]
    pub h12: Vec<Vec<f64>>,
    #[serde(rename = "H22")]
    pub h22: Vec<Vec<f64>>,
    pub min_diag: f64,
    pub checksum: String,
}

impl WitnessFile {
    pub fn new(w: &InfeasibilityWitness, min_diag: f64, checksum: String) -> Self {
        Self {
            h11: matrix_rows(w.h11()),
            h12: matrix_rows(w.h12()),
            h22: matrix_rows(w.h22()),
            min_diag,
            checksum,
        }
    }

    /// Parses and checks the checksum against `expected`. `min_diag` is
    /// optional on input; it is recomputed on verification anyway.
    pub fn parse(text: &str, expected: &str) -> Result<Self, FormatError> {
        let obj = unwrap_envelope(parse_object(text)?, "witness");
        check_checksum(&obj, expected)?;
        let rows = |key: &str| -> Result<Vec<Vec<f64>>, FormatError> {
            Ok(matrix_rows(&square_matrix(required(&obj, key)?, key)?))
        };
        let min_diag = match obj.get("min_diag") {
            Some(v) => number(v, "min_diag")?,
            None => f64::NAN,
        };
        Ok(Self {
            h11: rows("H11")?,
            h12: rows("H12")?,
            h22: rows("H22")?,
            min_diag,
            checksum: expected.to_string(),
        })
    }

    pub fn witness(&self) -> Result<InfeasibilityWitness, FormatError> {
        let m = |rows: &Vec<Vec<f64>>, key: &str| -> Result<RealMatrix, FormatError> {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(invalid(key, "matrix is not square"));
            }
            Ok(RealMatrix::from_row_iterator(n, n, rows.iter().flatten().copied()))
        };
        InfeasibilityWitness::new(m(&self.h11, "H11")?, m(&self.h12, "H12")?, m(&self.h22, "H22")?)
            .map_err(|e| invalid("H11", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }
}

/// Formats `x` with 17 significant digits, the shortest fixed width that
/// round-trips every `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Digits17;

impl serde_json::ser::Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }
}

/// Compact JSON with fixed 17-significant-digit floats and a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17);
    value.serialize(&mut ser).expect("in-memory serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// Writes `t,x1,...,xn` rows for every grid point from `t = 0`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: &mut W) -> std::io::Result<()> {
    let n = traj.state(0).len();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (k, x) in traj.states().iter().enumerate() {
        write!(out, "{}", format_f64(traj.time(k)))?;
        for v in x.iter() {
            write!(out, ",{}", format_f64(*v))?;
        }
        writeln!(out)?;
    }
    Ok(())
}
