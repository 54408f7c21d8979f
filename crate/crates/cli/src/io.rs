//! JSON problem files.
//!
//! ```json
//! {
//!   "n": 2,
//!   "m": 1,
//!   "A": [[1, 1], [0, 1]],
//!   "B": [[1, 2], [3, 4]],
//!   "C": [[[2, 0], [0, 1]]],
//!   "r": [[3, 2]],
//!   "s": [[4, 3]],
//!   "g": [[1, 3]]
//! }
//! ```
//!
//! Matrices are row-major nested arrays. A scalar is either a bare number or
//! a `[re, im]` pair; `g` is optional.

use std::fmt::Write as _;
use std::path::Path;

use nepv::{CMatrix, NepvProblem, C64};
use serde_json::{Map, Value};
use thiserror::Error;

const FIELDS: [&str; 8] = ["n", "m", "A", "B", "C", "r", "s", "g"];

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub problem: NepvProblem,
    pub g: Option<Vec<Vec<C64>>>,
}

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> FileError {
    FileError::Field {
        field: field.into(),
        message: message.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), FileError> {
    std::fs::write(path, text).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_json(text: &str) -> Result<Value, FileError> {
    serde_json::from_str(text).map_err(|e| FileError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn load_problem(path: &Path) -> Result<ProblemFile, FileError> {
    parse_problem(&read_text(path)?)
}

pub fn parse_problem(text: &str) -> Result<ProblemFile, FileError> {
    let root = parse_json(text)?;
    let obj = root
        .as_object()
        .ok_or_else(|| field_err("(root)", "expected a JSON object"))?;
    if let Some(key) = obj.keys().find(|k| !FIELDS.contains(&k.as_str())) {
        return Err(field_err(key.clone(), "unknown field"));
    }
    let n = count(obj, "n")?;
    let m = count(obj, "m")?;
    let a = matrix(required(obj, "A")?, "A", n)?;
    let b = matrix(required(obj, "B")?, "B", n)?;
    let c = list(required(obj, "C")?, "C", m, |v, path| matrix(v, path, n))?;
    let r = list(required(obj, "r")?, "r", m, |v, path| vector(v, path, n))?;
    let s = list(required(obj, "s")?, "s", m, |v, path| vector(v, path, n))?;
    let g = match obj.get("g") {
        None | Some(Value::Null) => None,
        Some(v) => Some(list(v, "g", m, |v, path| vector(v, path, n))?),
    };
    let problem = NepvProblem::new(a, b, c, r, s).map_err(|e| field_err("(problem)", e.to_string()))?;
    Ok(ProblemFile { problem, g })
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, FileError> {
    obj.get(key).ok_or_else(|| field_err(key, "missing field"))
}

fn count(obj: &Map<String, Value>, key: &str) -> Result<usize, FileError> {
    required(obj, key)?
        .as_u64()
        .filter(|&k| k > 0)
        .map(|k| k as usize)
        .ok_or_else(|| field_err(key, "expected a positive integer"))
}

fn array<'a>(v: &'a Value, path: &str, len: usize) -> Result<&'a [Value], FileError> {
    let items = v
        .as_array()
        .ok_or_else(|| field_err(path, "expected an array"))?;
    if items.len() != len {
        return Err(field_err(path, format!("expected {len} entries, found {}", items.len())));
    }
    Ok(items)
}

fn list<T>(
    v: &Value,
    path: &str,
    len: usize,
    mut item: impl FnMut(&Value, &str) -> Result<T, FileError>,
) -> Result<Vec<T>, FileError> {
    array(v, path, len)?
        .iter()
        .enumerate()
        .map(|(i, x)| item(x, &format!("{path}[{i}]")))
        .collect()
}

fn scalar(v: &Value, path: &str) -> Result<C64, FileError> {
    let number = |x: &Value, path: &str| {
        x.as_f64()
            .ok_or_else(|| field_err(path, "expected a number"))
    };
    match v {
        Value::Number(_) => Ok(C64::new(number(v, path)?, 0.0)),
        Value::Array(pair) if pair.len() == 2 => Ok(C64::new(
            number(&pair[0], &format!("{path}[0]"))?,
            number(&pair[1], &format!("{path}[1]"))?,
        )),
        _ => Err(field_err(path, "expected a number or a [re, im] pair")),
    }
}

fn vector(v: &Value, path: &str, n: usize) -> Result<Vec<C64>, FileError> {
    list(v, path, n, scalar)
}

fn matrix(v: &Value, path: &str, n: usize) -> Result<CMatrix, FileError> {
    let rows = list(v, path, n, |row, p| vector(row, p, n))?;
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Complex vector in the file's scalar notation, e.g. a starting vector.
pub fn parse_vector(text: &str, n: usize) -> Result<Vec<C64>, FileError> {
    vector(&parse_json(text)?, "(vector)", n)
}

fn push_scalar(out: &mut String, z: C64) {
    // +0.0 imaginary parts collapse to a bare number; -0.0 survives as a pair
    if z.im.to_bits() == 0 {
        out.push_str(&number_text(z.re));
    } else {
        let _ = write!(out, "[{}, {}]", number_text(z.re), number_text(z.im));
    }
}

fn number_text(x: f64) -> String {
    serde_json::to_string(&x).expect("problem data is finite")
}

fn push_vector(out: &mut String, v: impl IntoIterator<Item = C64>) {
    out.push('[');
    for (k, z) in v.into_iter().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        push_scalar(out, z);
    }
    out.push(']');
}

fn push_matrix(out: &mut String, a: &CMatrix, indent: &str) {
    out.push_str("[\n");
    for i in 0..a.rows() {
        out.push_str(indent);
        out.push_str("  ");
        push_vector(out, (0..a.cols()).map(|j| a[(i, j)]));
        out.push_str(if i + 1 < a.rows() { ",\n" } else { "\n" });
    }
    out.push_str(indent);
    out.push(']');
}

/// Serializes with one matrix row per line.
pub fn render_problem(pf: &ProblemFile) -> String {
    let p = &pf.problem;
    let mut out = String::new();
    let _ = write!(out, "{{\n  \"n\": {},\n  \"m\": {},\n  \"A\": ", p.n(), p.m());
    push_matrix(&mut out, p.a(), "  ");
    out.push_str(",\n  \"B\": ");
    push_matrix(&mut out, p.b(), "  ");
    out.push_str(",\n  \"C\": [\n");
    for (k, c) in p.c().iter().enumerate() {
        out.push_str("    ");
        push_matrix(&mut out, c, "    ");
        out.push_str(if k + 1 < p.m() { ",\n" } else { "\n" });
    }
    out.push_str("  ]");
    let mut vectors = vec![("r", p.r()), ("s", p.s())];
    if let Some(g) = &pf.g {
        vectors.push(("g", g.as_slice()));
    }
    for (name, vs) in vectors {
        let _ = write!(out, ",\n  \"{name}\": [\n");
        for (k, v) in vs.iter().enumerate() {
            out.push_str("    ");
            push_vector(&mut out, v.iter().copied());
            out.push_str(if k + 1 < vs.len() { ",\n" } else { "\n" });
        }
        out.push_str("  ]");
    }
    out.push_str("\n}\n");
    out
}
