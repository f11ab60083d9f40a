//! Machine-readable output formats: JSON with fixed float precision, CSV
//! sample matrices and benchmark tables, and DOT subgraphs.

use std::fs;
use std::io;
use std::path::Path;

use nalgebra::DMatrix;
use npgm::rank::SampleMatrix;
use npgm::subgraph::EdgeInterval;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{io_error, CliError, CliResult};

/// serde adapter for loss vectors that may contain `+∞` (the sentinel for a
/// λ whose estimate fails positive-definiteness on some fold). JSON has no
/// non-finite literals — serde_json writes them as `null` — so reading a fit
/// file back must map `null` to `+∞` instead of rejecting the document.
pub mod loss_values {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mapped: Vec<Option<f64>> = v.iter().map(|&x| x.is_finite().then_some(x)).collect();
        mapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

/// serde_json formatter that renders every float in scientific notation with
/// 17 significant digits, enough for a lossless round trip of any `f64`.
pub struct Float17Formatter;

impl serde_json::ser::Formatter for Float17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", value as f64)
    }
}

/// Serializes to a single JSON line (plus trailing newline) with 17
/// significant digits on every float.
pub fn to_json_string<T: Serialize>(value: &T) -> CliResult<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Float17Formatter);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Data(format!("JSON serialization failed: {e}")))?;
    let mut text = String::from_utf8(buf).expect("serde_json emits UTF-8");
    text.push('\n');
    Ok(text)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    fs::write(path, to_json_string(value)?).map_err(|e| io_error(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_error(path, e))
}

/// Envelope written around every JSON result: the command, the crate
/// version, the full configuration that produced the payload, and the wall
/// time. `timing_seconds` is the only field excluded from the determinism
/// guarantee.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord<C, P> {
    pub command: String,
    pub version: String,
    pub config: C,
    pub timing_seconds: f64,
    pub payload: P,
}

impl<C, P> ResultRecord<C, P> {
    pub fn new(command: &str, config: C, timing_seconds: f64, payload: P) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            timing_seconds,
            payload,
        }
    }
}

/// Writes a sample matrix as CSV with a `x1..xd` header row. Values use
/// Rust's shortest-round-trip float formatting, so reading the file back
/// reproduces every entry bitwise.
pub fn write_sample_csv(path: &Path, x: &DMatrix<f64>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    let header: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(|e| io_error(path, e))?;
    let mut record: Vec<String> = Vec::with_capacity(x.ncols());
    for i in 0..x.nrows() {
        record.clear();
        record.extend((0..x.ncols()).map(|j| x[(i, j)].to_string()));
        w.write_record(&record).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Reads a numeric CSV into a sample matrix. A header row is auto-detected:
/// if any field of the first line fails to parse as a float, the line is
/// treated as column names. Parse failures elsewhere report the line number.
pub fn read_sample_csv(path: &Path) -> CliResult<SampleMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| io_error(path, e))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, std::num::ParseFloatError> =
            record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(_) if idx == 0 => {} // header row
            Err(e) => {
                return Err(CliError::Data(format!(
                    "{}: line {line}: {e}",
                    path.display()
                )))
            }
        }
    }
    SampleMatrix::from_rows(&rows).map_err(CliError::from)
}

/// Writes a benchmark table; every cell is pre-formatted text.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Renders the retained subgraph as DOT. `intervals` must already carry
/// 1-based endpoints; edge labels are the simultaneous interval endpoints.
pub fn dot_subgraph(d: usize, intervals: &[EdgeInterval]) -> String {
    let mut out = String::from("graph confidence_subgraph {\n");
    for v in 1..=d {
        out.push_str(&format!("  {v};\n"));
    }
    for e in intervals.iter().filter(|e| e.retained) {
        out.push_str(&format!(
            "  {} -- {} [label=\"[{}, {}]\"];\n",
            e.j, e.k, e.low, e.high
        ));
    }
    out.push_str("}\n");
    out
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> CliResult<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(CliError::Data("matrix payload is empty".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Data("matrix payload rows have uneven lengths".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}
