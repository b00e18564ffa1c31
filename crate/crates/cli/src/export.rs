//! Dataset export and import.
//!
//! Reals are written as `{:.16e}` (17 significant digits), which is enough
//! for every `f64` to survive a text round trip. In CSV cells vectors are
//! rendered `[a;b]` and matrices `[[a;b];[c;d]]`; JSON uses plain arrays.
//! A CSV export writes the records to the requested path and the summary to
//! a sibling `*.summary.csv`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kleinsplit::{RealMatrix, RealVector};
use num_bigint::BigInt;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(CliError::config(format!("unknown format {s:?} (expected csv or json)"))),
        }
    }
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(BigInt),
    Real(f64),
    Bool(bool),
    Text(String),
    Reals(Vec<f64>),
    Ints(Vec<BigInt>),
    Matrix(Vec<Vec<f64>>),
    IntMatrix(Vec<Vec<BigInt>>),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v.into())
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v.into())
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v.into())
    }
}

impl From<&RealVector> for Value {
    fn from(v: &RealVector) -> Self {
        Value::Reals(v.iter().copied().collect())
    }
}

impl From<&RealMatrix> for Value {
    fn from(m: &RealMatrix) -> Self {
        Value::Matrix(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

impl From<&kleinsplit::linalg::IntMatrix> for Value {
    fn from(m: &kleinsplit::linalg::IntMatrix) -> Self {
        Value::IntMatrix(m.rows())
    }
}

impl From<&[BigInt]> for Value {
    fn from(v: &[BigInt]) -> Self {
        Value::Ints(v.to_vec())
    }
}

pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn parse_real(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ if s.contains(['e', 'E', '.']) => s.parse().ok(),
        _ => None,
    }
}

fn join<T>(items: &[T], sep: &str, f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(sep)
}

impl Value {
    fn csv_cell(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(x) => fmt_real(*x),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => s.clone(),
            Value::Reals(v) => format!("[{}]", join(v, ";", |x| fmt_real(*x))),
            Value::Ints(v) => format!("[{}]", join(v, ";", |x| x.to_string())),
            Value::Matrix(m) => format!("[{}]", join(m, ";", |r| format!("[{}]", join(r, ";", |x| fmt_real(*x))))),
            Value::IntMatrix(m) => format!("[{}]", join(m, ";", |r| format!("[{}]", join(r, ";", |x| x.to_string())))),
        }
    }

    fn json(&self) -> String {
        let real = |x: &f64| {
            if x.is_finite() {
                fmt_real(*x)
            } else {
                format!("\"{}\"", fmt_real(*x))
            }
        };
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(x) => real(x),
            Value::Bool(b) => b.to_string(),
            Value::Text(s) => json_string(s),
            Value::Reals(v) => format!("[{}]", join(v, ",", real)),
            Value::Ints(v) => format!("[{}]", join(v, ",", |x| x.to_string())),
            Value::Matrix(m) => format!("[{}]", join(m, ",", |r| format!("[{}]", join(r, ",", real)))),
            Value::IntMatrix(m) => format!("[{}]", join(m, ",", |r| format!("[{}]", join(r, ",", |x| x.to_string())))),
        }
    }

    fn from_csv_cell(cell: &str) -> Option<Value> {
        if let Some(inner) = cell.strip_prefix('[').and_then(|c| c.strip_suffix(']')) {
            return parse_csv_list(inner);
        }
        Some(match cell {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            _ => {
                if let Ok(i) = cell.parse::<BigInt>() {
                    Value::Int(i)
                } else if let Some(x) = parse_real(cell) {
                    Value::Real(x)
                } else {
                    Value::Text(cell.to_owned())
                }
            }
        })
    }

    fn from_json(v: &serde_json::Value) -> Option<Value> {
        use serde_json::Value as J;
        Some(match v {
            J::Bool(b) => Value::Bool(*b),
            J::Number(n) => {
                let text = n.to_string();
                match parse_real(&text) {
                    Some(x) => Value::Real(x),
                    None => Value::Int(text.parse().ok()?),
                }
            }
            J::String(s) => parse_real(s).filter(|x| !x.is_finite()).map_or_else(|| Value::Text(s.clone()), Value::Real),
            J::Array(items) if items.is_empty() => Value::Reals(Vec::new()),
            J::Array(items) if items.iter().all(J::is_array) => {
                let rows: Vec<&Vec<J>> = items.iter().filter_map(J::as_array).collect();
                let ints: Option<Vec<Vec<BigInt>>> =
                    rows.iter().map(|r| r.iter().map(json_int).collect()).collect();
                match ints {
                    Some(m) if rows.iter().any(|r| !r.is_empty()) => Value::IntMatrix(m),
                    _ => Value::Matrix(rows.iter().map(|r| r.iter().map(json_real).collect()).collect::<Option<_>>()?),
                }
            }
            J::Array(items) => match items.iter().map(json_int).collect::<Option<Vec<_>>>() {
                Some(v) => Value::Ints(v),
                None => Value::Reals(items.iter().map(json_real).collect::<Option<_>>()?),
            },
            J::Null | J::Object(_) => return None,
        })
    }
}

fn json_real(v: &serde_json::Value) -> Option<f64> {
    match v {
        serde_json::Value::Number(n) => n.to_string().parse().ok(),
        serde_json::Value::String(s) => parse_real(s),
        _ => None,
    }
}

fn json_int(v: &serde_json::Value) -> Option<BigInt> {
    v.as_number().and_then(|n| n.to_string().parse().ok())
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn parse_csv_list(inner: &str) -> Option<Value> {
    if inner.is_empty() {
        return Some(Value::Reals(Vec::new()));
    }
    if let Some(rows) = inner.strip_prefix('[').and_then(|c| c.strip_suffix(']')) {
        let cells: Vec<Vec<&str>> = rows
            .split("];[")
            .map(|row| if row.is_empty() { Vec::new() } else { row.split(';').collect() })
            .collect();
        let ints: Result<Vec<Vec<BigInt>>, _> = cells.iter().map(|r| r.iter().map(|x| x.parse()).collect()).collect();
        return match ints {
            Ok(m) if cells.iter().any(|r| !r.is_empty()) => Some(Value::IntMatrix(m)),
            _ => cells
                .iter()
                .map(|r| r.iter().map(|x| x.parse().ok()).collect())
                .collect::<Option<_>>()
                .map(Value::Matrix),
        };
    }
    let parts: Vec<&str> = inner.split(';').collect();
    if let Ok(ints) = parts.iter().map(|p| p.parse::<BigInt>()).collect::<Result<Vec<_>, _>>() {
        return Some(Value::Ints(ints));
    }
    parts.iter().map(|p| parse_real(p)).collect::<Option<_>>().map(Value::Reals)
}

/// Output of one experiment: scalar summary plus a homogeneous record table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub command: String,
    pub summary: Vec<(String, Value)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Dataset {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Dataset {
            command: command.to_owned(),
            summary: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.push((key.to_owned(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "record width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"command\": {},", json_string(&self.command));
        if self.summary.is_empty() {
            out.push_str("  \"summary\": {},\n");
        } else {
            out.push_str("  \"summary\": {\n");
            let body = join(&self.summary, ",\n", |(k, v)| format!("    {}: {}", json_string(k), v.json()));
            let _ = writeln!(out, "{body}\n  }},");
        }
        let _ = writeln!(out, "  \"columns\": [{}],", join(&self.columns, ", ", |c| json_string(c)));
        if self.rows.is_empty() {
            out.push_str("  \"records\": []\n");
        } else {
            out.push_str("  \"records\": [\n");
            let body = join(&self.rows, ",\n", |row| {
                let fields: Vec<String> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| format!("{}: {}", json_string(c), v.json()))
                    .collect();
                format!("    {{{}}}", fields.join(", "))
            });
            let _ = writeln!(out, "{body}\n  ]");
        }
        out.push_str("}\n");
        out
    }

    pub fn records_csv(&self) -> String {
        let rows = self.rows.iter().map(|r| r.iter().map(Value::csv_cell).collect::<Vec<_>>());
        csv_text(std::iter::once(self.columns.clone()).chain(rows))
    }

    pub fn summary_csv(&self) -> String {
        let head = [vec!["field".to_owned(), "value".to_owned()], vec!["command".to_owned(), self.command.clone()]];
        let rows = self.summary.iter().map(|(k, v)| vec![k.clone(), v.csv_cell()]);
        csv_text(head.into_iter().chain(rows))
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let root: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let field = |k: &str| root.get(k).ok_or_else(|| format!("missing {k:?}"));
        let command = field("command")?.as_str().ok_or("\"command\" must be a string")?.to_owned();
        let summary = field("summary")?
            .as_object()
            .ok_or("\"summary\" must be an object")?
            .iter()
            .map(|(k, v)| Value::from_json(v).map(|v| (k.clone(), v)).ok_or(format!("bad summary value for {k:?}")))
            .collect::<Result<_, _>>()?;
        let columns: Vec<String> = field("columns")?
            .as_array()
            .ok_or("\"columns\" must be an array")?
            .iter()
            .map(|c| c.as_str().map(str::to_owned).ok_or("column names must be strings"))
            .collect::<Result<_, _>>()?;
        let mut ds = Dataset {
            command,
            summary,
            columns,
            rows: Vec::new(),
        };
        for (idx, record) in field("records")?.as_array().ok_or("\"records\" must be an array")?.iter().enumerate() {
            let obj = record.as_object().ok_or(format!("record {idx} is not an object"))?;
            if obj.len() != ds.columns.len() {
                return Err(format!("record {idx} has {} fields, expected {}", obj.len(), ds.columns.len()));
            }
            let row = ds
                .columns
                .iter()
                .map(|c| obj.get(c).and_then(Value::from_json).ok_or(format!("record {idx}: bad field {c:?}")))
                .collect::<Result<_, _>>()?;
            ds.rows.push(row);
        }
        Ok(ds)
    }

    pub fn from_csv(records: &str, summary: Option<&str>) -> Result<Self, String> {
        let mut reader = csv::ReaderBuilder::new().from_reader(records.as_bytes());
        let columns: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(str::to_owned).collect();
        let mut ds = Dataset {
            command: String::new(),
            summary: Vec::new(),
            columns,
            rows: Vec::new(),
        };
        for (idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            let row = record
                .iter()
                .map(|cell| Value::from_csv_cell(cell).ok_or(format!("record {idx}: bad cell {cell:?}")))
                .collect::<Result<_, _>>()?;
            ds.rows.push(row);
        }
        if let Some(text) = summary {
            let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
            for (idx, record) in reader.records().enumerate() {
                let record = record.map_err(|e| e.to_string())?;
                let (key, cell) = (&record[0], &record[1]);
                if idx == 0 && key == "command" {
                    ds.command = cell.to_owned();
                } else {
                    let value = Value::from_csv_cell(cell).ok_or(format!("bad summary cell {cell:?}"))?;
                    ds.summary.push((key.to_owned(), value));
                }
            }
        }
        Ok(ds)
    }
}

fn csv_text(rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut writer = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for row in rows {
        writer.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("csv of utf-8 is utf-8")
}

/// `out.csv` → `out.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    path.with_extension("summary.csv")
}

/// Writes `ds` atomically; returns the files written.
pub fn export(ds: &Dataset, path: &Path, format: Format) -> CliResult<Vec<PathBuf>> {
    match format {
        Format::Json => {
            write_atomic(path, &ds.to_json())?;
            Ok(vec![path.to_owned()])
        }
        Format::Csv => {
            let sibling = summary_path(path);
            write_atomic(path, &ds.records_csv())?;
            write_atomic(&sibling, &ds.summary_csv())?;
            Ok(vec![path.to_owned(), sibling])
        }
    }
}

pub fn import(path: &Path, format: Format) -> CliResult<Dataset> {
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| CliError::io(p, e));
    let parsed = match format {
        Format::Json => Dataset::from_json(&read(path)?),
        Format::Csv => {
            let sibling = summary_path(path);
            let summary = if sibling.exists() { Some(read(&sibling)?) } else { None };
            Dataset::from_csv(&read(path)?, summary.as_deref())
        }
    };
    parsed.map_err(|message| CliError::Data {
        path: path.to_owned(),
        message,
    })
}

/// Temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
