//! Chain CSV files: a header `g1,…,gd` followed by one row per iteration.

use crate::autocov::Chain;
use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses chain CSV text; `name` labels error messages.
pub fn parse_chain_csv(text: &str, name: &str) -> Result<Chain> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: name.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let d = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .len();
    if text.trim().is_empty() || d == 0 {
        return Err(parse_err(1, "empty file".into()));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); d];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != d {
            return Err(parse_err(
                line_no,
                format!("expected {d} fields, found {}", record.len()),
            ));
        }
        for (col, cell) in columns.iter_mut().zip(record.iter()) {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line_no, format!("not a number: {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, format!("non-finite value {v}")));
            }
            col.push(v);
        }
    }
    let rows = columns[0].len();
    if rows < 2 {
        return Err(parse_err(
            1,
            format!("need at least 2 data rows, found {rows}"),
        ));
    }
    Chain::from_columns(columns)
}

pub fn read_chain_csv(path: impl AsRef<Path>) -> Result<Chain> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_chain_csv(&text, &path.display().to_string())
}

/// Writes with 17 significant digits, enough to round-trip every `f64`.
pub fn write_chain_csv(chain: &Chain, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_error = |e: csv::Error| io_error(path, e.into());
    let mut out = csv::Writer::from_path(path).map_err(csv_error)?;
    out.write_record((1..=chain.dim()).map(|j| format!("g{j}")))
        .map_err(csv_error)?;
    for t in 0..chain.len() {
        out.write_record(chain.columns().iter().map(|c| format!("{:.16e}", c[t])))
            .map_err(csv_error)?;
    }
    out.flush().map_err(|e| io_error(path, e))
}

/// Writes `contents` to `path`, mapping failures to [`Error::Io`].
pub fn write_text(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, contents).map_err(|e| io_error(path, e))
}
