//! Line-oriented persistence: JSON Lines for records, RFC 4180 CSV for the
//! aggregate tables.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::AggregateTable;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed { path: String, line: usize, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> ExportError {
    ExportError::Io { path: path.display().to_string(), source }
}

/// Serializes each record as one JSON line. Overwrites the file.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), ExportError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| io_err(path, std::io::Error::other(e)))?;
        out.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// The parsed content of a JSONL file plus whether its final line was cut
/// off mid-record, as a crashed writer leaves behind.
#[derive(Debug)]
pub struct JsonlFile<T> {
    pub records: Vec<T>,
    pub truncated: bool,
}

/// Reads a JSONL file, reporting malformed lines with their line number.
/// A final line without a trailing newline that fails to parse is treated as
/// truncated rather than an error, so interrupted runs stay readable.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<JsonlFile<T>, ExportError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut truncated = false;
    let mut line = String::new();
    let mut line_no = 0usize;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| io_err(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let complete = line.ends_with('\n');
        let content = line.trim_end_matches(['\n', '\r']);
        if content.is_empty() {
            continue;
        }
        match serde_json::from_str(content) {
            Ok(record) => records.push(record),
            Err(e) if !complete => {
                // Partial trailing write; everything before it is kept.
                let _ = e;
                truncated = true;
            }
            Err(e) => {
                return Err(ExportError::Malformed {
                    path: path.display().to_string(),
                    line: line_no,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(JsonlFile { records, truncated })
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') || value.contains('\r') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_owned()
    }
}

pub fn csv_row(out: &mut impl Write, fields: &[String]) -> std::io::Result<()> {
    let quoted: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
    out.write_all(quoted.join(",").as_bytes())?;
    out.write_all(b"\n")
}

/// Writes an aggregate table as CSV: header row, then one row per group,
/// fields quoted per RFC 4180 when they contain a comma, quote or line
/// break.
pub fn write_csv(path: &Path, table: &AggregateTable) -> Result<(), ExportError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    csv_row(&mut out, &table.header()).map_err(|e| io_err(path, e))?;
    for row in table.data_rows() {
        csv_row(&mut out, &row).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads a whole file as a string, with the path in any error.
pub fn read_to_string(path: &Path) -> Result<String, ExportError> {
    let mut buf = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut buf))
        .map_err(|e| io_err(path, e))?;
    Ok(buf)
}
