//! Operator files and CSV tables.
//!
//! Text operator files hold a `rows cols` header followed by one `re im` pair per
//! line in row-major order; lines starting with `#` are ignored. Binary files hold
//! the magic bytes, `rows` and `cols` as little-endian `u64`, then little-endian
//! `f64` pairs in the same order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mlsi_core::linalg::{from_row_major, CMat, C64};

use crate::config::OperatorFormat;
use crate::error::{LabError, LabResult};

pub const BINARY_MAGIC: &[u8; 8] = b"MLSIOP01";

/// Seventeen significant digits, which round-trips every finite `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn encode_text(m: &CMat) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            let _ = writeln!(out, "{} {}", fmt_float(z.re), fmt_float(z.im));
        }
    }
    out
}

pub fn decode_text(text: &str) -> LabResult<CMat> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| LabError::Format("missing header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| LabError::Format(format!("bad header {header:?}")))
        })
        .collect::<LabResult<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(LabError::Format(format!("header needs two dimensions, got {header:?}")));
    };
    let entries: Vec<C64> = lines
        .map(|l| {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| LabError::Format(format!("bad number {s:?}")))
            };
            match parts[..] {
                [re, im] => Ok(C64::new(parse(re)?, parse(im)?)),
                _ => Err(LabError::Format(format!("expected `re im`, got {l:?}"))),
            }
        })
        .collect::<LabResult<_>>()?;
    let n = entries.len();
    from_row_major(rows, cols, &entries)
        .ok_or_else(|| LabError::Format(format!("{rows}x{cols} header but {n} entries")))
}

pub fn encode_binary(m: &CMat) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 16 * m.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

pub fn decode_binary(bytes: &[u8]) -> LabResult<CMat> {
    let body = bytes
        .strip_prefix(BINARY_MAGIC.as_slice())
        .ok_or_else(|| LabError::Format("missing magic".into()))?;
    if body.len() < 16 {
        return Err(LabError::Format("truncated header".into()));
    }
    let word = |b: &[u8]| u64::from_le_bytes(b.try_into().expect("eight bytes"));
    let (rows, cols) = (word(&body[..8]) as usize, word(&body[8..16]) as usize);
    let data = &body[16..];
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(16));
    if expected != Some(data.len()) {
        return Err(LabError::Format(format!(
            "{rows}x{cols} header but {} payload bytes",
            data.len()
        )));
    }
    let entries: Vec<C64> = data
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().expect("eight bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("eight bytes")),
            )
        })
        .collect();
    Ok(from_row_major(rows, cols, &entries).expect("length checked"))
}

pub fn write_operator(path: &Path, m: &CMat, format: OperatorFormat) -> LabResult<()> {
    let bytes = match format {
        OperatorFormat::Text => encode_text(m).into_bytes(),
        OperatorFormat::Binary => encode_binary(m),
    };
    fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

/// Reads either format, detected from the magic bytes.
pub fn read_operator(path: &Path) -> LabResult<CMat> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| LabError::Format("text file is not UTF-8".into()))?;
        decode_text(&text)
    }
}

/// A CSV table of preformatted cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> LabResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| LabError::io(path, e))
    }
}

/// Cell helpers.
pub fn cell_f(x: f64) -> String {
    fmt_float(x)
}

pub fn cell_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn cell_region(r: &mlsi_core::Region) -> String {
    r.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
}
