//! Plain CSV output: one header row, comma delimiter, LF line endings and
//! C-style `%.12e` numbers. Missing values are written as empty fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{io_err, Result};

/// Formats like C's `printf("%.12e", v)`: two-digit minimum exponent with
/// an explicit sign.
pub fn fmt_e12(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_e12).unwrap_or_default()
}

/// In-memory table written in one go.
#[derive(Debug, Clone)]
pub struct Table {
    buf: String,
    columns: usize,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut buf = String::new();
        let cols: Vec<&str> = header.iter().map(|s| s.as_ref()).collect();
        buf.push_str(&cols.join(","));
        buf.push('\n');
        Self {
            buf,
            columns: header.len(),
        }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns);
        let cells: Vec<String> = row.iter().map(|&v| fmt_e12(v)).collect();
        self.push_cells(&cells);
    }

    pub fn push_cells<S: AsRef<str>>(&mut self, row: &[S]) {
        debug_assert_eq!(row.len(), self.columns);
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let cell = cell.as_ref();
            if cell.contains([',', '"', '\n']) {
                let _ = write!(self.buf, "\"{}\"", cell.replace('"', "\"\""));
            } else {
                self.buf.push_str(cell);
            }
        }
        self.buf.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
        }
        fs::write(path, &self.buf).map_err(io_err(path))
    }
}
