//! Plain-text numeric matrices: one observation per line, comma or
//! whitespace separated, `#` starting a comment line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{DataError, Result};
use crate::kernels::DataMatrix;

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matrix(&text)
}

pub fn parse_matrix(text: &str) -> Result<DataMatrix> {
    let mut values = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut count = 0;
        for token in trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            let v: f64 = token.parse().map_err(|_| DataError::NonNumeric {
                line: line_no,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    line: line_no,
                    token: token.to_string(),
                }
                .into());
            }
            values.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(DataError::Ragged {
                    line: line_no,
                    expected: w,
                    found: count,
                }
                .into())
            }
            Some(_) => {}
        }
    }
    match width {
        Some(w) if w > 0 => DataMatrix::new(values, w),
        _ => Err(DataError::Empty.into()),
    }
}

/// Comma-separated rows using the shortest representation that parses back
/// to the same value.
pub fn format_matrix(data: &DataMatrix) -> String {
    let mut out = String::new();
    for row in data.iter_rows() {
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: impl AsRef<Path>, data: &DataMatrix) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_matrix(data)).map_err(|source| {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
        .into()
    })
}
