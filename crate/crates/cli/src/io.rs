//! CSV input with header auto-detection and line/column diagnostics.

use std::path::Path;

use farmtest::{DataMatrix, Error as FarmError};

use crate::HeaderArg;

/// CLI-level error carrying the exit-code classification.
#[derive(Debug)]
pub enum CliError {
    /// Malformed input or flags: exit 2.
    Input(String),
    /// Numerical failure inside the pipeline: exit 3.
    Numerical(FarmError),
}

impl CliError {
    pub fn input(msg: String) -> Self {
        CliError::Input(msg)
    }

    pub fn numerical(e: FarmError) -> Self {
        CliError::Numerical(e)
    }

    /// Library errors raised while validating inputs map to exit 2.
    pub fn from_input_side(e: FarmError) -> Self {
        CliError::Input(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "{msg}"),
            CliError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

/// Reads an n x p numeric matrix; returns the data and column names (header
/// names when present, else `col0..col{p-1}`).
pub fn read_csv_matrix(
    path: &Path,
    header: HeaderArg,
) -> Result<(DataMatrix, Vec<String>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(line.split(',').map(|f| f.trim().to_string()).collect());
        let _ = lineno;
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{}: empty file", path.display())));
    }

    let first_numeric = rows[0].iter().all(|f| f.parse::<f64>().is_ok());
    let has_header = match header {
        HeaderArg::Yes => true,
        HeaderArg::No => false,
        HeaderArg::Auto => !first_numeric,
    };

    let (names, data_rows) = if has_header {
        let names = rows[0].clone();
        (names, &rows[1..])
    } else {
        let p = rows[0].len();
        ((0..p).map(|j| format!("col{j}")).collect(), &rows[..])
    };

    if data_rows.is_empty() {
        return Err(CliError::input(format!(
            "{}: no data rows after the header",
            path.display()
        )));
    }

    let p = names.len();
    let mut values = Vec::with_capacity(data_rows.len() * p);
    let header_offset = usize::from(has_header);
    for (i, row) in data_rows.iter().enumerate() {
        let line_no = i + 1 + header_offset;
        if row.len() != p {
            return Err(CliError::input(format!(
                "{}: line {line_no} has {} fields, expected {p}",
                path.display(),
                row.len()
            )));
        }
        for (j, field) in row.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::input(format!(
                    "{}: line {line_no}, column {}: cannot parse {field:?} as a number",
                    path.display(),
                    j + 1
                ))
            })?;
            values.push(v);
        }
    }

    let n = data_rows.len();
    let data = DataMatrix::new(n, p, values).map_err(CliError::from_input_side)?;
    Ok((data, names))
}
