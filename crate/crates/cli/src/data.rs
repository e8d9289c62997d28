//! Numeric CSV ingestion: header row, comma separated, every cell a number.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct Table {
    pub names: Vec<String>,
    /// Row-major cells.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let file = File::open(path)
            .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(reader: R, source: &str) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Input(format!("{source}: bad header: {e}")))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if names.is_empty() || names.iter().any(|n| n.is_empty()) {
            return Err(CliError::Input(format!("{source}: header has an empty column name")));
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| match e.kind() {
                csv::ErrorKind::UnequalLengths {
                    pos,
                    expected_len,
                    len,
                } => CliError::Input(format!(
                    "{source}: line {}: expected {expected_len} cells, found {len}",
                    pos.as_ref().map_or(0, |p| p.line())
                )),
                _ => CliError::Input(format!("{source}: {e}")),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .enumerate()
                .map(|(j, cell)| {
                    let cell = cell.trim();
                    match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(v),
                        _ => Err(CliError::Input(format!(
                            "{source}: line {line}, column {} ({}): `{cell}` is not a finite number",
                            j + 1,
                            names[j]
                        ))),
                    }
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(CliError::Input(format!("{source}: no data rows")));
        }
        Ok(Self { names, rows })
    }

    pub fn column_index(&self, name: &str) -> Result<usize, CliError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| {
            CliError::Input(format!(
                "no column named `{name}`; columns are {}",
                self.names.join(", ")
            ))
        })
    }

    fn select(&self, cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), cols.len(), |i, j| self.rows[i][cols[j]])
    }

    /// Splits into predictors (every other column, in file order) and response.
    pub fn design(&self, response: &str) -> Result<(DMatrix<f64>, DVector<f64>, Vec<String>), CliError> {
        let r = self.column_index(response)?;
        let cols: Vec<usize> = (0..self.names.len()).filter(|&j| j != r).collect();
        if cols.is_empty() {
            return Err(CliError::Input("no predictor columns besides the response".into()));
        }
        let y = DVector::from_fn(self.rows.len(), |i, _| self.rows[i][r]);
        let names = cols.iter().map(|&j| self.names[j].clone()).collect();
        Ok((self.select(&cols), y, names))
    }

    /// Predictor matrix with columns picked by name, in the given order.
    pub fn columns(&self, names: &[String]) -> Result<DMatrix<f64>, CliError> {
        let cols = names
            .iter()
            .map(|n| self.column_index(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.select(&cols))
    }
}
