//! Multitask regression table: 21 input columns followed by 7 target
//! columns per row (the SARCOS column order), delimiter separated, no header.

use std::io::Read;
use std::path::Path;

use super::DataError;

pub const MULTITASK_INPUTS: usize = 21;
pub const MULTITASK_TASKS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct MultitaskTable {
    rows: Vec<Vec<f64>>,
}

impl MultitaskTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let width = MULTITASK_INPUTS + MULTITASK_TASKS;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != width {
                return Err(DataError::Arity { row: i + 1, expected: width, found: r.len() });
            }
            if let Some(column) = r.iter().position(|v| !v.is_finite()) {
                return Err(DataError::Parse { row: i + 1, column: column + 1, value: r[column].to_string() });
            }
        }
        Ok(MultitaskTable { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn inputs(&self, i: usize) -> &[f64] {
        &self.rows[i][..MULTITASK_INPUTS]
    }

    pub fn outputs(&self, i: usize) -> &[f64] {
        &self.rows[i][MULTITASK_INPUTS..]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

pub fn read_multitask<R: Read>(reader: R, delimiter: u8) -> Result<MultitaskTable, DataError> {
    let width = MULTITASK_INPUTS + MULTITASK_TASKS;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::Csv { row, message: e.to_string() })?;
        if rec.len() != width {
            return Err(DataError::Arity { row, expected: width, found: rec.len() });
        }
        let values = rec
            .iter()
            .enumerate()
            .map(|(j, cell)| match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(DataError::Parse { row, column: j + 1, value: cell.to_string() }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(values);
    }
    Ok(MultitaskTable { rows })
}

pub fn load_multitask_csv(path: impl AsRef<Path>, delimiter: u8) -> Result<MultitaskTable, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    read_multitask(std::io::BufReader::new(file), delimiter)
}
