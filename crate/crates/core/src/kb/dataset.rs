//! Delimiter-separated numeric tables.

use std::io::Read;

use crate::error::{Error, Result};

/// One record. A `None` cell is a missing value, which only appears when the
/// table was ingested with [`IngestOptions::allow_missing`].
pub type Row = Vec<Option<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    attributes: Vec<String>,
    records: Vec<Row>,
}

#[derive(Debug, Clone, Copy)]
pub struct IngestOptions {
    pub has_header: bool,
    pub delimiter: u8,
    /// Accept empty cells as missing values instead of rejecting them.
    pub allow_missing: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            has_header: true,
            delimiter: b',',
            allow_missing: false,
        }
    }
}

impl Dataset {
    pub fn new(attributes: Vec<String>, records: Vec<Row>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (row, record) in records.iter().enumerate() {
            if record.len() != attributes.len() {
                return Err(Error::Shape {
                    row,
                    expected: attributes.len(),
                    found: record.len(),
                });
            }
        }
        Ok(Dataset { attributes, records })
    }

    /// Builds a dataset with no missing cells from plain numeric columns.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let len = columns.first().map(|(_, v)| v.len()).unwrap_or(0);
        let mut records = vec![Vec::with_capacity(columns.len()); len];
        let mut attributes = Vec::with_capacity(columns.len());
        for (col, (name, values)) in columns.into_iter().enumerate() {
            if values.len() != len {
                return Err(Error::Config(format!(
                    "column {col} has {} values, expected {len}",
                    values.len()
                )));
            }
            attributes.push(name);
            for (row, v) in values.into_iter().enumerate() {
                records[row].push(Some(v));
            }
        }
        Dataset::new(attributes, records)
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn records(&self) -> &[Row] {
        &self.records
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == name)
    }

    /// All values of one attribute. Fails on the first missing cell.
    pub fn column(&self, index: usize) -> Result<Vec<f64>> {
        self.records
            .iter()
            .enumerate()
            .map(|(row, r)| {
                r[index].ok_or_else(|| Error::Parse {
                    row,
                    column: index,
                    message: "missing value".into(),
                })
            })
            .collect()
    }
}

/// Reads a delimiter-separated table. Without a header, attributes are named
/// `col0..colN-1`.
pub fn ingest_tabular<R: Read>(source: R, options: IngestOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(options.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut attributes: Option<Vec<String>> = None;
    let mut records = Vec::new();
    for (line, result) in reader.records().enumerate() {
        let record = result.map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse {
                row: records.len(),
                column: 0,
                message: format!("{other:?}"),
            },
        })?;
        if line == 0 && options.has_header {
            attributes = Some(record.iter().map(str::to_owned).collect());
            continue;
        }
        let width = attributes
            .get_or_insert_with(|| (0..record.len()).map(|i| format!("col{i}")).collect())
            .len();
        let row = records.len();
        if record.len() != width {
            return Err(Error::Shape {
                row,
                expected: width,
                found: record.len(),
            });
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(column, cell)| parse_cell(cell, row, column, options.allow_missing))
            .collect::<Result<Row>>()?;
        records.push(values);
    }

    match attributes {
        Some(attributes) if !records.is_empty() => Ok(Dataset { attributes, records }),
        _ => Err(Error::EmptyDataset),
    }
}

fn parse_cell(cell: &str, row: usize, column: usize, allow_missing: bool) -> Result<Option<f64>> {
    if cell.is_empty() && allow_missing {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Err(Error::Parse {
            row,
            column,
            message: format!("non-finite value {cell:?}"),
        }),
        Err(_) => Err(Error::Parse {
            row,
            column,
            message: format!("not a number: {cell:?}"),
        }),
    }
}
