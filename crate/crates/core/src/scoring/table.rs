use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One model per row; missing values are written as empty cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model_id: String,
    pub robust_acc: Option<f64>,
    pub brittle_score: f64,
    pub relative_improvement: Option<f64>,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format {
        offset: e.position().map_or(0, |p| p.byte()),
        message: e.to_string(),
    }
}

pub fn write_table_csv<W: Write>(rows: &[TableRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    if rows.is_empty() {
        w.write_record([
            "model_id",
            "robust_acc",
            "brittle_score",
            "relative_improvement",
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table_csv<R: Read>(input: R) -> Result<Vec<TableRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}
