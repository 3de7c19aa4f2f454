use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use lambda_oscillator::format_f64;
use serde::Serialize;

use crate::config::Format;
use crate::Failure;

/// Rows of numbers under named columns.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Integral-valued cells (indices, counts) are written without exponent.
    pub fn write_csv<W: Write>(&self, w: &mut W, integer_columns: &[usize]) -> io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    if integer_columns.contains(&i) {
                        format!("{}", *x as u64)
                    } else {
                        format_f64(*x)
                    }
                })
                .collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Opens `path` for writing, or standard output when absent.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::numeric(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn emit_table(table: &Table, format: Format, out: Option<&Path>, integer_columns: &[usize]) -> Result<(), Failure> {
    let mut w = sink(out)?;
    match format {
        Format::Csv => table.write_csv(&mut w, integer_columns)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, table).map_err(io::Error::from)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
