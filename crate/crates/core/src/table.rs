//! CSV plumbing shared by the readers and writers of every stage.
//!
//! Files may start with `#` comment lines (the provenance header); readers
//! skip them. Writers never emit the header themselves.

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Field { line: u64, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
}

pub(crate) fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r)
}

pub(crate) fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Column positions of `names` in the header, in the order given.
pub(crate) fn columns<R: Read>(
    rdr: &mut csv::Reader<R>,
    names: &[&str],
) -> Result<Vec<usize>, TableError> {
    let headers = rdr.headers()?.clone();
    names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| TableError::MissingColumn(n.to_string()))
        })
        .collect()
}

pub(crate) fn field_error(rec: &csv::StringRecord, message: impl Into<String>) -> TableError {
    TableError::Field {
        line: rec.position().map_or(0, |p| p.line()),
        message: message.into(),
    }
}

pub(crate) fn parse<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    col: usize,
    what: &str,
) -> Result<T, TableError> {
    let raw = rec.get(col).unwrap_or("");
    raw.parse()
        .map_err(|_| field_error(rec, format!("invalid {what} `{raw}`")))
}

/// Shortest round-tripping decimal form, used for every float in output.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

/// A report ready for output. The first `key_columns` columns identify a
/// row; the rest are metrics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub key_columns: usize,
    pub rows: Vec<Vec<String>>,
    /// Free-text remarks written as comment lines after the header.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: &[&str], key_columns: usize) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            key_columns,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write_notes<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for n in &self.notes {
            writeln!(w, "# note: {n}")?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), TableError> {
        self.write_notes(&mut w).map_err(csv::Error::from)?;
        let mut out = writer(w);
        out.write_record(&self.columns)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Long form: one `group,metric,value` line per metric cell. Key columns
    /// are joined with `|` into the group.
    pub fn write_long<W: Write>(&self, mut w: W) -> Result<(), TableError> {
        self.write_notes(&mut w).map_err(csv::Error::from)?;
        let mut out = writer(w);
        out.write_record(["group", "metric", "value"])?;
        for r in &self.rows {
            let group = r[..self.key_columns].join("|");
            for (name, value) in self.columns.iter().zip(r).skip(self.key_columns) {
                out.write_record([group.as_str(), name, value])?;
            }
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
