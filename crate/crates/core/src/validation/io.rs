use std::io::{Read, Write};

use super::{AnnotationRecord, Kappa, Label, ValidationStats};
use crate::ingest::CitanceKey;
use crate::table::{self, columns, field_error, fmt_f64, parse, TableError};

/// One line of a coder's sample file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRow {
    pub key: CitanceKey,
    pub query_id: String,
    pub text: String,
    /// Blank until a coder fills it in.
    pub label: Option<Label>,
}

pub fn write_sample<W: Write>(rows: &[SampleRow], w: W) -> Result<(), TableError> {
    let mut out = table::writer(w);
    out.write_record(["doc_id", "sentence_index", "query_id", "text", "label"])?;
    for r in rows {
        out.write_record([
            r.key.doc_id.as_str(),
            &r.key.sentence_index.to_string(),
            &r.query_id,
            &r.text,
            r.label.map_or("", Label::as_str),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn key_of(rec: &csv::StringRecord, doc: usize, idx: usize) -> Result<CitanceKey, TableError> {
    Ok(CitanceKey {
        doc_id: rec[doc].to_string(),
        sentence_index: parse(rec, idx, "sentence_index")?,
    })
}

fn label_of(rec: &csv::StringRecord, col: usize) -> Result<Option<Label>, TableError> {
    let raw = rec.get(col).unwrap_or("");
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|e: String| field_error(rec, e))
}

/// Reads a sample file, filled or not.
pub fn read_sample<R: Read>(r: R) -> Result<Vec<SampleRow>, TableError> {
    let mut rdr = table::reader(r);
    let c = columns(&mut rdr, &["doc_id", "sentence_index", "query_id", "text", "label"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(SampleRow {
            key: key_of(&rec, c[0], c[1])?,
            query_id: rec[c[2]].to_string(),
            text: rec[c[3]].to_string(),
            label: label_of(&rec, c[4])?,
        });
    }
    Ok(out)
}

/// Labels from a sample file filled in by `coder_id`; blank rows are skipped.
pub fn read_sample_labels<R: Read>(r: R, coder_id: &str) -> Result<Vec<AnnotationRecord>, TableError> {
    Ok(read_sample(r)?
        .into_iter()
        .filter_map(|row| {
            Some(AnnotationRecord {
                label: row.label?,
                key: row.key,
                query_id: row.query_id,
                coder_id: coder_id.to_string(),
            })
        })
        .collect())
}

pub fn write_annotations<W: Write>(records: &[AnnotationRecord], w: W) -> Result<(), TableError> {
    let mut out = table::writer(w);
    out.write_record(["doc_id", "sentence_index", "query_id", "coder_id", "label"])?;
    for r in records {
        out.write_record([
            r.key.doc_id.as_str(),
            &r.key.sentence_index.to_string(),
            &r.query_id,
            &r.coder_id,
            r.label.as_str(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_annotations<R: Read>(r: R) -> Result<Vec<AnnotationRecord>, TableError> {
    let mut rdr = table::reader(r);
    let c = columns(&mut rdr, &["doc_id", "sentence_index", "query_id", "coder_id", "label"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let label = label_of(&rec, c[4])?.ok_or_else(|| field_error(&rec, "empty label"))?;
        out.push(AnnotationRecord {
            key: key_of(&rec, c[0], c[1])?,
            query_id: rec[c[2]].to_string(),
            coder_id: rec[c[3]].to_string(),
            label,
        });
    }
    Ok(out)
}

pub fn write_stats<W: Write>(stats: &[ValidationStats], w: W) -> Result<(), TableError> {
    let mut out = table::writer(w);
    out.write_record(["query_id", "n", "pct_agree", "pct_valid", "kappa"])?;
    for s in stats {
        out.write_record([
            s.query_id.as_str(),
            &s.n.to_string(),
            &fmt_f64(s.pct_agree),
            &fmt_f64(s.pct_valid),
            &match s.kappa {
                Kappa::Value(v) => fmt_f64(v),
                Kappa::Undefined => "undefined".to_string(),
            },
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_stats<R: Read>(r: R) -> Result<Vec<ValidationStats>, TableError> {
    let mut rdr = table::reader(r);
    let c = columns(&mut rdr, &["query_id", "n", "pct_agree", "pct_valid", "kappa"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let kappa = match &rec[c[4]] {
            "undefined" => Kappa::Undefined,
            _ => Kappa::Value(parse(&rec, c[4], "kappa")?),
        };
        let s = ValidationStats {
            query_id: rec[c[0]].to_string(),
            n: parse(&rec, c[1], "n")?,
            pct_agree: parse(&rec, c[2], "pct_agree")?,
            pct_valid: parse(&rec, c[3], "pct_valid")?,
            kappa,
        };
        let in_range = (0.0..=1.0).contains(&s.pct_agree) && (0.0..=1.0).contains(&s.pct_valid);
        if s.n == 0 || !in_range || s.pct_valid > s.pct_agree {
            return Err(field_error(&rec, "inconsistent statistics"));
        }
        out.push(s);
    }
    Ok(out)
}
