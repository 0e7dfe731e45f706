use std::collections::HashSet;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::marker::parse_markers;
use super::split::split_sentences;
use super::{AuthorName, DocType, Document, MainField, RefLink, Sentence, YEAR_RANGE};

/// How sentence text is encoded in a corpus file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestMode {
    /// `sentences` array per record.
    Presegmented,
    /// `body` string with inline `<ref/>` markers, split on ingest.
    Rawtext,
}

impl FromStr for IngestMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "presegmented" => Ok(IngestMode::Presegmented),
            "rawtext" => Ok(IngestMode::Rawtext),
            other => Err(format!("unknown mode `{other}` (expected presegmented|rawtext)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// A skipped record. Displays as `line=<n> error=<code>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub line: usize,
    pub code: &'static str,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line={} error={}", self.line, self.code)
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub documents: Vec<Document>,
    pub errors: Vec<RecordError>,
}

#[derive(Serialize, Deserialize)]
struct WireAuthor {
    family: String,
    #[serde(default)]
    given: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct WireRef {
    ref_id: String,
    #[serde(default)]
    cited_doc_id: Option<String>,
    #[serde(default)]
    cited_year: Option<i32>,
    #[serde(default)]
    cited_authors: Option<Vec<WireAuthor>>,
}

#[derive(Serialize, Deserialize)]
struct WireSentence {
    text: String,
    #[serde(default)]
    refs: Vec<WireRef>,
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    #[serde(default)]
    doc_id: Option<String>,
    #[serde(default)]
    year: Option<i64>,
    #[serde(default)]
    doc_type: Option<String>,
    #[serde(default)]
    main_field: Option<String>,
    #[serde(default)]
    meso_field: Option<i64>,
    #[serde(default)]
    authors: Option<Vec<WireAuthor>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sentences: Option<Vec<WireSentence>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    body: Option<String>,
}

pub fn load_corpus(path: &Path, mode: IngestMode) -> Result<LoadReport, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_corpus(&text, mode))
}

/// Parses JSON Lines corpus text. Blank lines are ignored; line numbers in
/// errors are 1-based.
pub fn parse_corpus(text: &str, mode: IngestMode) -> LoadReport {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let parsed: Vec<_> = lines
        .par_iter()
        .map(|&(i, line)| parse_record(line, mode).map_err(|code| RecordError { line: i + 1, code }))
        .collect();
    let mut report = LoadReport::default();
    for r in parsed {
        match r {
            Ok(doc) => report.documents.push(doc),
            Err(e) => report.errors.push(e),
        }
    }
    report
}

fn authors(list: Option<Vec<WireAuthor>>) -> Result<Option<Vec<AuthorName>>, &'static str> {
    list.map(|v| {
        v.iter()
            .map(|a| AuthorName::new(&a.family, a.given.as_deref()))
            .collect::<Option<Vec<_>>>()
            .ok_or("empty_author_family")
    })
    .transpose()
}

fn parse_record(line: &str, mode: IngestMode) -> Result<Document, &'static str> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|_| "invalid_json")?;
    if !value.is_object() {
        return Err("invalid_record");
    }
    let rec: WireRecord = serde_json::from_value(value).map_err(|_| "invalid_field")?;

    let doc_id = rec.doc_id.filter(|d| !d.is_empty()).ok_or("missing_doc_id")?;
    let year = rec.year.ok_or("missing_year")?;
    let year = i32::try_from(year)
        .ok()
        .filter(|y| YEAR_RANGE.contains(y))
        .ok_or("year_out_of_range")?;
    let doc_type = match rec.doc_type {
        Some(s) => s.parse().map_err(|_| "invalid_doc_type")?,
        None => DocType::Other,
    };
    let main_field = rec
        .main_field
        .map(|s| s.parse::<MainField>().map_err(|_| "invalid_main_field"))
        .transpose()?;
    let meso_field = rec
        .meso_field
        .map(|m| u32::try_from(m).map_err(|_| "invalid_meso_field"))
        .transpose()?;
    let authors = authors(rec.authors)?.unwrap_or_default();

    let sentences = match mode {
        IngestMode::Presegmented => {
            if rec.sentences.is_none() && rec.body.is_some() {
                return Err("expected_sentences");
            }
            presegmented(rec.sentences.unwrap_or_default())?
        }
        IngestMode::Rawtext => {
            if rec.body.is_none() && rec.sentences.is_some() {
                return Err("expected_body");
            }
            rawtext(rec.body.as_deref().unwrap_or(""))?
        }
    };

    let mut seen = HashSet::new();
    for r in sentences.iter().flat_map(|s| &s.refs) {
        if !seen.insert(r.ref_id.as_str()) {
            return Err("duplicate_ref_id");
        }
    }

    Ok(Document {
        doc_id,
        year,
        doc_type,
        main_field,
        meso_field,
        authors,
        sentences,
    })
}

fn presegmented(wire: Vec<WireSentence>) -> Result<Vec<Sentence>, &'static str> {
    let mut out = Vec::with_capacity(wire.len());
    for (index, ws) in wire.into_iter().enumerate() {
        let mut refs = ws
            .refs
            .into_iter()
            .map(|r| {
                Ok(RefLink {
                    ref_id: r.ref_id,
                    cited_doc_id: r.cited_doc_id,
                    cited_year: r.cited_year,
                    cited_authors: authors(r.cited_authors)?,
                    span: None,
                })
            })
            .collect::<Result<Vec<_>, &'static str>>()?;
        for m in parse_markers(&ws.text)? {
            match refs.iter_mut().find(|r| r.ref_id == m.ref_id) {
                Some(r) if r.span.is_some() => return Err("duplicate_ref_id"),
                Some(r) => r.span = Some(m.span),
                None => refs.push(RefLink {
                    ref_id: m.ref_id,
                    cited_doc_id: m.cited_doc_id,
                    cited_year: m.cited_year,
                    cited_authors: m.cited_authors,
                    span: Some(m.span),
                }),
            }
        }
        out.push(Sentence {
            index,
            text: ws.text,
            refs,
        });
    }
    Ok(out)
}

fn rawtext(body: &str) -> Result<Vec<Sentence>, &'static str> {
    let markers = parse_markers(body)?;
    let spans: Vec<_> = markers.iter().map(|m| m.span.clone()).collect();
    let mut markers = markers.into_iter().peekable();
    let mut out = Vec::new();
    for (index, range) in split_sentences(body, &spans).into_iter().enumerate() {
        let mut refs = Vec::new();
        while let Some(m) = markers.next_if(|m| m.span.start < range.end) {
            refs.push(RefLink {
                ref_id: m.ref_id,
                cited_doc_id: m.cited_doc_id,
                cited_year: m.cited_year,
                cited_authors: m.cited_authors,
                span: Some(m.span.start - range.start..m.span.end - range.start),
            });
        }
        out.push(Sentence {
            index,
            text: body[range].to_string(),
            refs,
        });
    }
    Ok(out)
}

fn wire_authors(list: &[AuthorName]) -> Vec<WireAuthor> {
    list.iter()
        .map(|a| WireAuthor {
            family: a.family().to_string(),
            given: a.given_initial().map(String::from),
        })
        .collect()
}

/// Writes documents in the pre-segmented encoding. Inline markers stay in
/// the sentence text, so reloading recovers their spans.
pub fn write_corpus<W: Write>(docs: &[Document], mut out: W) -> io::Result<()> {
    for d in docs {
        let rec = WireRecord {
            doc_id: Some(d.doc_id.clone()),
            year: Some(d.year.into()),
            doc_type: Some(d.doc_type.as_str().to_string()),
            main_field: d.main_field.map(|f| f.as_str().to_string()),
            meso_field: d.meso_field.map(i64::from),
            authors: Some(wire_authors(&d.authors)),
            sentences: Some(
                d.sentences
                    .iter()
                    .map(|s| WireSentence {
                        text: s.text.clone(),
                        refs: s
                            .refs
                            .iter()
                            .map(|r| WireRef {
                                ref_id: r.ref_id.clone(),
                                cited_doc_id: r.cited_doc_id.clone(),
                                cited_year: r.cited_year,
                                cited_authors: r.cited_authors.as_deref().map(wire_authors),
                            })
                            .collect(),
                    })
                    .collect(),
            ),
            body: None,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
