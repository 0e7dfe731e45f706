//! Corpus ingestion: documents, sentences, reference links and citances.
//!
//! Documents arrive as JSON Lines (see [`load`]). A citance is any sentence
//! carrying at least one reference link; [`extract_citances`] turns those
//! sentences into tokenized [`Citance`] values with their relative position
//! in the document.

mod authors;
mod load;
mod marker;
mod split;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::matching::{tokenize, Token};

pub use authors::AuthorName;
pub use load::{load_corpus, parse_corpus, write_corpus, IngestMode, LoadError, LoadReport, RecordError};
pub use marker::{parse_markers, RefMarker};
pub use split::split_sentences;

/// Lowest and highest publication year accepted on ingest.
pub const YEAR_RANGE: Range<i32> = 1900..2101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DocType {
    #[serde(rename = "full-article")]
    FullArticle,
    #[serde(rename = "review")]
    Review,
    #[serde(rename = "short-communication")]
    ShortCommunication,
    #[serde(rename = "other")]
    Other,
}

impl DocType {
    pub fn as_str(self) -> &'static str {
        match self {
            DocType::FullArticle => "full-article",
            DocType::Review => "review",
            DocType::ShortCommunication => "short-communication",
            DocType::Other => "other",
        }
    }
}

impl FromStr for DocType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "full-article" => Ok(DocType::FullArticle),
            "review" => Ok(DocType::Review),
            "short-communication" => Ok(DocType::ShortCommunication),
            "other" => Ok(DocType::Other),
            _ => Err(()),
        }
    }
}

/// One of the five high-level fields a document is classified into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MainField {
    BioHealth,
    LifeEarth,
    MathComp,
    PhysEngr,
    SocHum,
}

impl MainField {
    pub const ALL: [MainField; 5] = [
        MainField::BioHealth,
        MainField::LifeEarth,
        MainField::MathComp,
        MainField::PhysEngr,
        MainField::SocHum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MainField::BioHealth => "BioHealth",
            MainField::LifeEarth => "LifeEarth",
            MainField::MathComp => "MathComp",
            MainField::PhysEngr => "PhysEngr",
            MainField::SocHum => "SocHum",
        }
    }
}

impl fmt::Display for MainField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MainField {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        MainField::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or(())
    }
}

/// An in-text citation inside a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefLink {
    pub ref_id: String,
    pub cited_doc_id: Option<String>,
    pub cited_year: Option<i32>,
    /// `None` when the producer had no author data for the cited work.
    pub cited_authors: Option<Vec<AuthorName>>,
    /// Byte range of the inline marker within the sentence text, when the
    /// reference was written inline.
    pub span: Option<Range<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub refs: Vec<RefLink>,
}

impl Sentence {
    /// Sorted marker spans of the inline references.
    pub fn ref_spans(&self) -> Vec<Range<usize>> {
        let mut spans: Vec<_> = self.refs.iter().filter_map(|r| r.span.clone()).collect();
        spans.sort_by_key(|s| s.start);
        spans
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub year: i32,
    pub doc_type: DocType,
    pub main_field: Option<MainField>,
    pub meso_field: Option<u32>,
    pub authors: Vec<AuthorName>,
    pub sentences: Vec<Sentence>,
}

/// A citing sentence, tokenized and positioned within its document.
#[derive(Debug, Clone, PartialEq)]
pub struct Citance {
    pub doc_id: String,
    pub sentence_index: usize,
    pub text: String,
    pub tokens: Vec<Token>,
    pub refs: Vec<RefLink>,
    pub position_fraction: f64,
}

impl Citance {
    /// Word tokens only, in order; ref sentinels are dropped.
    pub fn words(&self) -> Vec<&str> {
        crate::matching::words(&self.tokens)
    }

    pub fn key(&self) -> CitanceKey {
        CitanceKey {
            doc_id: self.doc_id.clone(),
            sentence_index: self.sentence_index,
        }
    }
}

/// Identifies a citance across files: document id plus sentence index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CitanceKey {
    pub doc_id: String,
    pub sentence_index: usize,
}

/// `sentence_index / max(1, total - 1)`.
pub fn position_fraction(sentence_index: usize, total_sentences: usize) -> f64 {
    let denom = total_sentences.saturating_sub(1).max(1);
    sentence_index as f64 / denom as f64
}

pub fn extract_citances(doc: &Document) -> Vec<Citance> {
    let total = doc.sentences.len();
    doc.sentences
        .iter()
        .filter(|s| !s.refs.is_empty())
        .map(|s| Citance {
            doc_id: doc.doc_id.clone(),
            sentence_index: s.index,
            text: s.text.clone(),
            tokens: tokenize(&s.text, &s.ref_spans()),
            refs: s.refs.clone(),
            position_fraction: position_fraction(s.index, total),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SelfCitation {
    SelfCite,
    NonSelf,
    Unknown,
}

impl SelfCitation {
    pub fn as_str(self) -> &'static str {
        match self {
            SelfCitation::SelfCite => "self",
            SelfCitation::NonSelf => "non-self",
            SelfCitation::Unknown => "unknown",
        }
    }
}

/// Self iff some author of the citing work also appears among the cited
/// authors. Family names must agree; initials are compared only when both
/// sides carry one.
pub fn is_self_citation(citing: &[AuthorName], cited: Option<&[AuthorName]>) -> SelfCitation {
    let cited = match cited {
        Some(c) if !c.is_empty() => c,
        _ => return SelfCitation::Unknown,
    };
    let shared = citing
        .iter()
        .any(|a| cited.iter().any(|b| a.same_person(b)));
    if shared {
        SelfCitation::SelfCite
    } else {
        SelfCitation::NonSelf
    }
}

/// Citation-sentence level class: self if any reference is a
/// self-citation, unknown if no reference has author data.
pub fn citance_self_citation(citing: &[AuthorName], refs: &[RefLink]) -> SelfCitation {
    let mut any_known = false;
    for r in refs {
        match is_self_citation(citing, r.cited_authors.as_deref()) {
            SelfCitation::SelfCite => return SelfCitation::SelfCite,
            SelfCitation::NonSelf => any_known = true,
            SelfCitation::Unknown => {}
        }
    }
    if any_known {
        SelfCitation::NonSelf
    } else {
        SelfCitation::Unknown
    }
}

/// Years between the citing and the cited publication. Negative for
/// citations of work published later than the citing paper.
pub fn relative_age(citing_year: i32, cited_year: i32) -> i32 {
    citing_year - cited_year
}
