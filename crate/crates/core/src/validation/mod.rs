//! Manual validation of query matches.
//!
//! Matches are sampled per query, two coders label each sampled citance as
//! a valid or invalid instance of disagreement, and the per-query scores
//! decide which queries enter the validated set.

mod io;
mod sample;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::catalog::ValidatedSet;
use crate::ingest::CitanceKey;

pub use io::{
    read_annotations, read_sample, read_sample_labels, read_stats, write_annotations, write_sample,
    write_stats, SampleRow,
};
pub use sample::{query_seed, sample_matches, DEFAULT_SAMPLE_SIZE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Valid,
    Invalid,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Valid => "valid",
            Label::Invalid => "invalid",
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "valid" => Ok(Label::Valid),
            "invalid" => Ok(Label::Invalid),
            other => Err(format!("unknown label `{other}` (expected valid|invalid)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AnnotationRecord {
    pub key: CitanceKey,
    pub query_id: String,
    pub coder_id: String,
    pub label: Label,
}

/// Cohen's kappa, or the degenerate case where chance agreement is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kappa {
    Value(f64),
    Undefined,
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Value(v) => Some(v),
            Kappa::Undefined => None,
        }
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kappa::Value(v) => write!(f, "{v}"),
            Kappa::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationStats {
    pub query_id: String,
    pub n: usize,
    pub pct_agree: f64,
    pub pct_valid: f64,
    pub kappa: Kappa,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("no matches to sample")]
    NoMatches,
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("query `{query_id}`: labels missing for {}", list_keys(.citances))]
    MissingLabels {
        query_id: String,
        citances: Vec<CitanceKey>,
    },
    #[error("query `{query_id}`: expected two coders, found {}", describe_coders(.coders))]
    CoderCount {
        query_id: String,
        coders: Vec<String>,
    },
    #[error("duplicate label for {}:{} query `{query_id}` coder `{coder_id}`", .key.doc_id, .key.sentence_index)]
    DuplicateLabel {
        key: CitanceKey,
        query_id: String,
        coder_id: String,
    },
    #[error("no annotations")]
    Empty,
}

fn list_keys(keys: &[CitanceKey]) -> String {
    keys.iter()
        .map(|k| format!("{}:{}", k.doc_id, k.sentence_index))
        .collect::<Vec<_>>()
        .join(", ")
}

fn describe_coders(coders: &[String]) -> String {
    if coders.is_empty() {
        "none".to_string()
    } else {
        format!("{} ({})", coders.len(), coders.join(", "))
    }
}

/// Labels keyed by (citance, query, coder); enforces one label per key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationStore {
    labels: BTreeMap<(CitanceKey, String, String), Label>,
}

impl AnnotationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(
        records: impl IntoIterator<Item = AnnotationRecord>,
    ) -> Result<Self, ValidationError> {
        let mut store = Self::new();
        for r in records {
            store.insert(r)?;
        }
        Ok(store)
    }

    /// Adds a label; a second label for the same key is an error.
    pub fn insert(&mut self, r: AnnotationRecord) -> Result<(), ValidationError> {
        let k = (r.key, r.query_id, r.coder_id);
        if self.labels.contains_key(&k) {
            let (key, query_id, coder_id) = k;
            return Err(ValidationError::DuplicateLabel {
                key,
                query_id,
                coder_id,
            });
        }
        self.labels.insert(k, r.label);
        Ok(())
    }

    /// Adds or replaces a label.
    pub fn set(&mut self, r: AnnotationRecord) {
        self.labels.insert((r.key, r.query_id, r.coder_id), r.label);
    }

    pub fn get(&self, key: &CitanceKey, query_id: &str, coder_id: &str) -> Option<Label> {
        self.labels
            .get(&(key.clone(), query_id.to_string(), coder_id.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Records in key order.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.labels
            .iter()
            .map(|((key, q, c), l)| AnnotationRecord {
                key: key.clone(),
                query_id: q.clone(),
                coder_id: c.clone(),
                label: *l,
            })
            .collect()
    }

    pub fn query_ids(&self) -> BTreeSet<String> {
        self.labels.keys().map(|(_, q, _)| q.clone()).collect()
    }

    pub fn coders(&self, query_id: &str) -> BTreeSet<String> {
        self.labels
            .keys()
            .filter(|(_, q, _)| q == query_id)
            .map(|(_, _, c)| c.clone())
            .collect()
    }

    /// Paired labels of one query for coders `a` and `b`, ordered by citance.
    /// Every citance labeled by either coder must be labeled by both.
    pub fn pairs(
        &self,
        query_id: &str,
        (a, b): (&str, &str),
    ) -> Result<Vec<(Label, Label)>, ValidationError> {
        let mut by_key: BTreeMap<&CitanceKey, (Option<Label>, Option<Label>)> = BTreeMap::new();
        for ((key, q, c), l) in &self.labels {
            if q != query_id {
                continue;
            }
            let slot = by_key.entry(key).or_default();
            if c == a {
                slot.0 = Some(*l);
            } else if c == b {
                slot.1 = Some(*l);
            }
        }
        let missing: Vec<CitanceKey> = by_key
            .iter()
            .filter(|(_, (x, y))| x.is_none() || y.is_none())
            .map(|(k, _)| (*k).clone())
            .collect();
        if !missing.is_empty() {
            return Err(ValidationError::MissingLabels {
                query_id: query_id.to_string(),
                citances: missing,
            });
        }
        Ok(by_key.into_values().filter_map(|(x, y)| Some((x?, y?))).collect())
    }

    /// The query's two coders; any other count is an error.
    pub fn coder_pair(&self, query_id: &str) -> Result<(String, String), ValidationError> {
        let coders: Vec<String> = self.coders(query_id).into_iter().collect();
        match <[String; 2]>::try_from(coders) {
            Ok([a, b]) => Ok((a, b)),
            Err(coders) => Err(ValidationError::CoderCount {
                query_id: query_id.to_string(),
                coders,
            }),
        }
    }
}

fn non_empty(pairs: &[(Label, Label)]) -> Result<f64, ValidationError> {
    if pairs.is_empty() {
        Err(ValidationError::Empty)
    } else {
        Ok(pairs.len() as f64)
    }
}

/// Share of citances where both coders gave the same label.
pub fn percent_agreement(pairs: &[(Label, Label)]) -> Result<f64, ValidationError> {
    let n = non_empty(pairs)?;
    Ok(pairs.iter().filter(|(a, b)| a == b).count() as f64 / n)
}

/// Share of citances both coders labeled valid.
pub fn percent_valid(pairs: &[(Label, Label)]) -> Result<f64, ValidationError> {
    let n = non_empty(pairs)?;
    let both = pairs
        .iter()
        .filter(|(a, b)| *a == Label::Valid && *b == Label::Valid)
        .count();
    Ok(both as f64 / n)
}

pub fn cohens_kappa(pairs: &[(Label, Label)]) -> Result<Kappa, ValidationError> {
    let n = non_empty(pairs)?;
    let p_o = percent_agreement(pairs)?;
    let va = pairs.iter().filter(|(a, _)| *a == Label::Valid).count() as f64 / n;
    let vb = pairs.iter().filter(|(_, b)| *b == Label::Valid).count() as f64 / n;
    let p_e = va * vb + (1.0 - va) * (1.0 - vb);
    if p_e >= 1.0 {
        return Ok(Kappa::Undefined);
    }
    Ok(Kappa::Value((p_o - p_e) / (1.0 - p_e)))
}

fn stats_of(query_id: &str, pairs: &[(Label, Label)]) -> Result<ValidationStats, ValidationError> {
    Ok(ValidationStats {
        query_id: query_id.to_string(),
        n: pairs.len(),
        pct_agree: percent_agreement(pairs)?,
        pct_valid: percent_valid(pairs)?,
        kappa: cohens_kappa(pairs)?,
    })
}

/// Scores for one query, using its two coders.
pub fn query_stats(store: &AnnotationStore, query_id: &str) -> Result<ValidationStats, ValidationError> {
    let (a, b) = store.coder_pair(query_id)?;
    stats_of(query_id, &store.pairs(query_id, (&a, &b))?)
}

/// Scores for every annotated query plus a pooled row, computed over the
/// concatenation of all queries' samples.
pub fn all_stats(
    store: &AnnotationStore,
) -> Result<(Vec<ValidationStats>, ValidationStats), ValidationError> {
    let mut rows = Vec::new();
    let mut pooled = Vec::new();
    for q in store.query_ids() {
        let (a, b) = store.coder_pair(&q)?;
        let pairs = store.pairs(&q, (&a, &b))?;
        rows.push(stats_of(&q, &pairs)?);
        pooled.extend(pairs);
    }
    let pooled = stats_of("ALL", &pooled)?;
    Ok((rows, pooled))
}

/// Keeps queries whose percent valid reaches the threshold (inclusive).
pub fn gate_queries(stats: &[ValidationStats], threshold: f64) -> ValidatedSet {
    ValidatedSet {
        threshold,
        query_ids: stats
            .iter()
            .filter(|s| s.pct_valid >= threshold - 1e-12)
            .map(|s| s.query_id.clone())
            .collect(),
    }
}
