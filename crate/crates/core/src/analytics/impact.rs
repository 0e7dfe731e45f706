use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use super::{zip, AnalyticsError, CitanceInfo, DisagreementFlag, GroupKey};
use crate::ingest::{DocType, Document, MainField};
use crate::table::{self, columns, field_error, parse, TableError};

/// Yearly citation counts of one publication.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperRecord {
    pub doc_id: String,
    pub pub_year: i32,
    pub main_field: Option<MainField>,
    pub doc_type: DocType,
    /// Citations received at each age, from the publication year to the end
    /// of the observation window. Citations dated before publication are
    /// counted at age 0.
    by_age: Vec<u64>,
    /// Running totals of `by_age`.
    cumulative: Vec<u64>,
}

impl PaperRecord {
    pub fn new(doc: &Document, counts: &BTreeMap<i32, u64>, last_year: i32) -> Self {
        let span = (last_year - doc.year + 1).max(0) as usize;
        let mut by_age = vec![0u64; span];
        for (&year, &n) in counts {
            let age = (year - doc.year).max(0) as usize;
            if let Some(slot) = by_age.get_mut(age) {
                *slot += n;
            }
        }
        let cumulative = by_age
            .iter()
            .scan(0u64, |acc, n| {
                *acc += n;
                Some(*acc)
            })
            .collect();
        PaperRecord {
            doc_id: doc.doc_id.clone(),
            pub_year: doc.year,
            main_field: doc.main_field,
            doc_type: doc.doc_type,
            by_age,
            cumulative,
        }
    }

    /// Last observable age.
    pub fn max_age(&self) -> Option<i32> {
        self.by_age.len().checked_sub(1).map(|a| a as i32)
    }

    /// Citations received in the year at `age`.
    pub fn received_at(&self, age: i32) -> u64 {
        usize::try_from(age).ok().and_then(|a| self.by_age.get(a)).copied().unwrap_or(0)
    }

    /// Citations received from publication through the year at `age`.
    pub fn held_at(&self, age: i32) -> u64 {
        usize::try_from(age).ok().and_then(|a| self.cumulative.get(a)).copied().unwrap_or(0)
    }
}

/// Citation histories of the corpus documents over a common observation
/// window ending at `last_year`.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationTable {
    papers: Vec<PaperRecord>,
    last_year: i32,
}

impl CitationTable {
    /// Builds histories from explicit `(doc_id, year, citations)` rows.
    /// Rows for documents outside the corpus are ignored.
    pub fn from_counts(
        docs: &[Document],
        rows: impl IntoIterator<Item = (String, i32, u64)>,
    ) -> Self {
        let mut counts: HashMap<String, BTreeMap<i32, u64>> = HashMap::new();
        let mut last_year = docs.iter().map(|d| d.year).max().unwrap_or(0);
        let known: BTreeSet<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
        for (doc, year, n) in rows {
            if !known.contains(doc.as_str()) {
                continue;
            }
            last_year = last_year.max(year);
            *counts.entry(doc).or_default().entry(year).or_default() += n;
        }
        let empty = BTreeMap::new();
        let mut papers: Vec<PaperRecord> = docs
            .iter()
            .map(|d| PaperRecord::new(d, counts.get(&d.doc_id).unwrap_or(&empty), last_year))
            .collect();
        papers.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        CitationTable { papers, last_year }
    }

    /// Counts each citing document once per cited corpus document, in the
    /// citing document's year.
    pub fn from_corpus(docs: &[Document]) -> Self {
        let mut pairs: BTreeSet<(&str, &str, i32)> = BTreeSet::new();
        for d in docs {
            for s in &d.sentences {
                for r in &s.refs {
                    if let Some(cited) = &r.cited_doc_id {
                        pairs.insert((cited, &d.doc_id, d.year));
                    }
                }
            }
        }
        let rows: Vec<(String, i32, u64)> = pairs
            .into_iter()
            .map(|(cited, _, year)| (cited.to_string(), year, 1))
            .collect();
        Self::from_counts(docs, rows)
    }

    /// Reads a CSV with columns `doc_id,year,citations`.
    pub fn read_counts<R: Read>(docs: &[Document], r: R) -> Result<Self, TableError> {
        let mut rdr = table::reader(r);
        let c = columns(&mut rdr, &["doc_id", "year", "citations"])?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec[c[0]].is_empty() {
                return Err(field_error(&rec, "empty doc_id"));
            }
            rows.push((
                rec[c[0]].to_string(),
                parse(&rec, c[1], "year")?,
                parse(&rec, c[2], "citation count")?,
            ));
        }
        Ok(Self::from_counts(docs, rows))
    }

    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }

    pub fn last_year(&self) -> i32 {
        self.last_year
    }

    pub fn get(&self, doc_id: &str) -> Option<&PaperRecord> {
        self.papers
            .binary_search_by(|p| p.doc_id.as_str().cmp(doc_id))
            .ok()
            .map(|i| &self.papers[i])
    }
}

/// Earliest year in which a flagged citance cites each document.
pub fn first_disagreement_years(
    infos: &[CitanceInfo],
    flags: &[DisagreementFlag],
) -> BTreeMap<String, i32> {
    let mut first: BTreeMap<String, i32> = BTreeMap::new();
    for (c, flagged) in zip(infos, flags) {
        if !flagged {
            continue;
        }
        for d in &c.cited_docs {
            first
                .entry(d.clone())
                .and_modify(|y| *y = (*y).min(c.year))
                .or_insert(c.year);
        }
    }
    first
}

/// Papers sharing age `t` and `c` citations held at that age.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationCohort {
    pub c: u64,
    pub t: i32,
    /// Papers first cited in disagreement at this cell.
    pub p: u64,
    pub mean_next_disagreement: f64,
    pub mean_next_expected: f64,
    /// Papers of any kind at this cell, the base of the expectation.
    pub n_expected: u64,
}

fn in_scope(p: &PaperRecord, field: Option<MainField>) -> bool {
    field.is_none() || p.main_field == field
}

/// Cohorts of disagreement-cited papers with their next-citation means at
/// horizon `k`. Only cells where year `t + k` is observed are kept. With
/// `field` set, both the disagreement papers and the comparison cohort are
/// restricted to that main field.
pub fn citation_cohorts(
    table: &CitationTable,
    first: &BTreeMap<String, i32>,
    k: i32,
    field: Option<MainField>,
) -> Vec<CitationCohort> {
    let mut cells: BTreeMap<(u64, i32), (u64, u64)> = BTreeMap::new();
    for (doc, &year) in first {
        let Some(p) = table.get(doc) else { continue };
        if !in_scope(p, field) {
            continue;
        }
        let t = year - p.pub_year;
        if t < 0 || p.max_age().is_none_or(|m| t + k > m) {
            continue;
        }
        let e = cells.entry((p.held_at(t), t)).or_default();
        e.0 += 1;
        e.1 += p.received_at(t + k);
    }
    let mut expected: HashMap<(u64, i32), (u64, u64)> = HashMap::new();
    for p in table.papers().iter().filter(|p| in_scope(p, field)) {
        let Some(max_age) = p.max_age() else { continue };
        for t in 0..=(max_age - k) {
            let cell = (p.held_at(t), t);
            if cells.contains_key(&cell) {
                let e = expected.entry(cell).or_default();
                e.0 += 1;
                e.1 += p.received_at(t + k);
            }
        }
    }
    cells
        .into_iter()
        .map(|((c, t), (p, sum))| {
            let (n, esum) = expected[&(c, t)];
            CitationCohort {
                c,
                t,
                p,
                mean_next_disagreement: sum as f64 / p as f64,
                mean_next_expected: esum as f64 / n as f64,
                n_expected: n,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    pub group: GroupKey,
    pub k: i32,
    /// Total weight: disagreement-cited papers inside the window.
    pub n_papers: u64,
    pub mean_disagreement: f64,
    pub mean_expected: f64,
    pub d: f64,
}

/// Cohort-weighted ratio of next-period citations of disagreement-cited
/// papers to the expectation for papers in the same cohort.
pub fn impact_ratio(
    table: &CitationTable,
    first: &BTreeMap<String, i32>,
    k: i32,
    field: Option<MainField>,
) -> Result<ImpactReport, AnalyticsError> {
    let cohorts = citation_cohorts(table, first, k, field);
    let weight: u64 = cohorts.iter().map(|c| c.p).sum();
    if weight == 0 {
        return Err(AnalyticsError::EmptyCohorts(k));
    }
    let w = weight as f64;
    let mean_disagreement = cohorts
        .iter()
        .map(|c| c.p as f64 * c.mean_next_disagreement)
        .sum::<f64>()
        / w;
    let mean_expected = cohorts
        .iter()
        .map(|c| c.p as f64 * c.mean_next_expected)
        .sum::<f64>()
        / w;
    if mean_expected == 0.0 {
        return Err(AnalyticsError::ZeroExpected(k));
    }
    Ok(ImpactReport {
        group: field.map_or(GroupKey::All, GroupKey::Field),
        k,
        n_papers: weight,
        mean_disagreement,
        mean_expected,
        d: mean_disagreement / mean_expected,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    /// Years after publication.
    pub k: i32,
    pub n_issuers: u64,
    pub n_others: u64,
    pub mean_issuers: f64,
    pub mean_others: f64,
    pub gap: f64,
}

/// Mean cumulative citations `k` years after publication of papers issuing
/// at least one flagged citance, minus the same mean for other papers.
/// Each year uses the papers observed that long.
pub fn citation_gap(
    table: &CitationTable,
    issuers: &BTreeSet<String>,
    doc_type: Option<DocType>,
    max_k: Option<i32>,
) -> Result<Vec<GapRow>, AnalyticsError> {
    let scope: Vec<&PaperRecord> = table
        .papers()
        .iter()
        .filter(|p| doc_type.is_none_or(|t| p.doc_type == t))
        .collect();
    let (with, without): (Vec<&PaperRecord>, Vec<&PaperRecord>) =
        scope.into_iter().partition(|p| issuers.contains(&p.doc_id));
    if with.is_empty() {
        return Err(AnalyticsError::EmptyGroup("issuer"));
    }
    if without.is_empty() {
        return Err(AnalyticsError::EmptyGroup("non-issuer"));
    }
    let mean_at = |group: &[&PaperRecord], k: i32| {
        let held: Vec<u64> = group
            .iter()
            .filter(|p| p.max_age().is_some_and(|m| m >= k))
            .map(|p| p.held_at(k))
            .collect();
        let n = held.len() as u64;
        (n, held.iter().sum::<u64>() as f64 / n.max(1) as f64)
    };
    let mut rows = Vec::new();
    let mut k = 0;
    while max_k.is_none_or(|m| k <= m) {
        let (ni, mi) = mean_at(&with, k);
        let (no, mo) = mean_at(&without, k);
        if ni == 0 || no == 0 {
            break;
        }
        rows.push(GapRow {
            k,
            n_issuers: ni,
            n_others: no,
            mean_issuers: mi,
            mean_others: mo,
            gap: mi - mo,
        });
        k += 1;
    }
    Ok(rows)
}
