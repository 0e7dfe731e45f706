//! Aggregates over flagged citances.
//!
//! A citance is flagged when any query of the validated set matched it. The
//! reports here group flags by document metadata, fit yearly trends, and
//! compare self against non-self citation; [`impact`] covers the
//! citation-count analyses.

mod impact;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::catalog::ValidatedSet;
use crate::ingest::{
    citance_self_citation, position_fraction, relative_age, CitanceKey, Document, MainField,
    SelfCitation,
};
use crate::matching::MatchRecord;

pub use impact::{
    citation_cohorts, citation_gap, first_disagreement_years, impact_ratio, CitationCohort,
    CitationTable, GapRow, ImpactReport, PaperRecord,
};

/// Width of a position bin as a fraction of the document.
pub const POSITION_BINS: usize = 20;
/// Years per age bin.
pub const AGE_BIN_WIDTH: i32 = 5;
/// Bound of the meso-field log ratio (a factor of four either way).
pub const MESO_CLAMP: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("a slope needs at least two distinct years, got {0}")]
    TooFewYears(usize),
    #[error("no self-citation citances with a nonzero rate; ratio undefined")]
    NoSelfCitations,
    #[error("no non-self citation citances; ratio undefined")]
    NoNonSelfCitations,
    #[error("no meso field has citances")]
    NoMesoFields,
    #[error("no paper cited in disagreement falls inside the observation window for k={0}")]
    EmptyCohorts(i32),
    #[error("expected citations are zero for k={0}; ratio undefined")]
    ZeroExpected(i32),
    #[error("{0} group is empty")]
    EmptyGroup(&'static str),
}

/// Metadata of one citing sentence, read off its document.
#[derive(Debug, Clone, PartialEq)]
pub struct CitanceInfo {
    pub key: CitanceKey,
    pub year: i32,
    pub main_field: Option<MainField>,
    pub meso_field: Option<u32>,
    pub self_citation: SelfCitation,
    /// Citing year minus the cited year of the first dated reference.
    pub age: Option<i32>,
    pub position_fraction: f64,
    /// Distinct cited document ids, sorted.
    pub cited_docs: Vec<String>,
}

/// Citance metadata for a corpus, sorted by key.
pub fn citance_infos(docs: &[Document]) -> Vec<CitanceInfo> {
    let mut out = Vec::new();
    for d in docs {
        let total = d.sentences.len();
        for s in d.sentences.iter().filter(|s| !s.refs.is_empty()) {
            let mut cited: Vec<String> = s.refs.iter().filter_map(|r| r.cited_doc_id.clone()).collect();
            cited.sort();
            cited.dedup();
            out.push(CitanceInfo {
                key: CitanceKey {
                    doc_id: d.doc_id.clone(),
                    sentence_index: s.index,
                },
                year: d.year,
                main_field: d.main_field,
                meso_field: d.meso_field,
                self_citation: citance_self_citation(&d.authors, &s.refs),
                age: s
                    .refs
                    .iter()
                    .find_map(|r| r.cited_year)
                    .map(|y| relative_age(d.year, y)),
                position_fraction: position_fraction(s.index, total),
                cited_docs: cited,
            });
        }
    }
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisagreementFlag {
    pub key: CitanceKey,
    pub flagged: bool,
}

/// One flag per citance, in the order of `infos`. A citance counts once no
/// matter how many validated queries matched it.
pub fn flag_citances(
    infos: &[CitanceInfo],
    matches: &[MatchRecord],
    validated: &ValidatedSet,
) -> Vec<DisagreementFlag> {
    let hit: BTreeSet<(&str, usize)> = matches
        .iter()
        .filter(|m| validated.contains(&m.query_id))
        .map(|m| (m.doc_id.as_str(), m.sentence_index))
        .collect();
    infos
        .iter()
        .map(|c| DisagreementFlag {
            flagged: hit.contains(&(c.key.doc_id.as_str(), c.key.sentence_index)),
            key: c.key.clone(),
        })
        .collect()
}

fn zip<'a>(
    infos: &'a [CitanceInfo],
    flags: &'a [DisagreementFlag],
) -> impl Iterator<Item = (&'a CitanceInfo, bool)> {
    assert_eq!(infos.len(), flags.len(), "flags must align with citances");
    infos.iter().zip(flags).map(|(c, f)| {
        debug_assert_eq!(c.key, f.key);
        (c, f.flagged)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    MainField,
    Year,
    FieldYear,
    MesoField,
    SelfCitation,
    AgeBin,
    PositionBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupKey {
    All,
    Field(MainField),
    Year(i32),
    FieldYear(MainField, i32),
    Meso(u32),
    SelfCitation(SelfCitation),
    /// Relative ages below zero.
    AgeNegative,
    /// Lower bound of a five-year age bin.
    Age(i32),
    /// Index of a position bin.
    Position(usize),
    Unknown,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKey::All => f.write_str("All"),
            GroupKey::Field(m) => write!(f, "{m}"),
            GroupKey::Year(y) => write!(f, "{y}"),
            GroupKey::FieldYear(m, y) => write!(f, "{m}|{y}"),
            GroupKey::Meso(m) => write!(f, "{m}"),
            GroupKey::SelfCitation(s) => f.write_str(s.as_str()),
            GroupKey::AgeNegative => f.write_str("<0"),
            GroupKey::Age(a) => write!(f, "{a}-{}", a + AGE_BIN_WIDTH - 1),
            GroupKey::Position(i) => {
                let w = 100 / POSITION_BINS;
                write!(f, "{}-{}%", i * w, (i + 1) * w)
            }
            GroupKey::Unknown => f.write_str("unknown"),
        }
    }
}

pub fn position_bin(fraction: f64) -> usize {
    ((fraction * POSITION_BINS as f64).floor().max(0.0) as usize).min(POSITION_BINS - 1)
}

pub fn age_bin(age: i32) -> GroupKey {
    if age < 0 {
        GroupKey::AgeNegative
    } else {
        GroupKey::Age(age - age % AGE_BIN_WIDTH)
    }
}

fn group_of(c: &CitanceInfo, by: GroupBy) -> GroupKey {
    let known = |o: Option<GroupKey>| o.unwrap_or(GroupKey::Unknown);
    match by {
        GroupBy::MainField => known(c.main_field.map(GroupKey::Field)),
        GroupBy::Year => GroupKey::Year(c.year),
        GroupBy::FieldYear => known(c.main_field.map(|m| GroupKey::FieldYear(m, c.year))),
        GroupBy::MesoField => known(c.meso_field.map(GroupKey::Meso)),
        GroupBy::SelfCitation => GroupKey::SelfCitation(c.self_citation),
        GroupBy::AgeBin => known(c.age.map(age_bin)),
        GroupBy::PositionBin => GroupKey::Position(position_bin(c.position_fraction)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub group: GroupKey,
    pub disagreement_count: u64,
    pub citance_count: u64,
    /// Percent of citances flagged.
    pub rate: f64,
}

fn rate_rows(counts: BTreeMap<GroupKey, (u64, u64)>) -> Vec<RateRow> {
    counts
        .into_iter()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(group, (d, n))| RateRow {
            group,
            disagreement_count: d,
            citance_count: n,
            rate: 100.0 * d as f64 / n as f64,
        })
        .collect()
}

/// Disagreement rate per group, ordered by group key. Citances lacking the
/// grouping metadata land in [`GroupKey::Unknown`].
pub fn rate_by(infos: &[CitanceInfo], flags: &[DisagreementFlag], by: GroupBy) -> Vec<RateRow> {
    let mut counts: BTreeMap<GroupKey, (u64, u64)> = BTreeMap::new();
    for (c, flagged) in zip(infos, flags) {
        let e = counts.entry(group_of(c, by)).or_default();
        e.0 += flagged as u64;
        e.1 += 1;
    }
    rate_rows(counts)
}

/// Rate over all citances.
pub fn overall_rate(infos: &[CitanceInfo], flags: &[DisagreementFlag]) -> Option<RateRow> {
    let mut counts = BTreeMap::new();
    let e: &mut (u64, u64) = counts.entry(GroupKey::All).or_default();
    for (_, flagged) in zip(infos, flags) {
        e.0 += flagged as u64;
        e.1 += 1;
    }
    rate_rows(counts).pop()
}

/// Ordinary least-squares slope of rate against year.
pub fn yearly_slope(points: &[(i32, f64)]) -> Result<f64, AnalyticsError> {
    let years: BTreeSet<i32> = points.iter().map(|p| p.0).collect();
    if years.len() < 2 {
        return Err(AnalyticsError::TooFewYears(years.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub group: GroupKey,
    pub n_years: usize,
    pub slope: Result<f64, AnalyticsError>,
}

/// Per-field yearly slopes of the rate, plus the all-field slope.
pub fn field_slopes(infos: &[CitanceInfo], flags: &[DisagreementFlag]) -> Vec<SlopeRow> {
    let mut series: BTreeMap<GroupKey, Vec<(i32, f64)>> = BTreeMap::new();
    for r in rate_by(infos, flags, GroupBy::Year) {
        if let GroupKey::Year(y) = r.group {
            series.entry(GroupKey::All).or_default().push((y, r.rate));
        }
    }
    for r in rate_by(infos, flags, GroupBy::FieldYear) {
        if let GroupKey::FieldYear(m, y) = r.group {
            series.entry(GroupKey::Field(m)).or_default().push((y, r.rate));
        }
    }
    series
        .into_iter()
        .map(|(group, pts)| SlopeRow {
            group,
            n_years: pts.len(),
            slope: yearly_slope(&pts),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCitationRow {
    pub group: GroupKey,
    pub self_rate: Option<f64>,
    pub non_self_rate: Option<f64>,
    pub ratio: Result<f64, AnalyticsError>,
}

/// Non-self rate over self rate; citances with unknown class are ignored.
pub fn self_citation_ratio(
    infos: &[CitanceInfo],
    flags: &[DisagreementFlag],
) -> Result<f64, AnalyticsError> {
    ratio_of(&rate_by(infos, flags, GroupBy::SelfCitation)).2
}

type Ratio = (Option<f64>, Option<f64>, Result<f64, AnalyticsError>);

fn ratio_of(rows: &[RateRow]) -> Ratio {
    let rate = |s| {
        rows.iter()
            .find(|r| r.group == GroupKey::SelfCitation(s))
            .map(|r| r.rate)
    };
    let own = rate(SelfCitation::SelfCite);
    let other = rate(SelfCitation::NonSelf);
    let ratio = match (own, other) {
        (Some(a), Some(b)) if a > 0.0 => Ok(b / a),
        (Some(_), Some(_)) | (None, _) => Err(AnalyticsError::NoSelfCitations),
        (Some(_), None) => Err(AnalyticsError::NoNonSelfCitations),
    };
    (own, other, ratio)
}

/// Self-citation comparison overall and within each main field.
pub fn self_citation_table(infos: &[CitanceInfo], flags: &[DisagreementFlag]) -> Vec<SelfCitationRow> {
    let mut groups: BTreeMap<GroupKey, BTreeMap<GroupKey, (u64, u64)>> = BTreeMap::new();
    for (c, flagged) in zip(infos, flags) {
        let k = GroupKey::SelfCitation(c.self_citation);
        let field = c.main_field.map_or(GroupKey::Unknown, GroupKey::Field);
        for g in [GroupKey::All, field] {
            let e = groups.entry(g).or_default().entry(k).or_default();
            e.0 += flagged as u64;
            e.1 += 1;
        }
    }
    groups
        .into_iter()
        .map(|(group, counts)| {
            let (self_rate, non_self_rate, ratio) = ratio_of(&rate_rows(counts));
            SelfCitationRow {
                group,
                self_rate,
                non_self_rate,
                ratio,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MesoRow {
    pub meso_field: u32,
    pub rate: f64,
    pub log_ratio: f64,
    pub n_citances: u64,
    /// Rate was zero, so `log_ratio` holds the lower clamp.
    pub zero_rate: bool,
}

/// `log2(rate / mean rate)` per meso field, clamped to ±2. The mean is the
/// unweighted mean of the meso-field rates.
pub fn meso_log_ratio(rows: &[RateRow]) -> Result<Vec<MesoRow>, AnalyticsError> {
    let meso: Vec<(u32, &RateRow)> = rows
        .iter()
        .filter_map(|r| match r.group {
            GroupKey::Meso(m) => Some((m, r)),
            _ => None,
        })
        .collect();
    if meso.is_empty() {
        return Err(AnalyticsError::NoMesoFields);
    }
    let mean = meso.iter().map(|(_, r)| r.rate).sum::<f64>() / meso.len() as f64;
    Ok(meso
        .into_iter()
        .map(|(m, r)| {
            let zero_rate = r.rate <= 0.0;
            let log_ratio = if zero_rate {
                -MESO_CLAMP
            } else {
                (r.rate / mean).log2().clamp(-MESO_CLAMP, MESO_CLAMP)
            };
            MesoRow {
                meso_field: m,
                rate: r.rate,
                log_ratio,
                n_citances: r.citance_count,
                zero_rate,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopRow {
    pub doc_id: String,
    pub count: u64,
}

fn ranked(counts: BTreeMap<&str, u64>, n: usize) -> Vec<TopRow> {
    let mut rows: Vec<TopRow> = counts
        .into_iter()
        .map(|(d, c)| TopRow {
            doc_id: d.to_string(),
            count: c,
        })
        .collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.doc_id.cmp(&b.doc_id)));
    rows.truncate(n);
    rows
}

/// Documents issuing the most flagged citances, and documents cited by the
/// most flagged citances. A citance citing the same document twice counts
/// once. Ties are broken by document id.
pub fn top_tables(
    infos: &[CitanceInfo],
    flags: &[DisagreementFlag],
    n: usize,
) -> (Vec<TopRow>, Vec<TopRow>) {
    let mut issuers: BTreeMap<&str, u64> = BTreeMap::new();
    let mut receivers: BTreeMap<&str, u64> = BTreeMap::new();
    for (c, flagged) in zip(infos, flags) {
        if !flagged {
            continue;
        }
        *issuers.entry(&c.key.doc_id).or_default() += 1;
        for d in &c.cited_docs {
            *receivers.entry(d).or_default() += 1;
        }
    }
    (ranked(issuers, n), ranked(receivers, n))
}

/// Ids of documents containing at least one flagged citance.
pub fn issuer_ids(flags: &[DisagreementFlag]) -> BTreeSet<String> {
    flags
        .iter()
        .filter(|f| f.flagged)
        .map(|f| f.key.doc_id.clone())
        .collect()
}
