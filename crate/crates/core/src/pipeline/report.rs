use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use super::{
    add_common, citances_of, header, load, load_queries, resolve_validated, table_err,
    write_artifact, ConfigDigest, PipelineError, Result, RunConfig,
};
use crate::analytics::{
    citance_infos, citation_gap, field_slopes, first_disagreement_years, flag_citances,
    impact_ratio, issuer_ids, meso_log_ratio, overall_rate, rate_by, self_citation_table,
    top_tables, AnalyticsError, CitationTable, GroupBy, GroupKey, RateRow, TopRow,
};
use crate::ingest::{DocType, MainField};
use crate::matching::run_all;
use crate::table::{fmt_f64, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportKind {
    Rates,
    Slopes,
    Selfcite,
    Age,
    Position,
    Meso,
    Top,
    Impact,
    Gap,
}

impl ReportKind {
    pub const ALL: [ReportKind; 9] = [
        ReportKind::Rates,
        ReportKind::Slopes,
        ReportKind::Selfcite,
        ReportKind::Age,
        ReportKind::Position,
        ReportKind::Meso,
        ReportKind::Top,
        ReportKind::Impact,
        ReportKind::Gap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Rates => "rates",
            ReportKind::Slopes => "slopes",
            ReportKind::Selfcite => "selfcite",
            ReportKind::Age => "age",
            ReportKind::Position => "position",
            ReportKind::Meso => "meso",
            ReportKind::Top => "top",
            ReportKind::Impact => "impact",
            ReportKind::Gap => "gap",
        }
    }

    /// Parses a comma-separated list; `all` selects every report.
    pub fn parse_list(s: &str) -> std::result::Result<Vec<ReportKind>, String> {
        let mut out = BTreeSet::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(ReportKind::ALL);
            } else {
                out.insert(part.parse()?);
            }
        }
        if out.is_empty() {
            return Err("empty report list".into());
        }
        Ok(out.into_iter().collect())
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ReportKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = ReportKind::ALL.iter().map(|k| k.as_str()).collect();
            format!("unknown report `{s}` (valid: {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub which: Vec<ReportKind>,
    /// Also write `group,metric,value` variants.
    pub long: bool,
    /// `doc_id,year,citations` file; citations are derived from corpus
    /// references when absent.
    pub citations: Option<PathBuf>,
    pub top_n: usize,
    pub horizons: Vec<i32>,
    pub gap_doc_type: Option<DocType>,
    pub gap_max_k: Option<i32>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            which: ReportKind::ALL.to_vec(),
            long: false,
            citations: None,
            top_n: 20,
            horizons: vec![1, 2, 3],
            gap_doc_type: None,
            gap_max_k: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportSummary {
    pub citances: usize,
    pub flagged: usize,
    pub files: Vec<PathBuf>,
    /// Reports or rows that could not be computed, with the reason.
    pub notes: Vec<String>,
}

const UNDEFINED: &str = "undefined";

fn opt(v: Option<f64>) -> String {
    v.map_or(UNDEFINED.to_string(), fmt_f64)
}

fn res(v: &std::result::Result<f64, AnalyticsError>, notes: &mut Vec<String>, what: String) -> String {
    match v {
        Ok(x) => fmt_f64(*x),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            UNDEFINED.to_string()
        }
    }
}

fn rate_cells(r: &RateRow) -> [String; 3] {
    [
        r.disagreement_count.to_string(),
        r.citance_count.to_string(),
        fmt_f64(r.rate),
    ]
}

fn top_table(rows: &[TopRow]) -> Table {
    let mut t = Table::new(&["rank", "doc_id", "count"], 2);
    for (i, r) in rows.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), r.doc_id.clone(), r.count.to_string()]);
    }
    t
}

/// Computes the selected reports and writes `report_<name>.csv` files.
pub fn cmd_report(cfg: &RunConfig, opts: &ReportOptions) -> Result<ReportSummary> {
    let queries = load_queries(&cfg.queries)?;
    let validated = resolve_validated(&cfg.validated)?;
    let missing: Vec<&String> = validated
        .query_ids
        .iter()
        .filter(|id| !queries.iter().any(|q| &q.query_id == *id))
        .collect();
    if !missing.is_empty() {
        let ids: Vec<&str> = missing.iter().map(|s| s.as_str()).collect();
        return Err(PipelineError::Data(format!(
            "validated queries absent from the query catalog: {}",
            ids.join(", ")
        )));
    }
    let active: Vec<_> = queries
        .iter()
        .filter(|q| validated.contains(&q.query_id))
        .cloned()
        .collect();

    let report = load(cfg)?;
    let citances = citances_of(&report);
    let matches = run_all(&citances, &active);
    drop(citances);
    let docs = &report.documents;
    let infos = citance_infos(docs);
    let flags = flag_citances(&infos, &matches, &validated);

    let mut digest = ConfigDigest::new("report");
    add_common(&mut digest, cfg, &queries)?;
    digest.add("validated", validated.query_ids.iter().cloned().collect::<Vec<_>>().join(","));
    digest.add("which", opts.which.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(","));
    digest.add("long", opts.long.to_string());
    digest.add("top_n", opts.top_n.to_string());
    digest.add("horizons", format!("{:?}", opts.horizons));
    digest.add("gap_doc_type", opts.gap_doc_type.map_or("any", |t| t.as_str()));
    digest.add("gap_max_k", format!("{:?}", opts.gap_max_k));
    if let Some(p) = &opts.citations {
        digest.add_file("citations", p)?;
    }
    let head = header(&digest, cfg.seed, &[]);

    let needs_citations = opts.which.contains(&ReportKind::Impact) || opts.which.contains(&ReportKind::Gap);
    let citation_table = if !needs_citations {
        None
    } else if let Some(p) = &opts.citations {
        let f = fs::File::open(p).map_err(super::io_err(p))?;
        Some(CitationTable::read_counts(docs, f).map_err(table_err(p))?)
    } else {
        Some(CitationTable::from_corpus(docs))
    };

    let mut summary = ReportSummary {
        citances: infos.len(),
        flagged: flags.iter().filter(|f| f.flagged).count(),
        ..Default::default()
    };
    let mut tables: Vec<(String, Table)> = Vec::new();
    for kind in &opts.which {
        let mut notes = Vec::new();
        match kind {
            ReportKind::Rates => {
                let mut t = Table::new(
                    &["dimension", "group", "disagreement_count", "citance_count", "rate"],
                    2,
                );
                let dims = [
                    ("main_field", GroupBy::MainField),
                    ("year", GroupBy::Year),
                    ("field_year", GroupBy::FieldYear),
                ];
                let all = overall_rate(&infos, &flags).into_iter().map(|r| ("all", r));
                let grouped = dims
                    .iter()
                    .flat_map(|(name, by)| rate_by(&infos, &flags, *by).into_iter().map(move |r| (*name, r)));
                for (dim, r) in all.chain(grouped) {
                    let mut row = vec![dim.to_string(), r.group.to_string()];
                    row.extend(rate_cells(&r));
                    t.push(row);
                }
                tables.push(("rates".into(), t));
            }
            ReportKind::Age | ReportKind::Position => {
                let by = if *kind == ReportKind::Age { GroupBy::AgeBin } else { GroupBy::PositionBin };
                let rows = rate_by(&infos, &flags, by);
                let mut t = Table::new(
                    &[
                        "group",
                        "disagreement_count",
                        "citance_count",
                        "rate",
                        "share_disagreement",
                        "share_all",
                    ],
                    1,
                );
                let flagged: u64 = rows.iter().map(|r| r.disagreement_count).sum();
                let all: u64 = rows.iter().map(|r| r.citance_count).sum();
                for r in &rows {
                    let mut row = vec![r.group.to_string()];
                    row.extend(rate_cells(r));
                    row.push(opt((flagged > 0).then(|| r.disagreement_count as f64 / flagged as f64)));
                    row.push(fmt_f64(r.citance_count as f64 / all as f64));
                    t.push(row);
                }
                tables.push((kind.as_str().into(), t));
            }
            ReportKind::Slopes => {
                let mut t = Table::new(&["group", "n_years", "slope_pp_per_year"], 1);
                for r in field_slopes(&infos, &flags) {
                    let slope = res(&r.slope, &mut notes, format!("slope {}", r.group));
                    t.push(vec![r.group.to_string(), r.n_years.to_string(), slope]);
                }
                t.notes = notes;
                tables.push(("slopes".into(), t));
            }
            ReportKind::Selfcite => {
                let mut t = Table::new(&["group", "rate_self", "rate_non_self", "ratio"], 1);
                for r in self_citation_table(&infos, &flags) {
                    let ratio = res(&r.ratio, &mut notes, format!("ratio {}", r.group));
                    t.push(vec![r.group.to_string(), opt(r.self_rate), opt(r.non_self_rate), ratio]);
                }
                t.notes = notes;
                tables.push(("selfcite".into(), t));
            }
            ReportKind::Meso => {
                let mut t = Table::new(
                    &["meso_field", "rate", "log_ratio", "n_citances", "zero_rate"],
                    1,
                );
                match meso_log_ratio(&rate_by(&infos, &flags, GroupBy::MesoField)) {
                    Ok(rows) => {
                        for r in rows {
                            t.push(vec![
                                r.meso_field.to_string(),
                                fmt_f64(r.rate),
                                fmt_f64(r.log_ratio),
                                r.n_citances.to_string(),
                                r.zero_rate.to_string(),
                            ]);
                        }
                    }
                    Err(e) => t.notes.push(e.to_string()),
                }
                tables.push(("meso".into(), t));
            }
            ReportKind::Top => {
                let (issuers, receivers) = top_tables(&infos, &flags, opts.top_n);
                tables.push(("top_issuers".into(), top_table(&issuers)));
                tables.push(("top_receivers".into(), top_table(&receivers)));
            }
            ReportKind::Impact => {
                let ct = citation_table.as_ref().expect("citation table built");
                let first = first_disagreement_years(&infos, &flags);
                let mut t = Table::new(
                    &["group", "k", "n_papers", "mean_disagreement", "mean_expected", "d"],
                    2,
                );
                let fields: BTreeSet<MainField> = ct.papers().iter().filter_map(|p| p.main_field).collect();
                let groups = std::iter::once(None).chain(fields.into_iter().map(Some));
                for field in groups {
                    let name = field.map_or(GroupKey::All, GroupKey::Field).to_string();
                    for &k in &opts.horizons {
                        match impact_ratio(ct, &first, k, field) {
                            Ok(r) => t.push(vec![
                                name.clone(),
                                k.to_string(),
                                r.n_papers.to_string(),
                                fmt_f64(r.mean_disagreement),
                                fmt_f64(r.mean_expected),
                                fmt_f64(r.d),
                            ]),
                            Err(e) => {
                                notes.push(format!("{name} k={k}: {e}"));
                                t.push(vec![
                                    name.clone(),
                                    k.to_string(),
                                    "0".into(),
                                    UNDEFINED.into(),
                                    UNDEFINED.into(),
                                    UNDEFINED.into(),
                                ]);
                            }
                        }
                    }
                }
                t.notes = notes;
                tables.push(("impact".into(), t));
            }
            ReportKind::Gap => {
                let ct = citation_table.as_ref().expect("citation table built");
                let mut t = Table::new(
                    &["k", "n_issuers", "n_others", "mean_issuers", "mean_others", "gap"],
                    1,
                );
                match citation_gap(ct, &issuer_ids(&flags), opts.gap_doc_type, opts.gap_max_k) {
                    Ok(rows) => {
                        for r in rows {
                            t.push(vec![
                                r.k.to_string(),
                                r.n_issuers.to_string(),
                                r.n_others.to_string(),
                                fmt_f64(r.mean_issuers),
                                fmt_f64(r.mean_others),
                                fmt_f64(r.gap),
                            ]);
                        }
                    }
                    Err(e) => t.notes.push(e.to_string()),
                }
                tables.push(("gap".into(), t));
            }
        }
    }

    for (name, t) in &tables {
        summary.notes.extend(t.notes.iter().map(|n| format!("{name}: {n}")));
        let path = cfg.out.join(format!("report_{name}.csv"));
        write_artifact(&path, &head, |w| t.write_csv(w).map_err(table_err(&path)))?;
        summary.files.push(path);
        if opts.long {
            let path = cfg.out.join(format!("report_{name}_long.csv"));
            write_artifact(&path, &head, |w| t.write_long(w).map_err(table_err(&path)))?;
            summary.files.push(path);
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_names() {
        assert_eq!(ReportKind::parse_list("rates").unwrap(), vec![ReportKind::Rates]);
        assert_eq!(ReportKind::parse_list("all").unwrap().len(), 9);
        let err = ReportKind::parse_list("rates,bogus").unwrap_err();
        assert!(err.contains("bogus") && err.contains("selfcite"));
    }
}
