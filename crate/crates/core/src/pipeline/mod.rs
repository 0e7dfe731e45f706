//! File-level stages behind the command-line driver.
//!
//! Each `cmd_*` function reads its inputs, runs one stage and writes its
//! artifacts into the output directory. Every artifact starts with a
//! comment header naming the tool version, a digest of the effective
//! configuration and the seed, so equal configurations give byte-identical
//! files.

mod annotate;
mod report;

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::catalog::{
    builtin_catalog, default_validated_set, parse_query_file, serialize_queries, FilterSet,
    QueryFileError, QuerySpec, Resolution, ResolutionError, ValidatedSet,
};
use crate::ingest::{extract_citances, load_corpus, Citance, IngestMode, LoadError, LoadReport, RecordError};
use crate::matching::{run_all, MatchRecord};
use crate::table::{self, TableError};
use crate::validation::{
    all_stats, gate_queries, query_seed, read_annotations, read_sample_labels, read_stats,
    sample_matches, write_sample, write_stats, AnnotationStore, SampleRow, ValidationError,
    DEFAULT_SAMPLE_SIZE,
};

pub use annotate::{annotate_session, cmd_annotate, AnnotateOutcome};
pub use report::{cmd_report, ReportKind, ReportOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_THRESHOLD: f64 = 0.80;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{path}: {source}")]
    QueryFile {
        path: PathBuf,
        source: QueryFileError,
    },
    #[error(transparent)]
    Resolution(#[from] ResolutionError),
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: TableError },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    /// 1 for usage errors, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn table_err(path: &Path) -> impl FnOnce(TableError) -> PipelineError + '_ {
    move |source| PipelineError::Table {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuerySource {
    Builtin,
    File(PathBuf),
}

/// Where the set of validated queries comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ValidatedSource {
    /// The shipped 80% or 70% set, with an optional replacement resolution
    /// file for the open slots of the 80% set.
    Shipped {
        threshold: f64,
        resolution: Option<PathBuf>,
    },
    /// Gate a stats file at a threshold.
    Stats { path: PathBuf, threshold: f64 },
    /// A set written by the gate stage.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub mode: IngestMode,
    pub queries: QuerySource,
    pub validated: ValidatedSource,
    pub seed: u64,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(corpus: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            corpus: corpus.into(),
            mode: IngestMode::Presegmented,
            queries: QuerySource::Builtin,
            validated: ValidatedSource::Shipped {
                threshold: DEFAULT_THRESHOLD,
                resolution: None,
            },
            seed: DEFAULT_SEED,
            out: out.into(),
        }
    }
}

/// Accumulates the configuration that determines a stage's output. Input
/// files enter by content, so moving them does not change the digest; the
/// output directory never enters.
#[derive(Clone, Default)]
pub struct ConfigDigest {
    hasher: Sha256,
}

impl ConfigDigest {
    pub fn new(stage: &str) -> Self {
        let mut d = ConfigDigest::default();
        d.add("stage", stage);
        d
    }

    pub fn add(&mut self, key: &str, value: impl AsRef<[u8]>) -> &mut Self {
        let value = value.as_ref();
        self.hasher.update((key.len() as u64).to_le_bytes());
        self.hasher.update(key.as_bytes());
        self.hasher.update((value.len() as u64).to_le_bytes());
        self.hasher.update(value);
        self
    }

    pub fn add_file(&mut self, key: &str, path: &Path) -> Result<&mut Self> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        let sum = Sha256::digest(&bytes);
        Ok(self.add(key, sum))
    }

    pub fn hex(&self) -> String {
        hex::encode(self.hasher.clone().finalize())
    }
}

/// Provenance lines opening every artifact.
pub fn header(digest: &ConfigDigest, seed: u64, extra: &[(&str, String)]) -> String {
    let mut s = format!("# citequery {VERSION}\n# config_digest={}\n# seed={seed}\n", digest.hex());
    for (k, v) in extra {
        let _ = writeln!(s, "# {k}={v}");
    }
    s
}

/// Value of a `# key=value` header line, if present.
pub fn header_value(text: &str, key: &str) -> Option<String> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| {
            let rest = l.trim_start_matches('#').trim();
            let (k, v) = rest.split_once('=')?;
            (k.trim() == key).then(|| v.trim().to_string())
        })
}

/// Writes `header` then whatever `body` produces to `path`.
pub(crate) fn write_artifact(
    path: &Path,
    header: &str,
    body: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(header.as_bytes()).map_err(io_err(path))?;
    body(&mut w)?;
    w.flush().map_err(io_err(path))
}

pub fn load_queries(source: &QuerySource) -> Result<Vec<QuerySpec>> {
    match source {
        QuerySource::Builtin => Ok(builtin_catalog()),
        QuerySource::File(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            parse_query_file(&text).map_err(|source| PipelineError::QueryFile {
                path: path.clone(),
                source,
            })
        }
    }
}

fn add_common(d: &mut ConfigDigest, cfg: &RunConfig, queries: &[QuerySpec]) -> Result<()> {
    d.add_file("corpus", &cfg.corpus)?;
    d.add("mode", format!("{:?}", cfg.mode));
    d.add("queries", serialize_queries(queries));
    d.add("seed", cfg.seed.to_string());
    Ok(())
}

/// Reads validated query ids written by [`cmd_gate`].
pub fn read_validated_file(path: &Path) -> Result<ValidatedSet> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let threshold = header_value(&text, "threshold")
        .and_then(|t| t.parse().ok())
        .unwrap_or(f64::NAN);
    let query_ids = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect();
    Ok(ValidatedSet {
        threshold,
        query_ids,
    })
}

pub fn resolve_validated(source: &ValidatedSource) -> Result<ValidatedSet> {
    match source {
        ValidatedSource::Shipped {
            threshold,
            resolution,
        } => {
            let res = match resolution {
                None => Resolution::default(),
                Some(p) => Resolution::parse(&fs::read_to_string(p).map_err(io_err(p))?)?,
            };
            Ok(default_validated_set(*threshold, &res)?)
        }
        ValidatedSource::Stats { path, threshold } => {
            let f = fs::File::open(path).map_err(io_err(path))?;
            let stats = read_stats(f).map_err(table_err(path))?;
            Ok(gate_queries(&stats, *threshold))
        }
        ValidatedSource::File(path) => read_validated_file(path),
    }
}

/// Per-stage summary returned to the driver.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub documents: usize,
    pub sentences: usize,
    pub citances: usize,
    pub errors: Vec<RecordError>,
}

pub fn load(cfg: &RunConfig) -> Result<LoadReport> {
    Ok(load_corpus(&cfg.corpus, cfg.mode)?)
}

pub fn citances_of(report: &LoadReport) -> Vec<Citance> {
    report.documents.iter().flat_map(extract_citances).collect()
}

pub fn cmd_ingest_check(cfg: &RunConfig) -> Result<IngestSummary> {
    let report = load(cfg)?;
    Ok(IngestSummary {
        documents: report.documents.len(),
        sentences: report.documents.iter().map(|d| d.sentences.len()).sum(),
        citances: report
            .documents
            .iter()
            .flat_map(|d| &d.sentences)
            .filter(|s| !s.refs.is_empty())
            .count(),
        errors: report.errors,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchSummary {
    pub citances: usize,
    pub matches: usize,
    pub errors: Vec<RecordError>,
    pub files: Vec<PathBuf>,
}

pub fn write_matches<W: Write + ?Sized>(records: &[MatchRecord], w: &mut W) -> std::result::Result<(), TableError> {
    let mut out = table::writer(w);
    out.write_record([
        "doc_id",
        "sentence_index",
        "query_id",
        "signal_start",
        "signal_end",
        "filter_start",
        "filter_end",
    ])?;
    for m in records {
        let (fs, fe) = m
            .filter_span
            .map_or((String::new(), String::new()), |f| (f.start.to_string(), f.end.to_string()));
        out.write_record([
            m.doc_id.as_str(),
            &m.sentence_index.to_string(),
            &m.query_id,
            &m.signal_span.start.to_string(),
            &m.signal_span.end.to_string(),
            &fs,
            &fe,
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Match counts laid out as signal rows against filter-set columns.
pub fn summary_table(queries: &[QuerySpec], records: &[MatchRecord]) -> table::Table {
    let mut t = table::Table::new(
        &["signal", "standalone", "studies", "ideas", "methods", "results"],
        1,
    );
    let mut signals: Vec<&str> = Vec::new();
    for q in queries {
        if !signals.contains(&q.signal_id.as_str()) {
            signals.push(&q.signal_id);
        }
    }
    let mut counts = std::collections::HashMap::<&str, usize>::new();
    for m in records {
        *counts.entry(&m.query_id).or_default() += 1;
    }
    for s in signals {
        let mut row = vec![s.to_string()];
        for f in FilterSet::ALL {
            let cell = queries
                .iter()
                .find(|q| q.signal_id == s && q.filter_set == f)
                .map_or(String::new(), |q| counts.get(q.query_id.as_str()).unwrap_or(&0).to_string());
            row.push(cell);
        }
        t.push(row);
    }
    t
}

/// Runs every query over every citance; writes `matches.csv` and
/// `summary.csv`.
pub fn cmd_match(cfg: &RunConfig) -> Result<MatchSummary> {
    let queries = load_queries(&cfg.queries)?;
    let report = load(cfg)?;
    let citances = citances_of(&report);
    let records = run_all(&citances, &queries);

    let mut digest = ConfigDigest::new("match");
    add_common(&mut digest, cfg, &queries)?;
    let head = header(&digest, cfg.seed, &[]);

    let matches_path = cfg.out.join("matches.csv");
    write_artifact(&matches_path, &head, |w| {
        write_matches(&records, w).map_err(table_err(&matches_path))
    })?;
    let summary_path = cfg.out.join("summary.csv");
    let summary = summary_table(&queries, &records);
    write_artifact(&summary_path, &head, |w| {
        summary.write_csv(w).map_err(table_err(&summary_path))
    })?;
    Ok(MatchSummary {
        citances: citances.len(),
        matches: records.len(),
        errors: report.errors,
        files: vec![matches_path, summary_path],
    })
}

/// Sentence text with each inline marker shown as `[ref]`.
pub fn display_text(c: &Citance) -> String {
    let mut spans: Vec<_> = c.refs.iter().filter_map(|r| r.span.clone()).collect();
    spans.sort_by_key(|s| s.start);
    let mut out = String::new();
    let mut at = 0;
    for s in spans {
        out.push_str(&c.text[at..s.start]);
        out.push_str("[ref]");
        at = s.end;
    }
    out.push_str(&c.text[at..]);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleOptions {
    pub n: usize,
    /// Restrict sampling to these queries; all queries when empty.
    pub query_ids: Vec<String>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            n: DEFAULT_SAMPLE_SIZE,
            query_ids: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleSummary {
    /// Query id and number of sampled citances.
    pub sampled: Vec<(String, usize)>,
    /// Queries skipped for lack of matches.
    pub empty: Vec<String>,
    pub file: PathBuf,
}

/// Samples matches of each query for manual coding; writes `sample.csv`.
/// Each query draws from its own seed stream derived from the run seed.
pub fn cmd_sample(cfg: &RunConfig, opts: &SampleOptions) -> Result<SampleSummary> {
    let mut queries = load_queries(&cfg.queries)?;
    if !opts.query_ids.is_empty() {
        for id in &opts.query_ids {
            if !queries.iter().any(|q| &q.query_id == id) {
                return Err(PipelineError::Usage(format!("unknown query `{id}`")));
            }
        }
        queries.retain(|q| opts.query_ids.contains(&q.query_id));
    }
    let report = load(cfg)?;
    let citances = citances_of(&report);
    let records = run_all(&citances, &queries);
    let text: std::collections::HashMap<(&str, usize), String> = citances
        .iter()
        .map(|c| ((c.doc_id.as_str(), c.sentence_index), display_text(c)))
        .collect();

    let mut rows = Vec::new();
    let mut summary = SampleSummary::default();
    for q in &queries {
        let keys: Vec<_> = records
            .iter()
            .filter(|m| m.query_id == q.query_id)
            .map(|m| crate::ingest::CitanceKey {
                doc_id: m.doc_id.clone(),
                sentence_index: m.sentence_index,
            })
            .collect();
        match sample_matches(&keys, opts.n, query_seed(cfg.seed, &q.query_id)) {
            Ok(sample) => {
                summary.sampled.push((q.query_id.clone(), sample.len()));
                rows.extend(sample.into_iter().map(|key| SampleRow {
                    text: text[&(key.doc_id.as_str(), key.sentence_index)].clone(),
                    key,
                    query_id: q.query_id.clone(),
                    label: None,
                }));
            }
            Err(ValidationError::NoMatches) if opts.query_ids.is_empty() => {
                summary.empty.push(q.query_id.clone());
            }
            Err(ValidationError::NoMatches) => {
                return Err(PipelineError::Data(format!(
                    "query `{}` has no matches to sample",
                    q.query_id
                )))
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut digest = ConfigDigest::new("sample");
    add_common(&mut digest, cfg, &queries)?;
    digest.add("n", opts.n.to_string());
    let path = cfg.out.join("sample.csv");
    let head = header(&digest, cfg.seed, &[("sample_size", opts.n.to_string())]);
    write_artifact(&path, &head, |w| write_sample(&rows, w).map_err(table_err(&path)))?;
    summary.file = path;
    Ok(summary)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GateOptions {
    /// Annotation files (`doc_id,sentence_index,query_id,coder_id,label`).
    pub annotations: Vec<PathBuf>,
    /// Filled sample files, each labeled by the named coder.
    pub labels: Vec<(String, PathBuf)>,
    pub threshold: f64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSummary {
    pub validated: ValidatedSet,
    pub pooled: crate::validation::ValidationStats,
    pub files: Vec<PathBuf>,
}

/// Scores annotations and gates queries; writes `stats.csv`,
/// `stats_pooled.csv` and `validated.txt`.
pub fn cmd_gate(opts: &GateOptions) -> Result<GateSummary> {
    if opts.annotations.is_empty() && opts.labels.is_empty() {
        return Err(PipelineError::Usage(
            "gate needs --annotations or --labels input".into(),
        ));
    }
    let mut digest = ConfigDigest::new("gate");
    let mut store = AnnotationStore::new();
    let mut seed = None;
    for path in &opts.annotations {
        digest.add_file("annotations", path)?;
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        seed = seed.or_else(|| header_value(&text, "seed"));
        for r in read_annotations(text.as_bytes()).map_err(table_err(path))? {
            store.insert(r)?;
        }
    }
    for (coder, path) in &opts.labels {
        digest.add("coder", coder);
        digest.add_file("labels", path)?;
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        seed = seed.or_else(|| header_value(&text, "seed"));
        for r in read_sample_labels(text.as_bytes(), coder).map_err(table_err(path))? {
            store.insert(r)?;
        }
    }
    if store.is_empty() {
        return Err(ValidationError::Empty.into());
    }
    digest.add("threshold", opts.threshold.to_string());
    let seed: u64 = seed.and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED);

    let (stats, pooled) = all_stats(&store)?;
    let validated = gate_queries(&stats, opts.threshold);
    let head = header(&digest, seed, &[("threshold", opts.threshold.to_string())]);

    let stats_path = opts.out.join("stats.csv");
    write_artifact(&stats_path, &head, |w| write_stats(&stats, w).map_err(table_err(&stats_path)))?;
    let pooled_path = opts.out.join("stats_pooled.csv");
    write_artifact(&pooled_path, &head, |w| {
        write_stats(std::slice::from_ref(&pooled), w).map_err(table_err(&pooled_path))
    })?;
    let set_path = opts.out.join("validated.txt");
    write_artifact(&set_path, &head, |w| {
        for id in &validated.query_ids {
            writeln!(w, "{id}").map_err(io_err(&set_path))?;
        }
        Ok(())
    })?;
    Ok(GateSummary {
        validated,
        pooled,
        files: vec![stats_path, pooled_path, set_path],
    })
}
