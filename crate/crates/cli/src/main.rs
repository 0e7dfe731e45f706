use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use citequery::ingest::{DocType, IngestMode};
use citequery::pipeline::{
    self, GateOptions, PipelineError, QuerySource, ReportKind, ReportOptions, RunConfig,
    SampleOptions, ValidatedSource, DEFAULT_SEED, DEFAULT_THRESHOLD,
};
use citequery::validation::DEFAULT_SAMPLE_SIZE;

/// Detect disagreement citances with cue-phrase queries, validate the
/// queries by manual annotation, and report rates and impact.
#[derive(Parser)]
#[command(name = "citequery", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus and list skipped records.
    IngestCheck(CorpusArgs),
    /// Run the queries and write matches.csv and summary.csv.
    Match(MatchArgs),
    /// Draw per-query samples of matches for manual coding.
    Sample(SampleArgs),
    /// Label a sample interactively.
    Annotate(AnnotateArgs),
    /// Score annotations and gate queries by percent valid.
    Gate(GateArgs),
    /// Compute disagreement reports.
    Report(ReportArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// JSON Lines corpus.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "presegmented", value_parser = parse_mode)]
    mode: IngestMode,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// `builtin` or a query file.
    #[arg(long, default_value = "builtin")]
    queries: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct MatchArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Citances per query.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    n: usize,
    /// Only sample this query; repeatable.
    #[arg(long = "query")]
    query_ids: Vec<String>,
}

#[derive(Args)]
struct AnnotateArgs {
    /// Sample file written by `sample`.
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    coder: String,
    /// Annotation file to create or extend.
    #[arg(long)]
    annotations: PathBuf,
}

#[derive(Args)]
struct GateArgs {
    /// Annotation file; repeatable.
    #[arg(long)]
    annotations: Vec<PathBuf>,
    /// Filled sample file as `coder=path`; repeatable.
    #[arg(long, value_parser = parse_labels)]
    labels: Vec<(String, PathBuf)>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Validity threshold of the shipped set (0.80 or 0.70), or the gate
    /// threshold applied to `--stats`.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Replacement resolution of the shipped set's open slots.
    #[arg(long, conflicts_with_all = ["stats", "validated"])]
    resolution: Option<PathBuf>,
    /// Stats file written by `gate`, gated at `--threshold`.
    #[arg(long, conflicts_with = "validated")]
    stats: Option<PathBuf>,
    /// Validated set written by `gate`.
    #[arg(long)]
    validated: Option<PathBuf>,
    /// Comma-separated reports, or `all`.
    #[arg(long, default_value = "all")]
    which: String,
    /// Also write group,metric,value files.
    #[arg(long)]
    long: bool,
    /// Yearly citation counts, `doc_id,year,citations`.
    #[arg(long)]
    citations: Option<PathBuf>,
    /// Rows in the top tables.
    #[arg(long, default_value_t = 20)]
    top: usize,
    /// Comma-separated horizons for the impact report.
    #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
    horizons: Vec<i32>,
    /// Restrict the citation gap to one document type.
    #[arg(long, value_parser = parse_doc_type)]
    gap_doc_type: Option<DocType>,
    /// Last year after publication in the citation gap.
    #[arg(long)]
    gap_max_k: Option<i32>,
}

fn parse_mode(s: &str) -> Result<IngestMode, String> {
    s.parse()
}

fn parse_doc_type(s: &str) -> Result<DocType, String> {
    s.parse().map_err(|_| format!("unknown document type `{s}`"))
}

fn parse_labels(s: &str) -> Result<(String, PathBuf), String> {
    let (coder, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected coder=path, got `{s}`"))?;
    if coder.is_empty() || path.is_empty() {
        return Err(format!("expected coder=path, got `{s}`"));
    }
    Ok((coder.to_string(), PathBuf::from(path)))
}

fn run_config(run: &RunArgs, validated: ValidatedSource) -> RunConfig {
    RunConfig {
        corpus: run.corpus.corpus.clone(),
        mode: run.corpus.mode,
        queries: match run.queries.as_str() {
            "builtin" => QuerySource::Builtin,
            path => QuerySource::File(PathBuf::from(path)),
        },
        validated,
        seed: run.seed,
        out: run.out.clone(),
    }
}

fn shipped() -> ValidatedSource {
    ValidatedSource::Shipped {
        threshold: DEFAULT_THRESHOLD,
        resolution: None,
    }
}

fn print_files(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::IngestCheck(args) => {
            let mut cfg = RunConfig::new(args.corpus, "");
            cfg.mode = args.mode;
            let s = pipeline::cmd_ingest_check(&cfg)?;
            println!(
                "documents={} sentences={} citances={} skipped={}",
                s.documents,
                s.sentences,
                s.citances,
                s.errors.len()
            );
            for e in &s.errors {
                eprintln!("{e}");
            }
            if !s.errors.is_empty() {
                return Err(PipelineError::Data(format!("{} records skipped", s.errors.len())));
            }
        }
        Command::Match(args) => {
            let s = pipeline::cmd_match(&run_config(&args.run, shipped()))?;
            for e in &s.errors {
                eprintln!("{e}");
            }
            println!("citances={} matches={}", s.citances, s.matches);
            print_files(&s.files);
        }
        Command::Sample(args) => {
            let opts = SampleOptions {
                n: args.n,
                query_ids: args.query_ids,
            };
            let s = pipeline::cmd_sample(&run_config(&args.run, shipped()), &opts)?;
            for q in &s.empty {
                eprintln!("no matches for {q}");
            }
            let total: usize = s.sampled.iter().map(|(_, n)| n).sum();
            println!("queries={} sampled={total}", s.sampled.len());
            print_files(std::slice::from_ref(&s.file));
        }
        Command::Annotate(args) => {
            let stdin = io::stdin();
            let out = pipeline::cmd_annotate(
                &args.sample,
                &args.annotations,
                &args.coder,
                stdin.lock(),
                io::stdout(),
            )?;
            println!(
                "\nlabeled={} skipped={} already={}",
                out.labeled, out.skipped, out.already
            );
            print_files(std::slice::from_ref(&args.annotations));
        }
        Command::Gate(args) => {
            let opts = GateOptions {
                annotations: args.annotations,
                labels: args.labels,
                threshold: args.threshold,
                out: args.out,
            };
            let s = pipeline::cmd_gate(&opts)?;
            println!(
                "validated={} pooled_pct_agree={} pooled_pct_valid={} pooled_kappa={}",
                s.validated.len(),
                s.pooled.pct_agree,
                s.pooled.pct_valid,
                s.pooled.kappa
            );
            print_files(&s.files);
        }
        Command::Report(args) => {
            let validated = match (&args.validated, &args.stats) {
                (Some(p), _) => ValidatedSource::File(p.clone()),
                (None, Some(p)) => ValidatedSource::Stats {
                    path: p.clone(),
                    threshold: args.threshold,
                },
                (None, None) => ValidatedSource::Shipped {
                    threshold: args.threshold,
                    resolution: args.resolution.clone(),
                },
            };
            let opts = ReportOptions {
                which: ReportKind::parse_list(&args.which).map_err(PipelineError::Usage)?,
                long: args.long,
                citations: args.citations,
                top_n: args.top,
                horizons: args.horizons,
                gap_doc_type: args.gap_doc_type,
                gap_max_k: args.gap_max_k,
            };
            let s = pipeline::cmd_report(&run_config(&args.run, validated), &opts)?;
            for n in &s.notes {
                eprintln!("note: {n}");
            }
            println!("citances={} flagged={}", s.citances, s.flagged);
            print_files(&s.files);
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), PipelineError> {
    let Ok(raw) = std::env::var("CITEQUERY_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| PipelineError::Usage(format!("CITEQUERY_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match configure_threads().and_then(|()| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
