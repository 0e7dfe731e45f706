//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero when any criterion fails.

mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use citequery::analytics::{impact_ratio, CitationTable};
use citequery::catalog::{builtin_catalog, default_validated_set, Resolution, DEFAULT_RESOLUTION};
use citequery::ingest::{
    Citance, DocType, Document, MainField, Sentence,
};
use citequery::matching::{run_all, tokenize};
use citequery::pipeline::{
    cmd_gate, cmd_match, cmd_report, cmd_sample, GateOptions, ReportOptions, RunConfig,
    SampleOptions,
};
use citequery::validation::{
    all_stats, cohens_kappa, gate_queries, percent_agreement, read_sample, write_annotations,
    AnnotationRecord, AnnotationStore, Kappa, Label, ValidationStats,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn doc(doc_id: String, year: i32, field: Option<MainField>, sentences: Vec<Sentence>) -> Document {
    Document {
        doc_id,
        year,
        doc_type: DocType::FullArticle,
        main_field: field,
        meso_field: None,
        authors: Vec::new(),
        sentences,
    }
}

fn citance_of(doc_id: &str, i: usize, text: String) -> Citance {
    Citance {
        doc_id: doc_id.to_string(),
        sentence_index: i,
        tokens: tokenize(&text, &[]),
        text,
        refs: Vec::new(),
        position_fraction: 0.0,
    }
}

/// Run matching on the given citances both ways and compare record sets.
fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let catalog = builtin_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let citances: Vec<Citance> = (0..10_000)
        .map(|i| citance_of("s", i, support::random_sentence(&mut rng, 30)))
        .collect();
    let engine: BTreeSet<_> = run_all(&citances, &catalog)
        .into_iter()
        .map(|m| (m.sentence_index, m.query_id, m.signal_span, m.filter_span))
        .collect();
    let mut naive = BTreeSet::new();
    for c in &citances {
        let w = c.words();
        for q in &catalog {
            if let Some((s, f)) = support::naive_eval(&w, q) {
                naive.insert((c.sentence_index, q.query_id.clone(), s, f));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let diff = engine.symmetric_difference(&naive).count();
    ensure(
        diff == 0 && secs < 30.0 && !engine.is_empty(),
        format!("10000 citances x 65 queries, {} records, {diff} differences, {secs:.2}s", engine.len()),
    )
}

fn golden_fixture() -> Outcome {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    cmd_match(&RunConfig::new(data("golden.jsonl"), out.path())).map_err(|e| e.to_string())?;
    let got: String = fs::read_to_string(out.path().join("matches.csv"))
        .map_err(|e| e.to_string())?
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let want = fs::read_to_string(data("golden_matches.csv")).map_err(|e| e.to_string())?;
    let n = want.lines().count() - 1;
    ensure(got == want, format!("{n} expected records, output identical: {}", got == want))
}

fn stats(id: &str, valid: f64) -> ValidationStats {
    ValidationStats {
        query_id: id.to_string(),
        n: 50,
        pct_agree: 1.0,
        pct_valid: valid,
        kappa: Kappa::Undefined,
    }
}

/// Annotation store with two coders where `both_valid` of 50 citances are
/// valid for both, five split, and the rest invalid for both.
fn coded(store: &mut AnnotationStore, query_id: &str, both_valid: usize) {
    for i in 0..50 {
        let (a, b) = if i < both_valid {
            (Label::Valid, Label::Valid)
        } else if i < both_valid + 5 {
            (Label::Valid, Label::Invalid)
        } else {
            (Label::Invalid, Label::Invalid)
        };
        for (coder, label) in [("A", a), ("B", b)] {
            store.set(AnnotationRecord {
                key: citequery::ingest::CitanceKey { doc_id: format!("{query_id}-{i}"), sentence_index: 0 },
                query_id: query_id.to_string(),
                coder_id: coder.to_string(),
                label,
            });
        }
    }
}

fn validation_metrics() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let perfect: Vec<(Label, Label)> = (0..50)
        .map(|i| if i % 3 == 0 { (Label::Invalid, Label::Invalid) } else { (Label::Valid, Label::Valid) })
        .collect();
    let agree = percent_agreement(&perfect).map_err(|e| e.to_string())?;
    let kappa = cohens_kappa(&perfect).map_err(|e| e.to_string())?;
    ok &= agree == 1.0 && kappa == Kappa::Value(1.0);
    notes.push(format!("perfect agree={agree} kappa={kappa}"));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let random: Vec<(Label, Label)> = (0..10_000)
        .map(|_| {
            let l = |v: bool| if v { Label::Valid } else { Label::Invalid };
            (l(rng.random_bool(0.5)), l(rng.random_bool(0.5)))
        })
        .collect();
    let k = cohens_kappa(&random).map_err(|e| e.to_string())?.value().unwrap_or(f64::NAN);
    ok &= k.abs() < 0.05;
    notes.push(format!("random kappa={k:.4}"));

    let quoted = [
        ("no_consensus_studies", 0.98),
        ("no_consensus_methods", 0.98),
        ("no_consensus_standalone", 0.94),
        ("contrast_ideas", 0.80),
        ("contrast_standalone", 0.20),
        ("contrast_methods", 0.20),
    ];
    let rows: Vec<_> = quoted.iter().map(|(q, v)| stats(q, *v)).collect();
    let kept = gate_queries(&rows, 0.80);
    let want: BTreeSet<String> = quoted[..4].iter().map(|(q, _)| q.to_string()).collect();
    ok &= kept.query_ids == want;
    notes.push(format!("gate(0.80) kept {}/6", kept.len()));

    let mut store = AnnotationStore::new();
    let text = fs::read_to_string(data("validity.csv")).map_err(|e| e.to_string())?;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let (q, v) = line.split_once(',').ok_or("bad fixture line")?;
        coded(&mut store, q, v.parse().map_err(|_| "bad count")?);
    }
    let (per_query, _) = all_stats(&store).map_err(|e| e.to_string())?;
    let relaxed = gate_queries(&per_query, 0.70);
    let strict = gate_queries(&per_query, 0.80);
    let resolution = Resolution::parse(DEFAULT_RESOLUTION).map_err(|e| e.to_string())?;
    let shipped_relaxed = default_validated_set(0.70, &resolution).map_err(|e| e.to_string())?;
    let shipped_strict = default_validated_set(0.80, &resolution).map_err(|e| e.to_string())?;
    ok &= per_query.len() == 65
        && relaxed.len() == 36
        && relaxed.query_ids == shipped_relaxed.query_ids
        && strict.len() == 23
        && strict.query_ids == shipped_strict.query_ids;
    notes.push(format!(
        "fixture of {} queries: gate(0.70)={} gate(0.80)={}",
        per_query.len(),
        relaxed.len(),
        strict.len()
    ));
    ensure(ok, notes.join("; "))
}

/// Planted fractions per field: the target rate in percent over 40,000
/// citances each.
const PLANTED: [(MainField, u64, f64); 5] = [
    (MainField::SocHum, 244, 0.61),
    (MainField::BioHealth, 164, 0.41),
    (MainField::LifeEarth, 116, 0.29),
    (MainField::PhysEngr, 60, 0.15),
    (MainField::MathComp, 24, 0.06),
];

/// Sentences that must never be flagged by the validated set.
const NOISE: &[&str] = &[
    "We challenge this view with a new model",
    "The contrast of the images was enhanced",
    "There was no conflict of interest",
    "The samples differ in size and shape",
    "Agreement was measured on a Likert scale where coders disagree rarely",
    "We measured the growth rate over time",
    "The public debate about vaccines continues",
    "No consensus sequence was found in the data",
    "These findings do not contradict earlier reports",
    "Samples were prepared as described",
    "The protocol follows standard practice",
];

const SIGNAL: &[&str] = &[
    "There is no consensus about this point",
    "This remains a controversial question",
    "Their results are in disagreement with earlier studies",
    "The debate about these data continues",
];

/// Writes a raw-text corpus of 10,000 documents with 20 citances each.
/// Even sentences cite their own authors, odd ones do not. Returns the
/// corpus path.
fn planted_corpus(dir: &Path) -> std::io::Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let docs_per_field = 2000usize;
    let per_doc = 20usize;
    let half = docs_per_field * per_doc / 2;
    let mut chosen: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for (f, &(_, flagged, _)) in PLANTED.iter().enumerate() {
        let own = (flagged as f64 / 3.4).round() as usize;
        for (parity, n) in [(0usize, own), (1, flagged as usize - own)] {
            for slot in index::sample(&mut rng, half, n) {
                let d = slot / (per_doc / 2);
                let s = (slot % (per_doc / 2)) * 2 + parity;
                chosen.insert((f, d, s));
            }
        }
    }
    let path = dir.join("planted.jsonl");
    let mut out = String::new();
    for (f, &(field, _, _)) in PLANTED.iter().enumerate() {
        for d in 0..docs_per_field {
            let id = format!("{}{d:04}", field.as_str());
            let year = 2000 + (d % 16) as i32;
            let mut body = String::new();
            for s in 0..per_doc {
                let text = if chosen.contains(&(f, d, s)) {
                    SIGNAL[rng.random_range(0..SIGNAL.len())]
                } else {
                    NOISE[rng.random_range(0..NOISE.len())]
                };
                let authors = if s % 2 == 0 { format!("Fam{id},A") } else { "Other,B".to_string() };
                let cited = format!("{}{:04}", field.as_str(), rng.random_range(0..docs_per_field));
                let cited_year = year - rng.random_range(0..12);
                write!(
                    body,
                    "{text} <ref id=\"r{s}\" cited_doc_id=\"{cited}\" cited_year=\"{cited_year}\" cited_authors=\"{authors}\"/>. "
                )
                .unwrap();
            }
            let rec = serde_json::json!({
                "doc_id": id,
                "year": year,
                "doc_type": "full-article",
                "main_field": field.as_str(),
                "meso_field": f * 10 + d % 10,
                "authors": [{"family": format!("Fam{id}"), "given": "A"}],
                "body": body,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
    }
    fs::write(&path, out)?;
    Ok(path)
}

fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect())
}

fn planted_rates() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = planted_corpus(dir.path()).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::new(&corpus, dir.path().join("out"));
    cfg.mode = citequery::ingest::IngestMode::Rawtext;
    let start = Instant::now();
    let s = cmd_report(&cfg, &ReportOptions::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();

    let rates = csv_rows(&dir.path().join("out/report_rates.csv"))?;
    let mut ok = s.citances == 200_000;
    let mut recovered = Vec::new();
    for (field, _, target) in PLANTED {
        let row = rates
            .iter()
            .find(|r| r[0] == "main_field" && r[1] == field.as_str())
            .ok_or_else(|| format!("no rate row for {field}"))?;
        let rate: f64 = row[4].parse().map_err(|_| "bad rate")?;
        ok &= (rate - target).abs() <= 0.02 + 1e-9;
        recovered.push(rate);
    }
    ok &= recovered.windows(2).all(|w| w[0] > w[1]);

    let selfcite = csv_rows(&dir.path().join("out/report_selfcite.csv"))?;
    let all = selfcite.iter().find(|r| r[0] == "All").ok_or("no All self-citation row")?;
    let ratio: f64 = all[3].parse().map_err(|_| "bad ratio")?;
    ok &= (ratio - 2.4).abs() <= 0.1;
    let shown: Vec<String> = PLANTED
        .iter()
        .zip(&recovered)
        .map(|((f, _, _), r)| format!("{f} {r:.4}"))
        .collect();
    ensure(
        ok,
        format!(
            "{} citances, rates % [{}], self-citation ratio {ratio:.3}, {secs:.1}s",
            s.citances,
            shown.join(", ")
        ),
    )
}

fn impact_docs(papers: &[(String, i32, usize)]) -> Vec<Document> {
    papers
        .iter()
        .map(|(id, y, f)| doc(id.clone(), *y, Some(MainField::ALL[*f]), Vec::new()))
        .collect()
}

fn random_impact_fixture() -> support::ImpactFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut papers = Vec::new();
    let mut rows = Vec::new();
    let mut first = BTreeMap::new();
    for i in 0..10_000 {
        let id = format!("p{i:05}");
        let pub_year = rng.random_range(1998..=2012);
        let field = rng.random_range(0..5);
        for year in (pub_year - 1)..=2015 {
            if rng.random_bool(0.6) {
                rows.push((id.clone(), year, rng.random_range(0..4)));
            }
        }
        if rng.random_bool(0.3) {
            first.insert(id.clone(), rng.random_range(pub_year - 1..=2015));
        }
        papers.push((id, pub_year, field));
    }
    rows.push(("outside".to_string(), 2030, 5));
    support::ImpactFixture { papers, rows, first }
}

fn impact() -> Outcome {
    let fx = random_impact_fixture();
    let docs = impact_docs(&fx.papers);
    let table = CitationTable::from_counts(&docs, fx.rows.clone());
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for k in 1..=3 {
        for field in [None, Some(0), Some(1), Some(2), Some(3), Some(4)] {
            let want = support::brute_force_impact(&fx, k, field).ok_or("empty brute force")?;
            let got = impact_ratio(&table, &fx.first, k, field.map(|f| MainField::ALL[f]))
                .map_err(|e| e.to_string())?
                .d;
            worst = worst.max(((got - want) / want).abs());
            checked += 1;
        }
    }

    // Two cohorts mixing to disagreement mean 3.03 against expectation 3.08.
    let mut papers = Vec::new();
    let mut rows = Vec::new();
    let mut first = BTreeMap::new();
    let mut add = |id: String, pub_year: i32, history: &[(i32, u64)], next: u64, flagged: bool| {
        for &(y, n) in history {
            rows.push((id.clone(), y, n));
        }
        rows.push((id.clone(), 2003, next));
        if flagged {
            first.insert(id.clone(), 2002);
        }
        papers.push((id, pub_year, 0));
    };
    let split = |total: u64, n: u64| (0..n).map(move |i| total / n + u64::from(i < total % n));
    for (i, next) in split(150, 60).enumerate() {
        add(format!("a-dis-{i}"), 2001, &[(2001, 1), (2002, 1)], next, true);
    }
    for (i, next) in split(110, 40).enumerate() {
        add(format!("a-oth-{i}"), 2001, &[(2001, 1), (2002, 1)], next, false);
    }
    for (i, next) in split(153, 40).enumerate() {
        add(format!("b-dis-{i}"), 2000, &[(2000, 6)], next, true);
    }
    for (i, next) in split(227, 60).enumerate() {
        add(format!("b-oth-{i}"), 2000, &[(2000, 6)], next, false);
    }
    let table = CitationTable::from_counts(&impact_docs(&papers), rows);
    let r = impact_ratio(&table, &first, 1, None).map_err(|e| e.to_string())?;
    let ok = worst < 1e-12 && (r.d - 0.983).abs() <= 0.001;
    ensure(
        ok,
        format!(
            "{checked} random-fixture ratios, max relative error {worst:.2e}; cohort fixture {:.3}/{:.3} d={:.5}",
            r.mean_disagreement, r.mean_expected, r.d
        ),
    )
}

/// Synthetic corpus mixing signal and noise sentences with random words.
fn determinism_corpus(dir: &Path) -> std::io::Result<PathBuf> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut out = String::new();
    for d in 0..400 {
        let mut sentences = Vec::new();
        for s in 0..15 {
            let text = match rng.random_range(0..4) {
                0 => SIGNAL[rng.random_range(0..SIGNAL.len())].to_string() + " <ref id=\"x\"/>.",
                1 => NOISE[rng.random_range(0..NOISE.len())].to_string() + " <ref id=\"x\"/>.",
                _ => support::random_sentence(&mut rng, 25),
            };
            let cited = format!("d{:03}", rng.random_range(0..400));
            let text = text.replace(
                "<ref id=\"r\"/>",
                &format!("<ref id=\"r{s}\" cited_doc_id=\"{cited}\" cited_year=\"{}\"/>", 1995 + d % 20),
            );
            let text = text.replace(
                "<ref id=\"x\"/>",
                &format!("<ref id=\"r{s}\" cited_doc_id=\"{cited}\" cited_year=\"1999\"/>"),
            );
            sentences.push(serde_json::json!({ "text": text }));
        }
        let field = MainField::ALL[d % 5].as_str();
        let rec = serde_json::json!({
            "doc_id": format!("d{d:03}"),
            "year": 2000 + (d % 16),
            "main_field": field,
            "meso_field": d % 13,
            "authors": [{"family": "Fam", "given": "A"}],
            "sentences": sentences,
        });
        out.push_str(&rec.to_string());
        out.push('\n');
    }
    let path = dir.join("det.jsonl");
    fs::write(&path, out)?;
    Ok(path)
}

/// Every stage into `out`, returning all artifacts by file name.
fn full_run(corpus: &Path, out: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let e = |e: citequery::pipeline::PipelineError| e.to_string();
    let cfg = RunConfig::new(corpus, out);
    cmd_match(&cfg).map_err(e)?;
    let sample = cmd_sample(&cfg, &SampleOptions { n: 20, query_ids: Vec::new() }).map_err(e)?;
    let rows = read_sample(fs::File::open(&sample.file).map_err(|x| x.to_string())?).map_err(|x| x.to_string())?;
    let mut files = Vec::new();
    for (c, coder) in ["A", "B"].iter().enumerate() {
        let records: Vec<AnnotationRecord> = rows
            .iter()
            .map(|r| AnnotationRecord {
                key: r.key.clone(),
                query_id: r.query_id.clone(),
                coder_id: coder.to_string(),
                label: if (r.key.sentence_index + r.key.doc_id.len() * c) % 3 == 0 { Label::Invalid } else { Label::Valid },
            })
            .collect();
        let path = out.join(format!("ann_{coder}.csv"));
        let mut buf = Vec::new();
        write_annotations(&records, &mut buf).map_err(|x| x.to_string())?;
        fs::write(&path, buf).map_err(|x| x.to_string())?;
        files.push(path);
    }
    cmd_gate(&GateOptions { annotations: files, labels: Vec::new(), threshold: 0.8, out: out.to_path_buf() })
        .map_err(e)?;
    let opts = ReportOptions { long: true, ..ReportOptions::default() };
    cmd_report(&cfg, &opts).map_err(e)?;
    let mut all = BTreeMap::new();
    for entry in fs::read_dir(out).map_err(|x| x.to_string())? {
        let p = entry.map_err(|x| x.to_string())?.path();
        all.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p).map_err(|x| x.to_string())?,
        );
    }
    Ok(all)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = determinism_corpus(dir.path()).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (i, threads) in [1, 4, 4].into_iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        runs.push(pool.install(|| full_run(&corpus, &out))?);
    }
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    ensure(
        same && runs[0].len() >= 15,
        format!("{} artifacts, identical across 1/4/4 threads: {same}", runs[0].len()),
    )
}

fn performance() -> Outcome {
    let catalog = builtin_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let mut elapsed = 0.0;
    let mut matches = 0usize;
    let total = 1_000_000;
    let chunk = 50_000;
    for c in 0..total / chunk {
        let texts: Vec<String> = (0..chunk).map(|_| support::random_sentence(&mut rng, 30)).collect();
        let start = Instant::now();
        let citances: Vec<Citance> = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| citance_of("p", c * chunk + i, t))
            .collect();
        matches += pool.install(|| run_all(&citances, &catalog)).len();
        elapsed += start.elapsed().as_secs_f64();
    }
    ensure(
        elapsed < 60.0,
        format!("{total} citances x 65 queries on one thread in {elapsed:.1}s ({matches} matches)"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("oracle equivalence", oracle_equivalence),
        ("golden fixture", golden_fixture),
        ("validation metrics", validation_metrics),
        ("planted-rate recovery", planted_rates),
        ("impact ratio", impact),
        ("determinism", determinism),
        ("performance", performance),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("[PASS] {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
