use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use super::{header, header_value, io_err, table_err, write_artifact, ConfigDigest, Result, DEFAULT_SEED};
use crate::validation::{
    read_annotations, read_sample, write_annotations, AnnotationRecord, AnnotationStore, Label,
    SampleRow,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnnotateOutcome {
    pub labeled: usize,
    pub skipped: usize,
    /// Rows this coder had already labeled before the session.
    pub already: usize,
    pub quit: bool,
}

/// Prompts for a label on every sample row the coder has not labeled yet.
/// Keys: `v` valid, `i` invalid, `s` skip, `q` quit. End of input quits.
pub fn annotate_session<R: BufRead, W: Write>(
    rows: &[SampleRow],
    store: &mut AnnotationStore,
    coder: &str,
    mut input: R,
    mut output: W,
) -> io::Result<AnnotateOutcome> {
    let mut outcome = AnnotateOutcome::default();
    let total = rows.len();
    let mut line = String::new();
    for (i, row) in rows.iter().enumerate() {
        if store.get(&row.key, &row.query_id, coder).is_some() {
            outcome.already += 1;
            continue;
        }
        writeln!(
            output,
            "\n[{}/{total}] {}  {}:{}\n{}",
            i + 1,
            row.query_id,
            row.key.doc_id,
            row.key.sentence_index,
            row.text
        )?;
        loop {
            write!(output, "(v)alid (i)nvalid (s)kip (q)uit > ")?;
            output.flush()?;
            line.clear();
            if input.read_line(&mut line)? == 0 {
                outcome.quit = true;
                return Ok(outcome);
            }
            let label = match line.trim() {
                "v" => Label::Valid,
                "i" => Label::Invalid,
                "s" => {
                    outcome.skipped += 1;
                    break;
                }
                "q" => {
                    outcome.quit = true;
                    return Ok(outcome);
                }
                _ => continue,
            };
            store.set(AnnotationRecord {
                key: row.key.clone(),
                query_id: row.query_id.clone(),
                coder_id: coder.to_string(),
                label,
            });
            outcome.labeled += 1;
            break;
        }
    }
    Ok(outcome)
}

/// Runs a labeling session over a sample file and writes all labels,
/// old and new, back to `annotations`.
pub fn cmd_annotate<R: BufRead, W: Write>(
    sample: &Path,
    annotations: &Path,
    coder: &str,
    input: R,
    output: W,
) -> Result<AnnotateOutcome> {
    if coder.is_empty() || coder.contains(',') {
        return Err(super::PipelineError::Usage(format!("invalid coder id `{coder}`")));
    }
    let text = fs::read_to_string(sample).map_err(io_err(sample))?;
    let rows = read_sample(text.as_bytes()).map_err(table_err(sample))?;
    let seed: u64 = header_value(&text, "seed")
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED);

    let mut store = AnnotationStore::new();
    if annotations.exists() {
        let f = fs::File::open(annotations).map_err(io_err(annotations))?;
        for r in read_annotations(f).map_err(table_err(annotations))? {
            store.insert(r)?;
        }
    }
    let outcome =
        annotate_session(&rows, &mut store, coder, input, output).map_err(io_err(Path::new("<terminal>")))?;

    let mut digest = ConfigDigest::new("annotate");
    digest.add("sample", &text);
    let head = header(&digest, seed, &[]);
    let records = store.records();
    write_artifact(annotations, &head, |w| {
        write_annotations(&records, w).map_err(table_err(annotations))
    })?;
    Ok(outcome)
}
