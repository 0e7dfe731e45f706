//! Query execution over tokenized citances.
//!
//! The free functions here define match semantics one step at a time and
//! [`run_query`] composes them for a single query. [`Engine`] evaluates a
//! whole catalog in one pass per citance and must produce the same records.

mod engine;
mod token;

use std::cmp::Ordering;

use crate::catalog::{ExclusionKind, ExclusionRule, Pattern, QuerySpec, NEGATIONS};
use crate::ingest::Citance;

pub use engine::{run_all, Engine, Scratch};
pub use token::{tokenize, words, Token, REF_SENTINEL};

/// Words before a signal inspected for generic negation.
pub const NEGATION_WINDOW: usize = 2;

/// Inclusive range of word indices matched by one pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    /// Index of the pattern within the query's signal or filter list.
    pub pattern_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchRecord {
    pub doc_id: String,
    pub sentence_index: usize,
    pub query_id: String,
    pub signal_span: Span,
    pub filter_span: Option<Span>,
}

fn occurs_at(words: &[&str], pattern: &Pattern, at: usize) -> bool {
    let toks = pattern.tokens();
    at + toks.len() <= words.len() && toks.iter().zip(&words[at..]).all(|(t, w)| t.matches(w))
}

fn occurrences<'a>(words: &'a [&'a str], pattern: &'a Pattern) -> impl Iterator<Item = usize> + 'a {
    let len = pattern.len();
    (0..words.len().saturating_sub(len - 1)).filter(move |&i| occurs_at(words, pattern, i))
}

/// All occurrences of `pattern`, dropping any whose words match one of the
/// single-token `carveouts`.
pub fn match_pattern(
    words: &[&str],
    pattern: &Pattern,
    pattern_id: usize,
    carveouts: &[&Pattern],
) -> Vec<Span> {
    let len = pattern.len();
    occurrences(words, pattern)
        .filter(|&i| {
            !words[i..i + len]
                .iter()
                .any(|w| carveouts.iter().any(|c| c.tokens()[0].matches(w)))
        })
        .map(|i| Span {
            start: i,
            end: i + len - 1,
            pattern_id,
        })
        .collect()
}

/// Whether a signal span survives the generic negation rule.
pub fn suppress_negation(words: &[&str], span: &Span, exempt: bool) -> bool {
    if exempt {
        return true;
    }
    let from = span.start.saturating_sub(NEGATION_WINDOW);
    !words[from..span.start].iter().any(|w| NEGATIONS.contains(w))
}

/// Applies match-context and citance-level rules. Returns `None` when the
/// citance is rejected for the query; token carve-outs are handled by
/// [`match_pattern`] and ignored here.
pub fn apply_exclusions(
    words: &[&str],
    spans: Vec<Span>,
    rules: &[ExclusionRule],
) -> Option<Vec<Span>> {
    for r in rules {
        match r.kind {
            ExclusionKind::CitancePhrase => {
                if r.patterns.iter().any(|p| occurrences(words, p).next().is_some()) {
                    return None;
                }
            }
            ExclusionKind::CooccurrenceWindow => {
                let window = r.window.unwrap_or(0);
                let a: Vec<usize> = occurrences(words, &r.patterns[0]).collect();
                let hit = occurrences(words, &r.patterns[1])
                    .any(|b| a.iter().any(|&a| a.abs_diff(b) <= window));
                if hit {
                    return None;
                }
            }
            ExclusionKind::MatchContext | ExclusionKind::TokenCarveout => {}
        }
    }
    let context: Vec<&Pattern> = rules
        .iter()
        .filter(|r| r.kind == ExclusionKind::MatchContext)
        .flat_map(|r| &r.patterns)
        .collect();
    Some(
        spans
            .into_iter()
            .filter(|s| {
                !context
                    .iter()
                    .any(|p| s.start >= p.len() && occurs_at(words, p, s.start - p.len()))
            })
            .collect(),
    )
}

/// Word tokens strictly between two spans; zero when they overlap.
pub fn gap(a: &Span, b: &Span) -> usize {
    if b.start > a.end {
        b.start - a.end - 1
    } else if a.start > b.end {
        a.start - b.end - 1
    } else {
        0
    }
}

/// The nearest filter span within `max_gap` of the signal, on either side.
/// Equal distances resolve to the leftmost filter span.
pub fn check_proximity(signal: &Span, filters: &[Span], max_gap: usize) -> Option<Span> {
    filters
        .iter()
        .filter(|f| gap(signal, f) <= max_gap)
        .min_by(|x, y| match gap(signal, x).cmp(&gap(signal, y)) {
            Ordering::Equal => x.cmp(y),
            o => o,
        })
        .copied()
}

/// Surviving signal spans of a query, sorted, or `None` when the citance
/// is rejected outright.
pub fn signal_spans(words: &[&str], query: &QuerySpec) -> Option<Vec<Span>> {
    let carveouts: Vec<&Pattern> = query
        .exclusions_of(ExclusionKind::TokenCarveout)
        .flat_map(|r| &r.patterns)
        .collect();
    let mut spans = Vec::new();
    for (i, p) in query.signal_patterns.iter().enumerate() {
        let exempt = query.negation_exempt || p.contains_negation();
        spans.extend(
            match_pattern(words, p, i, &carveouts)
                .into_iter()
                .filter(|s| suppress_negation(words, s, exempt)),
        );
    }
    if spans.is_empty() {
        return Some(spans);
    }
    let mut spans = apply_exclusions(words, spans, &query.exclusions)?;
    spans.sort();
    Some(spans)
}

/// Evaluates one query against a word sequence; returns the chosen signal
/// span and filter span.
pub fn evaluate(words: &[&str], query: &QuerySpec) -> Option<(Span, Option<Span>)> {
    let signals = signal_spans(words, query)?;
    if query.is_standalone() {
        return signals.first().map(|s| (*s, None));
    }
    let filters: Vec<Span> = query
        .filter_patterns
        .iter()
        .enumerate()
        .flat_map(|(i, p)| match_pattern(words, p, i, &[]))
        .collect();
    signals
        .iter()
        .find_map(|s| check_proximity(s, &filters, query.max_gap).map(|f| (*s, Some(f))))
}

pub fn run_query(citance: &Citance, query: &QuerySpec) -> Option<MatchRecord> {
    let words = citance.words();
    evaluate(&words, query).map(|(signal_span, filter_span)| MatchRecord {
        doc_id: citance.doc_id.clone(),
        sentence_index: citance.sentence_index,
        query_id: query.query_id.clone(),
        signal_span,
        filter_span,
    })
}
