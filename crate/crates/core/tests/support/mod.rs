//! Test-only helpers: a naive query evaluator, a random citance generator
//! and a brute-force impact computation. They share no code with the
//! library beyond its data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use citequery::catalog::{ExclusionKind, Pattern, QuerySpec};
use citequery::matching::Span;
use rand::seq::IndexedRandom;
use rand::Rng;

/// One pattern token re-read from its textual form (`stem*` or literal).
fn token_hits(token: &str, word: &str) -> bool {
    match token.strip_suffix('*') {
        Some(stem) => word.len() >= stem.len() && &word[..stem.len()] == stem,
        None => word == token,
    }
}

fn pattern_at(words: &[&str], p: &Pattern, at: usize) -> bool {
    let toks: Vec<String> = p.tokens().iter().map(|t| t.to_string()).collect();
    if at + toks.len() > words.len() {
        return false;
    }
    for (k, t) in toks.iter().enumerate() {
        if !token_hits(t, words[at + k]) {
            return false;
        }
    }
    true
}

fn positions(words: &[&str], p: &Pattern) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..words.len() {
        if pattern_at(words, p, i) {
            out.push(i);
        }
    }
    out
}

const NEGATION_WORDS: [&str; 5] = ["no", "not", "cannot", "nor", "neither"];

fn has_negation(p: &Pattern) -> bool {
    p.tokens()
        .iter()
        .any(|t| NEGATION_WORDS.contains(&t.to_string().as_str()))
}

fn words_between(a: &Span, b: &Span) -> usize {
    let (l, r) = if a.start <= b.start { (a, b) } else { (b, a) };
    if r.start > l.end {
        r.start - l.end - 1
    } else {
        0
    }
}

/// Straight-line evaluation of one query, written from the rule list
/// rather than from the library's code.
pub fn naive_eval(words: &[&str], q: &QuerySpec) -> Option<(Span, Option<Span>)> {
    let mut carveouts = Vec::new();
    let mut contexts = Vec::new();
    for r in &q.exclusions {
        match r.kind {
            ExclusionKind::CitancePhrase => {
                for p in &r.patterns {
                    if !positions(words, p).is_empty() {
                        return None;
                    }
                }
            }
            ExclusionKind::CooccurrenceWindow => {
                let w = r.window.unwrap();
                for a in positions(words, &r.patterns[0]) {
                    for b in positions(words, &r.patterns[1]) {
                        let d = a.abs_diff(b);
                        if d <= w {
                            return None;
                        }
                    }
                }
            }
            ExclusionKind::TokenCarveout => carveouts.extend(r.patterns.iter().cloned()),
            ExclusionKind::MatchContext => contexts.extend(r.patterns.iter().cloned()),
        }
    }
    let main_negated = has_negation(&q.signal_patterns[0]);

    let mut signals = Vec::new();
    for (pid, p) in q.signal_patterns.iter().enumerate() {
        'occ: for start in positions(words, p) {
            let end = start + p.len() - 1;
            for w in &words[start..=end] {
                for c in &carveouts {
                    if pattern_at(&[*w], c, 0) {
                        continue 'occ;
                    }
                }
            }
            if !main_negated && !has_negation(p) {
                let lo = start.saturating_sub(2);
                if words[lo..start].iter().any(|w| NEGATION_WORDS.contains(w)) {
                    continue;
                }
            }
            for c in &contexts {
                if start >= c.len() && pattern_at(words, c, start - c.len()) {
                    continue 'occ;
                }
            }
            signals.push(Span { start, end, pattern_id: pid });
        }
    }
    signals.sort();

    if q.filter_patterns.is_empty() {
        return signals.first().map(|s| (*s, None));
    }
    let mut filters = Vec::new();
    for (pid, p) in q.filter_patterns.iter().enumerate() {
        for start in positions(words, p) {
            filters.push(Span { start, end: start + p.len() - 1, pattern_id: pid });
        }
    }
    for s in &signals {
        let mut best: Option<(usize, Span)> = None;
        for f in &filters {
            let g = words_between(s, f);
            if g > q.max_gap {
                continue;
            }
            if best.is_none_or(|(bg, bf)| (g, *f) < (bg, bf)) {
                best = Some((g, *f));
            }
        }
        if let Some((_, f)) = best {
            return Some((*s, Some(f)));
        }
    }
    None
}

/// Words drawn from every cue, filter, exclusion and negation of the
/// built-in catalog, plus inflections and neutral filler.
pub const VOCAB: &[&str] = &[
    "challenge", "challenged", "challenges", "conflict", "conflicting", "contradict",
    "contradicts", "contradictory", "contrary", "contrast", "contrasting", "controversy",
    "controversial", "debate", "debated", "differ", "differs", "different", "differently",
    "disagree", "disagreement", "disagrees", "agree", "agrees", "agreement", "disprove",
    "disproved", "prove", "proven", "proves", "consensus", "lack", "of", "sequence", "site",
    "questionable", "refute", "refuted", "refutable", "refutability", "parliament", "public",
    "publication", "policy", "politics", "society", "senate", "congress", "range", "scale",
    "kappa", "likert", "study", "studies", "previous", "earlier", "work", "literature",
    "analysis", "analyses", "report", "reports", "idea", "ideas", "theory", "theories",
    "assumption", "hypothesis", "hypotheses", "model", "models", "method", "approach",
    "techniques", "result", "results", "finding", "outcome", "evidence", "data",
    "conclusions", "observation", "no", "not", "cannot", "nor", "neither", "the", "a", "we",
    "in", "with", "this", "and", "was", "is", "to", "these", "our", "has", "been",
];

/// A random sentence of 1..=`max_words` vocabulary words ending with an
/// inline marker.
pub fn random_sentence<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let n = rng.random_range(1..=max_words);
    let mut words: Vec<&str> = (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect();
    if rng.random_bool(0.3) {
        words[0] = "However,";
    }
    let mut s = words.join(" ");
    s.push_str(" <ref id=\"r\"/>.");
    s
}

/// Papers and yearly citation rows for impact checks.
pub struct ImpactFixture {
    /// `(doc_id, pub_year, field index)`.
    pub papers: Vec<(String, i32, usize)>,
    /// `(doc_id, year, citations)`; may repeat a key.
    pub rows: Vec<(String, i32, u64)>,
    pub first: BTreeMap<String, i32>,
}

/// Impact ratio by definition: for each disagreement-cited paper, compare
/// its next-period count with the mean over every paper holding the same
/// cumulative count at the same age. Returns `None` without cohorts.
pub fn brute_force_impact(fx: &ImpactFixture, k: i32, field: Option<usize>) -> Option<f64> {
    let ids: BTreeSet<&str> = fx.papers.iter().map(|p| p.0.as_str()).collect();
    let mut last = fx.papers.iter().map(|p| p.1).max()?;
    for r in &fx.rows {
        if ids.contains(r.0.as_str()) {
            last = last.max(r.1);
        }
    }
    let mut by_id: BTreeMap<&str, Vec<(i32, u64)>> = BTreeMap::new();
    for r in &fx.rows {
        by_id.entry(r.0.as_str()).or_default().push((r.1, r.2));
    }
    let none = Vec::new();
    let rows_of = |id: &str| by_id.get(id).unwrap_or(&none);
    let held = |id: &str, pub_year: i32, t: i32| -> u64 {
        rows_of(id).iter().filter(|r| r.0 <= pub_year + t).map(|r| r.1).sum()
    };
    let received = |id: &str, year: i32| -> u64 {
        rows_of(id).iter().filter(|r| r.0 == year).map(|r| r.1).sum()
    };
    let scope: Vec<&(String, i32, usize)> = fx
        .papers
        .iter()
        .filter(|p| field.is_none_or(|f| p.2 == f))
        .collect();

    let mut num = 0.0;
    let mut den = 0.0;
    let mut any = false;
    let mut cell_means: BTreeMap<(u64, i32), f64> = BTreeMap::new();
    for (id, &year) in &fx.first {
        let Some(p) = scope.iter().find(|p| &p.0 == id) else { continue };
        let t = year - p.1;
        if t < 0 || p.1 + t + k > last {
            continue;
        }
        let c = held(id, p.1, t);
        let mean = *cell_means.entry((c, t)).or_insert_with(|| {
            let mut n = 0u64;
            let mut sum = 0u64;
            for o in &scope {
                if o.1 + t + k <= last && held(&o.0, o.1, t) == c {
                    n += 1;
                    sum += received(&o.0, o.1 + t + k);
                }
            }
            sum as f64 / n as f64
        });
        num += received(id, p.1 + t + k) as f64;
        den += mean;
        any = true;
    }
    any.then(|| num / den)
}
