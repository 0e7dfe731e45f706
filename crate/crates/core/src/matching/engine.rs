//! Catalog-wide matcher.
//!
//! Every distinct pattern token becomes an atom. Literal atoms are looked
//! up by hash, wildcard stems by walking a character trie, so one pass over
//! the words labels each word with the atoms it satisfies. Patterns are
//! atom sequences, found by extending from their first atom; queries then
//! only read the shared occurrence lists.

use std::collections::HashMap;

use rayon::prelude::*;

use super::{gap, MatchRecord, Span};
use crate::catalog::{ExclusionKind, Pattern, PatternToken, QuerySpec, NEGATIONS};
use crate::ingest::Citance;

type AtomId = u32;
type PatternId = u32;

#[derive(Default)]
struct TrieNode {
    children: Vec<(char, u32)>,
    atom: Option<AtomId>,
}

struct CompiledQuery {
    /// Pattern id and whether the pattern is exempt from negation.
    signal: Vec<(PatternId, bool)>,
    carveout_atoms: Vec<AtomId>,
    context: Vec<PatternId>,
    phrase: Vec<PatternId>,
    cooccurrence: Vec<(PatternId, PatternId, usize)>,
    filters: Vec<PatternId>,
    max_gap: usize,
    standalone: bool,
}

pub struct Engine {
    queries: Vec<QuerySpec>,
    atom_ids: HashMap<PatternToken, AtomId>,
    literals: HashMap<String, AtomId>,
    trie: Vec<TrieNode>,
    pattern_ids: HashMap<Pattern, PatternId>,
    patterns: Vec<Vec<AtomId>>,
    /// Patterns whose first atom is the index.
    starting: Vec<Vec<PatternId>>,
    compiled: Vec<CompiledQuery>,
}

/// Per-thread buffers reused across citances.
#[derive(Default)]
pub struct Scratch {
    atoms: Vec<AtomId>,
    atom_offsets: Vec<usize>,
    occurrences: Vec<Vec<usize>>,
    touched: Vec<PatternId>,
    signals: Vec<Span>,
    filters: Vec<Span>,
}

fn atoms_at(s: &Scratch, i: usize) -> &[AtomId] {
    &s.atoms[s.atom_offsets[i]..s.atom_offsets[i + 1]]
}

impl Engine {
    pub fn new(queries: &[QuerySpec]) -> Self {
        let mut e = Engine {
            queries: queries.to_vec(),
            atom_ids: HashMap::new(),
            literals: HashMap::new(),
            trie: vec![TrieNode::default()],
            pattern_ids: HashMap::new(),
            patterns: Vec::new(),
            starting: Vec::new(),
            compiled: Vec::new(),
        };
        for q in queries {
            let compiled = e.compile(q);
            e.compiled.push(compiled);
        }
        e
    }

    pub fn queries(&self) -> &[QuerySpec] {
        &self.queries
    }

    fn atom(&mut self, token: &PatternToken) -> AtomId {
        if let Some(&id) = self.atom_ids.get(token) {
            return id;
        }
        let id = self.starting.len() as AtomId;
        self.starting.push(Vec::new());
        self.atom_ids.insert(token.clone(), id);
        match token {
            PatternToken::Literal(s) => {
                self.literals.insert(s.clone(), id);
            }
            PatternToken::Prefix(stem) => {
                let mut node = 0usize;
                for c in stem.chars() {
                    node = match self.trie[node].children.iter().find(|(k, _)| *k == c) {
                        Some(&(_, next)) => next as usize,
                        None => {
                            let next = self.trie.len();
                            self.trie.push(TrieNode::default());
                            self.trie[node].children.push((c, next as u32));
                            next
                        }
                    };
                }
                self.trie[node].atom = Some(id);
            }
        }
        id
    }

    fn pattern(&mut self, p: &Pattern) -> PatternId {
        if let Some(&id) = self.pattern_ids.get(p) {
            return id;
        }
        let atoms: Vec<AtomId> = p.tokens().iter().map(|t| self.atom(t)).collect();
        let id = self.patterns.len() as PatternId;
        self.starting[atoms[0] as usize].push(id);
        self.patterns.push(atoms);
        self.pattern_ids.insert(p.clone(), id);
        id
    }

    fn compile(&mut self, q: &QuerySpec) -> CompiledQuery {
        let signal = q
            .signal_patterns
            .iter()
            .map(|p| (self.pattern(p), q.negation_exempt || p.contains_negation()))
            .collect();
        let mut c = CompiledQuery {
            signal,
            carveout_atoms: Vec::new(),
            context: Vec::new(),
            phrase: Vec::new(),
            cooccurrence: Vec::new(),
            filters: q.filter_patterns.iter().map(|p| self.pattern(p)).collect(),
            max_gap: q.max_gap,
            standalone: q.is_standalone(),
        };
        for r in &q.exclusions {
            match r.kind {
                ExclusionKind::TokenCarveout => {
                    for p in &r.patterns {
                        let a = self.atom(&p.tokens()[0]);
                        c.carveout_atoms.push(a);
                    }
                }
                ExclusionKind::MatchContext => {
                    for p in &r.patterns {
                        let id = self.pattern(p);
                        c.context.push(id);
                    }
                }
                ExclusionKind::CitancePhrase => {
                    for p in &r.patterns {
                        let id = self.pattern(p);
                        c.phrase.push(id);
                    }
                }
                ExclusionKind::CooccurrenceWindow => {
                    let a = self.pattern(&r.patterns[0]);
                    let b = self.pattern(&r.patterns[1]);
                    c.cooccurrence.push((a, b, r.window.unwrap_or(0)));
                }
            }
        }
        c
    }

    fn label(&self, word: &str, out: &mut Vec<AtomId>) {
        if let Some(&a) = self.literals.get(word) {
            out.push(a);
        }
        let mut node = 0usize;
        for c in word.chars() {
            match self.trie[node].children.iter().find(|(k, _)| *k == c) {
                Some(&(_, next)) => node = next as usize,
                None => return,
            }
            if let Some(a) = self.trie[node].atom {
                out.push(a);
            }
        }
    }

    fn find_occurrences(&self, words: &[&str], s: &mut Scratch) {
        for &p in &s.touched {
            s.occurrences[p as usize].clear();
        }
        s.touched.clear();
        if s.occurrences.len() < self.patterns.len() {
            s.occurrences.resize_with(self.patterns.len(), Vec::new);
        }
        s.atoms.clear();
        s.atom_offsets.clear();
        s.atom_offsets.push(0);
        for w in words {
            self.label(w, &mut s.atoms);
            s.atom_offsets.push(s.atoms.len());
        }
        let Scratch {
            atoms,
            atom_offsets,
            occurrences,
            touched,
            ..
        } = s;
        let at = |i: usize| &atoms[atom_offsets[i]..atom_offsets[i + 1]];
        for i in 0..words.len() {
            for &a in at(i) {
                for &p in &self.starting[a as usize] {
                    let seq = &self.patterns[p as usize];
                    let fits = i + seq.len() <= words.len()
                        && seq[1..]
                            .iter()
                            .enumerate()
                            .all(|(k, want)| at(i + 1 + k).contains(want));
                    if fits {
                        let list = &mut occurrences[p as usize];
                        if list.is_empty() {
                            touched.push(p);
                        }
                        list.push(i);
                    }
                }
            }
        }
    }

    /// Matches one citance's words against every query. `emit` receives the
    /// query index and the chosen spans, in query order.
    pub fn match_words(
        &self,
        words: &[&str],
        s: &mut Scratch,
        mut emit: impl FnMut(usize, Span, Option<Span>),
    ) {
        self.find_occurrences(words, s);

        for (qi, q) in self.compiled.iter().enumerate() {
            if q.signal
                .iter()
                .all(|(p, _)| s.occurrences[*p as usize].is_empty())
            {
                continue;
            }
            if q.phrase.iter().any(|p| !s.occurrences[*p as usize].is_empty()) {
                continue;
            }
            let rejected = q.cooccurrence.iter().any(|&(a, b, window)| {
                let a = &s.occurrences[a as usize];
                s.occurrences[b as usize]
                    .iter()
                    .any(|&y| a.iter().any(|&x| x.abs_diff(y) <= window))
            });
            if rejected {
                continue;
            }

            let mut signals = std::mem::take(&mut s.signals);
            signals.clear();
            for (idx, &(p, exempt)) in q.signal.iter().enumerate() {
                let len = self.patterns[p as usize].len();
                for &start in &s.occurrences[p as usize] {
                    let end = start + len - 1;
                    if !q.carveout_atoms.is_empty()
                        && (start..=end)
                            .any(|j| atoms_at(s, j).iter().any(|a| q.carveout_atoms.contains(a)))
                    {
                        continue;
                    }
                    if !exempt
                        && words[start.saturating_sub(super::NEGATION_WINDOW)..start]
                            .iter()
                            .any(|w| NEGATIONS.contains(w))
                    {
                        continue;
                    }
                    let in_context = q.context.iter().any(|&c| {
                        let clen = self.patterns[c as usize].len();
                        start >= clen
                            && s.occurrences[c as usize].binary_search(&(start - clen)).is_ok()
                    });
                    if in_context {
                        continue;
                    }
                    signals.push(Span {
                        start,
                        end,
                        pattern_id: idx,
                    });
                }
            }
            if signals.is_empty() {
                s.signals = signals;
                continue;
            }
            signals.sort_unstable();

            if q.standalone {
                emit(qi, signals[0], None);
                s.signals = signals;
                continue;
            }

            let mut filters = std::mem::take(&mut s.filters);
            filters.clear();
            for (idx, &p) in q.filters.iter().enumerate() {
                let len = self.patterns[p as usize].len();
                filters.extend(s.occurrences[p as usize].iter().map(|&start| Span {
                    start,
                    end: start + len - 1,
                    pattern_id: idx,
                }));
            }
            if !filters.is_empty() {
                filters.sort_unstable();
                'signal: for sig in &signals {
                    let mut best: Option<(usize, Span)> = None;
                    for f in &filters {
                        let g = gap(sig, f);
                        if g <= q.max_gap && best.is_none_or(|(bg, _)| g < bg) {
                            best = Some((g, *f));
                        }
                    }
                    if let Some((_, f)) = best {
                        emit(qi, *sig, Some(f));
                        break 'signal;
                    }
                }
            }
            s.filters = filters;
            s.signals = signals;
        }
    }

    pub fn match_citance(&self, citance: &Citance, s: &mut Scratch) -> Vec<MatchRecord> {
        let words = citance.words();
        let mut out = Vec::new();
        self.match_words(&words, s, |qi, signal_span, filter_span| {
            out.push(MatchRecord {
                doc_id: citance.doc_id.clone(),
                sentence_index: citance.sentence_index,
                query_id: self.queries[qi].query_id.clone(),
                signal_span,
                filter_span,
            })
        });
        out
    }
}

/// Every query against every citance, sorted by document, sentence and
/// query id. Citances are processed in parallel.
pub fn run_all(citances: &[Citance], queries: &[QuerySpec]) -> Vec<MatchRecord> {
    let engine = Engine::new(queries);
    let mut out: Vec<MatchRecord> = citances
        .par_iter()
        .map_init(Scratch::default, |s, c| engine.match_citance(c, s))
        .flatten_iter()
        .collect();
    out.sort();
    out
}
