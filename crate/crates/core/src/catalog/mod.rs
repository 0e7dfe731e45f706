//! Cue-phrase queries as data.
//!
//! A query pairs a signal (a cue pattern plus variants) with an optional
//! filter term set that must occur near the signal. The built-in catalog
//! crosses thirteen signals with the four filter sets and the standalone
//! option.

mod file;
mod validated;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use file::{parse_query_file, serialize_queries, QueryFileError};
pub use validated::{
    default_validated_set, Resolution, ResolutionError, ValidatedSet, DEFAULT_RESOLUTION,
    RELAXED_ADDITIONS,
};

/// Generic negation words that suppress a signal placed right after them.
pub const NEGATIONS: [&str; 5] = ["no", "not", "cannot", "nor", "neither"];

pub const DEFAULT_MAX_GAP: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternToken {
    Literal(String),
    /// Matches any word starting with the stem (`stem*`).
    Prefix(String),
}

impl PatternToken {
    pub fn matches(&self, word: &str) -> bool {
        match self {
            PatternToken::Literal(s) => word == s,
            PatternToken::Prefix(s) => word.starts_with(s.as_str()),
        }
    }

    pub fn stem(&self) -> &str {
        match self {
            PatternToken::Literal(s) | PatternToken::Prefix(s) => s,
        }
    }

    pub fn is_prefix(&self) -> bool {
        matches!(self, PatternToken::Prefix(_))
    }
}

impl fmt::Display for PatternToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternToken::Literal(s) => f.write_str(s),
            PatternToken::Prefix(s) => write!(f, "{s}*"),
        }
    }
}

/// A sequence of consecutive word tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    tokens: Vec<PatternToken>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("empty pattern")]
    Empty,
    #[error("wildcard must be the last character of a token: `{0}`")]
    NonTrailingWildcard(String),
    #[error("bare wildcard")]
    BareWildcard,
    #[error("invalid character in pattern token `{0}`")]
    InvalidToken(String),
}

fn word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '\''
}

impl Pattern {
    pub fn new(tokens: Vec<PatternToken>) -> Result<Self, PatternError> {
        if tokens.is_empty() {
            return Err(PatternError::Empty);
        }
        Ok(Pattern { tokens })
    }

    pub fn tokens(&self) -> &[PatternToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains_negation(&self) -> bool {
        self.tokens
            .iter()
            .any(|t| matches!(t, PatternToken::Literal(s) if NEGATIONS.contains(&s.as_str())))
    }

    /// Identifier-like rendering: stems joined by `_`.
    pub fn slug(&self) -> String {
        self.tokens
            .iter()
            .map(PatternToken::stem)
            .collect::<Vec<_>>()
            .join("_")
    }
}

impl FromStr for Pattern {
    type Err = PatternError;

    /// Whitespace-separated tokens; input is lowercased.
    fn from_str(s: &str) -> Result<Self, PatternError> {
        let tokens = s
            .split_whitespace()
            .map(|raw| {
                let raw = raw.to_lowercase();
                let (stem, prefix) = match raw.strip_suffix('*') {
                    Some(stem) => (stem.to_string(), true),
                    None => (raw.clone(), false),
                };
                if stem.contains('*') {
                    return Err(PatternError::NonTrailingWildcard(raw));
                }
                if stem.is_empty() {
                    return Err(PatternError::BareWildcard);
                }
                if !stem.chars().all(word_char) {
                    return Err(PatternError::InvalidToken(raw));
                }
                Ok(if prefix {
                    PatternToken::Prefix(stem)
                } else {
                    PatternToken::Literal(stem)
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Pattern::new(tokens)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

fn pat(s: &str) -> Pattern {
    s.parse().expect("builtin pattern")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExclusionKind {
    /// Drops a signal span when the very word matched by a wildcard stem
    /// also matches the carve-out (`different*` under `differ*`).
    TokenCarveout,
    /// Drops a signal span immediately preceded by the pattern.
    MatchContext,
    /// Rejects the whole citance when the pattern occurs anywhere.
    CitancePhrase,
    /// Rejects the whole citance when the two patterns start within
    /// `window` words of each other.
    CooccurrenceWindow,
}

impl ExclusionKind {
    pub const ALL: [ExclusionKind; 4] = [
        ExclusionKind::TokenCarveout,
        ExclusionKind::MatchContext,
        ExclusionKind::CitancePhrase,
        ExclusionKind::CooccurrenceWindow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionKind::TokenCarveout => "token_carveout",
            ExclusionKind::MatchContext => "match_context",
            ExclusionKind::CitancePhrase => "citance_phrase",
            ExclusionKind::CooccurrenceWindow => "cooccurrence_window",
        }
    }
}

impl FromStr for ExclusionKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        ExclusionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionRule {
    pub kind: ExclusionKind,
    pub patterns: Vec<Pattern>,
    /// Set only for [`ExclusionKind::CooccurrenceWindow`].
    pub window: Option<usize>,
}

impl ExclusionRule {
    pub fn new(kind: ExclusionKind, patterns: Vec<Pattern>) -> Self {
        ExclusionRule {
            kind,
            patterns,
            window: None,
        }
    }

    pub fn cooccurrence(a: Pattern, b: Pattern, window: usize) -> Self {
        ExclusionRule {
            kind: ExclusionKind::CooccurrenceWindow,
            patterns: vec![a, b],
            window: Some(window),
        }
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let bad = |why: &str| Err(CatalogError::InvalidExclusion(why.to_string()));
        if self.patterns.is_empty() {
            return bad("exclusion without patterns");
        }
        match self.kind {
            ExclusionKind::TokenCarveout if self.patterns.iter().any(|p| p.len() != 1) => {
                bad("token_carveout patterns must be single tokens")
            }
            ExclusionKind::CooccurrenceWindow => match self.window {
                Some(w) if w >= 1 && self.patterns.len() == 2 => Ok(()),
                Some(w) if w >= 1 => bad("cooccurrence_window needs exactly two patterns"),
                _ => bad("cooccurrence_window needs window >= 1"),
            },
            _ if self.window.is_some() => bad("window is only valid for cooccurrence_window"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterSet {
    Standalone,
    Studies,
    Ideas,
    Methods,
    Results,
}

impl FilterSet {
    pub const ALL: [FilterSet; 5] = [
        FilterSet::Standalone,
        FilterSet::Studies,
        FilterSet::Ideas,
        FilterSet::Methods,
        FilterSet::Results,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterSet::Standalone => "standalone",
            FilterSet::Studies => "studies",
            FilterSet::Ideas => "ideas",
            FilterSet::Methods => "methods",
            FilterSet::Results => "results",
        }
    }

    /// Terms of the set; empty for standalone.
    pub fn patterns(self) -> Vec<Pattern> {
        let terms: &[&str] = match self {
            FilterSet::Standalone => &[],
            FilterSet::Studies => &[
                "studies",
                "study",
                "previous work",
                "earlier work",
                "literature",
                "analysis",
                "analyses",
                "report",
                "reports",
            ],
            FilterSet::Ideas => &[
                "idea*",
                "theory",
                "theories",
                "assumption*",
                "hypothesis",
                "hypotheses",
            ],
            FilterSet::Methods => &["model*", "method*", "approach*", "technique*"],
            FilterSet::Results => &[
                "result*",
                "finding*",
                "outcome*",
                "evidence",
                "data",
                "conclusion*",
                "observation*",
            ],
        };
        terms.iter().map(|t| pat(t)).collect()
    }
}

impl FromStr for FilterSet {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        FilterSet::ALL.into_iter().find(|f| f.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("query `{0}`: no signal pattern")]
    NoSignal(String),
    #[error("query `{0}`: filter patterns must be empty exactly for standalone queries")]
    FilterMismatch(String),
    #[error("invalid exclusion: {0}")]
    InvalidExclusion(String),
    #[error("duplicate query id `{0}`")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    pub query_id: String,
    pub signal_id: String,
    /// Main pattern first, then variants.
    pub signal_patterns: Vec<Pattern>,
    pub filter_set: FilterSet,
    pub filter_patterns: Vec<Pattern>,
    pub exclusions: Vec<ExclusionRule>,
    pub max_gap: usize,
    /// The main signal pattern itself contains a negation word, so the
    /// generic negation rule never applies to this query.
    pub negation_exempt: bool,
}

impl QuerySpec {
    /// Builds a validated query. The signal id is derived from the main
    /// pattern, filter terms from the named set.
    pub fn new(
        query_id: impl Into<String>,
        signal_patterns: Vec<Pattern>,
        filter_set: FilterSet,
        exclusions: Vec<ExclusionRule>,
        max_gap: usize,
    ) -> Result<Self, CatalogError> {
        let query_id = query_id.into();
        let main = signal_patterns
            .first()
            .ok_or_else(|| CatalogError::NoSignal(query_id.clone()))?;
        let spec = QuerySpec {
            signal_id: main.slug(),
            negation_exempt: main.contains_negation(),
            query_id,
            filter_patterns: filter_set.patterns(),
            signal_patterns,
            filter_set,
            exclusions,
            max_gap,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.signal_patterns.is_empty() {
            return Err(CatalogError::NoSignal(self.query_id.clone()));
        }
        if self.filter_patterns.is_empty() != (self.filter_set == FilterSet::Standalone) {
            return Err(CatalogError::FilterMismatch(self.query_id.clone()));
        }
        self.exclusions.iter().try_for_each(ExclusionRule::validate)
    }

    pub fn is_standalone(&self) -> bool {
        self.filter_set == FilterSet::Standalone
    }

    pub fn exclusions_of(&self, kind: ExclusionKind) -> impl Iterator<Item = &ExclusionRule> {
        self.exclusions.iter().filter(move |r| r.kind == kind)
    }
}

/// Builtin query identifier: `<signal>_<filter>`, e.g. `no_consensus_ideas`.
pub fn query_id(signal_id: &str, filter: FilterSet) -> String {
    format!("{signal_id}_{}", filter.as_str())
}

struct SignalDef {
    patterns: &'static [&'static str],
    exclusions: fn() -> Vec<ExclusionRule>,
}

fn none() -> Vec<ExclusionRule> {
    Vec::new()
}

fn rule(kind: ExclusionKind, terms: &[&str]) -> ExclusionRule {
    ExclusionRule::new(kind, terms.iter().map(|t| pat(t)).collect())
}

const SIGNALS: [SignalDef; 13] = [
    SignalDef { patterns: &["challenge*"], exclusions: none },
    SignalDef { patterns: &["conflict*"], exclusions: none },
    SignalDef { patterns: &["contradict*"], exclusions: none },
    SignalDef { patterns: &["contrary"], exclusions: none },
    SignalDef { patterns: &["contrast*"], exclusions: none },
    SignalDef { patterns: &["controvers*"], exclusions: none },
    SignalDef {
        patterns: &["debat*"],
        exclusions: || {
            vec![rule(
                ExclusionKind::MatchContext,
                &[
                    "parliament*",
                    "congress*",
                    "senate*",
                    "polic*",
                    "politic*",
                    "public*",
                    "societ*",
                ],
            )]
        },
    },
    SignalDef {
        patterns: &["differ*"],
        exclusions: || vec![rule(ExclusionKind::TokenCarveout, &["different*"])],
    },
    SignalDef {
        patterns: &["disagree*", "not agree*", "no agreement"],
        exclusions: || {
            vec![
                rule(ExclusionKind::CitancePhrase, &["range", "scale", "kappa", "likert"]),
                ExclusionRule::cooccurrence(pat("agree*"), pat("disagree"), 10),
            ]
        },
    },
    SignalDef {
        patterns: &["disprov*"],
        exclusions: || vec![ExclusionRule::cooccurrence(pat("prove*"), pat("disprove*"), 10)],
    },
    SignalDef {
        patterns: &["no consensus", "lack of consensus"],
        exclusions: || {
            vec![rule(
                ExclusionKind::CitancePhrase,
                &["consensus sequence", "consensus site"],
            )]
        },
    },
    SignalDef { patterns: &["questionable"], exclusions: none },
    SignalDef {
        patterns: &["refut*"],
        exclusions: || vec![rule(ExclusionKind::TokenCarveout, &["refutab*"])],
    },
];

/// The thirteen built-in signal ids, in catalog order.
pub fn signal_ids() -> Vec<String> {
    SIGNALS.iter().map(|s| pat(s.patterns[0]).slug()).collect()
}

/// Thirteen signals crossed with the standalone option and four filter sets.
pub fn builtin_catalog() -> Vec<QuerySpec> {
    let mut out = Vec::with_capacity(SIGNALS.len() * FilterSet::ALL.len());
    for s in &SIGNALS {
        let patterns: Vec<Pattern> = s.patterns.iter().map(|p| pat(p)).collect();
        let signal_id = patterns[0].slug();
        for filter in FilterSet::ALL {
            out.push(
                QuerySpec::new(
                    query_id(&signal_id, filter),
                    patterns.clone(),
                    filter,
                    (s.exclusions)(),
                    DEFAULT_MAX_GAP,
                )
                .expect("builtin query"),
            );
        }
    }
    out
}
