//! Plain-text query files.
//!
//! ```text
//! # comment
//! query debat_studies
//! signal debat*
//! filter studies
//! exclude match_context:parliament*,public*
//! maxgap 4
//! ```
//!
//! `signal` takes `|`-separated patterns (main pattern first), `filter`
//! a set name or `none`, `exclude` a kind and `,`-separated patterns with
//! an optional trailing ` window=N`. Blocks start at `query` lines.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::{
    CatalogError, ExclusionKind, ExclusionRule, FilterSet, Pattern, PatternError, QuerySpec,
    DEFAULT_MAX_GAP,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct QueryFileError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> QueryFileError {
    QueryFileError {
        line,
        column,
        message: message.into(),
    }
}

#[derive(Default)]
struct Block {
    line: usize,
    id: String,
    signal: Option<Vec<Pattern>>,
    filter: Option<FilterSet>,
    exclusions: Vec<ExclusionRule>,
    max_gap: Option<usize>,
}

fn patterns(list: &str, sep: char, line: usize, column: usize) -> Result<Vec<Pattern>, QueryFileError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for part in list.split(sep) {
        let col = column + offset + (part.len() - part.trim_start().len());
        let p = part.trim().parse::<Pattern>().map_err(|e| match e {
            PatternError::Empty => err(line, col, "empty pattern"),
            other => err(line, col, other.to_string()),
        })?;
        out.push(p);
        offset += part.len() + sep.len_utf8();
    }
    Ok(out)
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '+'))
}

fn finish(block: Block) -> Result<QuerySpec, QueryFileError> {
    let signal = block
        .signal
        .ok_or_else(|| err(block.line, 1, format!("query `{}` has no signal line", block.id)))?;
    let filter = block
        .filter
        .ok_or_else(|| err(block.line, 1, format!("query `{}` has no filter line", block.id)))?;
    QuerySpec::new(
        block.id,
        signal,
        filter,
        block.exclusions,
        block.max_gap.unwrap_or(DEFAULT_MAX_GAP),
    )
    .map_err(|e| err(block.line, 1, e.to_string()))
}

pub fn parse_query_file(text: &str) -> Result<Vec<QuerySpec>, QueryFileError> {
    let mut out: Vec<QuerySpec> = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<Block> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let indent = raw.len() - raw.trim_start().len();
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let (keyword, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
        let arg_col = indent + keyword.len() + 1 + (rest.len() - rest.trim_start().len()) + 1;
        let rest = rest.trim();

        if keyword == "query" {
            if let Some(done) = current.take() {
                out.push(finish(done)?);
            }
            if !valid_id(rest) {
                return Err(err(line, arg_col, format!("invalid query id `{rest}`")));
            }
            if !seen.insert(rest.to_string()) {
                return Err(err(line, arg_col, CatalogError::DuplicateId(rest.into()).to_string()));
            }
            current = Some(Block {
                line,
                id: rest.to_string(),
                ..Block::default()
            });
            continue;
        }

        let block = current
            .as_mut()
            .ok_or_else(|| err(line, indent + 1, format!("`{keyword}` outside a query block")))?;
        match keyword {
            "signal" => {
                if block.signal.is_some() {
                    return Err(err(line, indent + 1, "duplicate signal line"));
                }
                block.signal = Some(patterns(rest, '|', line, arg_col)?);
            }
            "filter" => {
                if block.filter.is_some() {
                    return Err(err(line, indent + 1, "duplicate filter line"));
                }
                let set = match rest {
                    "none" => FilterSet::Standalone,
                    "standalone" => {
                        return Err(err(line, arg_col, "use `none` for standalone queries"))
                    }
                    name => name
                        .parse()
                        .map_err(|_| err(line, arg_col, format!("unknown filter set `{name}`")))?,
                };
                block.filter = Some(set);
            }
            "exclude" => {
                let (kind, list) = rest
                    .split_once(':')
                    .ok_or_else(|| err(line, arg_col, "expected `<kind>:<patterns>`"))?;
                let kind: ExclusionKind = kind
                    .trim()
                    .parse()
                    .map_err(|_| err(line, arg_col, format!("unknown exclusion kind `{}`", kind.trim())))?;
                let list_col = arg_col + rest.find(':').unwrap_or(0) + 1;
                let (list, window) = match list.rsplit_once(char::is_whitespace) {
                    Some((head, tail)) if tail.starts_with("window=") => {
                        let w = tail["window=".len()..].parse::<usize>().map_err(|_| {
                            err(line, list_col + head.len() + 1, format!("invalid window `{tail}`"))
                        })?;
                        (head, Some(w))
                    }
                    _ => (list, None),
                };
                let rule = ExclusionRule {
                    kind,
                    patterns: patterns(list, ',', line, list_col)?,
                    window,
                };
                rule.validate().map_err(|e| err(line, arg_col, e.to_string()))?;
                block.exclusions.push(rule);
            }
            "maxgap" => {
                if block.max_gap.is_some() {
                    return Err(err(line, indent + 1, "duplicate maxgap line"));
                }
                let n = rest
                    .parse::<usize>()
                    .map_err(|_| err(line, arg_col, format!("invalid maxgap `{rest}`")))?;
                block.max_gap = Some(n);
            }
            other => return Err(err(line, indent + 1, format!("unknown directive `{other}`"))),
        }
    }
    if let Some(done) = current.take() {
        out.push(finish(done)?);
    }
    Ok(out)
}

/// Renders queries in the query-file format; `parse_query_file` inverts it.
pub fn serialize_queries(queries: &[QuerySpec]) -> String {
    let mut s = String::new();
    for (i, q) in queries.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "query {}", q.query_id);
        let signal: Vec<String> = q.signal_patterns.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(s, "signal {}", signal.join("|"));
        let filter = match q.filter_set {
            FilterSet::Standalone => "none",
            f => f.as_str(),
        };
        let _ = writeln!(s, "filter {filter}");
        for r in &q.exclusions {
            let pats: Vec<String> = r.patterns.iter().map(|p| p.to_string()).collect();
            let _ = write!(s, "exclude {}:{}", r.kind.as_str(), pats.join(","));
            if let Some(w) = r.window {
                let _ = write!(s, " window={w}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "maxgap {}", q.max_gap);
    }
    s
}
