use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

use super::AuthorName;

static MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<ref\b([^>]*?)/?>").expect("marker regex"));
static ATTR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"([A-Za-z_]+)\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'/>]+))"#).expect("attr regex")
});

/// An inline `<ref .../>` marker found in body or sentence text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefMarker {
    pub span: Range<usize>,
    pub ref_id: String,
    pub cited_doc_id: Option<String>,
    pub cited_year: Option<i32>,
    pub cited_authors: Option<Vec<AuthorName>>,
}

/// Finds every inline reference marker, in text order.
///
/// Attribute values may be double-quoted, single-quoted or bare.
/// `cited_authors` is a `;`-separated list of `family,given` pairs.
/// Returns the error code of the first malformed marker.
pub fn parse_markers(text: &str) -> Result<Vec<RefMarker>, &'static str> {
    let mut out = Vec::new();
    for m in MARKER.captures_iter(text) {
        let whole = m.get(0).expect("match");
        let mut marker = RefMarker {
            span: whole.start()..whole.end(),
            ref_id: String::new(),
            cited_doc_id: None,
            cited_year: None,
            cited_authors: None,
        };
        let attrs = m.get(1).map_or("", |a| a.as_str());
        for a in ATTR.captures_iter(attrs) {
            let value = a
                .get(2)
                .or_else(|| a.get(3))
                .or_else(|| a.get(4))
                .map_or("", |v| v.as_str());
            match &a[1] {
                "id" | "ref_id" => marker.ref_id = value.to_string(),
                "cited_doc_id" => marker.cited_doc_id = Some(value.to_string()),
                "cited_year" => {
                    marker.cited_year = Some(value.parse().map_err(|_| "invalid_ref_year")?)
                }
                "cited_authors" => {
                    let authors = value
                        .split(';')
                        .filter(|e| !e.trim().is_empty())
                        .map(|e| {
                            let mut parts = e.splitn(2, ',');
                            let family = parts.next().unwrap_or("");
                            AuthorName::new(family, parts.next())
                        })
                        .collect::<Option<Vec<_>>>()
                        .ok_or("empty_author_family")?;
                    marker.cited_authors = Some(authors);
                }
                _ => {}
            }
        }
        if marker.ref_id.is_empty() {
            return Err("malformed_ref");
        }
        out.push(marker);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_and_quoted_attributes() {
        let text = r#"A <ref id=r1/> and <ref id="r2" cited_doc_id="D9" cited_year="2005"/>."#;
        let m = parse_markers(text).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].ref_id, "r1");
        assert_eq!(&text[m[0].span.clone()], "<ref id=r1/>");
        assert_eq!(m[1].cited_doc_id.as_deref(), Some("D9"));
        assert_eq!(m[1].cited_year, Some(2005));
    }

    #[test]
    fn author_list() {
        let m = parse_markers(r#"<ref id=a cited_authors="Zhao,G;Wilde"/>"#).unwrap();
        let authors = m[0].cited_authors.as_ref().unwrap();
        assert_eq!(authors.len(), 2);
        assert_eq!(authors[0].given_initial(), Some('g'));
        assert_eq!(authors[1].family(), "wilde");
    }

    #[test]
    fn missing_id_is_malformed() {
        assert_eq!(parse_markers("x <ref cited_year=2000/>"), Err("malformed_ref"));
        assert_eq!(parse_markers("<ref id=a cited_year=soon/>"), Err("invalid_ref_year"));
    }
}
