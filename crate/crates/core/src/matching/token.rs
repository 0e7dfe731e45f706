use std::ops::Range;

/// A lowercase word, or a sentinel standing in for one inline reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Position among word tokens; `None` for ref sentinels.
    pub word_index: Option<usize>,
}

impl Token {
    pub fn is_ref_sentinel(&self) -> bool {
        self.word_index.is_none()
    }
}

/// Text of ref sentinel tokens.
pub const REF_SENTINEL: &str = "<ref>";

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

/// Splits text into lowercase word tokens.
///
/// A word is a maximal run of letters and digits; a hyphen or apostrophe
/// between two such characters stays inside the word. A period directly
/// before a possessive apostrophe is dropped (`al.'s` gives `al's`). Each
/// span of `ref_spans` (byte ranges, sorted) becomes one sentinel.
pub fn tokenize(text: &str, ref_spans: &[Range<usize>]) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut words = 0usize;
    let mut k = 0;

    let span_at = |k: usize| {
        let pos = chars[k].0;
        let i = ref_spans.partition_point(|s| s.end <= pos);
        ref_spans.get(i).filter(|s| s.start <= pos)
    };
    let at_ref = |k: usize| span_at(k).is_some();

    while k < chars.len() {
        if let Some(span) = span_at(k) {
            let end = span.end;
            out.push(Token {
                text: REF_SENTINEL.to_string(),
                word_index: None,
            });
            while k < chars.len() && chars[k].0 < end {
                k += 1;
            }
            continue;
        }
        if !chars[k].1.is_alphanumeric() {
            k += 1;
            continue;
        }
        let mut word = String::new();
        loop {
            word.extend(chars[k].1.to_lowercase());
            let next = k + 1;
            if next >= chars.len() || at_ref(next) {
                k = next;
                break;
            }
            let c = chars[next].1;
            if c.is_alphanumeric() {
                k = next;
                continue;
            }
            let joins = |j: usize| j < chars.len() && chars[j].1.is_alphanumeric();
            if (c == '-' || is_apostrophe(c)) && joins(next + 1) && !at_ref(next + 1) {
                word.push(if c == '-' { '-' } else { '\'' });
                k = next + 1;
                continue;
            }
            if c == '.'
                && next + 2 < chars.len()
                && is_apostrophe(chars[next + 1].1)
                && !at_ref(next + 1)
                && joins(next + 2)
                && !at_ref(next + 2)
            {
                word.push('\'');
                k = next + 2;
                continue;
            }
            k = next;
            break;
        }
        out.push(Token {
            text: word,
            word_index: Some(words),
        });
        words += 1;
    }
    out
}

/// Word tokens of a token sequence, sentinels removed.
pub fn words(tokens: &[Token]) -> Vec<&str> {
    tokens
        .iter()
        .filter(|t| !t.is_ref_sentinel())
        .map(|t| t.text.as_str())
        .collect()
}
