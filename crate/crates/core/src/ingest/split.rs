use std::ops::Range;

/// Words ending in a period that never end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "al.", "e.g.", "i.e.", "fig.", "figs.", "eq.", "eqs.", "et.", "vs.", "cf.", "dr.", "no.",
    "ref.", "refs.",
];

/// Splits `text` into sentences and returns their byte ranges.
///
/// A boundary follows `.`, `!` or `?` when the terminator is followed by
/// whitespace and then an uppercase letter or a digit. Periods closing a
/// listed abbreviation or a single-letter initial do not split. No boundary
/// is placed inside a span of `ref_spans` (sorted, non-overlapping). Ranges
/// are in order and the text between them is whitespace only.
pub fn split_sentences(text: &str, ref_spans: &[Range<usize>]) -> Vec<Range<usize>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let inside = |pos: usize| {
        let i = ref_spans.partition_point(|s| s.end <= pos);
        i < ref_spans.len() && ref_spans[i].start <= pos
    };
    let solid = |k: usize| {
        let (pos, c) = chars[k];
        !c.is_whitespace() || inside(pos)
    };

    let Some(first) = (0..chars.len()).find(|&k| solid(k)) else {
        return Vec::new();
    };
    let last = (0..chars.len()).rev().find(|&k| solid(k)).expect("non-empty");
    let end_of = |k: usize| chars[k].0 + chars[k].1.len_utf8();

    let mut out = Vec::new();
    let mut start = first;
    let mut k = first;
    while k < last {
        let (pos, c) = chars[k];
        if !matches!(c, '.' | '!' | '?') || inside(pos) {
            k += 1;
            continue;
        }
        let mut m = k + 1;
        while m < chars.len() && chars[m].1.is_whitespace() && !inside(chars[m].0) {
            m += 1;
        }
        let next_ok = m > k + 1
            && m < chars.len()
            && (chars[m].1.is_uppercase() || chars[m].1.is_ascii_digit());
        if next_ok && !(c == '.' && ends_abbreviation(&chars[..=k])) {
            out.push(chars[start].0..end_of(k));
            start = m;
            k = m;
        } else {
            k += 1;
        }
    }
    out.push(chars[start].0..end_of(last));
    out
}

/// True when the word ending at the final period is an abbreviation or an
/// initial.
fn ends_abbreviation(chars: &[(usize, char)]) -> bool {
    let mut b = chars.len() - 1;
    while b > 0 && (chars[b - 1].1.is_alphabetic() || chars[b - 1].1 == '.') {
        b -= 1;
    }
    let word: String = chars[b..].iter().flat_map(|(_, c)| c.to_lowercase()).collect();
    let mut it = word.chars();
    let initial = matches!((it.next(), it.next(), it.next()), (Some(a), Some('.'), None) if a.is_alphabetic());
    initial || ABBREVIATIONS.contains(&word.as_str())
}
