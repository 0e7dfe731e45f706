use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Author name reduced to what self-citation matching compares: a folded
/// family name and an optional first initial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AuthorName {
    family: String,
    given_initial: Option<char>,
}

fn fold(s: &str) -> String {
    s.nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect::<String>()
        .trim()
        .to_string()
}

impl AuthorName {
    /// Returns `None` when the family name is empty after folding.
    pub fn new(family: &str, given: Option<&str>) -> Option<Self> {
        let family = fold(family);
        if family.is_empty() {
            return None;
        }
        let given_initial = given.and_then(|g| fold(g).chars().find(|c| c.is_alphanumeric()));
        Some(AuthorName {
            family,
            given_initial,
        })
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn given_initial(&self) -> Option<char> {
        self.given_initial
    }

    pub fn same_person(&self, other: &AuthorName) -> bool {
        if self.family != other.family {
            return false;
        }
        match (self.given_initial, other.given_initial) {
            (Some(a), Some(b)) => a == b,
            _ => true,
        }
    }
}
