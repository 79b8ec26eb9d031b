//! Text normalization shared by cache keys and rule-based matching.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Key used for fixture and cache lookups: NFKC, lowercase, single spaces.
pub fn normalize_key(text: &str) -> String {
    let folded: String = text.nfkc().flat_map(char::to_lowercase).collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Matching form: compatibility-decomposed, diacritics and punctuation
/// removed, lowercase, tokens joined by single spaces. `"Schöneberger Straße"`
/// becomes `"schoneberger strasse"`.
pub fn fold_for_match(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.nfkd().filter(|c| !is_combining_mark(*c)) {
        if c == 'ß' {
            out.push_str("ss");
        } else if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
        } else {
            out.push(' ');
        }
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whether `needle` occurs in `haystack` as a whole token sequence, after
/// folding both with [`fold_for_match`].
pub fn contains_term(haystack: &str, needle: &str) -> bool {
    let needle = fold_for_match(needle);
    if needle.is_empty() {
        return false;
    }
    let hay = format!(" {} ", fold_for_match(haystack));
    hay.contains(&format!(" {needle} "))
}
