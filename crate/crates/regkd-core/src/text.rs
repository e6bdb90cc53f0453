//! Locale-aware text normalization shared by segmentation, grounding,
//! deduplication, and evaluation.
//!
//! All comparisons in this crate go through the same tokenizer so that
//! scores stay stable regardless of how a teacher model formats its output.
//! Folding handles the Turkish dotted/dotless `i` pair explicitly because
//! the default Unicode lowercase mapping breaks agglutinative-language
//! token equality (`İ` would otherwise lowercase to `i` + combining dot).

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

/// Lowercases one character with Turkish case-folding rules.
pub fn fold_char(c: char) -> impl Iterator<Item = char> {
    let mapped = match c {
        'I' => 'ı',
        'İ' => 'i',
        _ => c,
    };
    mapped.to_lowercase()
}

/// Lowercases a string with Turkish case-folding rules.
pub fn fold_str(s: &str) -> String {
    s.chars().flat_map(fold_char).collect()
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits text into normalized tokens: case-folded alphanumeric runs with
/// punctuation and whitespace as boundaries.
///
/// Decimal separators between digits are kept as part of the number token
/// and normalized to `.`, so `2,25` and `2.25` tokenize identically.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_token_char(c) {
            current.extend(fold_char(c));
        } else if (c == '.' || c == ',')
            && current.chars().last().is_some_and(|p| p.is_ascii_digit())
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit())
        {
            current.push('.');
        } else if !current.is_empty() {
            tokens.push(core::mem::take(&mut current));
        }
        i += 1;
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Tokens joined by single spaces; the canonical comparison form of a string.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// Splits text into trimmed, non-empty sentences.
///
/// Sentence boundaries are `.`, `!`, `?`, `;`, and line breaks. A period
/// between two digits is part of a number, not a boundary.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut start = 0; // byte offset of the current sentence
    let mut byte_pos = 0;
    for (i, &c) in chars.iter().enumerate() {
        let c_len = c.len_utf8();
        let is_boundary = match c {
            '!' | '?' | ';' | '\n' => true,
            '.' => {
                let prev_digit = i > 0 && chars[i - 1].is_ascii_digit();
                let next_digit = chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
                !(prev_digit && next_digit)
            }
            _ => false,
        };
        if is_boundary {
            let piece = text[start..byte_pos].trim();
            if !piece.is_empty() {
                out.push(piece);
            }
            start = byte_pos + c_len;
        }
        byte_pos += c_len;
    }
    let piece = text[start..].trim();
    if !piece.is_empty() {
        out.push(piece);
    }
    out
}

/// Returns the first sentence of `text`, or the whole trimmed text when no
/// sentence boundary exists.
pub fn first_sentence(text: &str) -> &str {
    sentences(text).first().copied().unwrap_or("")
}

/// Consecutive-token shingles of size `k` over the normalized tokens.
///
/// Texts shorter than `k` tokens contribute a single shingle holding all of
/// their tokens, so short strings still compare by full content.
pub fn word_shingles(text: &str, k: usize) -> BTreeSet<String> {
    assert!(k >= 1, "shingle size must be at least 1");
    let tokens = tokenize(text);
    let mut set = BTreeSet::new();
    if tokens.is_empty() {
        return set;
    }
    if tokens.len() < k {
        set.insert(tokens.join(" "));
        return set;
    }
    for window in tokens.windows(k) {
        set.insert(window.join(" "));
    }
    set
}

/// Jaccard similarity between two shingle sets.
///
/// Two empty sets are identical (1.0); one empty set shares nothing (0.0).
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.len() + b.len() - intersection;
    intersection as f64 / union as f64
}

/// Default stop-word list (English and Turkish function words).
///
/// Negation tokens (`not`, `no`, `cannot`, `değil`, `hayır`, ...) are kept
/// as content tokens on purpose: dropping them would let an answer and its
/// opposite ground against the same evidence.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    // English
    "a", "an", "the", "and", "or", "but", "if", "then", "else", "when", "while", "of", "at", "by",
    "for", "with", "about", "between", "into", "through", "during", "before", "after", "above",
    "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under", "again", "is",
    "are", "was", "were", "be", "been", "being", "have", "has", "had", "do", "does", "did", "will",
    "would", "shall", "should", "may", "might", "must", "can", "could", "this", "that", "these",
    "those", "i", "you", "he", "she", "it", "we", "they", "them", "his", "her", "its", "our",
    "your", "their", "what", "which", "who", "whom", "as", "also", "such", "than", "too", "very",
    "s", "t", "just",
    // Turkish
    "ve", "veya", "ile", "bir", "bu", "şu", "o", "için", "gibi", "kadar", "da", "de", "ki", "mi",
    "mı", "mu", "mü", "ise", "ancak", "ama", "fakat", "her", "çok", "daha", "en", "olarak",
    "olan", "üzere", "göre", "sonra", "önce", "tarafından", "içinde", "arasında",
];

/// Builds the default stop-word set.
pub fn default_stopwords() -> BTreeSet<String> {
    DEFAULT_STOPWORDS.iter().map(|w| (*w).to_owned()).collect()
}

/// Normalized content tokens: tokenized text minus stop-words. Numbers are
/// always kept.
pub fn content_tokens(text: &str, stopwords: &BTreeSet<String>) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.chars().any(|c| c.is_ascii_digit()) || !stopwords.contains(t.as_str()))
        .collect()
}

/// Small numeral-word table so `7` matches `seven` or `yedi` in evaluation.
pub const NUMERAL_WORDS: &[(&str, &str)] = &[
    ("zero", "0"),
    ("one", "1"),
    ("two", "2"),
    ("three", "3"),
    ("four", "4"),
    ("five", "5"),
    ("six", "6"),
    ("seven", "7"),
    ("eight", "8"),
    ("nine", "9"),
    ("ten", "10"),
    ("eleven", "11"),
    ("twelve", "12"),
    ("sıfır", "0"),
    ("iki", "2"),
    ("üç", "3"),
    ("dört", "4"),
    ("beş", "5"),
    ("altı", "6"),
    ("yedi", "7"),
    ("sekiz", "8"),
    ("dokuz", "9"),
];

/// Maps numeral words to digit strings, leaving other tokens untouched.
///
/// Turkish `bir` is deliberately absent: it doubles as the indefinite
/// article, so mapping it to `1` would corrupt ordinary prose.
pub fn map_numerals(tokens: &[String]) -> Vec<String> {
    let table: BTreeMap<&str, &str> = NUMERAL_WORDS.iter().copied().collect();
    tokens
        .iter()
        .map(|t| match table.get(t.as_str()) {
            Some(digit) => (*digit).to_owned(),
            None => t.clone(),
        })
        .collect()
}

/// Rounds half-away-from-zero to one decimal place. Used for reported
/// percentages; exact for the magnitudes that occur in reports.
pub fn round1(x: f64) -> f64 {
    let scaled = x * 10.0;
    let rounded = if scaled >= 0.0 {
        (scaled + 0.5) as i64
    } else {
        (scaled - 0.5) as i64
    };
    rounded as f64 / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn tokenize_folds_case_and_strips_punctuation() {
        assert_eq!(tokenize("Hello,  WORLD!"), vec!["hello", "world"]);
    }

    #[test]
    fn tokenize_handles_turkish_dotted_i() {
        // 'İ' folds to plain 'i', 'I' folds to dotless 'ı'.
        assert_eq!(tokenize("İTİRAZ"), vec!["itiraz"]);
        assert_eq!(tokenize("ITIRAZ"), vec!["ıtıraz"]);
        assert_eq!(normalize("İtiraz itiraz"), "itiraz itiraz");
    }

    #[test]
    fn tokenize_keeps_decimal_numbers_together() {
        assert_eq!(tokenize("GPA of 2.25 required"), vec!["gpa", "of", "2.25", "required"]);
        assert_eq!(tokenize("not 2,25 puan"), vec!["not", "2.25", "puan"]);
        // A period at a sentence boundary is not a decimal separator.
        assert_eq!(tokenize("7 days."), vec!["7", "days"]);
    }

    #[test]
    fn sentences_split_on_terminators_but_not_decimals() {
        let s = sentences("First rule. Second rule applies a 2.25 floor! Third?\nFourth line");
        assert_eq!(
            s,
            vec![
                "First rule",
                "Second rule applies a 2.25 floor",
                "Third",
                "Fourth line"
            ]
        );
    }

    #[test]
    fn first_sentence_of_empty_text_is_empty() {
        assert_eq!(first_sentence("   "), "");
        assert_eq!(first_sentence("No, it is not possible. More text."), "No, it is not possible");
    }

    #[test]
    fn shingles_of_short_text_fall_back_to_full_join() {
        let s = word_shingles("two words", 3);
        assert_eq!(s.len(), 1);
        assert!(s.contains("two words"));
    }

    #[test]
    fn jaccard_edge_cases() {
        let empty = BTreeSet::new();
        let one: BTreeSet<String> = [String::from("x")].into_iter().collect();
        assert_eq!(jaccard(&empty, &empty), 1.0);
        assert_eq!(jaccard(&empty, &one), 0.0);
        assert_eq!(jaccard(&one, &one), 1.0);
    }

    #[test]
    fn content_tokens_drop_stopwords_keep_numbers() {
        let sw = default_stopwords();
        assert_eq!(
            content_tokens("You must apply within 7 days", &sw),
            vec!["apply", "within", "7", "days"]
        );
        // Negations survive.
        assert_eq!(content_tokens("it is not possible", &sw), vec!["not", "possible"]);
    }

    #[test]
    fn numerals_map_both_languages() {
        let tokens = tokenize("seven days yedi gün bir defa");
        let mapped = map_numerals(&tokens);
        assert_eq!(mapped, vec!["7", "days", "7", "gün", "bir", "defa"]);
    }

    #[test]
    fn round1_matches_decimal_expectations() {
        assert_eq!(round1(96.66666), 96.7);
        assert_eq!(round1(90.0), 90.0);
        assert_eq!(round1(66.66666), 66.7);
        assert_eq!(format!("{:.1}", round1(2900.0 / 30.0)), "96.7".to_string());
    }
}
