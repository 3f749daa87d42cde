use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};

pub const NEG_SUFFIX: &str = "_NEG";

const NEGATION_CUES: &[&str] = &["not", "no", "never"];

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Snowball (Porter2) English stem of a lowercase word, with apostrophes
/// removed afterwards.
pub fn stem(word: &str) -> String {
    stemmer().stem(word).chars().filter(|&c| c != '\'').collect()
}

/// Magnitude placeholder for a digit string. Only the integer part (before
/// any decimal point) counts.
pub fn classify_number(number: &str) -> &'static str {
    let digits = number.split('.').next().unwrap_or("").chars().filter(char::is_ascii_digit).count();
    if digits >= 10 {
        "_bln_"
    } else if digits >= 7 {
        "_mln_"
    } else {
        "_num_"
    }
}

pub(crate) fn split_neg(token: &str) -> (&str, bool) {
    match token.strip_suffix(NEG_SUFFIX) {
        Some(base) => (base, true),
        None => (token, false),
    }
}

#[derive(Debug, PartialEq)]
enum Raw {
    Word(String),
    Number(String),
    ScopeEnd,
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn scan(sentence: &str) -> Vec<Raw> {
    let chars: Vec<char> = sentence.to_lowercase().chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            // A period with digits on both sides is a decimal point.
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            out.push(Raw::Number(chars[start..i].iter().collect()));
        } else if c.is_alphabetic() {
            let mut word = String::new();
            while i < chars.len() {
                let d = chars[i];
                if d.is_alphabetic() {
                    word.push(d);
                } else if is_apostrophe(d)
                    && i + 1 < chars.len()
                    && chars[i + 1].is_alphabetic()
                    && !word.is_empty()
                {
                    word.push('\'');
                } else {
                    break;
                }
                i += 1;
            }
            out.push(Raw::Word(word));
        } else {
            if matches!(c, '.' | ',' | ';' | ':' | '?' | '!') {
                out.push(Raw::ScopeEnd);
            }
            i += 1;
        }
    }
    out
}

fn is_negation_cue(word: &str) -> bool {
    NEGATION_CUES.contains(&word) || word.ends_with("n't")
}

/// Lowercases, splits on non-alphanumerics, marks negation scope, stems,
/// and replaces digit runs by magnitude placeholders.
///
/// Words after a negation cue (`not`, `no`, `never`, `...n't`) up to the
/// next `. , ; : ? !` get the `_NEG` suffix; the cue itself does not.
/// Number placeholders are never negated.
pub fn normalize_tokens(sentence: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut in_scope = false;
    for raw in scan(sentence) {
        match raw {
            Raw::ScopeEnd => in_scope = false,
            Raw::Number(n) => out.push(classify_number(&n).to_string()),
            Raw::Word(w) => {
                if is_negation_cue(&w) && !in_scope {
                    in_scope = true;
                    out.push(stem(&w));
                } else if in_scope {
                    out.push(format!("{}{NEG_SUFFIX}", stem(&w)));
                } else {
                    out.push(stem(&w));
                }
            }
        }
    }
    out
}
