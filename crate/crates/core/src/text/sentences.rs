use super::normalize::normalize_tokens;
use super::wordlists::WordLists;

/// Splits on `.`, `?` or `!` followed by whitespace or end of text. A period
/// between digits ("1.5") is therefore never a break.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..chars.len() {
        let terminal = matches!(chars[i], '.' | '?' | '!');
        let boundary = i + 1 == chars.len() || chars[i + 1].is_whitespace();
        if terminal && boundary {
            push_trimmed(&mut out, &chars[start..=i]);
            start = i + 1;
        }
    }
    if start < chars.len() {
        push_trimmed(&mut out, &chars[start..]);
    }
    out
}

fn push_trimmed(out: &mut Vec<String>, chars: &[char]) {
    let s: String = chars.iter().collect();
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

pub fn detect_credit_sentences(sentences: &[String], lists: &WordLists) -> Vec<bool> {
    sentences.iter().map(|s| lists.is_credit_sentence(&normalize_tokens(s))).collect()
}

/// Indices within `radius` of any flagged sentence, ascending.
pub fn extract_credit_window(flags: &[bool], radius: usize) -> Vec<usize> {
    let n = flags.len();
    let mut keep = vec![false; n];
    for (i, _) in flags.iter().enumerate().filter(|(_, &f)| f) {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        keep[lo..=hi].iter_mut().for_each(|k| *k = true);
    }
    (0..n).filter(|&i| keep[i]).collect()
}
