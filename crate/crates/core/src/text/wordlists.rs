use std::path::Path;

use super::normalize::{normalize_tokens, split_neg, stem, NEG_SUFFIX};
use crate::error::{Error, Result};

const CREDIT_WORDS: &[&str] = &[
    "credit", "credit line", "bank line", "bond", "debt", "leverage", "rate", "snp", "moodys",
    "coverage ratio", "leverage ratio", "fitch", "share repurchase", "capital structure",
    "invest grade", "high yield", "liquidity", "line credit", "shareholder", "leaseback",
    "creditworthiness", "repayment", "revolver", "rating agency", "covenants", "cash availability",
    "cash balance", "fully drawn", "balance sheet", "interest expense", "credit rating",
    "financial profile", "financial flexibility", "returning cash", "dividend", "delever",
    "interest coverage", "financing cost", "refinance", "refinancing", "loan", "unsecured",
    "secured", "convertible bond", "interest payment", "basis point", "cash flow",
];

const EXCLUDED_PHRASES: &[&str] = &[
    "exchange rate",
    "bond rate",
    "credit card",
    "creditworthy customer",
    "liquid storage",
    "shareholder meeting",
];

/// Credit words and excluded phrases. Matching is done on stemmed words so
/// that inflected forms ("rates", "leveraged") hit.
#[derive(Debug, Clone, PartialEq)]
pub struct WordLists {
    credit_words: Vec<String>,
    excluded_phrases: Vec<String>,
    credit_stems: Vec<Vec<String>>,
    excluded_stems: Vec<Vec<String>>,
}

impl Default for WordLists {
    fn default() -> Self {
        WordLists::new(
            CREDIT_WORDS.iter().map(|s| s.to_string()).collect(),
            EXCLUDED_PHRASES.iter().map(|s| s.to_string()).collect(),
        )
        .expect("built-in word lists are valid")
    }
}

fn stem_phrase(phrase: &str) -> Vec<String> {
    phrase.split_whitespace().map(stem).collect()
}

fn clean(list: Vec<String>, what: &str) -> Result<Vec<String>> {
    let list: Vec<String> = list
        .into_iter()
        .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .filter(|p| !p.is_empty())
        .collect();
    if list.is_empty() {
        return Err(Error::validation(format!("{what} list is empty")));
    }
    Ok(list)
}

impl WordLists {
    pub fn new(credit_words: Vec<String>, excluded_phrases: Vec<String>) -> Result<Self> {
        let credit_words = clean(credit_words, "credit word")?;
        let excluded_phrases = clean(excluded_phrases, "excluded phrase")?;
        let credit_stems = credit_words.iter().map(|p| stem_phrase(p)).collect();
        let excluded_stems = excluded_phrases.iter().map(|p| stem_phrase(p)).collect();
        Ok(WordLists { credit_words, excluded_phrases, credit_stems, excluded_stems })
    }

    /// One phrase per line; blank lines and `#` comments are skipped.
    pub fn parse_list(text: &str) -> Vec<String> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    }

    /// Loads either list from a file, falling back to the built-in defaults.
    pub fn load(credit_path: Option<&Path>, excluded_path: Option<&Path>) -> Result<Self> {
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map(|t| Self::parse_list(&t))
                .map_err(|e| Error::Io { path: p.to_path_buf(), source: e })
        };
        let defaults = WordLists::default();
        let credit = match credit_path {
            Some(p) => read(p)?,
            None => defaults.credit_words.clone(),
        };
        let excluded = match excluded_path {
            Some(p) => read(p)?,
            None => defaults.excluded_phrases.clone(),
        };
        WordLists::new(credit, excluded)
    }

    pub fn credit_words(&self) -> &[String] {
        &self.credit_words
    }

    pub fn excluded_phrases(&self) -> &[String] {
        &self.excluded_phrases
    }

    /// True when the sentence has a credit-word occurrence that does not lie
    /// inside an excluded-phrase occurrence. `tokens` is the output of
    /// [`normalize_tokens`].
    pub fn is_credit_sentence(&self, tokens: &[String]) -> bool {
        let base: Vec<&str> = tokens.iter().map(|t| split_neg(t).0).collect();
        let excluded: Vec<(usize, usize)> = self
            .excluded_stems
            .iter()
            .flat_map(|p| occurrences(&base, p).map(move |s| (s, s + p.len())))
            .collect();
        self.credit_stems.iter().any(|p| {
            occurrences(&base, p).any(|s| {
                let e = s + p.len();
                !excluded.iter().any(|&(xs, xe)| xs <= s && e <= xe)
            })
        })
    }

    /// Replaces multi-word credit phrases with one `_`-joined token, taking
    /// the longest match at each position. The merged token carries the
    /// negation marker of its first word.
    pub fn merge_credit_phrases(&self, tokens: &[String]) -> Vec<String> {
        let base: Vec<&str> = tokens.iter().map(|t| split_neg(t).0).collect();
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            let best = self
                .credit_stems
                .iter()
                .filter(|p| p.len() > 1 && matches_at(&base, p, i))
                .max_by_key(|p| p.len());
            match best {
                Some(p) => {
                    let mut merged = p.join("_");
                    if split_neg(&tokens[i]).1 {
                        merged.push_str(NEG_SUFFIX);
                    }
                    out.push(merged);
                    i += p.len();
                }
                None => {
                    out.push(tokens[i].clone());
                    i += 1;
                }
            }
        }
        out
    }

    /// Convenience wrapper on raw sentence text.
    pub fn sentence_has_credit_word(&self, sentence: &str) -> bool {
        self.is_credit_sentence(&normalize_tokens(sentence))
    }
}

fn matches_at(base: &[&str], phrase: &[String], at: usize) -> bool {
    at + phrase.len() <= base.len() && phrase.iter().zip(&base[at..]).all(|(p, b)| p == b)
}

fn occurrences<'a>(base: &'a [&str], phrase: &'a [String]) -> impl Iterator<Item = usize> + 'a {
    (0..base.len()).filter(move |&i| matches_at(base, phrase, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excluded_phrase_masks_credit_word() {
        let l = WordLists::default();
        assert!(!l.sentence_has_credit_word("the exchange rate moved"));
        assert!(l.sentence_has_credit_word("we drew on our credit line"));
        assert!(l.sentence_has_credit_word("rates and exchange rate"));
        assert!(!l.sentence_has_credit_word("our shareholder meeting is in May"));
        assert!(l.sentence_has_credit_word("the company is highly leveraged"));
    }

    #[test]
    fn lists_are_validated_and_lowercased() {
        assert!(WordLists::new(vec![], vec!["x".into()]).is_err());
        let l = WordLists::new(vec!["  Credit   Line ".into()], vec!["Credit Card".into()]).unwrap();
        assert_eq!(l.credit_words(), &["credit line".to_string()]);
        assert_eq!(l.excluded_phrases(), &["credit card".to_string()]);
    }

    #[test]
    fn parse_list_skips_comments() {
        assert_eq!(WordLists::parse_list("# header\ndebt\n\n loan \n"), vec!["debt", "loan"]);
    }

    #[test]
    fn merge_keeps_negation_marker() {
        let l = WordLists::default();
        let toks = normalize_tokens("no share repurchases this year.");
        assert_eq!(
            l.merge_credit_phrases(&toks),
            vec!["no", "share_repurchas_NEG", "this_NEG", "year_NEG"]
        );
    }
}
