//! Earnings-call text processing: credit-window extraction, token
//! normalization and n-gram document-term matrices.

mod dtm;
mod normalize;
mod sentences;
mod wordlists;

pub use dtm::{count_ngrams, Document, DocumentTermMatrix, NgramCounts, NGRAM_JOINER};
pub use normalize::{classify_number, normalize_tokens, stem, NEG_SUFFIX};
pub use sentences::{detect_credit_sentences, extract_credit_window, split_sentences};
pub use wordlists::WordLists;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One earnings call. Presentation and Q&A are expected to be concatenated
/// into `text` already.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub call_id: String,
    pub entity_id: String,
    pub timestamp: String,
    pub sector: String,
    pub text: String,
}

/// Normalized tokens of the retained credit-window sentences, with
/// multi-word credit phrases merged into single `_`-joined tokens.
pub fn credit_window_tokens(text: &str, lists: &WordLists, radius: usize) -> Vec<Vec<String>> {
    let sentences = split_sentences(text);
    let tokens: Vec<Vec<String>> = sentences.iter().map(|s| normalize_tokens(s)).collect();
    let flags: Vec<bool> = tokens.iter().map(|t| lists.is_credit_sentence(t)).collect();
    extract_credit_window(&flags, radius)
        .into_iter()
        .map(|i| lists.merge_credit_phrases(&tokens[i]))
        .collect()
}

/// Per-call n-gram counts over the credit window, computed in parallel.
/// Output order follows the input order.
pub fn process_transcripts(
    transcripts: &[Transcript],
    lists: &WordLists,
    radius: usize,
    ngram_max: usize,
) -> Vec<Document> {
    transcripts
        .par_iter()
        .map(|t| Document {
            id: t.call_id.clone(),
            sector: t.sector.clone(),
            counts: count_ngrams(&credit_window_tokens(&t.text, lists, radius), ngram_max),
        })
        .collect()
}
