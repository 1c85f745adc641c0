//! Caption metrics: BLEU, ROUGE-L, METEOR-lite, CIDEr and perplexity.

mod bleu;
mod cider;
mod meteor;
mod perplexity;
mod report;
mod rouge;

use std::collections::HashMap;

pub use bleu::{bleu, BleuScore};
pub use cider::{cider, CiderScore};
pub use meteor::{meteor_lite, meteor_pair, Alignment};
pub use perplexity::{perplexity, PerplexityStream};
pub use report::{evaluate_keyed, MetricReport, StreamReport};
pub use rouge::{lcs_len, rouge_l, rouge_l_pair, ROUGE_BETA};

use crate::text::tokenize;

/// A candidate and its nonempty reference set, already tokenised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl EvalPair {
    pub fn new(candidate: Vec<String>, references: Vec<Vec<String>>) -> Self {
        Self { candidate, references }
    }

    /// Tokenises raw strings with the shared tokenizer.
    pub fn from_text<S: AsRef<str>>(candidate: &str, references: &[S]) -> Self {
        Self {
            candidate: tokenize(candidate),
            references: references.iter().map(|r| tokenize(r.as_ref())).collect(),
        }
    }
}

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_default() += 1;
        }
    }
    m
}
