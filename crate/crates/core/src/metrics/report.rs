use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{bleu, cider, meteor_lite, rouge_l, EvalPair};
use crate::corpus::KeyedText;

/// Scores for one stream (caption or a commonsense type).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamReport {
    pub pairs: usize,
    pub empty_candidates: usize,
    pub bleu: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meteor_lite: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cider: Option<f64>,
}

impl StreamReport {
    /// Full suite, or BLEU-1 alone when `bleu1_only`.
    pub fn compute(pairs: &[EvalPair], bleu1_only: bool) -> Self {
        let empty_candidates = pairs.iter().filter(|p| p.candidate.is_empty()).count();
        if bleu1_only {
            return Self {
                pairs: pairs.len(),
                empty_candidates,
                bleu: vec![bleu(pairs, 1, false).score],
                rouge_l: None,
                meteor_lite: None,
                cider: None,
            };
        }
        Self {
            pairs: pairs.len(),
            empty_candidates,
            bleu: (1..=4).map(|n| bleu(pairs, n, false).score).collect(),
            rouge_l: Some(rouge_l(pairs)),
            meteor_lite: Some(meteor_lite(pairs)),
            cider: Some(cider(pairs).score),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub streams: BTreeMap<String, StreamReport>,
    /// Predicted keys with no reference.
    pub missing_references: usize,
}

impl MetricReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<10} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}", "stream", "n", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "METEOR", "CIDEr").unwrap();
        let cell = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        for (name, r) in &self.streams {
            writeln!(
                s,
                "{:<10} {:>5} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
                name,
                r.pairs,
                cell(r.bleu.first().copied()),
                cell(r.bleu.get(1).copied()),
                cell(r.bleu.get(2).copied()),
                cell(r.bleu.get(3).copied()),
                cell(r.rouge_l),
                cell(r.meteor_lite),
                cell(r.cider)
            )
            .unwrap();
        }
        s
    }
}

/// Scores predictions against references keyed by `(video_id, type)`.
/// The first prediction line per key is the candidate; every reference line
/// for the key is a reference. Attributes are scored with BLEU-1 only.
pub fn evaluate_keyed(predictions: &[KeyedText], references: &[KeyedText]) -> MetricReport {
    let mut refs: BTreeMap<(&str, &str), Vec<&str>> = BTreeMap::new();
    for r in references {
        refs.entry((r.kind.as_str(), r.video_id.as_str())).or_default().push(&r.text);
    }
    let mut preds: BTreeMap<(&str, &str), &str> = BTreeMap::new();
    for p in predictions {
        preds.entry((p.kind.as_str(), p.video_id.as_str())).or_insert(&p.text);
    }
    let mut by_stream: BTreeMap<&str, Vec<EvalPair>> = BTreeMap::new();
    let mut missing_references = 0;
    for ((kind, vid), cand) in preds {
        match refs.get(&(kind, vid)) {
            Some(r) => by_stream.entry(kind).or_default().push(EvalPair::from_text(cand, r)),
            None => missing_references += 1,
        }
    }
    let streams = by_stream
        .into_iter()
        .map(|(k, pairs)| (k.to_string(), StreamReport::compute(&pairs, k == "attribute")))
        .collect();
    MetricReport {
        streams,
        missing_references,
    }
}
