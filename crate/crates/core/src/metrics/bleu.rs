use std::collections::HashMap;

use super::{ngram_counts, EvalPair};

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    pub score: f64,
    /// Modified precision per order, 1-based order at index `k - 1`.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
    /// Every candidate was empty; the score is 0.
    pub all_empty: bool,
}

/// Corpus BLEU up to order `n` (clamped to 1..=4). The effective reference
/// length sums, per pair, the reference length closest to the candidate,
/// preferring the shorter on ties. `smoothing` adds one to numerator and
/// denominator of orders 2 and up.
pub fn bleu(pairs: &[EvalPair], n: usize, smoothing: bool) -> BleuScore {
    let n = n.clamp(1, 4);
    let mut clipped = vec![0usize; n];
    let mut totals = vec![0usize; n];
    let mut c = 0usize;
    let mut r = 0usize;
    for p in pairs {
        let len = p.candidate.len();
        c += len;
        r += p
            .references
            .iter()
            .map(Vec::len)
            .min_by_key(|&rl| (rl.abs_diff(len), rl))
            .unwrap_or(0);
        for k in 1..=n {
            let cand = ngram_counts(&p.candidate, k);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for refr in &p.references {
                for (g, cnt) in ngram_counts(refr, k) {
                    let e = max_ref.entry(g).or_default();
                    *e = (*e).max(cnt);
                }
            }
            clipped[k - 1] += cand
                .iter()
                .map(|(g, &cnt)| cnt.min(max_ref.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
            totals[k - 1] += len.saturating_sub(k - 1);
        }
    }
    let precisions: Vec<f64> = (0..n)
        .map(|i| {
            if smoothing && i > 0 {
                (clipped[i] as f64 + 1.0) / (totals[i] as f64 + 1.0)
            } else if totals[i] == 0 {
                0.0
            } else {
                clipped[i] as f64 / totals[i] as f64
            }
        })
        .collect();
    if c == 0 {
        return BleuScore {
            score: 0.0,
            precisions,
            brevity_penalty: 0.0,
            candidate_len: 0,
            reference_len: r,
            all_empty: true,
        };
    }
    let brevity_penalty = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    let geo = if precisions.contains(&0.0) {
        0.0
    } else {
        (precisions.iter().map(|p| p.ln()).sum::<f64>() / n as f64).exp()
    };
    BleuScore {
        score: brevity_penalty * geo,
        precisions,
        brevity_penalty,
        candidate_len: c,
        reference_len: r,
        all_empty: false,
    }
}
