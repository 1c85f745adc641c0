use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::warn;

use super::{ngram_counts, EvalPair};

#[derive(Debug, Clone, PartialEq)]
pub struct CiderScore {
    pub score: f64,
    pub per_pair: Vec<f64>,
    /// Fewer than two reference sets, so every idf is zero.
    pub degenerate_idf: bool,
}

type Vector<'a> = BTreeMap<&'a [String], f64>;

fn cosine(a: &Vector, b: &Vector) -> f64 {
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.iter().map(|(g, x)| x * b.get(g).copied().unwrap_or(0.0)).sum::<f64>() / (na * nb)
}

fn weigh<'a>(counts: HashMap<&'a [String], usize>, df: &BTreeMap<&[String], usize>, n_docs: f64) -> Vector<'a> {
    counts
        .into_iter()
        .map(|(g, c)| {
            let d = df.get(g).copied().unwrap_or(0).max(1) as f64;
            (g, c as f64 * (n_docs / d).ln())
        })
        .collect()
}

/// CIDEr over orders 1..=4 with idf from the reference sets of `pairs`:
/// document frequency counts reference sets containing an n-gram and
/// `idf = ln(N / max(df, 1))`. Per pair, the TF-IDF cosine is averaged over
/// references and orders, then scaled by 10.
pub fn cider(pairs: &[EvalPair]) -> CiderScore {
    let n_docs = pairs.len() as f64;
    let degenerate_idf = pairs.len() < 2;
    if degenerate_idf {
        warn!("CIDEr over fewer than two reference sets; all idf weights are zero");
    }
    let mut per_pair = vec![0.0; pairs.len()];
    for n in 1..=4 {
        let mut df: BTreeMap<&[String], usize> = BTreeMap::new();
        for p in pairs {
            let grams: BTreeSet<&[String]> = p
                .references
                .iter()
                .flat_map(|r| ngram_counts(r, n).into_keys())
                .collect();
            for g in grams {
                *df.entry(g).or_default() += 1;
            }
        }
        for (i, p) in pairs.iter().enumerate() {
            let cand = weigh(ngram_counts(&p.candidate, n), &df, n_docs);
            let sum: f64 = p
                .references
                .iter()
                .map(|r| cosine(&cand, &weigh(ngram_counts(r, n), &df, n_docs)))
                .sum();
            per_pair[i] += sum / p.references.len().max(1) as f64;
        }
    }
    per_pair.iter_mut().for_each(|s| *s = *s / 4.0 * 10.0);
    let score = if per_pair.is_empty() {
        0.0
    } else {
        per_pair.iter().sum::<f64>() / per_pair.len() as f64
    };
    CiderScore {
        score,
        per_pair,
        degenerate_idf,
    }
}
