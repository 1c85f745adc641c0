//! TF-IDF event retrieval, pluggable candidate scoring, and caption filtering.

use std::collections::{HashMap, HashSet};

use super::record::{Commonsense, KnowledgeEvent};
use crate::qa::extract::lemmatize_verb;
use crate::text::{stem, tokenize};
use crate::vocab::CommonsenseType;

/// Relevance of a candidate text to a query text. Higher is more relevant.
pub trait Scorer {
    fn score(&self, query: &str, candidate: &str) -> f64;
}

impl<F: Fn(&str, &str) -> f64> Scorer for F {
    fn score(&self, query: &str, candidate: &str) -> f64 {
        self(query, candidate)
    }
}

fn token_set(text: &str) -> HashSet<String> {
    tokenize(text).into_iter().collect()
}

/// Number of distinct tokens shared by query and candidate.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenOverlap;

impl Scorer for TokenOverlap {
    fn score(&self, query: &str, candidate: &str) -> f64 {
        token_set(query).intersection(&token_set(candidate)).count() as f64
    }
}

/// Jaccard similarity of distinct token sets; 0 when both are empty.
#[derive(Debug, Clone, Copy, Default)]
pub struct Jaccard;

impl Scorer for Jaccard {
    fn score(&self, query: &str, candidate: &str) -> f64 {
        let a = token_set(query);
        let b = token_set(candidate);
        let union = a.union(&b).count();
        if union == 0 {
            0.0
        } else {
            a.intersection(&b).count() as f64 / union as f64
        }
    }
}

fn stemmed_counts(text: &str) -> HashMap<String, f64> {
    let mut m = HashMap::new();
    for t in tokenize(text) {
        *m.entry(stem(&t)).or_insert(0.0) += 1.0;
    }
    m
}

/// Unit-normalised TF-IDF vectors over stemmed unigrams of a fixed document set.
#[derive(Debug, Clone)]
pub struct TfIdfIndex {
    idf: HashMap<String, f64>,
    docs: Vec<HashMap<String, f64>>,
}

impl TfIdfIndex {
    pub fn new<S: AsRef<str>>(docs: &[S]) -> Self {
        let counts: Vec<_> = docs.iter().map(|d| stemmed_counts(d.as_ref())).collect();
        let mut df: HashMap<String, usize> = HashMap::new();
        for c in &counts {
            for t in c.keys() {
                *df.entry(t.clone()).or_default() += 1;
            }
        }
        let n = docs.len() as f64;
        // Smoothed so terms present in every document keep a nonzero weight.
        let idf: HashMap<String, f64> = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .collect();
        let docs = counts.into_iter().map(|c| Self::weigh(&idf, c)).collect();
        Self { idf, docs }
    }

    fn weigh(idf: &HashMap<String, f64>, counts: HashMap<String, f64>) -> HashMap<String, f64> {
        let mut v: HashMap<String, f64> = counts
            .into_iter()
            .filter_map(|(t, c)| idf.get(&t).map(|w| (t, c * w)))
            .collect();
        let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.values_mut().for_each(|x| *x /= norm);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Cosine similarity of `query` against every document.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let q = Self::weigh(&self.idf, stemmed_counts(query));
        self.docs
            .iter()
            .map(|d| q.iter().map(|(t, w)| w * d.get(t).copied().unwrap_or(0.0)).sum())
            .collect()
    }
}

/// Indices of the `k` table events most similar to `caption`, best first;
/// ties go to the lexicographically smaller event text.
pub fn retrieve_indices(caption: &str, table: &[KnowledgeEvent], index: &TfIdfIndex, k: usize) -> Vec<usize> {
    let scores = index.scores(caption);
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| table[a].event.cmp(&table[b].event))
    });
    order.truncate(k);
    order
}

pub fn retrieve_events<'a>(caption: &str, table: &'a [KnowledgeEvent], k: usize) -> Vec<&'a KnowledgeEvent> {
    let texts: Vec<&str> = table.iter().map(|e| e.event.as_str()).collect();
    let index = TfIdfIndex::new(&texts);
    retrieve_indices(caption, table, &index, k).into_iter().map(|i| &table[i]).collect()
}

/// Keeps the top three candidates per type by `scorer`, stable on ties.
pub fn rank_candidates(caption: &str, candidates: &Commonsense, scorer: &dyn Scorer) -> Commonsense {
    let mut out = Commonsense::default();
    for ty in CommonsenseType::ALL {
        let mut scored: Vec<(f64, &String)> = candidates
            .get(ty)
            .iter()
            .map(|c| (scorer.score(caption, c), c))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        *out.get_mut(ty) = scored.into_iter().take(3).map(|(_, c)| c.clone()).collect();
    }
    out
}

/// Retrieves the three nearest events, pools their annotations and keeps
/// the best three per type, giving up to nine annotations.
pub fn annotate_caption(caption: &str, table: &[KnowledgeEvent], index: &TfIdfIndex, scorer: &dyn Scorer) -> Commonsense {
    let mut pool = Commonsense::default();
    for i in retrieve_indices(caption, table, index, 3) {
        for ty in CommonsenseType::ALL {
            for c in table[i].get(ty) {
                if !pool.get(ty).contains(c) {
                    pool.get_mut(ty).push(c.clone());
                }
            }
        }
    }
    rank_candidates(caption, &pool, scorer)
}

/// Accepts captions that mention an activity verb from a configurable list.
#[derive(Debug, Clone)]
pub struct ActivityFilter {
    verbs: HashSet<String>,
}

impl Default for ActivityFilter {
    fn default() -> Self {
        Self {
            verbs: crate::qa::extract::VERB_LEXICON.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ActivityFilter {
    pub fn with_verbs<S: Into<String>>(verbs: impl IntoIterator<Item = S>) -> Self {
        Self {
            verbs: verbs.into_iter().map(Into::into).collect(),
        }
    }

    pub fn accepts(&self, caption: &str) -> bool {
        tokenize(caption).iter().any(|t| {
            self.verbs.contains(t) || lemmatize_verb(t).is_some_and(|l| self.verbs.contains(l))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(text: &str) -> KnowledgeEvent {
        KnowledgeEvent {
            event: text.into(),
            intentions: vec![],
            effects: vec![],
            attributes: vec![],
        }
    }

    #[test]
    fn wrestling_event_first() {
        let table = [event("X bakes a cake"), event("X wrestles with Y")];
        let got = retrieve_events("two guys are wrestling", &table, 1);
        assert_eq!(got[0].event, "X wrestles with Y");
    }

    #[test]
    fn self_similarity_and_oversized_k() {
        let table = [event("b runs"), event("a sings a song"), event("a dances")];
        let got = retrieve_events("a dances", &table, 10);
        assert_eq!(got.len(), 3);
        assert_eq!(got[0].event, "a dances");
        let ties = retrieve_events("zzz", &table, 10);
        let names: Vec<_> = ties.iter().map(|e| e.event.as_str()).collect();
        assert_eq!(names, ["a dances", "a sings a song", "b runs"]);
    }

    #[test]
    fn ranking_is_stable_and_capped() {
        let mut c = Commonsense::default();
        c.intentions = vec!["x".into(), "y".into(), "z".into(), "w".into()];
        c.effects = vec!["p".into(), "q".into()];
        let r = rank_candidates("cap", &c, &|_: &str, _: &str| 1.0);
        assert_eq!(r.intentions, ["x", "y", "z"]);
        assert_eq!(r.effects, ["p", "q"]);
        assert!(r.attributes.is_empty());

        c.intentions = vec!["nothing here".into(), "a man sings loudly".into()];
        let r = rank_candidates("a man sings", &c, &TokenOverlap);
        assert_eq!(r.intentions[0], "a man sings loudly");
    }

    #[test]
    fn activity_filter() {
        let f = ActivityFilter::default();
        assert!(f.accepts("a woman is cooking pasta"));
        assert!(!f.accepts("a scenic view of mountains"));
        assert!(ActivityFilter::with_verbs(["view"]).accepts("a scenic view"));
    }
}
