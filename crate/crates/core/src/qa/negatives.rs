use std::collections::HashSet;

use crate::corpus::{Jaccard, Scorer, V2CRecord};
use crate::text::tokenize;
use crate::vocab::CommonsenseType;

/// Share of distinct tokens two strings have in common, relative to the larger set.
pub fn token_overlap(a: &str, b: &str) -> f64 {
    let a: HashSet<String> = tokenize(a).into_iter().collect();
    let b: HashSet<String> = tokenize(b).into_iter().collect();
    let larger = a.len().max(b.len());
    if larger == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / larger as f64
}

/// Candidates sharing at least this overlap with a true answer are never distractors.
pub const EXCLUSION_OVERLAP: f64 = 0.8;

/// Distinct answer strings per commonsense type, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnswerPool {
    by_type: [Vec<String>; 3],
}

impl AnswerPool {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a V2CRecord>) -> Self {
        let mut pool = Self::default();
        for r in records {
            for (i, ty) in CommonsenseType::ALL.into_iter().enumerate() {
                for s in r.commonsense.get(ty) {
                    if !pool.by_type[i].contains(s) {
                        pool.by_type[i].push(s.clone());
                    }
                }
            }
        }
        pool
    }

    pub fn get(&self, ty: CommonsenseType) -> &[String] {
        &self.by_type[ty as usize]
    }
}

/// Result of [`mine_negatives`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mined {
    pub distractors: Vec<String>,
    /// Fewer than the requested number of distractors were available.
    pub exhausted: bool,
}

/// Picks the `k` candidates most similar to `context` that are not true
/// answers and do not overlap any true answer by 80% or more. Ties go to
/// the lexicographically smaller string.
pub fn mine_negatives<S: AsRef<str>>(
    context: &str,
    truths: &[S],
    candidates: &[String],
    scorer: &dyn Scorer,
    k: usize,
) -> Mined {
    let mut eligible: Vec<(f64, &String)> = candidates
        .iter()
        .filter(|c| {
            truths
                .iter()
                .all(|t| c.as_str() != t.as_ref() && token_overlap(c, t.as_ref()) < EXCLUSION_OVERLAP)
        })
        .map(|c| (scorer.score(context, c), c))
        .collect();
    eligible.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    eligible.dedup_by(|a, b| a.1 == b.1);
    let distractors: Vec<String> = eligible.into_iter().take(k).map(|(_, c)| c.clone()).collect();
    Mined {
        exhausted: distractors.len() < k,
        distractors,
    }
}

/// Type-aware distractor source used by question generation.
pub struct Miner {
    pub pool: AnswerPool,
    pub scorer: Box<dyn Scorer>,
    pub k: usize,
}

impl std::fmt::Debug for Miner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Miner").field("pool", &self.pool).field("k", &self.k).finish()
    }
}

impl Miner {
    /// Jaccard scoring with three distractors per question.
    pub fn new(pool: AnswerPool) -> Self {
        Self {
            pool,
            scorer: Box::new(Jaccard),
            k: 3,
        }
    }

    pub fn mine<S: AsRef<str>>(&self, ty: CommonsenseType, context: &str, truths: &[S]) -> Mined {
        mine_negatives(context, truths, self.pool.get(ty), self.scorer.as_ref(), self.k)
    }
}
