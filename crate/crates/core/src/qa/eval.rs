use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::templates::qtype_group;

/// Indices of the `k` highest scores, ties broken by lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// `(|topk ∩ truth| / k, |topk ∩ truth| / |truth|)`, or `None` for an empty truth set.
pub fn topk_precision_recall(scores: &[f64], truth: &[usize], k: usize) -> Option<(f64, f64)> {
    let truth: HashSet<usize> = truth.iter().copied().collect();
    if truth.is_empty() || k == 0 {
        return None;
    }
    let hits = top_k(scores, k).iter().filter(|i| truth.contains(i)).count() as f64;
    Some((hits / k as f64, hits / truth.len() as f64))
}

pub const EVAL_KS: [usize; 3] = [1, 3, 5];

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

/// Mean top-k precision and recall per question group.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QaReport {
    /// group -> k -> scores.
    pub groups: BTreeMap<String, BTreeMap<usize, PrecisionRecall>>,
    pub evaluated: usize,
    /// Samples with an empty truth set.
    pub excluded: usize,
}

impl QaReport {
    /// `items` are `(qtype, scores, truth ids)`.
    pub fn compute<'a>(items: impl IntoIterator<Item = (usize, &'a [f64], &'a [usize])>) -> Self {
        let mut sums: BTreeMap<String, BTreeMap<usize, (f64, f64, usize)>> = BTreeMap::new();
        let mut report = Self::default();
        for (qtype, scores, truth) in items {
            if truth.is_empty() {
                report.excluded += 1;
                continue;
            }
            report.evaluated += 1;
            let group = qtype_group(qtype).as_str().to_string();
            for k in EVAL_KS {
                if let Some((p, r)) = topk_precision_recall(scores, truth, k.min(scores.len())) {
                    let e = sums.entry(group.clone()).or_default().entry(k).or_insert((0.0, 0.0, 0));
                    e.0 += p;
                    e.1 += r;
                    e.2 += 1;
                }
            }
        }
        report.groups = sums
            .into_iter()
            .map(|(g, ks)| {
                let ks = ks
                    .into_iter()
                    .map(|(k, (p, r, n))| {
                        (
                            k,
                            PrecisionRecall {
                                precision: p / n as f64,
                                recall: r / n as f64,
                            },
                        )
                    })
                    .collect();
                (g, ks)
            })
            .collect();
        report
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<10} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}\n", "group", "P@1", "R@1", "P@3", "R@3", "P@5", "R@5");
        for (g, ks) in &self.groups {
            s.push_str(&format!("{g:<10}"));
            for k in EVAL_KS {
                match ks.get(&k) {
                    Some(pr) => s.push_str(&format!(" {:>6.3} {:>6.3}", pr.precision, pr.recall)),
                    None => s.push_str(&format!(" {:>6} {:>6}", "-", "-")),
                }
            }
            s.push('\n');
        }
        s
    }
}
