use super::EvalPair;
use crate::text::stem;

/// Matched `(candidate index, reference index)` pairs sorted by candidate index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub pairs: Vec<(usize, usize)>,
}

impl Alignment {
    /// Exact matches first, then stem matches; each candidate token takes
    /// the leftmost unused reference position.
    pub fn new(candidate: &[String], reference: &[String]) -> Self {
        let mut used = vec![false; reference.len()];
        let mut matched = vec![None; candidate.len()];
        let stems_c: Vec<String> = candidate.iter().map(|t| stem(t)).collect();
        let stems_r: Vec<String> = reference.iter().map(|t| stem(t)).collect();
        for stage in 0..2 {
            for (i, tok) in candidate.iter().enumerate() {
                if matched[i].is_some() {
                    continue;
                }
                let hit = (0..reference.len()).find(|&j| {
                    !used[j]
                        && if stage == 0 {
                            reference[j] == *tok
                        } else {
                            stems_r[j] == stems_c[i]
                        }
                });
                if let Some(j) = hit {
                    used[j] = true;
                    matched[i] = Some(j);
                }
            }
        }
        Self {
            pairs: matched.iter().enumerate().filter_map(|(i, m)| m.map(|j| (i, j))).collect(),
        }
    }

    /// Runs of matches adjacent in both candidate and reference.
    pub fn chunks(&self) -> usize {
        if self.pairs.is_empty() {
            return 0;
        }
        1 + self
            .pairs
            .windows(2)
            .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
            .count()
    }
}

fn score_against(candidate: &[String], reference: &[String]) -> f64 {
    let a = Alignment::new(candidate, reference);
    let m = a.pairs.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / candidate.len() as f64;
    let r = m / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let frag = a.chunks() as f64 / m;
    fmean * (1.0 - 0.5 * frag.powi(3))
}

/// Best score over the references.
pub fn meteor_pair(p: &EvalPair) -> f64 {
    p.references
        .iter()
        .map(|r| score_against(&p.candidate, r))
        .fold(0.0, f64::max)
}

/// Mean of per-pair scores; 0 for no pairs.
pub fn meteor_lite(pairs: &[EvalPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(meteor_pair).sum::<f64>() / pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(c: &str, r: &str) -> f64 {
        meteor_pair(&EvalPair::from_text(c, &[r]))
    }

    #[test]
    fn examples() {
        assert!((m("a b c", "a b c") - (1.0 - 0.5 / 27.0)).abs() < 1e-15);
        assert!((m("a b c", "a b c") - 0.9815).abs() < 5e-5);
        assert_eq!(m("x y", "a b"), 0.0);
        assert!((m("b a", "a b") - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stems_match_after_exact() {
        let a = Alignment::new(
            &["wrestles".to_string(), "man".to_string()],
            &["man".to_string(), "wrestling".to_string()],
        );
        assert_eq!(a.pairs, vec![(0, 1), (1, 0)]);
        assert_eq!(a.chunks(), 2);
    }
}
