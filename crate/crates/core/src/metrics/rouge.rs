use super::EvalPair;

pub const ROUGE_BETA: f64 = 1.2;

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best LCS F-measure over the references.
pub fn rouge_l_pair(p: &EvalPair) -> f64 {
    if p.candidate.is_empty() {
        return 0.0;
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    p.references
        .iter()
        .map(|r| {
            let l = lcs_len(&p.candidate, r) as f64;
            if l == 0.0 {
                return 0.0;
            }
            let prec = l / p.candidate.len() as f64;
            let rec = l / r.len() as f64;
            (1.0 + b2) * prec * rec / (rec + b2 * prec)
        })
        .fold(0.0, f64::max)
}

/// Mean of per-pair scores; 0 for no pairs.
pub fn rouge_l(pairs: &[EvalPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(rouge_l_pair).sum::<f64>() / pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let f = |c: &str, r: &str| rouge_l_pair(&EvalPair::from_text(c, &[r]));
        assert_eq!(f("a b c", "a b c"), 1.0);
        assert!((f("the cat sat", "the cat sat down") - 0.8356).abs() < 5e-5);
        assert_eq!(f("x y", "a b"), 0.0);
        assert_eq!(f("", "a b"), 0.0);
    }
}
