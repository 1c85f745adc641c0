use std::cmp::Ordering;

use crate::error::Result;

/// A decoded token sequence with per-token log-probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Emitted tokens, including a final end marker when one was produced.
    pub tokens: Vec<usize>,
    pub logprobs: Vec<f64>,
    pub total: f64,
}

impl Decoded {
    fn empty() -> Self {
        Self {
            tokens: Vec::new(),
            logprobs: Vec::new(),
            total: 0.0,
        }
    }

    /// Length-normalised log-probability; 0 for an empty sequence.
    pub fn normalized(&self) -> f64 {
        if self.tokens.is_empty() {
            0.0
        } else {
            self.total / self.tokens.len() as f64
        }
    }

    /// Tokens with any trailing end marker removed.
    pub fn words(&self, eos: usize) -> &[usize] {
        match self.tokens.last() {
            Some(&t) if t == eos => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }

    fn extend(&self, token: usize, lp: f64) -> Self {
        let mut next = self.clone();
        next.tokens.push(token);
        next.logprobs.push(lp);
        next.total += lp;
        next
    }
}

/// Ranking used everywhere: higher normalised score first, then the
/// lexicographically smaller token sequence.
pub fn rank(a: &Decoded, b: &Decoded) -> Ordering {
    b.normalized()
        .total_cmp(&a.normalized())
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search over a step function mapping a prefix to next-token
/// log-probabilities. Tokens scored `-inf` are never expanded. Finished
/// hypotheses are kept aside and compete with the survivors; hypotheses
/// still open at `max_len` count as finished.
pub fn beam_search<F>(mut step: F, k: usize, max_len: usize, eos: usize) -> Result<Decoded>
where
    F: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    let k = k.max(1);
    let mut beams = vec![Decoded::empty()];
    let mut finished: Vec<Decoded> = Vec::new();
    for _ in 0..max_len {
        let mut candidates = Vec::new();
        for b in &beams {
            let lp = step(&b.tokens)?;
            for (tok, &l) in lp.iter().enumerate() {
                if l != f64::NEG_INFINITY {
                    candidates.push(b.extend(tok, l));
                }
            }
        }
        candidates.sort_by(rank);
        candidates.truncate(k);
        beams.clear();
        for c in candidates {
            if c.tokens.last() == Some(&eos) {
                finished.push(c);
            } else {
                beams.push(c);
            }
        }
        if beams.is_empty() {
            break;
        }
    }
    finished.extend(beams.into_iter().filter(|b| !b.tokens.is_empty()));
    Ok(finished.into_iter().min_by(rank).unwrap_or_else(Decoded::empty))
}

/// Extends a single hypothesis with its best-ranked next token each step.
/// Uses the same ranking as [`beam_search`], so a width-1 beam agrees exactly.
pub fn greedy<F>(mut step: F, max_len: usize, eos: usize) -> Result<Decoded>
where
    F: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    let mut out = Decoded::empty();
    for _ in 0..max_len {
        let lp = step(&out.tokens)?;
        let best = lp
            .iter()
            .enumerate()
            .filter(|(_, &l)| l != f64::NEG_INFINITY)
            .map(|(tok, &l)| out.extend(tok, l))
            .min_by(rank);
        let Some(next) = best else { break };
        out = next;
        if out.tokens.last() == Some(&eos) {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peaked(prefix: &[usize]) -> Result<Vec<f64>> {
        let mut v = vec![(0.01f64).ln(); 4];
        v[if prefix.len() < 3 { 1 + prefix.len() % 2 } else { 0 }] = (0.97f64).ln();
        Ok(v)
    }

    #[test]
    fn peaked_matches_argmax_chain() {
        let g = greedy(peaked, 6, 0).unwrap();
        assert_eq!(g.tokens, [1, 2, 1, 0]);
        for k in 1..5 {
            assert_eq!(beam_search(peaked, k, 6, 0).unwrap().tokens, g.tokens);
        }
    }

    #[test]
    fn ties_prefer_lower_ids() {
        let flat = |_: &[usize]| Ok(vec![f64::NEG_INFINITY, 0.5f64.ln(), 0.5f64.ln()]);
        let b = beam_search(flat, 3, 2, 0).unwrap();
        assert_eq!(b.tokens, [1, 1]);
        assert_eq!(greedy(flat, 2, 0).unwrap().tokens, [1, 1]);
    }

    #[test]
    fn words_strip_eos() {
        let d = Decoded {
            tokens: vec![4, 5, 2],
            logprobs: vec![-0.1; 3],
            total: -0.3,
        };
        assert_eq!(d.words(2), &[4, 5]);
        assert!((d.normalized() + 0.1).abs() < 1e-15);
    }
}
