//! Agreement and validity statistics over 1-5 human ratings.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 5;
/// Ratings strictly above this count as valid.
pub const VALID_ABOVE: u8 = 3;

/// Ratings grouped per sample.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RatingSet {
    samples: Vec<Vec<u8>>,
}

impl RatingSet {
    pub fn new(samples: Vec<Vec<u8>>) -> Result<Self> {
        for (j, s) in samples.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::Ratings(format!("sample {j} has no ratings")));
            }
            if let Some(r) = s.iter().find(|r| !(MIN_RATING..=MAX_RATING).contains(r)) {
                return Err(Error::Ratings(format!("sample {j}: rating {r} outside {MIN_RATING}..={MAX_RATING}")));
            }
        }
        Ok(Self { samples })
    }

    pub fn single(ratings: &[u8]) -> Result<Self> {
        Self::new(vec![ratings.to_vec()])
    }

    /// Groups `(sample_id, rating)` rows by sample id, sorted by id.
    pub fn from_rows<S: Into<String>>(rows: impl IntoIterator<Item = (S, u8)>) -> Result<Self> {
        let mut by: BTreeMap<String, Vec<u8>> = BTreeMap::new();
        for (id, r) in rows {
            by.entry(id.into()).or_default().push(r);
        }
        Self::new(by.into_values().collect())
    }

    pub fn samples(&self) -> &[Vec<u8>] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn non_empty(&self) -> Result<&[Vec<u8>]> {
        if self.samples.is_empty() {
            Err(Error::Ratings("no samples".into()))
        } else {
            Ok(&self.samples)
        }
    }
}

/// Most frequent rating; ties go to the smaller value.
pub fn mode(ratings: &[u8]) -> Option<u8> {
    let mut counts = [0usize; MAX_RATING as usize + 1];
    for &r in ratings {
        counts[r as usize] += 1;
    }
    let best = *counts.iter().max()?;
    if best == 0 {
        return None;
    }
    counts.iter().position(|&c| c == best).map(|i| i as u8)
}

/// Percentage of all individual ratings above 3.
pub fn validity_rate(set: &RatingSet) -> Result<f64> {
    let samples = set.non_empty()?;
    let total: usize = samples.iter().map(Vec::len).sum();
    let valid = samples.iter().flatten().filter(|&&r| r > VALID_ABOVE).count();
    Ok(100.0 * valid as f64 / total as f64)
}

fn agreement(set: &RatingSet, term: impl Fn(u8, u8) -> f64) -> Result<f64> {
    let samples = set.non_empty()?;
    let sum: f64 = samples
        .iter()
        .map(|s| {
            let m = mode(s).expect("validated non-empty");
            s.iter().map(|&r| term(r, m)).sum::<f64>() / s.len() as f64
        })
        .sum();
    Ok(100.0 * sum / samples.len() as f64)
}

/// Mean share of raters agreeing with their sample's mode, as a percentage.
pub fn iras(set: &RatingSet) -> Result<f64> {
    agreement(set, |r, m| if r == m { 1.0 } else { 0.0 })
}

/// Like [`iras`] with agreement weighted by `0.5^|r - mode|`.
pub fn smooth_iras(set: &RatingSet) -> Result<f64> {
    agreement(set, |r, m| 0.5f64.powi((r as i32 - m as i32).abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StdDevReport {
    pub per_sample: Vec<f64>,
    pub mean: f64,
    /// `mean` as a percentage of the 1-5 span.
    pub mean_percent: f64,
}

/// Population standard deviation per sample.
pub fn rating_stddev(set: &RatingSet) -> StdDevReport {
    let per_sample: Vec<f64> = set
        .samples
        .iter()
        .map(|s| {
            let n = s.len() as f64;
            let mu = s.iter().map(|&r| r as f64).sum::<f64>() / n;
            (s.iter().map(|&r| (r as f64 - mu).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    let mean = if per_sample.is_empty() {
        0.0
    } else {
        per_sample.iter().sum::<f64>() / per_sample.len() as f64
    };
    StdDevReport {
        mean_percent: 100.0 * mean / (MAX_RATING - MIN_RATING) as f64,
        per_sample,
        mean,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaterSummary {
    pub validity: f64,
    pub iras: f64,
    pub smooth_iras: f64,
    pub mean_std: f64,
    pub mean_std_percent: f64,
    pub samples: usize,
}

pub fn summarize(set: &RatingSet) -> Result<RaterSummary> {
    let sd = rating_stddev(set);
    Ok(RaterSummary {
        validity: validity_rate(set)?,
        iras: iras(set)?,
        smooth_iras: smooth_iras(set)?,
        mean_std: sd.mean,
        mean_std_percent: sd.mean_percent,
        samples: set.samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(iras(&RatingSet::single(&[5, 5, 5, 1, 5]).unwrap()).unwrap(), 80.0);
        let s = smooth_iras(&RatingSet::single(&[5, 5, 4]).unwrap()).unwrap();
        assert!((s - 250.0 / 3.0).abs() < 1e-12);
        assert_eq!(validity_rate(&RatingSet::single(&[4, 3, 5, 1]).unwrap()).unwrap(), 50.0);
        assert_eq!(rating_stddev(&RatingSet::single(&[1, 5]).unwrap()).per_sample, vec![2.0]);
        assert_eq!(rating_stddev(&RatingSet::single(&[3, 3, 3]).unwrap()).mean, 0.0);
        let two = RatingSet::new(vec![vec![5, 5, 5, 1, 5], vec![2, 2]]).unwrap();
        assert_eq!(iras(&two).unwrap(), 90.0);
    }

    #[test]
    fn mode_ties_go_low() {
        assert_eq!(mode(&[5, 1, 5, 1]), Some(1));
        assert_eq!(mode(&[4, 2, 3]), Some(2));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RatingSet::new(vec![vec![]]).is_err());
        assert!(RatingSet::single(&[0]).is_err());
        assert!(RatingSet::single(&[6]).is_err());
        assert!(iras(&RatingSet::default()).is_err());
        assert!(validity_rate(&RatingSet::default()).is_err());
    }
}
