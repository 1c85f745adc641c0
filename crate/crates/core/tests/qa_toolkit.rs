mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use v2c_core::corpus::SyntheticConfig;
use v2c_core::qa::*;
use v2c_core::vocab::CommonsenseType;

fn synthetic() -> Fixture {
    fixture(&SyntheticConfig { n_videos: 12, n_frames: 4, dim: 8, ..Default::default() }, 12)
}

#[test]
fn complete_records_give_seven_questions_per_group() {
    let f = synthetic();
    let miner = Miner::new(AnswerPool::from_records(&f.synthetic.records));
    for r in &f.synthetic.records {
        let g = generate_questions(r, &miner);
        assert_eq!(g.samples.len(), N_QTYPES, "{}", r.video_id);
        for ty in CommonsenseType::ALL {
            assert_eq!(g.samples.iter().filter(|s| qtype_group(s.qtype) == ty).count(), PER_GROUP);
        }
        for s in &g.samples {
            assert!(!s.answers.is_empty());
            for n in &s.negatives {
                assert!(!s.answers.contains(n));
            }
        }
    }
}

#[test]
fn negated_intention_answers_no() {
    let f = synthetic();
    let samples = qa_samples(&f);
    let s = samples
        .iter()
        .find(|s| s.question == "Does the person want to not get recognition?")
        .expect("dance record present");
    assert_eq!(s.answers, vec![NO.to_string()]);
    assert_eq!(s.negatives, vec![YES.to_string()]);
}

#[test]
fn distractors_are_never_near_copies_of_truths() {
    let f = synthetic();
    for s in qa_samples(&f) {
        let group = qtype_group(s.qtype);
        let truths = f.synthetic.records.iter().find(|r| r.video_id == s.video_id).unwrap().commonsense.get(group);
        let pool: Vec<&String> = s.answers.iter().chain(&s.negatives).filter(|a| *a != YES && *a != NO).collect();
        for a in pool.into_iter().filter(|a| !truths.contains(a)) {
            for t in truths {
                assert!(token_overlap(a, t) < EXCLUSION_OVERLAP, "{a} vs {t}");
            }
        }
    }
}

#[test]
fn topk_matches_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let n = rng.random_range(1..30);
        // Coarse values so that ties occur.
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 8.0).collect();
        let truth: Vec<usize> = (0..rng.random_range(0..5)).map(|_| rng.random_range(0..n)).collect();
        for k in [1, 3, 5] {
            assert_eq!(topk_precision_recall(&scores, &truth, k), topk_oracle(&scores, &truth, k));
        }
    }
}

#[test]
fn answering_head_memorizes_five_samples() {
    let (steps, precision) = qa_overfit(2000);
    println!("reached precision {precision} after {steps} steps");
    assert_eq!(precision, 1.0);
    assert!(steps <= 2000);
}
