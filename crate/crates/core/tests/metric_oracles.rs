mod common;

use common::*;
use v2c_core::metrics::{bleu, cider, meteor_lite, rouge_l, EvalPair};

const TOL: f64 = 1e-9;

#[test]
fn bleu_matches_oracle() {
    for seed in 0..5 {
        let pairs = random_pairs(seed, 50);
        for n in 1..=4 {
            let (got, want) = (bleu(&pairs, n, false).score, bleu_oracle(&pairs, n));
            assert!((got - want).abs() < TOL, "seed {seed} n {n}: {got} vs {want}");
        }
    }
}

#[test]
fn rouge_matches_oracle() {
    for seed in 0..5 {
        let pairs = random_pairs(100 + seed, 50);
        assert!((rouge_l(&pairs) - rouge_oracle(&pairs)).abs() < TOL);
    }
}

#[test]
fn meteor_matches_oracle() {
    for seed in 0..5 {
        let pairs = random_pairs(200 + seed, 50);
        assert!((meteor_lite(&pairs) - meteor_oracle(&pairs)).abs() < TOL);
    }
}

#[test]
fn cider_matches_oracle() {
    for seed in 0..5 {
        let pairs = random_pairs(300 + seed, 50);
        assert!((cider(&pairs).score - cider_oracle(&pairs)).abs() < TOL);
    }
}

#[test]
fn reference_order_is_irrelevant() {
    let pairs = random_pairs(7, 50);
    let reversed: Vec<EvalPair> = pairs
        .iter()
        .map(|p| EvalPair::new(p.candidate.clone(), p.references.iter().rev().cloned().collect()))
        .collect();
    for n in 1..=4 {
        assert_eq!(bleu(&pairs, n, false).score, bleu(&reversed, n, false).score);
    }
    assert_eq!(rouge_l(&pairs), rouge_l(&reversed));
    assert_eq!(meteor_lite(&pairs), meteor_lite(&reversed));
    assert!((cider(&pairs).score - cider(&reversed).score).abs() < 1e-12);
}

#[test]
fn duplicating_references_keeps_cider() {
    let pairs = random_pairs(8, 20);
    let doubled: Vec<EvalPair> = pairs
        .iter()
        .map(|p| EvalPair::new(p.candidate.clone(), p.references.iter().chain(&p.references).cloned().collect()))
        .collect();
    assert!((cider(&pairs).score - cider(&doubled).score).abs() < 1e-12);
}

#[test]
fn extra_reference_never_lowers_clipped_matches() {
    let pairs = random_pairs(9, 50);
    let extended: Vec<EvalPair> = pairs
        .iter()
        .map(|p| {
            let mut refs = p.references.clone();
            refs.push(p.candidate.iter().rev().cloned().collect());
            EvalPair::new(p.candidate.clone(), refs)
        })
        .collect();
    for n in 1..=4 {
        let (a, b) = (bleu(&pairs, n, false), bleu(&extended, n, false));
        for (x, y) in a.precisions.iter().zip(&b.precisions) {
            assert!(y >= x);
        }
    }
}

#[test]
fn hand_examples() {
    let b = bleu(&[EvalPair::from_text("a man is singing", &["a man is singing a song"])], 1, false);
    assert!((b.score - 0.6065).abs() < 5e-5);
    let r = rouge_l(&[EvalPair::from_text("the cat sat", &["the cat sat down"])]);
    assert!((r - 0.8356).abs() < 5e-5);
    let m = meteor_lite(&[EvalPair::from_text("a b c", &["a b c"])]);
    assert!((m - 0.9815).abs() < 5e-5);
    let c = cider(&[
        EvalPair::from_text("a man is singing", &["a man is singing"]),
        EvalPair::from_text("dogs chase the ball", &["dogs chase the ball"]),
    ]);
    assert!((c.score - 10.0).abs() < 5e-5);
}

#[test]
fn metrics_are_pure() {
    let pairs = random_pairs(11, 30);
    assert_eq!(bleu(&pairs, 4, true), bleu(&pairs, 4, true));
    assert_eq!(cider(&pairs), cider(&pairs));
}
