mod common;

use common::*;

#[test]
fn full_model_gradients_match_finite_differences() {
    let r = gradcheck_full_model(8);
    println!("{r:?}");
    assert!(r.max_rel_error < 1e-3);
}

#[test]
fn untrained_perplexity_is_near_vocabulary_size() {
    for (ppl, v) in untrained_perplexity() {
        println!("ppl {ppl:.2} vocab {v}");
        assert!((ppl / v as f64 - 1.0).abs() <= 0.10);
    }
}

#[test]
fn one_record_is_memorized() {
    let (steps, c, m) = memorized_perplexity(1.05, 1000);
    println!("steps {steps} caption {c:.4} commonsense {m:.4}");
    assert!(c < 1.05 && m < 1.05);
}

#[test]
fn seeded_runs_are_identical() {
    let a = desk_run(5, 6);
    let b = desk_run(5, 6);
    assert_eq!(a, b);
    let c = desk_run(6, 6);
    assert_ne!(a.0, c.0);
}

#[test]
fn loss_csv_layout() {
    let (csv, jsonl) = desk_run(1, 3);
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,loss_cap,loss_cms,lr"));
    assert_eq!(lines.count(), 3);
    assert_eq!(String::from_utf8(jsonl).unwrap().lines().count(), 12);
}
