#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use v2c_core::config::{ModelConfig, TargetMode, TrainConfig};
use v2c_core::corpus::{make_synthetic_corpus, SyntheticConfig, SyntheticCorpus, V2CRecord, VideoFeatures};
use v2c_core::metrics::EvalPair;
use v2c_core::training::{prepare, PreparedRecord};
use v2c_core::vocab::{Stream, Vocabulary};

// ---------- brute-force n-gram oracles ----------

fn grams(t: &[String], n: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + n <= t.len() {
        out.push(t[i..i + n].to_vec());
        i += 1;
    }
    out
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    let mut c = 0;
    for x in list {
        if x.as_slice() == g {
            c += 1;
        }
    }
    c
}

fn distinct(list: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

pub fn bleu_oracle(pairs: &[EvalPair], n: usize) -> f64 {
    let mut c_len = 0.0;
    let mut r_len = 0.0;
    let mut logs = 0.0;
    for k in 1..=n {
        let mut hit = 0.0;
        let mut tot = 0.0;
        for p in pairs {
            let cg = grams(&p.candidate, k);
            for g in distinct(&cg) {
                let mut best = 0;
                for r in &p.references {
                    best = best.max(count(&grams(r, k), &g));
                }
                hit += count(&cg, &g).min(best) as f64;
            }
            tot += cg.len() as f64;
        }
        if hit == 0.0 {
            return 0.0;
        }
        logs += (hit / tot).ln();
    }
    for p in pairs {
        c_len += p.candidate.len() as f64;
        let mut best: Option<usize> = None;
        for r in &p.references {
            let d = |x: usize| (x as i64 - p.candidate.len() as i64).abs();
            best = match best {
                None => Some(r.len()),
                Some(b) if d(r.len()) < d(b) || (d(r.len()) == d(b) && r.len() < b) => Some(r.len()),
                keep => keep,
            };
        }
        r_len += best.unwrap() as f64;
    }
    let bp = if c_len < r_len { (1.0 - r_len / c_len).exp() } else { 1.0 };
    bp * (logs / n as f64).exp()
}

/// LCS by enumerating every subsequence of the shorter side.
fn lcs_brute(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let sub: Vec<&String> = (0..short.len()).filter(|i| mask & (1 << i) != 0).map(|i| &short[i]).collect();
        let mut j = 0;
        for x in long {
            if j < sub.len() && sub[j] == x {
                j += 1;
            }
        }
        if j == sub.len() {
            best = best.max(sub.len());
        }
    }
    best
}

pub fn rouge_oracle(pairs: &[EvalPair]) -> f64 {
    let beta2 = 1.2f64 * 1.2;
    let mut sum = 0.0;
    for p in pairs {
        let mut best: f64 = 0.0;
        for r in &p.references {
            let l = lcs_brute(&p.candidate, r) as f64;
            if l > 0.0 {
                let pr = l / p.candidate.len() as f64;
                let rc = l / r.len() as f64;
                best = best.max((1.0 + beta2) * pr * rc / (rc + beta2 * pr));
            }
        }
        sum += best;
    }
    sum / pairs.len() as f64
}

fn strip(w: &str) -> String {
    if w.ends_with("ss") {
        return w.to_string();
    }
    for suf in ["ing", "ed", "es", "s"] {
        if w.ends_with(suf) && w.len() - suf.len() >= 3 {
            return w[..w.len() - suf.len()].to_string();
        }
    }
    w.to_string()
}

pub fn meteor_oracle(pairs: &[EvalPair]) -> f64 {
    let mut sum = 0.0;
    for p in pairs {
        let mut best: f64 = 0.0;
        for r in &p.references {
            let mut link: Vec<Option<usize>> = vec![None; p.candidate.len()];
            let mut taken = vec![false; r.len()];
            for exact in [true, false] {
                for i in 0..p.candidate.len() {
                    if link[i].is_some() {
                        continue;
                    }
                    for j in 0..r.len() {
                        let ok = if exact { p.candidate[i] == r[j] } else { strip(&p.candidate[i]) == strip(&r[j]) };
                        if !taken[j] && ok {
                            taken[j] = true;
                            link[i] = Some(j);
                            break;
                        }
                    }
                }
            }
            let matched: Vec<(usize, usize)> = link.iter().enumerate().filter_map(|(i, l)| l.map(|j| (i, j))).collect();
            if matched.is_empty() {
                continue;
            }
            let m = matched.len() as f64;
            let mut chunks = 1.0;
            for w in 1..matched.len() {
                let (a, b) = (matched[w - 1], matched[w]);
                if !(b.0 == a.0 + 1 && b.1 == a.1 + 1) {
                    chunks += 1.0;
                }
            }
            let pr = m / p.candidate.len() as f64;
            let rc = m / r.len() as f64;
            let f = 10.0 * pr * rc / (rc + 9.0 * pr);
            best = best.max(f * (1.0 - 0.5 * (chunks / m).powi(3)));
        }
        sum += best;
    }
    sum / pairs.len() as f64
}

pub fn cider_oracle(pairs: &[EvalPair]) -> f64 {
    let docs = pairs.len() as f64;
    let mut total = 0.0;
    for p in pairs {
        let mut per_n = 0.0;
        for n in 1..=4 {
            let idf = |g: &[String]| {
                let mut df = 0.0;
                for q in pairs {
                    if q.references.iter().any(|r| count(&grams(r, n), g) > 0) {
                        df += 1.0;
                    }
                }
                (docs / f64::max(df, 1.0)).ln()
            };
            let vec_of = |t: &[String]| -> BTreeMap<Vec<String>, f64> {
                let gs = grams(t, n);
                distinct(&gs).into_iter().map(|g| {
                    let w = count(&gs, &g) as f64 * idf(&g);
                    (g, w)
                }).collect()
            };
            let c = vec_of(&p.candidate);
            let mut s = 0.0;
            for r in &p.references {
                let rv = vec_of(r);
                let norm = |v: &BTreeMap<Vec<String>, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
                let (nc, nr) = (norm(&c), norm(&rv));
                if nc > 0.0 && nr > 0.0 {
                    let dot: f64 = c.iter().map(|(g, x)| x * rv.get(g).copied().unwrap_or(0.0)).sum();
                    s += dot / (nc * nr);
                }
            }
            per_n += s / p.references.len() as f64;
        }
        total += 10.0 * per_n / 4.0;
    }
    total / pairs.len() as f64
}

/// Pairs over a small vocabulary with stem variants so that every metric
/// sees partial overlap.
pub fn random_pairs(seed: u64, n: usize) -> Vec<EvalPair> {
    const WORDS: [&str; 10] = ["a", "man", "men", "run", "runs", "running", "dog", "the", "jumped", "jump"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentence = |rng: &mut ChaCha8Rng, min: usize| -> Vec<String> {
        let len = rng.random_range(min..=9);
        (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())].to_string()).collect()
    };
    (0..n)
        .map(|_| {
            let cand = sentence(&mut rng, 1);
            let refs = (0..rng.random_range(1..=3)).map(|_| sentence(&mut rng, 1)).collect();
            EvalPair::new(cand, refs)
        })
        .collect()
}

// ---------- decoding oracles ----------

/// Deterministic pseudo-model: next-token log-probabilities are a seeded
/// function of the prefix.
pub fn toy_step(model_seed: u64, vocab: usize) -> impl FnMut(&[usize]) -> v2c_core::Result<Vec<f64>> {
    move |prefix: &[usize]| {
        let mut h = model_seed.wrapping_mul(0x100_0000_01B3);
        for &t in prefix {
            h = (h ^ (t as u64 + 1)).wrapping_mul(0x100_0000_01B3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let logits: Vec<f64> = (0..vocab).map(|_| rng.random_range(-3.0..3.0)).collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        Ok(logits.iter().map(|x| x - lse).collect())
    }
}

/// Every sequence ending in `eos` or reaching `max_len`, with its summed score.
pub fn enumerate(
    step: &mut dyn FnMut(&[usize]) -> v2c_core::Result<Vec<f64>>,
    vocab: usize,
    max_len: usize,
    eos: usize,
) -> Vec<(Vec<usize>, f64)> {
    let mut done = Vec::new();
    let mut open = vec![(Vec::<usize>::new(), 0.0)];
    while let Some((seq, score)) = open.pop() {
        let lp = step(&seq).unwrap();
        for t in 0..vocab {
            let mut s = seq.clone();
            s.push(t);
            let sc = score + lp[t];
            if t == eos || s.len() == max_len {
                done.push((s, sc));
            } else {
                open.push((s, sc));
            }
        }
    }
    done
}

/// Highest length-normalised score; ties to the smaller id sequence.
pub fn enumeration_argmax(all: &[(Vec<usize>, f64)]) -> Vec<usize> {
    let mut best: Option<&(Vec<usize>, f64)> = None;
    for c in all {
        let norm = c.1 / c.0.len() as f64;
        best = match best {
            None => Some(c),
            Some(b) => {
                let bn = b.1 / b.0.len() as f64;
                if norm > bn || (norm == bn && c.0 < b.0) {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.unwrap().0.clone()
}

/// Precision and recall by sorting (score desc, index asc) and counting.
pub fn topk_oracle(scores: &[f64], truth: &[usize], k: usize) -> Option<(f64, f64)> {
    let mut t: Vec<usize> = truth.to_vec();
    t.sort();
    t.dedup();
    if t.is_empty() || k == 0 {
        return None;
    }
    let mut pairs: Vec<(f64, usize)> = scores.iter().copied().zip(0..).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let hits = pairs.iter().take(k).filter(|(_, i)| t.binary_search(i).is_ok()).count() as f64;
    Some((hits / k as f64, hits / t.len() as f64))
}

// ---------- fixtures ----------

pub struct Fixture {
    pub synthetic: SyntheticCorpus,
    pub corpus: Vec<(V2CRecord, VideoFeatures)>,
    pub caption_vocab: Vocabulary,
    pub commonsense_vocab: Vocabulary,
    pub prepared: Vec<PreparedRecord>,
}

pub fn fixture(cfg: &SyntheticConfig, max_len: usize) -> Fixture {
    let synthetic = make_synthetic_corpus(cfg).unwrap();
    let corpus: Vec<_> = synthetic.records.iter().cloned().zip(synthetic.features.iter().cloned()).collect();
    let caption_vocab = Vocabulary::build(&synthetic.records, Stream::Caption, 1).unwrap();
    let commonsense_vocab = Vocabulary::build(&synthetic.records, Stream::Commonsense, 1).unwrap();
    let prepared = prepare(&corpus, &caption_vocab, &commonsense_vocab, max_len, TargetMode::Commonsense)
        .unwrap()
        .records;
    Fixture {
        synthetic,
        corpus,
        caption_vocab,
        commonsense_vocab,
        prepared,
    }
}

pub fn small_model_config(f: &Fixture, d_model: usize, n_blocks: usize, max_len: usize) -> ModelConfig {
    ModelConfig {
        d_model,
        n_blocks,
        n_heads: 4,
        d_ff: 2 * d_model,
        dropout: 0.0,
        max_len,
        feature_dim: f.synthetic.features[0].dim(),
        caption_vocab: f.caption_vocab.len(),
        commonsense_vocab: f.commonsense_vocab.len(),
        output_gain: 0.1,
    }
}

pub fn fast_train_config(steps: usize) -> TrainConfig {
    TrainConfig {
        lr: 3e-3,
        warmup_steps: 100,
        batch_size: 8,
        max_steps: steps,
        ..TrainConfig::desk()
    }
}

// ---------- causality ----------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoder {
    Caption,
    Commonsense,
}

pub fn decoder_logits(
    model: &v2c_core::model::V2CModel,
    feats: &VideoFeatures,
    which: Decoder,
    tokens: &[usize],
) -> v2c_tensor::Tensor {
    use v2c_core::vocab::{CommonsenseType, BOS};
    let mut g = v2c_tensor::Graph::new(0);
    g.set_train(false);
    let b = g.bind_frozen(&model.params);
    let v = model.encode(&mut g, &b, feats).unwrap();
    let out = match which {
        Decoder::Caption => model.caption_forward(&mut g, &b, &v, tokens).unwrap(),
        Decoder::Commonsense => {
            let cap = model.caption_forward(&mut g, &b, &v, &[BOS, 7, 8, 9]).unwrap();
            model
                .commonsense_forward(&mut g, &b, &v, cap.hidden, tokens, CommonsenseType::Effect)
                .unwrap()
        }
    };
    g.value(out.logits).clone()
}

/// Runs `trials` future-perturbation trials and returns how many changed
/// any logit at or before the perturbation point.
pub fn causality_model(seed: u64) -> v2c_core::model::V2CModel {
    let cfg = ModelConfig {
        d_model: 16,
        n_blocks: 2,
        n_heads: 2,
        d_ff: 32,
        dropout: 0.1,
        max_len: 12,
        feature_dim: 6,
        caption_vocab: 20,
        commonsense_vocab: 20,
        output_gain: 1.0,
    };
    v2c_core::model::V2CModel::new(cfg, seed).unwrap()
}

pub fn causality_features(rng: &mut ChaCha8Rng) -> VideoFeatures {
    let data: Vec<f32> = (0..5 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    VideoFeatures::new("c", 5, 6, data).unwrap()
}

pub fn causality_failures(which: Decoder, trials: usize, seed: u64) -> usize {
    use v2c_core::vocab::{BOE, BOS};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = causality_model(seed);
    let feats = causality_features(&mut rng);
    let first = if which == Decoder::Caption { BOS } else { BOE };
    let mut failures = 0;
    for _ in 0..trials {
        let len = rng.random_range(2..=12);
        let mut tokens = vec![first];
        tokens.extend((1..len).map(|_| rng.random_range(0..20)));
        let t = rng.random_range(0..len - 1);
        let mut perturbed = tokens.clone();
        for x in &mut perturbed[t + 1..] {
            *x = (*x + rng.random_range(1..20)) % 20;
        }
        let a = decoder_logits(&model, &feats, which, &tokens);
        let b = decoder_logits(&model, &feats, which, &perturbed);
        let same = (0..=t).all(|r| a.row(r).iter().zip(b.row(r)).all(|(x, y)| x.to_bits() == y.to_bits()));
        if !same {
            failures += 1;
        }
    }
    failures
}

// ---------- format round trips ----------

fn random_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=6);
            (0..len).map(|_| (b'a' + rng.random_range(0..26u8)) as char).collect()
        })
        .collect()
}

/// Feature file write -> read -> write is bit-exact.
pub fn features_round_trip(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d) = (rng.random_range(1..20), rng.random_range(1..40));
    let data: Vec<f32> = (0..n * d).map(|_| rng.random_range(-1e3f32..1e3)).collect();
    let f = VideoFeatures::new(format!("v{seed}"), n, d, data).unwrap();
    let mut a = Vec::new();
    f.write(&mut a).unwrap();
    let back = VideoFeatures::read(&mut a.as_slice(), format!("v{seed}")).unwrap();
    let mut b = Vec::new();
    back.write(&mut b).unwrap();
    back == f && a == b && back.data().iter().zip(f.data()).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Vocabulary file write -> read -> write is bit-exact.
pub fn vocab_round_trip(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..60);
    let words = random_words(&mut rng, n);
    let text = words.join(" ");
    let v = Vocabulary::from_texts([text.as_str()], Stream::Caption, 1);
    let mut a = Vec::new();
    v.write(&mut a).unwrap();
    let back = Vocabulary::read(a.as_slice()).unwrap();
    let mut b = Vec::new();
    back.write(&mut b).unwrap();
    a == b && back.len() == v.len() && (0..v.len()).all(|i| back.token(i) == v.token(i))
}

/// Checkpoint save -> load -> save gives identical files and weights.
pub fn checkpoint_round_trip(seed: u64) -> bool {
    use v2c_core::checkpoint::{load_checkpoint, save_checkpoint};
    use v2c_core::model::V2CModel;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cw = random_words(&mut rng, 12).join(" ");
    let mw = random_words(&mut rng, 15).join(" ");
    let cv = Vocabulary::from_texts([cw.as_str()], Stream::Caption, 1);
    let mv = Vocabulary::from_texts([mw.as_str()], Stream::Commonsense, 1);
    let heads = rng.random_range(1..=2);
    let d = heads * rng.random_range(2..=4);
    let cfg = ModelConfig {
        d_model: d,
        n_blocks: rng.random_range(1..=2),
        n_heads: heads,
        d_ff: rng.random_range(2..12),
        dropout: 0.1,
        max_len: rng.random_range(4..16),
        feature_dim: rng.random_range(1..8),
        caption_vocab: cv.len(),
        commonsense_vocab: mv.len(),
        output_gain: 0.1,
    };
    let model = V2CModel::new(cfg, seed).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (one, two) = (dir.path().join("a"), dir.path().join("b"));
    save_checkpoint(&one, &model, &cv, &mv).unwrap();
    let ck = load_checkpoint(&one).unwrap();
    save_checkpoint(&two, &ck.model, &ck.caption_vocab, &ck.commonsense_vocab).unwrap();
    let same_files = std::fs::read_dir(&one).unwrap().all(|e| {
        let name = e.unwrap().file_name();
        std::fs::read(one.join(&name)).unwrap() == std::fs::read(two.join(&name)).unwrap()
    });
    let same_weights = model.params.iter().zip(ck.model.params.iter()).all(|((na, ta), (nb, tb))| {
        na == nb && ta.shape() == tb.shape() && ta.data().iter().zip(tb.data()).all(|(x, y)| x.to_bits() == y.to_bits())
    });
    same_files && same_weights && ck.model.config() == model.config()
}

// ---------- QA ----------

pub fn qa_samples(f: &Fixture) -> Vec<v2c_core::qa::QaSample> {
    use v2c_core::qa::{generate_questions, AnswerPool, Miner};
    let miner = Miner::new(AnswerPool::from_records(&f.synthetic.records));
    f.synthetic.records.iter().flat_map(|r| generate_questions(r, &miner).samples).collect()
}

/// Trains the answering head on five samples; returns the step at which
/// top-1 precision first reached 1.0 (checked every 25 steps) and the final
/// precision.
pub fn qa_overfit(max_steps: usize) -> (usize, f64) {
    use v2c_core::qa::*;
    let f = fixture(&SyntheticConfig { n_videos: 6, n_frames: 8, dim: 16, ..Default::default() }, 12);
    let all = qa_samples(&f);
    let picks = [(0, 0), (1, 2), (2, 8), (3, 15), (4, 20)];
    let chosen: Vec<&QaSample> = picks
        .iter()
        .map(|&(v, q)| all.iter().find(|s| s.video_id == f.synthetic.records[v].video_id && s.qtype == q).unwrap())
        .collect();
    let answers = AnswerVocabulary::build(all.iter());
    let questions = QuestionVocabulary::build(all.iter());
    let examples: Vec<QaExample> = chosen
        .iter()
        .map(|s| {
            let v = f.synthetic.records.iter().position(|r| r.video_id == s.video_id).unwrap();
            QaExample {
                features: f.synthetic.features[v].clone(),
                question: questions.encode(&s.question),
                qtype: s.qtype,
                answers: answers.ids(&s.answers),
                negatives: answers.ids(&s.negatives),
            }
        })
        .collect();
    let cfg = QaHeadConfig {
        feature_dim: 16,
        d_model: 32,
        hidden: 32,
        answer_vocab: answers.len(),
        question_vocab: questions.len(),
        weights: (1.0, 0.5, 0.5),
        margin: 0.2,
    };
    let mut model = QaModel::new(cfg, 0).unwrap();
    let precision = |m: &QaModel| {
        let hits: f64 = examples
            .iter()
            .map(|e| {
                let (scores, _) = m.predict(&e.features, &e.question).unwrap();
                topk_precision_recall(&scores, &e.answers, 1).unwrap().0
            })
            .sum();
        hits / examples.len() as f64
    };
    let train_cfg = QaTrainConfig { lr: 3e-3, warmup_steps: 50, batch_size: 5, max_steps, seed: 0 };
    let steps = train_qa(&mut model, &examples, &train_cfg, |m, step, _| step % 25 != 0 || precision(m) < 1.0).unwrap();
    (steps, precision(&model))
}

// ---------- training runs ----------

/// Finite-difference check over every parameter tensor of the two-stage
/// model (d_model 32, one block, two heads, both vocabularies 20).
pub fn gradcheck_full_model(samples_per_param: usize) -> v2c_tensor::GradCheckReport {
    use v2c_core::model::V2CModel;
    use v2c_core::training::joint_loss;
    use v2c_core::vocab::{CommonsenseType, BOI, BOS};
    use v2c_tensor::{check_gradients, GradCheckConfig};
    let cfg = ModelConfig {
        d_model: 32,
        n_blocks: 1,
        n_heads: 2,
        d_ff: 64,
        dropout: 0.0,
        max_len: 8,
        feature_dim: 6,
        caption_vocab: 20,
        commonsense_vocab: 20,
        output_gain: 1.0,
    };
    let mut model = V2CModel::new(cfg, 11).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data: Vec<f32> = (0..4 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let feats = VideoFeatures::new("g", 4, 6, data).unwrap();
    let cap_in = [BOS, 7, 8, 9, 10];
    let cap_t = [7, 8, 9, 10, 2];
    let cms_in = [BOI, 11, 12, 13];
    let cms_t = [11, 12, 13, 2];
    let mut params = std::mem::take(&mut model.params);
    let report = check_gradients(
        |g: &mut v2c_tensor::Graph, b: &v2c_tensor::Bound| -> v2c_core::Result<v2c_tensor::Var> {
            let v = model.encode(g, b, &feats)?;
            let cap = model.caption_forward(g, b, &v, &cap_in)?;
            let cms = model.commonsense_forward(g, b, &v, cap.hidden, &cms_in, CommonsenseType::Intention)?;
            Ok(joint_loss(g, cap.logits, &cap_t, cms.logits, &cms_t)?.total)
        },
        &mut params,
        GradCheckConfig { epsilon: 1e-3, samples_per_param, seed: 3 },
    )
    .unwrap();
    model.params = params;
    report
}

/// Untrained perplexity on both streams against the vocabulary sizes.
pub fn untrained_perplexity() -> [(f64, usize); 2] {
    use v2c_core::metrics::{perplexity, PerplexityStream};
    use v2c_core::model::V2CModel;
    let f = fixture(&SyntheticConfig::default(), 16);
    let cfg = ModelConfig {
        feature_dim: f.synthetic.features[0].dim(),
        caption_vocab: f.caption_vocab.len(),
        commonsense_vocab: f.commonsense_vocab.len(),
        max_len: 16,
        ..ModelConfig::desk()
    };
    let model = V2CModel::new(cfg, 0).unwrap();
    [
        (perplexity(&model, &f.prepared, PerplexityStream::Caption).unwrap(), f.caption_vocab.len()),
        (perplexity(&model, &f.prepared, PerplexityStream::Commonsense).unwrap(), f.commonsense_vocab.len()),
    ]
}

/// Trains on a single record until both perplexities drop below `target`
/// or `max_steps` is reached. Returns (steps, caption ppl, commonsense ppl).
pub fn memorized_perplexity(target: f64, max_steps: usize) -> (usize, f64, f64) {
    use v2c_core::metrics::{perplexity, PerplexityStream};
    use v2c_core::model::V2CModel;
    use v2c_core::training::Trainer;
    let f = fixture(&SyntheticConfig { n_videos: 1, n_frames: 8, dim: 16, ..Default::default() }, 12);
    let model = V2CModel::new(small_model_config(&f, 32, 1, 12), 0).unwrap();
    let tc = TrainConfig { warmup_steps: 20, ..fast_train_config(max_steps) };
    let mut t = Trainer::new(model, f.prepared.clone(), tc).unwrap();
    let ppl = |t: &Trainer| {
        (
            perplexity(t.model(), &f.prepared, PerplexityStream::Caption).unwrap(),
            perplexity(t.model(), &f.prepared, PerplexityStream::Commonsense).unwrap(),
        )
    };
    loop {
        t.step().unwrap();
        if t.steps_done() % 25 == 0 || t.steps_done() == max_steps {
            let (c, m) = ppl(&t);
            if (c < target && m < target) || t.steps_done() == max_steps {
                return (t.steps_done(), c, m);
            }
        }
    }
}

pub struct OverfitResult {
    pub steps: usize,
    pub caption_bleu1: f64,
    pub commonsense_exact: f64,
    pub seconds: f64,
}

/// Caption BLEU-1 under V2C-Generation and commonsense exact match under
/// V2C-Completion, both greedy, over the training corpus.
pub fn training_set_scores(f: &Fixture, model: &v2c_core::model::V2CModel, max_len: usize) -> (f64, f64) {
    use v2c_core::generation::{DecodeOptions, Generator};
    use v2c_core::metrics::{bleu, EvalPair};
    use v2c_core::vocab::CommonsenseType;
    let gen = Generator::new(model, &f.caption_vocab, &f.commonsense_vocab);
    let opts = DecodeOptions::greedy(max_len);
    let mut pairs = Vec::new();
    let (mut hits, mut total) = (0, 0);
    for (r, feats) in &f.corpus {
        let g = gen.generate(feats, &opts).unwrap();
        pairs.push(EvalPair::from_text(&g.caption, &r.captions));
        for caption in &r.captions {
            let c = gen.complete(feats, caption, &opts).unwrap();
            for ty in CommonsenseType::ALL {
                total += 1;
                if r.commonsense.get(ty).contains(&c.get(ty).unwrap().text) {
                    hits += 1;
                }
            }
        }
    }
    (bleu(&pairs, 1, false).score, hits as f64 / total as f64)
}

/// Trains on the 30-record synthetic corpus, evaluating every `eval_every`
/// steps, until BLEU-1 >= 0.95 and exact match >= 0.90 or `max_steps`.
pub fn overfit_synthetic(max_steps: usize, eval_every: usize) -> OverfitResult {
    use v2c_core::model::V2CModel;
    use v2c_core::training::Trainer;
    let start = std::time::Instant::now();
    let f = fixture(&SyntheticConfig::default(), 12);
    let model = V2CModel::new(small_model_config(&f, 64, 2, 12), 0).unwrap();
    let mut t = Trainer::new(model, f.prepared.clone(), fast_train_config(max_steps)).unwrap();
    loop {
        t.step().unwrap();
        let n = t.steps_done();
        if n % eval_every == 0 || n == max_steps {
            let (b, e) = training_set_scores(&f, t.model(), 12);
            if (b >= 0.95 && e >= 0.90) || n == max_steps {
                return OverfitResult {
                    steps: n,
                    caption_bleu1: b,
                    commonsense_exact: e,
                    seconds: start.elapsed().as_secs_f64(),
                };
            }
        }
    }
}

/// One seeded desk-config train + generate run: (loss CSV, generated JSONL).
pub fn desk_run(seed: u64, steps: usize) -> (Vec<u8>, Vec<u8>) {
    use std::io::Write;
    use v2c_core::generation::{DecodeOptions, Generator};
    use v2c_core::training::{train, write_loss_csv};
    let f = fixture(&SyntheticConfig { n_videos: 12, ..Default::default() }, 32);
    let mc = ModelConfig::desk();
    let tc = TrainConfig { seed, max_steps: steps, warmup_steps: 10, ..TrainConfig::desk() };
    let out = train(&f.corpus, &mc, &tc).unwrap();
    let mut csv = Vec::new();
    write_loss_csv(&mut csv, &out.history).unwrap();
    let gen = Generator::new(&out.model, &out.caption_vocab, &out.commonsense_vocab);
    let mut jsonl = Vec::new();
    for feats in &f.synthetic.features {
        let r = gen.generate(feats, &DecodeOptions::greedy(10)).unwrap();
        writeln!(jsonl, "{}", serde_json::to_string(&r.to_record()).unwrap()).unwrap();
    }
    (csv, jsonl)
}
