use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use v2c_tensor::{read_snapshot, Bound, Graph, ParamId, ParamStore, Tensor, Var};

use super::templates::{QaSample, N_QTYPES, NO, YES};
use crate::corpus::VideoFeatures;
use crate::error::{Error, Result};
use crate::model::{encode_video, EncoderParams, Init};
use crate::text::tokenize;
use crate::training::{lr_schedule, Adam};

/// Answer string to dense id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnswerVocabulary {
    answers: Vec<String>,
    index: HashMap<String, usize>,
}

impl AnswerVocabulary {
    /// `yes` and `no` first, then answers in first-seen order.
    pub fn build<'a>(samples: impl IntoIterator<Item = &'a QaSample>) -> Self {
        let mut v = Self::default();
        v.insert(YES);
        v.insert(NO);
        for s in samples {
            for a in s.answers.iter().chain(&s.negatives) {
                v.insert(a);
            }
        }
        v
    }

    fn insert(&mut self, a: &str) {
        if !self.index.contains_key(a) {
            self.index.insert(a.to_string(), self.answers.len());
            self.answers.push(a.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn id(&self, a: &str) -> Option<usize> {
        self.index.get(a).copied()
    }

    pub fn answer(&self, id: usize) -> Option<&str> {
        self.answers.get(id).map(String::as_str)
    }

    pub fn ids<S: AsRef<str>>(&self, answers: &[S]) -> Vec<usize> {
        answers.iter().filter_map(|a| self.id(a.as_ref())).collect()
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        for (i, a) in self.answers.iter().enumerate() {
            writeln!(w, "{a}\t{i}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut v = Self::default();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (a, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::Vocab(format!("line {}: missing tab", n + 1)))?;
            if id.parse::<usize>().ok() != Some(v.len()) || v.index.contains_key(a) {
                return Err(Error::Vocab(format!("line {}: ids must be dense and answers unique", n + 1)));
            }
            v.insert(a);
        }
        Ok(v)
    }
}

/// Word ids for questions; unknown words share id 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QuestionVocabulary {
    index: HashMap<String, usize>,
}

impl QuestionVocabulary {
    pub fn build<'a>(samples: impl IntoIterator<Item = &'a QaSample>) -> Self {
        let mut words: Vec<String> = samples.into_iter().flat_map(|s| tokenize(&s.question)).collect();
        words.sort();
        words.dedup();
        Self {
            index: words.into_iter().enumerate().map(|(i, w)| (w, i + 1)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.index.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, question: &str) -> Vec<usize> {
        let ids: Vec<usize> = tokenize(question).iter().map(|w| self.index.get(w).copied().unwrap_or(0)).collect();
        if ids.is_empty() {
            vec![0]
        } else {
            ids
        }
    }

    pub fn words(&self) -> Vec<&str> {
        let mut w: Vec<(&str, usize)> = self.index.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        w.sort_by_key(|&(_, i)| i);
        w.into_iter().map(|(k, _)| k).collect()
    }

    pub fn from_words<S: Into<String>>(words: impl IntoIterator<Item = S>) -> Self {
        Self {
            index: words.into_iter().enumerate().map(|(i, w)| (w.into(), i + 1)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaHeadConfig {
    pub feature_dim: usize,
    /// Encoder width; matches the captioning model when sharing its encoder.
    pub d_model: usize,
    pub hidden: usize,
    pub answer_vocab: usize,
    pub question_vocab: usize,
    /// Weights of answer BCE, question-type cross-entropy and ranking.
    pub weights: (f64, f64, f64),
    pub margin: f64,
}

impl QaHeadConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.feature_dim, self.d_model, self.hidden, self.answer_vocab, self.question_vocab].contains(&0) {
            return Err(Error::Config("QA head dimensions must be positive".into()));
        }
        let (a, b, c) = self.weights;
        if a < 0.0 || b < 0.0 || c < 0.0 || a + b + c == 0.0 {
            return Err(Error::Config("QA loss weights must be nonnegative and not all zero".into()));
        }
        Ok(())
    }
}

/// Video encoder, question encoder, gated fusion and the two output heads.
#[derive(Debug, Clone)]
pub struct QaModel {
    pub cfg: QaHeadConfig,
    pub params: ParamStore,
    encoder: EncoderParams,
    q_emb: ParamId,
    q_w: ParamId,
    q_b: ParamId,
    fuse_w: ParamId,
    fuse_b: ParamId,
    type_w: ParamId,
    type_b: ParamId,
    gate_w: ParamId,
    gate_b: ParamId,
    ans_w: ParamId,
    ans_b: ParamId,
}

/// Output of [`QaModel::forward`].
#[derive(Debug, Clone, Copy)]
pub struct QaOutput {
    /// `[1, answers]` independent probabilities.
    pub scores: Var,
    /// `[1, 21]` question-type distribution.
    pub qtype: Var,
}

impl QaModel {
    pub fn new(cfg: QaHeadConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut p = ParamStore::new();
        let mut init = Init::new(seed);
        let (d, h) = (cfg.d_model, cfg.hidden);
        let encoder = EncoderParams::register(&mut p, cfg.feature_dim, d, &mut init)?;
        Ok(Self {
            q_emb: init.embedding(&mut p, "qa.q.emb", cfg.question_vocab, h)?,
            q_w: init.linear(&mut p, "qa.q.w", h, h, 1.0)?,
            q_b: init.zeros(&mut p, "qa.q.b", &[h])?,
            fuse_w: init.linear(&mut p, "qa.fuse.w", d + h, h, 1.0)?,
            fuse_b: init.zeros(&mut p, "qa.fuse.b", &[h])?,
            type_w: init.linear(&mut p, "qa.type.w", h, N_QTYPES, 1.0)?,
            type_b: init.zeros(&mut p, "qa.type.b", &[N_QTYPES])?,
            gate_w: init.linear(&mut p, "qa.gate.w", N_QTYPES, h, 1.0)?,
            gate_b: init.zeros(&mut p, "qa.gate.b", &[h])?,
            ans_w: init.linear(&mut p, "qa.ans.w", h, cfg.answer_vocab, 1.0)?,
            ans_b: init.zeros(&mut p, "qa.ans.b", &[cfg.answer_vocab])?,
            params: p,
            encoder,
            cfg,
        })
    }

    /// Copies `enc.*` tensors from another store (e.g. a captioning
    /// checkpoint). Returns how many were copied.
    pub fn init_encoder_from(&mut self, other: &ParamStore) -> Result<usize> {
        let mut copied = 0;
        for name in ["enc.w_in", "enc.w_hh", "enc.b"] {
            if let (Some(src), Some(dst)) = (other.id(name), self.params.id(name)) {
                let t = other.get(src);
                if t.shape() != self.params.get(dst).shape() {
                    return Err(Error::Dimension {
                        what: "shared encoder",
                        expected: self.params.get(dst).numel(),
                        found: t.numel(),
                    });
                }
                *self.params.get_mut(dst) = Tensor::new(t.shape().to_vec(), t.data().to_vec())?;
                copied += 1;
            }
        }
        Ok(copied)
    }

    pub fn forward(&self, g: &mut Graph, b: &Bound, features: &VideoFeatures, question: &[usize]) -> Result<QaOutput> {
        if features.dim() != self.cfg.feature_dim {
            return Err(Error::Dimension {
                what: "video features",
                expected: self.cfg.feature_dim,
                found: features.dim(),
            });
        }
        let x = g.constant(features.to_tensor());
        let v = encode_video(g, b, &self.encoder, x)?;
        let pooled = g.mean_axis(v.memory, 0)?;
        let pooled = g.reshape(pooled, &[1, self.cfg.d_model])?;

        let words = g.embedding(b[self.q_emb], question)?;
        let q = g.mean_axis(words, 0)?;
        let q = g.reshape(q, &[1, self.cfg.hidden])?;
        let q = g.matmul(q, b[self.q_w])?;
        let q = g.add(q, b[self.q_b])?;
        let q = g.tanh(q);

        let joined = g.concat(&[pooled, q], 1)?;
        let fused = g.matmul(joined, b[self.fuse_w])?;
        let fused = g.add(fused, b[self.fuse_b])?;
        let fused = g.tanh(fused);

        let t = g.matmul(q, b[self.type_w])?;
        let t = g.add(t, b[self.type_b])?;
        let qtype = g.softmax(t, 1)?;
        let gate = g.matmul(qtype, b[self.gate_w])?;
        let gate = g.add(gate, b[self.gate_b])?;
        let gate = g.sigmoid(gate);
        let z = g.mul(fused, gate)?;

        let s = g.matmul(z, b[self.ans_w])?;
        let s = g.add(s, b[self.ans_b])?;
        Ok(QaOutput {
            scores: g.sigmoid(s),
            qtype,
        })
    }

    /// Eval-mode answer scores and question-type distribution.
    pub fn predict(&self, features: &VideoFeatures, question: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = Graph::new(0);
        g.set_train(false);
        let b = g.bind_frozen(&self.params);
        let out = self.forward(&mut g, &b, features, question)?;
        Ok((g.value(out.scores).data().to_vec(), g.value(out.qtype).data().to_vec()))
    }
}

const PROB_FLOOR: f64 = 1e-12;

/// The three loss terms and their weighted sum.
#[derive(Debug, Clone, Copy)]
pub struct QaLoss {
    pub total: Var,
    pub bce: Var,
    pub qtype: Var,
    pub ranking: Var,
}

/// Weighted sum of mean per-answer binary cross-entropy, question-type
/// cross-entropy and the mean hinge `max(0, margin - s_true + s_neg)` over
/// all (answer, negative) pairs. Probabilities are clamped away from 0 and 1.
#[allow(clippy::too_many_arguments)]
pub fn qa_loss(
    g: &mut Graph,
    scores: Var,
    qtype_probs: Var,
    answers: &[usize],
    negatives: &[usize],
    qtype: usize,
    weights: (f64, f64, f64),
    margin: f64,
) -> Result<QaLoss> {
    let n = g.shape(scores).iter().product::<usize>();
    let mut y = vec![0.0; n];
    for &a in answers {
        if a >= n {
            return Err(Error::InvalidArgument(format!("answer id {a} outside {n} answers")));
        }
        y[a] = 1.0;
    }
    let flat = g.reshape(scores, &[n])?;
    let p = g.clamp(flat, PROB_FLOOR, 1.0 - PROB_FLOOR);
    let lp = g.ln(p)?;
    let neg_p = g.scale(p, -1.0);
    let q = g.add_scalar(neg_p, 1.0);
    let lq = g.ln(q)?;
    let y_t = g.constant(Tensor::from_vec(y.clone()));
    let not_y = g.constant(Tensor::from_vec(y.iter().map(|v| 1.0 - v).collect()));
    let pos = g.mul(lp, y_t)?;
    let negs = g.mul(lq, not_y)?;
    let ll = g.add(pos, negs)?;
    let mean_ll = g.mean(ll);
    let bce = g.scale(mean_ll, -1.0);

    let qflat = g.reshape(qtype_probs, &[N_QTYPES])?;
    let qt = g.select(qflat, &[qtype])?;
    let qt = g.clamp(qt, PROB_FLOOR, 1.0);
    let lqt = g.ln(qt)?;
    let ce = g.scale(lqt, -1.0);
    let ce = g.sum(ce);

    let (mut ti, mut ni) = (Vec::new(), Vec::new());
    for &a in answers {
        for &b in negatives {
            if b < n {
                ti.push(a);
                ni.push(b);
            }
        }
    }
    let ranking = if ti.is_empty() {
        g.constant(Tensor::scalar(0.0))
    } else {
        let st = g.select(flat, &ti)?;
        let sn = g.select(flat, &ni)?;
        let diff = g.sub(sn, st)?;
        let hinge = g.add_scalar(diff, margin);
        let hinge = g.relu(hinge);
        g.mean(hinge)
    };

    let (wa, wb, wc) = weights;
    let a = g.scale(bce, wa);
    let b = g.scale(ce, wb);
    let c = g.scale(ranking, wc);
    let ab = g.add(a, b)?;
    let total = g.add(ab, c)?;
    Ok(QaLoss {
        total,
        bce,
        qtype: ce,
        ranking,
    })
}

/// A QA sample resolved to ids, with its video.
#[derive(Debug, Clone)]
pub struct QaExample {
    pub features: VideoFeatures,
    pub question: Vec<usize>,
    pub qtype: usize,
    pub answers: Vec<usize>,
    pub negatives: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaTrainConfig {
    pub lr: f64,
    pub warmup_steps: usize,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for QaTrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            warmup_steps: 100,
            batch_size: 8,
            max_steps: 2000,
            seed: 0,
        }
    }
}

/// Minimises [`qa_loss`] over `examples`; calls `on_step(step, loss)` after
/// every update and stops early when it returns `false`.
pub fn train_qa(
    model: &mut QaModel,
    examples: &[QaExample],
    cfg: &QaTrainConfig,
    mut on_step: impl FnMut(&QaModel, usize, f64) -> bool,
) -> Result<usize> {
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut adam = Adam::new(&model.params, 0.9, 0.98, 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    for step in 1..=cfg.max_steps {
        let mut g = Graph::new(cfg.seed ^ step as u64);
        let b = g.bind(&model.params);
        let mut losses = Vec::new();
        for _ in 0..cfg.batch_size.min(examples.len()) {
            if cursor == order.len() {
                order = (0..examples.len()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let ex = &examples[order[cursor]];
            cursor += 1;
            let out = model.forward(&mut g, &b, &ex.features, &ex.question)?;
            let l = qa_loss(&mut g, out.scores, out.qtype, &ex.answers, &ex.negatives, ex.qtype, model.cfg.weights, model.cfg.margin)?;
            losses.push(l.total);
        }
        let stacked = g.concat(&losses, 0)?;
        let loss = g.mean(stacked);
        let value = g.value(loss).data()[0];
        let grads = g.backward(loss)?;
        model.params.accumulate_grads(&b, &grads)?;
        adam.step(&mut model.params, lr_schedule(step, cfg.lr, cfg.warmup_steps), None);
        if !on_step(model, step, value) {
            return Ok(step);
        }
    }
    Ok(cfg.max_steps)
}

impl QaHeadConfig {
    pub fn to_text(&self) -> String {
        let (a, b, c) = self.weights;
        format!(
            "feature_dim = {}\nd_model = {}\nhidden = {}\nanswer_vocab = {}\nquestion_vocab = {}\nweight_bce = {a}\nweight_qtype = {b}\nweight_rank = {c}\nmargin = {}\n",
            self.feature_dim, self.d_model, self.hidden, self.answer_vocab, self.question_vocab, self.margin
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = HashMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key = value, got {line:?}")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |k: &str| -> Result<f64> {
            kv.get(k)
                .ok_or_else(|| Error::Config(format!("missing {k}")))?
                .parse()
                .map_err(|_| Error::Config(format!("bad value for {k}")))
        };
        let int = |k: &str| -> Result<usize> {
            kv.get(k)
                .ok_or_else(|| Error::Config(format!("missing {k}")))?
                .parse()
                .map_err(|_| Error::Config(format!("bad value for {k}")))
        };
        let cfg = Self {
            feature_dim: int("feature_dim")?,
            d_model: int("d_model")?,
            hidden: int("hidden")?,
            answer_vocab: int("answer_vocab")?,
            question_vocab: int("question_vocab")?,
            weights: (num("weight_bce")?, num("weight_qtype")?, num("weight_rank")?),
            margin: num("margin")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub const QA_WEIGHTS_FILE: &str = "qa.v2ct";
pub const QA_CONFIG_FILE: &str = "qa.cfg";
pub const ANSWERS_FILE: &str = "answers.vocab";
pub const QUESTIONS_FILE: &str = "questions.vocab";

/// A trained answering head with its vocabularies.
#[derive(Debug, Clone)]
pub struct QaCheckpoint {
    pub model: QaModel,
    pub answers: AnswerVocabulary,
    pub questions: QuestionVocabulary,
}

pub fn save_qa_checkpoint(dir: impl AsRef<Path>, ck: &QaCheckpoint) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let create = |name: &str| -> Result<BufWriter<File>> {
        let p = dir.join(name);
        Ok(BufWriter::new(File::create(&p).map_err(|e| Error::file(&p, e))?))
    };
    let mut w = create(QA_WEIGHTS_FILE)?;
    ck.model.params.write_snapshot(&mut w)?;
    w.flush()?;
    let mut w = create(QA_CONFIG_FILE)?;
    w.write_all(ck.model.cfg.to_text().as_bytes())?;
    w.flush()?;
    let mut w = create(ANSWERS_FILE)?;
    ck.answers.write(&mut w)?;
    w.flush()?;
    let mut w = create(QUESTIONS_FILE)?;
    for word in ck.questions.words() {
        writeln!(w, "{word}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_qa_checkpoint(dir: impl AsRef<Path>) -> Result<QaCheckpoint> {
    let dir = dir.as_ref();
    let open = |name: &str| -> Result<BufReader<File>> {
        let p = dir.join(name);
        Ok(BufReader::new(File::open(&p).map_err(|e| Error::file(&p, e))?))
    };
    let cfg_path = dir.join(QA_CONFIG_FILE);
    let cfg = QaHeadConfig::from_text(&fs::read_to_string(&cfg_path).map_err(|e| Error::file(&cfg_path, e))?)?;
    let mut model = QaModel::new(cfg, 0)?;
    model.params.load_named(read_snapshot(&mut open(QA_WEIGHTS_FILE)?)?)?;
    let answers = AnswerVocabulary::read(open(ANSWERS_FILE)?)?;
    let words = open(QUESTIONS_FILE)?.lines().collect::<std::io::Result<Vec<String>>>()?;
    let questions = QuestionVocabulary::from_words(words);
    if answers.len() != model.cfg.answer_vocab || questions.len() != model.cfg.question_vocab {
        return Err(Error::Vocab("QA vocabulary sizes do not match the head config".into()));
    }
    Ok(QaCheckpoint { model, answers, questions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loss_of(scores: Vec<f64>, qt: Vec<f64>, ans: &[usize], neg: &[usize], w: (f64, f64, f64)) -> (f64, f64, f64, f64) {
        let mut g = Graph::new(0);
        let n = scores.len();
        let s = g.constant(Tensor::new(vec![1, n], scores).unwrap());
        let q = g.constant(Tensor::new(vec![1, N_QTYPES], qt).unwrap());
        let l = qa_loss(&mut g, s, q, ans, neg, 0, w, 0.2).unwrap();
        let v = |x| g.value(x).data()[0];
        (v(l.total), v(l.bce), v(l.qtype), v(l.ranking))
    }

    fn onehot(i: usize) -> Vec<f64> {
        let mut v = vec![0.0; N_QTYPES];
        v[i] = 1.0;
        v
    }

    #[test]
    fn perfect_prediction() {
        let (total, _, _, rank) = loss_of(vec![1.0, 0.0, 0.0, 0.0], onehot(0), &[0], &[1, 2], (1.0, 0.5, 0.5));
        assert!(total < 1e-6);
        assert_eq!(rank, 0.0);
    }

    #[test]
    fn uniform_bce_and_hinge() {
        let (_, bce, _, _) = loss_of(vec![0.5; 4], onehot(0), &[1], &[], (1.0, 0.5, 0.5));
        assert!((bce - 2f64.ln()).abs() < 1e-12);
        let (_, _, _, rank) = loss_of(vec![0.3, 0.4, 0.0], onehot(0), &[0], &[1], (1.0, 0.5, 0.5));
        assert!((rank - 0.3).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = QaHeadConfig {
            feature_dim: 3,
            d_model: 4,
            hidden: 5,
            answer_vocab: 2,
            question_vocab: 3,
            weights: (1.0, 0.5, 0.5),
            margin: 0.2,
        };
        let ck = QaCheckpoint {
            model: QaModel::new(cfg.clone(), 1).unwrap(),
            answers: AnswerVocabulary::build([]),
            questions: QuestionVocabulary::from_words(["why", "what"]),
        };
        let dir = tempfile::tempdir().unwrap();
        save_qa_checkpoint(dir.path(), &ck).unwrap();
        let back = load_qa_checkpoint(dir.path()).unwrap();
        assert_eq!(back.model.cfg, cfg);
        assert_eq!(back.questions, ck.questions);
        assert!(back.model.params.iter().zip(ck.model.params.iter()).all(|(a, b)| a.1.data() == b.1.data()));
    }

    #[test]
    fn vocab_files_round_trip() {
        let s = QaSample {
            video_id: "v".into(),
            qtype: 0,
            question: "Why?".into(),
            answers: vec!["to win".into()],
            negatives: vec!["to lose".into()],
        };
        let v = AnswerVocabulary::build([&s]);
        assert_eq!(v.id("yes"), Some(0));
        assert_eq!(v.id("to lose"), Some(3));
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        assert_eq!(AnswerVocabulary::read(buf.as_slice()).unwrap(), v);
    }
}
